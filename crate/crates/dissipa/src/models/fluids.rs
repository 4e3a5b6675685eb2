//! Korteweg-type compressible fluids: isothermal NSK, heat-conducting NSFK
//! and its inviscid limit EFK.

use serde::{Deserialize, Serialize};

use super::poly::{system_from_sides, MatPoly, Poly};
use super::{
    diag, matrix_fn, non_negative, positive, skew_unit, to_toml, velocity, DecayType, Expected,
    ModelBundle, ModelError,
};
use crate::denselin::RMat;
use crate::structure::{Feasibility, MatrixFn, SymmetrizerFn};
use crate::symbolkit::CoefficientSystem;

/// Isothermal capillary fluid in the plane, state `(ρ, u₁, u₂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NskParams {
    pub rho: f64,
    /// Pressure slope `p'(ρ̄)`.
    pub p_rho: f64,
    /// Capillarity.
    pub k: f64,
    /// Shear viscosity.
    pub nu: f64,
    /// Bulk viscosity (`2ν + λ > 0`).
    pub lambda: f64,
    pub u: Vec<f64>,
}

impl Default for NskParams {
    fn default() -> Self {
        NskParams {
            rho: 1.0,
            p_rho: 1.0,
            k: 1.0,
            nu: 1.0,
            lambda: 1.0,
            u: Vec::new(),
        }
    }
}

/// Heat-conducting capillary fluid, state `(ρ, u, θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NsfkParams {
    pub rho: f64,
    pub theta: f64,
    pub p_rho: f64,
    pub p_theta: f64,
    /// Specific heat `e_θ`.
    pub e_theta: f64,
    pub k: f64,
    pub nu: f64,
    pub lambda: f64,
    /// Heat conductivity.
    pub alpha: f64,
    pub u: Vec<f64>,
}

impl Default for NsfkParams {
    fn default() -> Self {
        NsfkParams {
            rho: 1.0,
            theta: 1.0,
            p_rho: 1.0,
            p_theta: 1.0,
            e_theta: 1.0,
            k: 1.0,
            nu: 1.0,
            lambda: 1.0,
            alpha: 1.0,
            u: Vec::new(),
        }
    }
}

/// Inviscid heat-conducting capillary fluid, state `(ρ, u, θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EfkParams {
    pub rho: f64,
    pub theta: f64,
    pub p_rho: f64,
    pub p_theta: f64,
    pub e_theta: f64,
    pub k: f64,
    pub alpha: f64,
    pub u: Vec<f64>,
}

impl Default for EfkParams {
    fn default() -> Self {
        EfkParams {
            rho: 1.0,
            theta: 1.0,
            p_rho: 1.0,
            p_theta: 1.0,
            e_theta: 1.0,
            k: 1.0,
            alpha: 1.0,
            u: Vec::new(),
        }
    }
}

impl EfkParams {
    fn as_nsfk(&self) -> NsfkParams {
        NsfkParams {
            rho: self.rho,
            theta: self.theta,
            p_rho: self.p_rho,
            p_theta: self.p_theta,
            e_theta: self.e_theta,
            k: self.k,
            nu: 0.0,
            lambda: 0.0,
            alpha: self.alpha,
            u: self.u.clone(),
        }
    }
}

/// `β(ξ) = p_ρ + kρ|ξ|²`.
fn beta(p_rho: f64, k: f64, rho: f64, r: f64) -> f64 {
    p_rho + k * rho * r * r
}

/// Viscous stress block `ν|ξ|²I + (ν + λ) ξ⊗ξ` placed at `offset`.
fn add_viscous(rhs: &mut MatPoly, d: usize, offset: usize, nu: f64, lambda: f64) {
    let lap = Poly::norm_sq(d);
    for i in 0..d {
        rhs.add_entry(offset + i, offset + i, &lap.scale(nu));
        for j in 0..d {
            let q = Poly::var(d, i).mul(&Poly::var(d, j)).scale(nu + lambda);
            rhs.add_entry(offset + i, offset + j, &q);
        }
    }
}

fn dot_xi(u: &[f64]) -> Poly {
    let d = u.len();
    u.iter().enumerate().fold(Poly::zero(d), |acc, (j, &uj)| {
        acc.add(&Poly::var(d, j).scale(uj))
    })
}

pub fn build_nsk2d(p: &NskParams) -> Result<ModelBundle, ModelError> {
    positive("rho", p.rho)?;
    positive("p_rho", p.p_rho)?;
    non_negative("k", p.k)?;
    positive("nu", p.nu)?;
    positive("2 nu + lambda", 2.0 * p.nu + p.lambda)?;
    let d = 2;
    let u = velocity(&p.u, d)?;
    let n = 3;
    let mut lhs = MatPoly::new(n, d);
    let mut rhs = MatPoly::new(n, d);
    let ux = dot_xi(&u);
    lhs.add_entry(0, 0, &ux);
    for j in 0..d {
        let xj = Poly::var(d, j);
        lhs.add_entry(0, 1 + j, &xj.scale(p.rho));
        lhs.add_entry(1 + j, 0, &xj.scale(p.p_rho));
        lhs.add_entry(1 + j, 1 + j, &ux.scale(p.rho));
        rhs.add_entry(1 + j, 0, &Poly::norm_sq(d).mul(&xj).scale(p.k * p.rho));
    }
    add_viscous(&mut rhs, d, 1, p.nu, p.lambda);
    let system = system_from_sides(Some(diag(&[1.0, p.rho, p.rho])), &lhs, &rhs)?;

    let (rho, p_rho, k) = (p.rho, p.p_rho, p.k);
    let symmetrizer = SymmetrizerFn::new("diag(beta/rho, 1, 1)", false, move |pt| {
        diag(&[beta(p_rho, k, rho, pt.radius) / rho, 1.0, 1.0])
    });
    Ok(ModelBundle {
        name: "nsk2d".into(),
        system,
        symmetrizer: Some(symmetrizer),
        reference_compensator: Some(nsk_reference(p)),
        expected: Expected {
            coupled: Some(true),
            decay_type: Some(DecayType { p: 1, q: 0 }),
            friedrichs: Feasibility::Infeasible,
            symbol_symmetrizable: true,
        },
        params: to_toml(p),
    })
}

/// `|ξ|² K̄_S(ξ)` with `K̄_S = (2ν+λ)/(4β^{1/2}ρ) [[0, ωᵀ], [−ω, 0]]`, the
/// reduced-resolvent compensator of the NSK pair written out by hand.
pub fn nsk_reference(p: &NskParams) -> MatrixFn {
    let (rho, p_rho, k, visc) = (p.rho, p.p_rho, p.k, 2.0 * p.nu + p.lambda);
    matrix_fn(move |pt| {
        let c = visc / (4.0 * beta(p_rho, k, rho, pt.radius).sqrt() * rho);
        let mut m = RMat::zeros(3, 3);
        for j in 0..2 {
            m += skew_unit(3, 0, 1 + j) * pt.direction[j];
        }
        m * (c * pt.radius * pt.radius)
    })
}

fn check_fluid(p: &NsfkParams, viscous: bool) -> Result<(), ModelError> {
    positive("rho", p.rho)?;
    positive("theta", p.theta)?;
    positive("p_rho", p.p_rho)?;
    positive("p_theta", p.p_theta)?;
    positive("e_theta", p.e_theta)?;
    non_negative("k", p.k)?;
    positive("alpha", p.alpha)?;
    if viscous {
        positive("nu", p.nu)?;
        positive("2 nu + lambda", 2.0 * p.nu + p.lambda)?;
    }
    Ok(())
}

fn fluid_system(p: &NsfkParams, d: usize) -> Result<CoefficientSystem, ModelError> {
    let u = velocity(&p.u, d)?;
    let n = d + 2;
    let t = d + 1;
    let mut lhs = MatPoly::new(n, d);
    let mut rhs = MatPoly::new(n, d);
    let ux = dot_xi(&u);
    lhs.add_entry(0, 0, &ux);
    lhs.add_entry(t, t, &ux.scale(p.rho * p.e_theta));
    for j in 0..d {
        let xj = Poly::var(d, j);
        lhs.add_entry(0, 1 + j, &xj.scale(p.rho));
        lhs.add_entry(1 + j, 0, &xj.scale(p.p_rho));
        lhs.add_entry(1 + j, 1 + j, &ux.scale(p.rho));
        lhs.add_entry(1 + j, t, &xj.scale(p.p_theta));
        lhs.add_entry(t, 1 + j, &xj.scale(p.theta * p.p_theta));
        rhs.add_entry(1 + j, 0, &Poly::norm_sq(d).mul(&xj).scale(p.k * p.rho));
    }
    add_viscous(&mut rhs, d, 1, p.nu, p.lambda);
    rhs.add_entry(t, t, &Poly::norm_sq(d).scale(p.alpha));
    let mut mass = vec![1.0];
    mass.extend(std::iter::repeat_n(p.rho, d));
    mass.push(p.rho * p.e_theta);
    Ok(system_from_sides(Some(diag(&mass)), &lhs, &rhs)?)
}

fn fluid_symmetrizer(p: &NsfkParams, d: usize) -> SymmetrizerFn {
    let (rho, p_rho, k, theta) = (p.rho, p.p_rho, p.k, p.theta);
    SymmetrizerFn::new("diag(beta/rho, I, 1/theta)", false, move |pt| {
        let mut v = vec![beta(p_rho, k, rho, pt.radius) / rho];
        v.extend(std::iter::repeat_n(1.0, d));
        v.push(1.0 / theta);
        diag(&v)
    })
}

/// `γ = θ^{1/2} p_θ / (e_θ^{1/2} ρ)`.
fn gamma(p: &NsfkParams) -> f64 {
    p.theta.sqrt() * p.p_theta / (p.e_theta.sqrt() * p.rho)
}

/// Inspection scale `δ = ½ min(2ν + λ, α p_ρ/(e_θ γ²))`, half the largest
/// value keeping the velocity and temperature blocks positive.
pub fn nsfk_inspection_delta(p: &NsfkParams) -> f64 {
    let g = gamma(p);
    0.5 * (2.0 * p.nu + p.lambda).min(p.alpha * p.p_rho / (p.e_theta * g * g))
}

pub fn build_nsfk3d(p: &NsfkParams) -> Result<ModelBundle, ModelError> {
    check_fluid(p, true)?;
    let d = 3;
    let system = fluid_system(p, d)?;
    let (rho, p_rho, k) = (p.rho, p.p_rho, p.k);
    let g = gamma(p);
    let delta = nsfk_inspection_delta(p);
    let reference = matrix_fn(move |pt| {
        let bt = beta(p_rho, k, rho, pt.radius);
        let b = g / bt.sqrt();
        let mut m = RMat::zeros(5, 5);
        for j in 0..3 {
            m += (skew_unit(5, 0, 1 + j) + skew_unit(5, 1 + j, 4) * b) * pt.direction[j];
        }
        m * (delta / (rho * bt.sqrt()) * pt.radius * pt.radius)
    });
    Ok(ModelBundle {
        name: "nsfk3d".into(),
        system,
        symmetrizer: Some(fluid_symmetrizer(p, d)),
        reference_compensator: Some(reference),
        expected: Expected {
            coupled: Some(true),
            decay_type: Some(DecayType { p: 1, q: 0 }),
            friedrichs: Feasibility::Infeasible,
            symbol_symmetrizable: true,
        },
        params: to_toml(p),
    })
}

pub fn build_efk1d(p: &EfkParams) -> Result<ModelBundle, ModelError> {
    let q = p.as_nsfk();
    check_fluid(&q, false)?;
    let system = fluid_system(&q, 1)?;
    Ok(ModelBundle {
        name: "efk1d".into(),
        system,
        symmetrizer: Some(fluid_symmetrizer(&q, 1)),
        reference_compensator: Some(efk1d_reference(p)),
        expected: Expected {
            coupled: Some(true),
            decay_type: Some(DecayType { p: 1, q: 1 }),
            friedrichs: Feasibility::Infeasible,
            symbol_symmetrizable: true,
        },
        params: to_toml(p),
    })
}

/// `ξ² K̄_S(ξ)` for the one-dimensional EFK pair, `K̄_S` being the
/// hand-computed reduced-resolvent compensator (odd in `ω`).
pub fn efk1d_reference(p: &EfkParams) -> MatrixFn {
    let g = gamma(&p.as_nsfk());
    let (rho, p_rho, k, alpha, e_theta) = (p.rho, p.p_rho, p.k, p.alpha, p.e_theta);
    matrix_fn(move |pt| {
        let bt = beta(p_rho, k, rho, pt.radius);
        let s = bt + g * g;
        let c = 1.0 / (4.0 * s * s * rho * e_theta);
        let k12 = 3.0 * alpha * bt.sqrt() * g * g;
        let k23 = alpha * g * (4.0 * bt + g * g);
        let m = skew_unit(3, 0, 1) * k12 + skew_unit(3, 1, 2) * k23;
        m * (c * pt.direction[0] * pt.radius * pt.radius)
    })
}

pub fn build_efk_md(p: &EfkParams, d: usize) -> Result<ModelBundle, ModelError> {
    if !(2..=3).contains(&d) {
        return Err(ModelError::Parameter {
            name: "d".into(),
            value: d as f64,
            rule: "2 or 3".into(),
        });
    }
    let q = p.as_nsfk();
    check_fluid(&q, false)?;
    let system = fluid_system(&q, d)?;
    Ok(ModelBundle {
        name: "efk-md".into(),
        system,
        symmetrizer: Some(fluid_symmetrizer(&q, d)),
        reference_compensator: None,
        expected: Expected {
            coupled: Some(false),
            decay_type: None,
            friedrichs: Feasibility::Infeasible,
            symbol_symmetrizable: true,
        },
        params: to_toml(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{
        drazin_compensator, friedrichs_feasibility, genuine_coupling, symmetrize,
        validate_compensator, verify_symmetrizer, CompensatorTarget, Tolerances,
    };
    use crate::symbolkit::{assemble_symbols, FrequencyPoint, MultiIndex};
    use approx::assert_abs_diff_eq;

    fn pt(xi: Vec<f64>) -> FrequencyPoint {
        FrequencyPoint::new(xi).unwrap()
    }

    #[test]
    fn nsk_matches_displayed_coefficients() {
        let b = build_nsk2d(&NskParams::default()).unwrap();
        let c = b.system.coeffs();
        // L^{(2,0)} = −B¹¹, L^{(1,1)} = −(B¹² + B²¹), L^{(2,1)} = −C¹¹²
        assert_eq!(c[&MultiIndex::new(vec![2, 0])], -diag(&[0.0, 3.0, 1.0]));
        let mut b12 = RMat::zeros(3, 3);
        b12[(1, 2)] = 2.0;
        b12[(2, 1)] = 2.0;
        assert_eq!(c[&MultiIndex::new(vec![1, 1])], -b12);
        let mut c112 = RMat::zeros(3, 3);
        c112[(2, 0)] = 1.0;
        assert_eq!(c[&MultiIndex::new(vec![2, 1])], -c112);
        assert_eq!(b.system.m(), 3);
    }

    #[test]
    fn nsk_symbol_and_symmetrized_spectrum() {
        let b = build_nsk2d(&NskParams::default()).unwrap();
        let p = pt(vec![1.0, 0.0]);
        let sp = assemble_symbols(&b.system, &p);
        // A(ξ) row 2 carries β = p_ρ + kρ|ξ|² = 2
        assert_abs_diff_eq!(sp.a_sym[(1, 0)], 2.0, epsilon = 1e-15);
        let pair = symmetrize(
            &b.system,
            b.symmetrizer.as_ref().unwrap(),
            &p,
            &Tolerances::default(),
        )
        .unwrap();
        let (vals, _) = crate::denselin::eig_symmetric(&pair.a_s).unwrap();
        let want = [-(2f64.sqrt()), 0.0, 2f64.sqrt()];
        for (v, w) in vals.iter().zip(want) {
            assert_abs_diff_eq!(*v, w, epsilon = 1e-12);
        }
    }

    #[test]
    fn nsk_reference_matches_drazin() {
        let b = build_nsk2d(&NskParams {
            u: vec![0.3, -0.2],
            ..Default::default()
        })
        .unwrap();
        let tols = Tolerances::default();
        for (r, ang) in [(0.1, 0.3), (1.0, 1.1), (7.0, 2.9), (40.0, -0.4)] {
            let p = FrequencyPoint::from_polar(r, &[f64::cos(ang), f64::sin(ang)]).unwrap();
            let pair = symmetrize(&b.system, b.symmetrizer.as_ref().unwrap(), &p, &tols).unwrap();
            let k = drazin_compensator(&pair.a_s, &pair.b_s, &tols).unwrap();
            let kref = b.reference_at(&p).unwrap();
            assert!(
                (&k.k_matrix - &kref).norm() <= 1e-10 * (1.0 + kref.norm()),
                "r = {r}"
            );
        }
    }

    #[test]
    fn nsk_without_capillarity_still_coupled() {
        let b = build_nsk2d(&NskParams {
            k: 0.0,
            ..Default::default()
        })
        .unwrap();
        let tols = Tolerances::default();
        for r in [0.01, 1.0, 100.0] {
            let p = FrequencyPoint::from_polar(r, &[0.6, 0.8]).unwrap();
            let pair = symmetrize(&b.system, b.symmetrizer.as_ref().unwrap(), &p, &tols).unwrap();
            assert!(genuine_coupling(&pair, &tols).unwrap().coupled);
        }
    }

    #[test]
    fn nsk_friedrichs_forced_zeros() {
        let b = build_nsk2d(&NskParams::default()).unwrap();
        let cert = friedrichs_feasibility(&b.system, 7);
        assert_eq!(cert.verdict, Feasibility::Infeasible);
        for (i, j) in [(1, 1), (1, 2), (2, 2)] {
            assert!(cert.forces_zero(i, j), "{:?}", cert.forced_zero);
        }
    }

    #[test]
    fn nsfk_gamma_and_kernel() {
        let p = NsfkParams::default();
        assert_abs_diff_eq!(gamma(&p), 1.0, epsilon = 1e-15);
        let b = build_nsfk3d(&p).unwrap();
        let tols = Tolerances::default();
        let pnt = FrequencyPoint::from_polar(2.0, &[0.0, 0.6, 0.8]).unwrap();
        let pair = symmetrize(&b.system, b.symmetrizer.as_ref().unwrap(), &pnt, &tols).unwrap();
        let ker = crate::denselin::kernel_basis_real(&pair.b_s, 1e-12);
        assert_eq!(ker.ncols(), 1);
        assert_abs_diff_eq!(ker[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        // off-diagonal entries of A_S: β^{1/2}ω and γω
        let bt: f64 = 1.0 + 4.0;
        assert_abs_diff_eq!(pair.a_s[(0, 2)], bt.sqrt() * 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(pair.a_s[(3, 4)], 0.8, epsilon = 1e-12);
    }

    #[test]
    fn nsfk_inspection_compensator_positive() {
        let b = build_nsfk3d(&NsfkParams::default()).unwrap();
        let tols = Tolerances::default();
        for r in [1e-2, 0.3, 1.0, 10.0, 1e3] {
            for dir in [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [0.48, 0.6, 0.64]] {
                let p = FrequencyPoint::from_polar(r, &dir).unwrap();
                let pair =
                    symmetrize(&b.system, b.symmetrizer.as_ref().unwrap(), &p, &tols).unwrap();
                let res = validate_compensator(
                    &b.reference_at(&p).unwrap(),
                    CompensatorTarget::Symmetrized(&pair),
                );
                assert!(res.skew_residual < 1e-14);
                // normalized by |ξ|², the margin stays bounded below
                assert!(res.theta / (r * r) > 1e-3, "r = {r}: {}", res.theta);
            }
        }
    }

    #[test]
    fn efk1d_spectrum_and_reference() {
        let p = EfkParams {
            u: vec![0.25],
            ..Default::default()
        };
        let b = build_efk1d(&p).unwrap();
        let tols = Tolerances::default();
        for r in [0.2, 3.0] {
            for s in [1.0, -1.0] {
                let pnt = pt(vec![s * r]);
                let pair =
                    symmetrize(&b.system, b.symmetrizer.as_ref().unwrap(), &pnt, &tols).unwrap();
                let (vals, _) = crate::denselin::eig_symmetric(&pair.a_s).unwrap();
                let bt = 1.0 + r * r;
                let root = (bt + 1.0_f64).sqrt();
                let mut want = [s * 0.25 - root, s * 0.25, s * 0.25 + root];
                want.sort_by(f64::total_cmp);
                for (v, w) in vals.iter().zip(want) {
                    assert_abs_diff_eq!(*v, w, epsilon = 1e-12);
                }
                let k = drazin_compensator(&pair.a_s, &pair.b_s, &tols).unwrap();
                let kref = b.reference_at(&pnt).unwrap();
                assert!((&k.k_matrix - &kref).norm() < 1e-10 * (1.0 + kref.norm()));
                // entry (1,2) of K̄_S: 3αβ^{1/2}γ²/(4(β+γ²)²ρe_θ)
                let want12 = 3.0 * bt.sqrt() / (4.0 * (bt + 1.0) * (bt + 1.0));
                assert_abs_diff_eq!(kref[(0, 1)] / (s * r * r), want12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn efk_md_uncoupled_with_transverse_witness() {
        for d in [2, 3] {
            let b = build_efk_md(&EfkParams::default(), d).unwrap();
            let tols = Tolerances::default();
            let dir: Vec<f64> = if d == 2 {
                vec![0.6, 0.8]
            } else {
                vec![0.48, 0.6, 0.64]
            };
            let p = FrequencyPoint::from_polar(1.5, &dir).unwrap();
            let pair = symmetrize(&b.system, b.symmetrizer.as_ref().unwrap(), &p, &tols).unwrap();
            let v = genuine_coupling(&pair, &tols).unwrap();
            assert!(!v.coupled);
            let (mu, psi) = v.witness.unwrap();
            assert_abs_diff_eq!(mu, 0.0, epsilon = 1e-12);
            assert!(psi[0].abs() < 1e-10 && psi[d + 1].abs() < 1e-10);
            let along: f64 = (0..d).map(|j| psi[1 + j] * dir[j]).sum();
            assert!(along.abs() < 1e-10);
            assert!((&pair.b_s * &psi).norm() <= 1e-10);
        }
        assert!(build_efk_md(&EfkParams::default(), 1).is_err());
    }

    #[test]
    fn symmetrizers_pass_on_sample_points() {
        let tols = Tolerances::default();
        let cases = [
            build_nsk2d(&NskParams::default()).unwrap(),
            build_nsfk3d(&NsfkParams {
                u: vec![0.1, 0.2, -0.3],
                ..Default::default()
            })
            .unwrap(),
            build_efk1d(&EfkParams::default()).unwrap(),
            build_efk_md(&EfkParams::default(), 3).unwrap(),
        ];
        for b in &cases {
            let d = b.system.d();
            let grid: Vec<_> = [0.01, 1.0, 100.0]
                .iter()
                .map(|&r| {
                    let mut w = vec![0.0; d];
                    w[d - 1] = 1.0;
                    FrequencyPoint::from_polar(r, &w).unwrap()
                })
                .collect();
            let rep = verify_symmetrizer(&b.system, b.symmetrizer.as_ref().unwrap(), &grid, &tols);
            assert!(rep.pass, "{}: {:?}", b.name, rep.failure);
            assert_eq!(
                friedrichs_feasibility(&b.system, 3).verdict,
                b.expected.friedrichs,
                "{}",
                b.name
            );
        }
    }

    #[test]
    fn positivity_rules() {
        assert!(build_nsk2d(&NskParams {
            nu: 1.0,
            lambda: -2.5,
            ..Default::default()
        })
        .is_err());
        assert!(build_nsfk3d(&NsfkParams {
            e_theta: 0.0,
            ..Default::default()
        })
        .is_err());
        assert!(build_efk1d(&EfkParams {
            u: vec![1.0, 2.0],
            ..Default::default()
        })
        .is_err());
    }
}
