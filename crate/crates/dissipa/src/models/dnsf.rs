//! Dispersive Navier-Stokes-Fourier system: a viscous, heat-conducting gas
//! with third-order corrections coupling velocity and temperature.

use serde::{Deserialize, Serialize};

use super::poly::{system_from_sides, MatPoly, Poly};
use super::{
    diag, matrix_fn, positive, skew_unit, to_toml, velocity, DecayType, Expected, ModelBundle,
    ModelError,
};
use crate::denselin::{self, RMat};
use crate::structure::{Feasibility, SymmetrizerFn};

/// State `(ρ, u, θ)`. The transport coefficients must satisfy
/// `τ₄ = (θ/2) τ₁`; the defaults take `τ₄ = 1`, `τ₁ = 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DnsfParams {
    pub rho: f64,
    pub theta: f64,
    /// Viscosity.
    pub mu: f64,
    /// Heat conductivity.
    pub alpha: f64,
    pub tau1: f64,
    pub tau4: f64,
    pub u: Vec<f64>,
}

impl Default for DnsfParams {
    fn default() -> Self {
        DnsfParams {
            rho: 1.0,
            theta: 1.0,
            mu: 1.0,
            alpha: 1.0,
            tau1: 2.0,
            tau4: 1.0,
            u: Vec::new(),
        }
    }
}

impl DnsfParams {
    /// `β₁(ξ) = 1 + (2/(3ρ)) τ₁ |ξ|²`.
    pub fn beta1(&self, r: f64) -> f64 {
        1.0 + 2.0 / (3.0 * self.rho) * self.tau1 * r * r
    }

    /// `β₂(ξ) = (2/3) θ + (8/(9ρ)) τ₄ |ξ|²`.
    pub fn beta2(&self, r: f64) -> f64 {
        2.0 / 3.0 * self.theta + 8.0 / (9.0 * self.rho) * self.tau4 * r * r
    }

    /// Velocity-temperature entry of the symmetrized transport symbol,
    /// `(3/(2θ))^{1/2} β₂(ξ)`.
    pub fn beta_sym(&self, r: f64) -> f64 {
        (1.5 / self.theta).sqrt() * self.beta2(r)
    }

    fn check(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("rho", self.rho),
            ("theta", self.theta),
            ("mu", self.mu),
            ("alpha", self.alpha),
            ("tau1", self.tau1),
            ("tau4", self.tau4),
        ] {
            positive(name, v)?;
        }
        let want = 0.5 * self.theta * self.tau1;
        if (self.tau4 - want).abs() > 1e-12 * want.abs().max(self.tau4.abs()) {
            return Err(ModelError::Parameter {
                name: "tau4".into(),
                value: self.tau4,
                rule: format!("tau4 = (theta/2) tau1 = {want}"),
            });
        }
        Ok(())
    }
}

fn symmetrized_blocks(p: &DnsfParams, d: usize, r: f64) -> (RMat, RMat) {
    // direction e₁ and zero background velocity: the margin is invariant
    // under rotations and the velocity terms drop out of the symmetric part
    let n = d + 2;
    let t = d + 1;
    let mut a = RMat::zeros(n, n);
    a[(0, 1)] = p.theta.sqrt();
    a[(1, 0)] = p.theta.sqrt();
    a[(1, t)] = p.beta_sym(r);
    a[(t, 1)] = p.beta_sym(r);
    let mut b = RMat::zeros(n, n);
    for j in 0..d {
        b[(1 + j, 1 + j)] = p.mu / p.rho;
    }
    b[(1, 1)] += p.mu / (3.0 * p.rho);
    b[(t, t)] = 2.0 / 3.0 * p.alpha / p.rho;
    (a, b)
}

fn inspection_unscaled(p: &DnsfParams, d: usize, r: f64, dir: &[f64]) -> RMat {
    let n = d + 2;
    let t = d + 1;
    let bt = p.beta_sym(r);
    let (a, b) = (bt.powi(-2), bt.powf(-1.5));
    let mut m = RMat::zeros(n, n);
    for (j, w) in dir.iter().enumerate().take(d) {
        m += (skew_unit(n, 0, 1 + j) * a + skew_unit(n, 1 + j, t) * b) * *w;
    }
    m
}

/// Largest `δ = δ₀ 2^{-k}` for which the inspection compensator gives a
/// positive margin on probe radii `10^{-4} … 10^{4}`, halved once more.
pub fn dnsf_inspection_delta(p: &DnsfParams, d: usize) -> f64 {
    let mut delta = (p.mu / p.rho).min(2.0 / 3.0 * p.alpha / p.rho) * p.beta_sym(0.0).sqrt();
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let radii: Vec<f64> = (0..=80)
        .map(|k| 10f64.powf(-4.0 + 0.1 * k as f64))
        .collect();
    for _ in 0..60 {
        let ok = radii.iter().all(|&r| {
            let (a, b) = symmetrized_blocks(p, d, r);
            let k = inspection_unscaled(p, d, r, &e1) * delta;
            let m = denselin::sym_part(&(k * a)) + b;
            denselin::min_eig_sym_real(&m).is_ok_and(|l| l > 0.0)
        });
        if ok {
            break;
        }
        delta *= 0.5;
    }
    0.5 * delta
}

pub fn build_dnsf(p: &DnsfParams, d: usize) -> Result<ModelBundle, ModelError> {
    if d != 1 && d != 3 {
        return Err(ModelError::Parameter {
            name: "d".into(),
            value: d as f64,
            rule: "1 or 3".into(),
        });
    }
    p.check()?;
    let u = velocity(&p.u, d)?;
    let n = d + 2;
    let t = d + 1;
    let mut lhs = MatPoly::new(n, d);
    let mut rhs = MatPoly::new(n, d);
    let ux = u.iter().enumerate().fold(Poly::zero(d), |acc, (j, &v)| {
        acc.add(&Poly::var(d, j).scale(v))
    });
    let lap = Poly::norm_sq(d);
    lhs.add_entry(0, 0, &ux);
    lhs.add_entry(t, t, &ux);
    rhs.add_entry(t, t, &lap.scale(2.0 / 3.0 * p.alpha / p.rho));
    for j in 0..d {
        let xj = Poly::var(d, j);
        lhs.add_entry(0, 1 + j, &xj.scale(p.rho));
        lhs.add_entry(1 + j, 0, &xj.scale(p.theta / p.rho));
        lhs.add_entry(1 + j, 1 + j, &ux);
        lhs.add_entry(1 + j, t, &xj);
        lhs.add_entry(t, 1 + j, &xj.scale(2.0 / 3.0 * p.theta));
        rhs.add_entry(1 + j, 1 + j, &lap.scale(p.mu / p.rho));
        for i in 0..d {
            rhs.add_entry(
                1 + i,
                1 + j,
                &Poly::var(d, i).mul(&xj).scale(p.mu / (3.0 * p.rho)),
            );
        }
        let cubic = lap.mul(&xj);
        rhs.add_entry(1 + j, t, &cubic.scale(2.0 / (3.0 * p.rho) * p.tau1));
        rhs.add_entry(t, 1 + j, &cubic.scale(8.0 / (9.0 * p.rho) * p.tau4));
    }
    let system = system_from_sides(None, &lhs, &rhs)?;

    let mut s = vec![2.0 / 3.0 * p.theta * p.theta / (p.rho * p.rho)];
    s.extend(std::iter::repeat_n(2.0 / 3.0 * p.theta, d));
    s.push(1.0);
    let symmetrizer =
        SymmetrizerFn::constant("diag(2 theta^2/(3 rho^2), 2 theta/3 I, 1)", diag(&s));

    let delta = dnsf_inspection_delta(p, d);
    let q = p.clone();
    let reference = matrix_fn(move |pt| {
        inspection_unscaled(&q, d, pt.radius, &pt.direction) * (delta * pt.radius * pt.radius)
    });

    Ok(ModelBundle {
        name: format!("dnsf{d}d"),
        system,
        symmetrizer: Some(symmetrizer),
        reference_compensator: Some(reference),
        expected: Expected {
            coupled: Some(true),
            decay_type: Some(DecayType { p: 1, q: 2 }),
            friedrichs: Feasibility::Feasible,
            symbol_symmetrizable: true,
        },
        params: to_toml(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{
        friedrichs_feasibility, genuine_coupling, symmetrize, validate_compensator,
        CompensatorTarget, Tolerances,
    };
    use crate::symbolkit::{assemble_symbols, FrequencyPoint};
    use approx::assert_abs_diff_eq;

    #[test]
    fn beta_definitions() {
        let p = DnsfParams::default();
        assert_abs_diff_eq!(p.beta1(2.0), 1.0 + 2.0 / 3.0 * 2.0 * 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.beta2(2.0), 2.0 / 3.0 + 8.0 / 9.0 * 4.0, epsilon = 1e-14);
        // the relation between τ₁ and τ₄ makes (2θ/3) β₁ = β₂
        for r in [0.0, 0.5, 3.0] {
            assert_abs_diff_eq!(
                2.0 / 3.0 * p.theta * p.beta1(r),
                p.beta2(r),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn relation_enforced() {
        let bad = DnsfParams {
            tau1: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            build_dnsf(&bad, 3),
            Err(ModelError::Parameter { .. })
        ));
        assert!(build_dnsf(&DnsfParams::default(), 2).is_err());
    }

    #[test]
    fn symbols_match_display() {
        let p = DnsfParams {
            rho: 1.3,
            theta: 0.7,
            tau1: 2.0,
            tau4: 0.7,
            ..Default::default()
        };
        let b = build_dnsf(&p, 3).unwrap();
        let pt = FrequencyPoint::from_polar(2.0, &[0.0, 0.6, 0.8]).unwrap();
        let sp = assemble_symbols(&b.system, &pt);
        assert_abs_diff_eq!(sp.a_sym[(2, 4)], p.beta1(2.0) * 0.6, epsilon = 1e-13);
        assert_abs_diff_eq!(sp.a_sym[(4, 3)], p.beta2(2.0) * 0.8, epsilon = 1e-13);
        assert_abs_diff_eq!(sp.b_sym[(4, 4)], 4.0 * 2.0 / 3.0 / 1.3, epsilon = 1e-13);
        assert_abs_diff_eq!(sp.b_sym[(2, 3)], 4.0 * 0.48 / (3.0 * 1.3), epsilon = 1e-13);
        let pair = symmetrize(
            &b.system,
            b.symmetrizer.as_ref().unwrap(),
            &pt,
            &Tolerances::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(pair.a_s[(0, 3)], 0.7f64.sqrt() * 0.8, epsilon = 1e-13);
        assert_abs_diff_eq!(pair.a_s[(4, 2)], p.beta_sym(2.0) * 0.6, epsilon = 1e-12);
    }

    #[test]
    fn friedrichs_witness_is_displayed_matrix() {
        for d in [1, 3] {
            let p = DnsfParams::default();
            let b = build_dnsf(&p, d).unwrap();
            let cert = friedrichs_feasibility(&b.system, 11);
            assert_eq!(cert.verdict, Feasibility::Feasible);
            assert_eq!(cert.solution_dim, 1);
            let w = cert.witness.unwrap();
            let w = &w / w[(d + 1, d + 1)];
            let mut want = vec![2.0 / 3.0];
            want.extend(std::iter::repeat_n(2.0 / 3.0, d));
            want.push(1.0);
            assert!((w - diag(&want)).norm() < 1e-10);
        }
    }

    #[test]
    fn inspection_compensator_positive_with_two_power_loss() {
        let p = DnsfParams::default();
        let b = build_dnsf(&p, 3).unwrap();
        let tols = Tolerances::default();
        let mut normalized = Vec::new();
        for r in [1e-3, 0.1, 1.0, 10.0, 1e2, 1e3] {
            let pt = FrequencyPoint::from_polar(r, &[0.48, 0.6, 0.64]).unwrap();
            let pair = symmetrize(&b.system, b.symmetrizer.as_ref().unwrap(), &pt, &tols).unwrap();
            assert!(genuine_coupling(&pair, &tols).unwrap().coupled);
            let res = validate_compensator(
                &b.reference_at(&pt).unwrap(),
                CompensatorTarget::Symmetrized(&pair),
            );
            assert!(res.theta > 0.0, "r = {r}");
            // margin of the unscaled triplet times (1+|ξ|²)²
            normalized.push(res.theta / (r * r) * (1.0 + r * r).powi(2));
        }
        let lo = normalized.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = normalized.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo < 1e3, "{normalized:?}");
    }
}
