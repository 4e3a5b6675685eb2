//! Symmetrization, genuine coupling, compensating matrices and
//! symmetrizability obstruction certificates.

mod compensator;
mod feasibility;
mod lift;

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::denselin::{self, EigenClusterSet, LinalgError, RMat, SpectralDecomposition};
use crate::symbolkit::{assemble_symbols, CoefficientSystem, FrequencyPoint};

pub use compensator::{
    drazin_compensator, lift_compensator, lift_with_weight, spectral_bound_from_theta,
    validate_compensator, CompensatorResult, CompensatorTarget,
};
pub use feasibility::{
    friedrichs_feasibility, pointwise_symmetrizer_feasibility, solve_symmetry_constraints,
    Feasibility, FeasibilityCertificate, SignConflict,
};
pub use lift::{second_order_lift, smoothstep_partition, DirFn, LiftReport, SecondOrderLift};

#[derive(Debug, Clone, Error)]
pub enum StructureError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("symmetrizer check `{check}` failed at xi = {xi:?} (value {value:e})")]
    Symmetrizer {
        xi: Vec<f64>,
        check: String,
        value: f64,
    },
    #[error("eigenvalue clusters too close: gap {gap:e} below floor {floor:e}")]
    Conditioning { gap: f64, floor: f64 },
    #[error("commutator identity violated: relative residual {residual:e}")]
    Identity { residual: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Numerical tolerances shared by the structural checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Single-linkage clustering threshold relative to `spectral diameter + 1`.
    pub rel_gap: f64,
    /// Kernel threshold per state dimension, relative to `‖M‖`.
    pub rank_rel: f64,
    /// Coupling threshold per state dimension, relative to `‖B_S‖`.
    pub coupling_rel: f64,
    /// Symmetry checks relative to the product of factor norms.
    pub symmetry: f64,
    /// Cluster separation floor relative to `1 + spectral diameter`.
    pub gap_floor: f64,
    /// Commutator identity bound relative to `‖B‖`.
    pub identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel_gap: denselin::DEFAULT_REL_GAP,
            rank_rel: 1e-10,
            coupling_rel: 1e-14,
            symmetry: 1e-10,
            gap_floor: 1e-8,
            identity: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn coupling_tol(&self, n: usize, b_norm: f64) -> f64 {
        self.coupling_rel * n as f64 * b_norm
    }
}

pub type MatrixFn = Arc<dyn Fn(&FrequencyPoint) -> RMat + Send + Sync>;

/// Frequency-indexed candidate symmetrizer `S(ξ)`.
#[derive(Clone)]
pub struct SymmetrizerFn {
    eval: MatrixFn,
    pub label: String,
    pub claims_friedrichs: bool,
}

impl fmt::Debug for SymmetrizerFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetrizerFn")
            .field("label", &self.label)
            .field("claims_friedrichs", &self.claims_friedrichs)
            .finish()
    }
}

impl SymmetrizerFn {
    pub fn new<F>(label: impl Into<String>, claims_friedrichs: bool, f: F) -> Self
    where
        F: Fn(&FrequencyPoint) -> RMat + Send + Sync + 'static,
    {
        SymmetrizerFn {
            eval: Arc::new(f),
            label: label.into(),
            claims_friedrichs,
        }
    }

    pub fn constant(label: impl Into<String>, s: RMat) -> Self {
        Self::new(label, true, move |_| s.clone())
    }

    pub fn identity(n: usize) -> Self {
        Self::constant("identity", RMat::identity(n, n))
    }

    pub fn eval(&self, p: &FrequencyPoint) -> RMat {
        (self.eval)(p)
    }
}

#[derive(Debug, Clone)]
pub struct SymmetrizerFailure {
    pub xi: Vec<f64>,
    pub check: String,
    pub value: f64,
    pub matrix: RMat,
}

#[derive(Debug, Clone)]
pub struct SymmetrizerReport {
    pub pass: bool,
    pub points: usize,
    pub max_asym_s: f64,
    pub max_asym_weight: f64,
    pub max_asym_sa: f64,
    pub max_asym_sb: f64,
    /// Smallest `λ_min(S)/‖S‖` seen.
    pub min_eig_s: f64,
    /// Smallest `λ_min(SB)/(‖S‖‖B‖)` seen.
    pub min_eig_sb: f64,
    pub failure: Option<SymmetrizerFailure>,
}

fn rel_asym(m: &RMat, scale: f64) -> f64 {
    let a = (m - m.transpose()).norm();
    if scale > 0.0 {
        a / scale
    } else {
        a
    }
}

/// Check `S` symmetric positive definite, `S A⁰` symmetric, `S A(ξ)`
/// symmetric and `S B(ξ)` symmetric positive semidefinite at every point.
pub fn verify_symmetrizer(
    sys: &CoefficientSystem,
    s: &SymmetrizerFn,
    grid: &[FrequencyPoint],
    tols: &Tolerances,
) -> SymmetrizerReport {
    let mut rep = SymmetrizerReport {
        pass: !grid.is_empty(),
        points: grid.len(),
        max_asym_s: 0.0,
        max_asym_weight: 0.0,
        max_asym_sa: 0.0,
        max_asym_sb: 0.0,
        min_eig_s: f64::INFINITY,
        min_eig_sb: f64::INFINITY,
        failure: None,
    };
    for p in grid {
        let sm = s.eval(p);
        let sp = assemble_symbols(sys, p);
        let sn = sm.norm();
        let fail = |rep: &mut SymmetrizerReport, check: &str, value: f64, m: &RMat| {
            if rep.failure.is_none() {
                rep.failure = Some(SymmetrizerFailure {
                    xi: p.xi.clone(),
                    check: check.into(),
                    value,
                    matrix: m.clone(),
                });
            }
            rep.pass = false;
        };
        if sm.shape() != (sys.n(), sys.n()) || sm.iter().any(|x| !x.is_finite()) {
            fail(&mut rep, "shape", f64::NAN, &sm);
            continue;
        }
        let a_s = rel_asym(&sm, sn);
        rep.max_asym_s = rep.max_asym_s.max(a_s);
        if a_s > tols.symmetry {
            fail(&mut rep, "S symmetric", a_s, &sm);
        }
        let lmin = denselin::min_eig_sym_real(&sm).unwrap_or(f64::NEG_INFINITY)
            / sn.max(f64::MIN_POSITIVE);
        rep.min_eig_s = rep.min_eig_s.min(lmin);
        if !(lmin > 0.0) {
            fail(&mut rep, "S positive definite", lmin, &sm);
        }
        let w = &sm * sys.mass();
        let aw = rel_asym(&w, sn * sys.mass().norm());
        rep.max_asym_weight = rep.max_asym_weight.max(aw);
        if aw > tols.symmetry {
            fail(&mut rep, "S A0 symmetric", aw, &w);
        }
        let sa = &sm * &sp.a_sym;
        let asa = rel_asym(&sa, sn * sp.a_sym.norm());
        rep.max_asym_sa = rep.max_asym_sa.max(asa);
        if asa > tols.symmetry {
            fail(&mut rep, "S A symmetric", asa, &sa);
        }
        let sb = &sm * &sp.b_sym;
        let bscale = sn * sp.b_sym.norm();
        let asb = rel_asym(&sb, bscale);
        rep.max_asym_sb = rep.max_asym_sb.max(asb);
        if asb > tols.symmetry {
            fail(&mut rep, "S B symmetric", asb, &sb);
        }
        if bscale > 0.0 {
            let lsb = denselin::min_eig_sym_real(&sb).unwrap_or(f64::NEG_INFINITY) / bscale;
            rep.min_eig_sb = rep.min_eig_sb.min(lsb);
            if lsb < -tols.symmetry {
                fail(&mut rep, "S B positive semidefinite", lsb, &sb);
            }
        }
    }
    rep
}

/// `(A_S, B_S)` in the variable `V = (S A⁰)^{1/2} U`.
#[derive(Debug, Clone)]
pub struct SymmetrizedPair {
    pub a_s: RMat,
    pub b_s: RMat,
    /// `W^{1/2}` with `W = S(ξ)A⁰`.
    pub weight_sqrt: RMat,
    pub weight_inv_sqrt: RMat,
    /// `S(ξ)` itself.
    pub s: RMat,
    pub at: FrequencyPoint,
}

impl SymmetrizedPair {
    /// Pair already in symmetric coordinates (`W = I`).
    pub fn from_matrices(a_s: RMat, b_s: RMat, at: FrequencyPoint) -> Self {
        let n = a_s.nrows();
        SymmetrizedPair {
            a_s,
            b_s,
            weight_sqrt: RMat::identity(n, n),
            weight_inv_sqrt: RMat::identity(n, n),
            s: RMat::identity(n, n),
            at,
        }
    }

    pub fn n(&self) -> usize {
        self.a_s.nrows()
    }

    /// `i|ξ|A_S + B_S`.
    pub fn generator(&self) -> denselin::CMat {
        let r = self.at.radius;
        self.a_s.map(|x| num_complex::Complex64::new(0.0, r * x)) + denselin::to_complex(&self.b_s)
    }
}

/// `A_S = W^{-1/2} S A W^{-1/2}`, `B_S = W^{-1/2} S B W^{-1/2}`, `W = S A⁰`.
pub fn symmetrize(
    sys: &CoefficientSystem,
    s: &SymmetrizerFn,
    p: &FrequencyPoint,
    tols: &Tolerances,
) -> Result<SymmetrizedPair, StructureError> {
    let rep = verify_symmetrizer(sys, s, std::slice::from_ref(p), tols);
    if let Some(f) = rep.failure {
        return Err(StructureError::Symmetrizer {
            xi: f.xi,
            check: f.check,
            value: f.value,
        });
    }
    let sm = s.eval(p);
    let sp = assemble_symbols(sys, p);
    let w = denselin::sym_part(&(&sm * sys.mass()));
    let wh = denselin::spd_sqrt(&w)?;
    let wih = denselin::spd_inv_sqrt(&w)?;
    let a_s = denselin::sym_part(&(&wih * &sm * &sp.a_sym * &wih));
    let b_s = denselin::sym_part(&(&wih * &sm * &sp.b_sym * &wih));
    Ok(SymmetrizedPair {
        a_s,
        b_s,
        weight_sqrt: wh,
        weight_inv_sqrt: wih,
        s: sm,
        at: p.clone(),
    })
}

/// Outcome of the genuine-coupling test.
#[derive(Debug, Clone)]
pub struct CouplingVerdict {
    pub coupled: bool,
    /// `λ_min(Π_{A_S}(B_S))`.
    pub theta_tilde: f64,
    pub tol: f64,
    /// Eigenvalue `μ` of `A_S` and unit `ψ` with `A_S ψ = μψ`, `B_S ψ ≈ 0`.
    pub witness: Option<(f64, DVector<f64>)>,
}

fn is_symmetric(a: &RMat) -> bool {
    (a - a.transpose()).norm() <= 1e-12 * a.norm().max(f64::MIN_POSITIVE)
}

/// Spectral decomposition suited to the input: orthonormal eigenbasis for
/// symmetric matrices, the general Schur-based solver otherwise.
pub(crate) fn decomposition_of(a: &RMat) -> Result<SpectralDecomposition, LinalgError> {
    let ca = denselin::to_complex(a);
    if is_symmetric(a) {
        let (vals, vecs) = denselin::eig_symmetric(a)?;
        let values: Vec<_> = vals
            .iter()
            .map(|&v| num_complex::Complex64::new(v, 0.0))
            .collect();
        let vectors = denselin::to_complex(&vecs);
        let residuals = denselin::pair_residuals(&ca, &values, &vectors);
        Ok(SpectralDecomposition {
            values,
            vectors,
            residuals,
        })
    } else {
        denselin::eig_general(&ca)
    }
}

pub(crate) fn clusters_of(a: &RMat, tols: &Tolerances) -> Result<EigenClusterSet, LinalgError> {
    let dec = decomposition_of(a)?;
    denselin::cluster_projections(&dec, tols.rel_gap)
}

/// `Π_A(B) = Σ_j P_j B P_j` over the eigenprojections of `A`.
pub fn pi_projection(a: &RMat, b: &RMat, tols: &Tolerances) -> Result<RMat, StructureError> {
    let cl = clusters_of(a, tols)?;
    let cb = denselin::to_complex(b);
    let mut pi = denselin::CMat::zeros(a.nrows(), a.ncols());
    for c in &cl.clusters {
        pi += &c.projection * &cb * &c.projection;
    }
    Ok(denselin::real_part(&pi))
}

/// Genuine coupling of a symmetrized pair: `θ̃ = λ_min(Π_{A_S}(B_S)) > tol`.
pub fn genuine_coupling(
    sp: &SymmetrizedPair,
    tols: &Tolerances,
) -> Result<CouplingVerdict, StructureError> {
    let n = sp.n();
    let (vals, vecs) = denselin::eig_symmetric(&sp.a_s)?;
    let dec = SpectralDecomposition {
        values: vals
            .iter()
            .map(|&v| num_complex::Complex64::new(v, 0.0))
            .collect(),
        vectors: denselin::to_complex(&vecs),
        residuals: vec![0.0; n],
    };
    let cl = denselin::cluster_projections(&dec, tols.rel_gap)?;
    let cb = denselin::to_complex(&sp.b_s);
    let mut pi = denselin::CMat::zeros(n, n);
    for c in &cl.clusters {
        pi += &c.projection * &cb * &c.projection;
    }
    let pi = denselin::sym_part(&denselin::real_part(&pi));
    let theta_tilde = denselin::min_eig_sym_real(&pi)?;
    let b_norm = denselin::norm2_real(&sp.b_s);
    let tol = tols.coupling_tol(n, b_norm);
    let coupled = theta_tilde > tol;
    let witness = if coupled {
        None
    } else {
        // eigenspace of A_S closest to the kernel of B_S
        let mut best: Option<(f64, f64, DVector<f64>)> = None;
        for c in &cl.clusters {
            let cols: Vec<_> = c
                .members
                .iter()
                .map(|&k| vecs.column(k).into_owned())
                .collect();
            let e = RMat::from_columns(&cols);
            let be = &sp.b_s * &e;
            let svd = nalgebra::SVD::new(pad_rows(&be), false, true);
            let vt = svd.v_t.expect("requested V^T");
            let (kmin, smin) = svd
                .singular_values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, &s)| (k, s))
                .expect("non-empty cluster");
            let coef = vt.row(kmin).transpose();
            let mut psi = &e * coef;
            let nrm = psi.norm();
            psi /= nrm;
            if best.as_ref().is_none_or(|b| smin < b.0) {
                best = Some((smin, c.representative.re, psi));
            }
        }
        best.map(|(_, mu, psi)| (mu, psi))
    };
    Ok(CouplingVerdict {
        coupled,
        theta_tilde,
        tol,
        witness,
    })
}

fn pad_rows(m: &RMat) -> RMat {
    let (r, c) = m.shape();
    if r >= c {
        return m.clone();
    }
    let mut p = RMat::zeros(c, c);
    p.view_mut((0, 0), (r, c)).copy_from(m);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolkit::MultiIndex;
    use approx::assert_abs_diff_eq;

    fn at1() -> FrequencyPoint {
        FrequencyPoint::new(vec![1.0]).unwrap()
    }

    #[test]
    fn trivial_coupled() {
        let sp = SymmetrizedPair::from_matrices(RMat::zeros(2, 2), RMat::identity(2, 2), at1());
        let v = genuine_coupling(&sp, &Tolerances::default()).unwrap();
        assert!(v.coupled);
        assert_abs_diff_eq!(v.theta_tilde, 1.0, epsilon = 1e-14);
        assert!(v.witness.is_none());
    }

    #[test]
    fn trivial_uncoupled_witness() {
        let b = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let sp = SymmetrizedPair::from_matrices(RMat::zeros(2, 2), b, at1());
        let v = genuine_coupling(&sp, &Tolerances::default()).unwrap();
        assert!(!v.coupled);
        let (mu, psi) = v.witness.unwrap();
        assert_abs_diff_eq!(mu, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(psi[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(psi[1].abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn pi_examples() {
        let t = Tolerances::default();
        let b = RMat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let pi = pi_projection(&RMat::identity(2, 2), &b, &t).unwrap();
        assert!((&pi - &b).norm() < 1e-14);
        let pi = pi_projection(&RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]), &b, &t).unwrap();
        assert!((pi - RMat::identity(2, 2)).norm() < 1e-14);
        let swap = RMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let pi = pi_projection(
            &swap,
            &RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            &t,
        )
        .unwrap();
        assert!((pi - RMat::identity(2, 2) * 0.5).norm() < 1e-14);
    }

    fn heat() -> CoefficientSystem {
        CoefficientSystem::from_terms(
            1,
            1,
            None,
            [(MultiIndex::new(vec![2]), RMat::from_element(1, 1, -1.0))],
        )
        .unwrap()
    }

    #[test]
    fn identity_symmetrizer_on_heat() {
        let grid: Vec<_> = [0.5, 1.0, 3.0]
            .iter()
            .map(|&r| FrequencyPoint::new(vec![r]).unwrap())
            .collect();
        let rep = verify_symmetrizer(
            &heat(),
            &SymmetrizerFn::identity(1),
            &grid,
            &Tolerances::default(),
        );
        assert!(rep.pass);
        let sp = symmetrize(
            &heat(),
            &SymmetrizerFn::identity(1),
            &grid[2],
            &Tolerances::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(sp.b_s[(0, 0)], 9.0, epsilon = 1e-13);
    }
}
