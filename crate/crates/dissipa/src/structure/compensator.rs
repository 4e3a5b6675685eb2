use num_complex::Complex64;

use super::{clusters_of, StructureError, SymmetrizedPair, SymmetrizerFn, Tolerances};
use crate::denselin::{self, CMat, RMat};
use crate::symbolkit::FrequencyPoint;

/// A compensating matrix at one frequency with its positivity margin.
#[derive(Debug, Clone)]
pub struct CompensatorResult {
    pub k_matrix: RMat,
    /// `λ_min([K A]^s + B)` in the coordinates the matrix was checked in.
    pub theta: f64,
    pub skew_residual: f64,
    /// `‖B − Π_A(B) − (AK − KA)‖/‖B‖`, for Drazin-built matrices.
    pub identity_residual: Option<f64>,
    pub at: Option<FrequencyPoint>,
}

/// Reduced-resolvent compensator `K = Σ_{i≠j} P_i B P_j / (μ_i − μ_j)`.
pub fn drazin_compensator(
    a: &RMat,
    b: &RMat,
    tols: &Tolerances,
) -> Result<CompensatorResult, StructureError> {
    let n = a.nrows();
    let cl = clusters_of(a, tols)?;
    let reps: Vec<Complex64> = cl.clusters.iter().map(|c| c.representative).collect();
    let mut diam: f64 = 0.0;
    let mut gap = f64::INFINITY;
    for i in 0..reps.len() {
        for j in 0..i {
            let d = (reps[i] - reps[j]).norm();
            diam = diam.max(d);
            gap = gap.min(d);
        }
    }
    let floor = tols.gap_floor * (1.0 + diam);
    if gap < floor {
        return Err(StructureError::Conditioning { gap, floor });
    }
    let cb = denselin::to_complex(b);
    let mut k = CMat::zeros(n, n);
    let mut pi = CMat::zeros(n, n);
    for (i, ci) in cl.clusters.iter().enumerate() {
        let pib = &ci.projection * &cb;
        pi += &pib * &ci.projection;
        for (j, cj) in cl.clusters.iter().enumerate() {
            if i != j {
                k += &pib * &cj.projection / (ci.representative - cj.representative);
            }
        }
    }
    let k = denselin::real_part(&k);
    let pi = denselin::real_part(&pi);
    let comm = a * &k - &k * a;
    let bn = b.norm();
    let identity_residual = (b - pi - comm).norm() / bn.max(f64::MIN_POSITIVE);
    if identity_residual > tols.identity {
        return Err(StructureError::Identity {
            residual: identity_residual,
        });
    }
    let skew_residual = (&k + k.transpose()).norm();
    let theta =
        denselin::min_eig_sym_real(&(denselin::sym_part(&(&k * a)) + denselin::sym_part(b)))?;
    Ok(CompensatorResult {
        k_matrix: k,
        theta,
        skew_residual,
        identity_residual: Some(identity_residual),
        at: None,
    })
}

/// What a candidate compensator is checked against.
pub enum CompensatorTarget<'a> {
    /// Symmetrized coordinates: `K` skew, margin of `[K A_S]^s + B_S`.
    Symmetrized(&'a SymmetrizedPair),
    /// Original coordinates: `K S A⁰` skew, margin of `[K S A]^s + S B`.
    Raw {
        s: &'a RMat,
        mass: &'a RMat,
        a: &'a RMat,
        b: &'a RMat,
    },
}

/// Skewness and positivity margin of an arbitrary candidate `K`.
pub fn validate_compensator(k: &RMat, target: CompensatorTarget<'_>) -> CompensatorResult {
    match target {
        CompensatorTarget::Symmetrized(sp) => {
            let skew_residual = (k + k.transpose()).norm();
            let m = denselin::sym_part(&(k * &sp.a_s)) + &sp.b_s;
            let theta = denselin::min_eig_sym_real(&m).unwrap_or(f64::NAN);
            CompensatorResult {
                k_matrix: k.clone(),
                theta,
                skew_residual,
                identity_residual: None,
                at: Some(sp.at.clone()),
            }
        }
        CompensatorTarget::Raw { s, mass, a, b } => {
            let kw = k * s * mass;
            let skew_residual = (&kw + kw.transpose()).norm();
            let m = denselin::sym_part(&(k * s * a)) + denselin::sym_part(&(s * b));
            let theta = denselin::min_eig_sym_real(&m).unwrap_or(f64::NAN);
            CompensatorResult {
                k_matrix: k.clone(),
                theta,
                skew_residual,
                identity_residual: None,
                at: None,
            }
        }
    }
}

/// `K = W^{1/2} K_S W^{-1/2}` with `W = S(ξ)A⁰`.
pub fn lift_compensator(
    k_s: &RMat,
    s: &SymmetrizerFn,
    mass: &RMat,
    p: &FrequencyPoint,
) -> Result<RMat, StructureError> {
    let w = denselin::sym_part(&(s.eval(p) * mass));
    lift_with_weight(k_s, &w)
}

pub fn lift_with_weight(k_s: &RMat, w: &RMat) -> Result<RMat, StructureError> {
    let wh = denselin::spd_sqrt(w)?;
    let wih = denselin::spd_inv_sqrt(w)?;
    Ok(wh * k_s * wih)
}

/// Upper bound on `Re λ` implied by a compensator with margin `θ > 0`:
/// `−3|ξ|²θ² / (4|ξ|‖K‖θ + 4|ξ|²θ + 4‖K‖²‖B‖)`.
pub fn spectral_bound_from_theta(theta: f64, k_norm: f64, b_norm: f64, xi_norm: f64) -> f64 {
    let num = 3.0 * xi_norm * xi_norm * theta * theta;
    let den = 4.0 * xi_norm * k_norm * theta
        + 4.0 * xi_norm * xi_norm * theta
        + 4.0 * k_norm * k_norm * b_norm;
    -num / den
}
