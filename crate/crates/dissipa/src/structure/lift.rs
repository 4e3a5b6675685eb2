use std::sync::Arc;

use super::StructureError;
use crate::denselin::{self, RMat};
use crate::symbolkit::FrequencyPoint;

/// Direction-indexed matrix function `ω ↦ M(ω)`.
pub type DirFn = Arc<dyn Fn(&[f64]) -> RMat + Send + Sync>;

/// `(φ₁(r), φ₂(r))`: `φ₁ = 1` on `(0, 1]`, `φ₂ = 1` on `[1 + ε, ∞)`, joined
/// by the quintic smoothstep on the overlap.
pub fn smoothstep_partition(r: f64, eps: f64) -> (f64, f64) {
    if r <= 1.0 {
        return (1.0, 0.0);
    }
    if r >= 1.0 + eps {
        return (0.0, 1.0);
    }
    let t = (r - 1.0) / eps;
    let s = t * t * t * (t * (6.0 * t - 15.0) + 10.0);
    (1.0 - s, s)
}

/// Frequency-indexed compensator `c(|ξ|²φ₁ + φ₂)K(ω)` for systems
/// `i|ξ|A(ω) + L + |ξ|²B(ω)` and its margin function `f(ξ)`.
#[derive(Clone)]
pub struct SecondOrderLift {
    pub sigma_bar: f64,
    pub c: f64,
    pub eps: f64,
    k_dir: DirFn,
    a_dir: DirFn,
    b_dir: DirFn,
    relax: RMat,
}

#[derive(Debug, Clone)]
pub struct LiftReport {
    pub points: usize,
    /// Smallest `λ_min([K̃A]^s + L + |ξ|²B) − f(ξ)` over the grid.
    pub min_slack: f64,
    pub violations: Vec<(Vec<f64>, f64)>,
}

impl SecondOrderLift {
    fn profile(&self, r: f64) -> f64 {
        let (p1, p2) = smoothstep_partition(r, self.eps);
        r * r * p1 + p2
    }

    pub fn k_tilde(&self, p: &FrequencyPoint) -> RMat {
        (self.k_dir)(&p.direction) * (self.c * self.profile(p.radius))
    }

    /// `f(ξ)`: `σ̄c(|ξ|²φ₁ + φ₂)` for `|ξ| ≥ 1`, `σ̄c|ξ|²φ₁` below.
    pub fn margin(&self, p: &FrequencyPoint) -> f64 {
        let r = p.radius;
        let (p1, p2) = smoothstep_partition(r, self.eps);
        if r >= 1.0 {
            self.sigma_bar * self.c * (r * r * p1 + p2)
        } else {
            self.sigma_bar * self.c * r * r * p1
        }
    }

    /// `λ_min([K̃(ξ)A(ω)]^s + L + |ξ|²B(ω))`.
    pub fn lifted_min_eig(&self, p: &FrequencyPoint) -> f64 {
        let a = (self.a_dir)(&p.direction);
        let b = (self.b_dir)(&p.direction);
        let m =
            denselin::sym_part(&(self.k_tilde(p) * a)) + &self.relax + b * (p.radius * p.radius);
        denselin::min_eig_sym_real(&m).unwrap_or(f64::NAN)
    }

    pub fn verify(&self, grid: &[FrequencyPoint]) -> LiftReport {
        let mut min_slack = f64::INFINITY;
        let mut violations = Vec::new();
        for p in grid {
            let lmin = self.lifted_min_eig(p);
            let f = self.margin(p);
            let slack = lmin - f;
            min_slack = min_slack.min(slack);
            if !(slack >= -1e-10 * (1.0 + f.abs())) {
                violations.push((p.xi.clone(), slack));
            }
        }
        LiftReport {
            points: grid.len(),
            min_slack,
            violations,
        }
    }
}

/// Build the second-order lift after checking
/// `[K(ω)A(ω)]^s + L + B(ω) ≥ σ̄ I` on the supplied directions.
/// `c` defaults to `1/(1+ε)²`, the largest value keeping `c(|ξ|²φ₁ + φ₂) ≤ 1`.
pub fn second_order_lift(
    k_omega: DirFn,
    relax: RMat,
    a_omega: DirFn,
    b_omega: DirFn,
    c: Option<f64>,
    eps: f64,
    directions: &[Vec<f64>],
) -> Result<SecondOrderLift, StructureError> {
    if directions.is_empty() {
        return Err(StructureError::Precondition(
            "no directions supplied".into(),
        ));
    }
    if !(eps > 0.0) {
        return Err(StructureError::Precondition(format!(
            "overlap width must be positive, got {eps}"
        )));
    }
    let c_max = 1.0 / ((1.0 + eps) * (1.0 + eps));
    let c = c.unwrap_or(c_max);
    if !(c > 0.0 && c <= c_max * (1.0 + 1e-15)) {
        return Err(StructureError::Precondition(format!(
            "c = {c} outside (0, {c_max}]"
        )));
    }
    let mut sigma_bar = f64::INFINITY;
    for w in directions {
        let m = denselin::sym_part(&(k_omega(w) * a_omega(w))) + &relax + b_omega(w);
        let l = denselin::min_eig_sym_real(&m)?;
        sigma_bar = sigma_bar.min(l);
    }
    if !(sigma_bar > 0.0) {
        return Err(StructureError::Precondition(format!(
            "sphere positivity fails: min eigenvalue {sigma_bar:e}"
        )));
    }
    Ok(SecondOrderLift {
        sigma_bar,
        c,
        eps,
        k_dir: k_omega,
        a_dir: a_omega,
        b_dir: b_omega,
        relax,
    })
}
