//! Quantum hydrodynamics in three dimensions: the isentropic model with
//! momentum relaxation, and the full model with an energy equation.

use serde::{Deserialize, Serialize};

use super::poly::{system_from_sides, MatPoly, Poly};
use super::{
    diag, matrix_fn, non_negative, positive, skew_unit, to_toml, DecayType, Expected, ModelBundle,
    ModelError,
};
use crate::denselin::RMat;
use crate::structure::{Feasibility, MatrixFn, SymmetrizerFn};

/// Isentropic model around `(n̄, 0)`, state `(n, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QhdIsoParams {
    /// Background density `n̄`.
    pub n: f64,
    /// Pressure slope `p'(n̄)`.
    pub p_prime: f64,
    /// Interaction constant `μ`.
    pub mu: f64,
    /// Scaled Planck constant `ε`.
    pub eps: f64,
    /// Momentum relaxation time.
    pub tau: f64,
}

impl Default for QhdIsoParams {
    fn default() -> Self {
        QhdIsoParams {
            n: 1.0,
            p_prime: 1.0,
            mu: 1.0,
            eps: 1.0,
            tau: 1.0,
        }
    }
}

impl QhdIsoParams {
    /// `Θ(ξ) = p'(n̄) + μ + (ε²/12)|ξ|²`.
    pub fn big_theta(&self, r: f64) -> f64 {
        self.p_prime + self.mu + self.eps * self.eps / 12.0 * r * r
    }
}

/// Full model around `(n̄, 0, 3θ₀/2)`, state `(n, v, g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QhdFullParams {
    pub n: f64,
    /// Lattice temperature; fixes the background `ḡ = 3θ₀/2`.
    pub theta0: f64,
    /// Heat conductivity.
    pub kappa: f64,
    pub hbar: f64,
    pub tau_p: f64,
    pub tau_w: f64,
}

impl Default for QhdFullParams {
    fn default() -> Self {
        QhdFullParams {
            n: 1.0,
            theta0: 1.0,
            kappa: 1.0,
            hbar: 1.0,
            tau_p: 1.0,
            tau_w: 1.0,
        }
    }
}

impl QhdFullParams {
    pub fn g_bar(&self) -> f64 {
        1.5 * self.theta0
    }
}

const D: usize = 3;

pub fn build_qhd_iso(p: &QhdIsoParams) -> Result<ModelBundle, ModelError> {
    positive("n", p.n)?;
    positive("tau", p.tau)?;
    non_negative("eps", p.eps)?;
    positive("p_prime + mu", p.p_prime + p.mu)?;
    let mut lhs = MatPoly::new(4, D);
    let mut rhs = MatPoly::new(4, D);
    for j in 0..D {
        let xj = Poly::var(D, j);
        lhs.add_entry(0, 1 + j, &xj.scale(p.n));
        lhs.add_entry(1 + j, 0, &xj.scale((p.p_prime + p.mu) / p.n));
        lhs.add_entry(1 + j, 1 + j, &Poly::constant(D, 1.0 / p.tau));
        rhs.add_entry(
            1 + j,
            0,
            &Poly::norm_sq(D)
                .mul(&xj)
                .scale(p.eps * p.eps / (12.0 * p.n)),
        );
    }
    let system = system_from_sides(None, &lhs, &rhs)?;
    let q = p.clone();
    let symmetrizer = SymmetrizerFn::new("diag(Theta/n^2, 1, 1, 1)", false, move |pt| {
        diag(&[q.big_theta(pt.radius) / (q.n * q.n), 1.0, 1.0, 1.0])
    });
    Ok(ModelBundle {
        name: "qhd-iso".into(),
        system,
        symmetrizer: Some(symmetrizer),
        reference_compensator: Some(qhd_iso_reference(p)),
        expected: Expected {
            coupled: Some(true),
            decay_type: Some(DecayType { p: 1, q: 1 }),
            friedrichs: if p.eps > 0.0 {
                Feasibility::Infeasible
            } else {
                Feasibility::Feasible
            },
            symbol_symmetrizable: true,
        },
        params: to_toml(p),
    })
}

/// `K_S = 1/(6Θ^{1/2}τ) [[0, ωᵀ], [−ω, 0]]`; its margin is exactly `1/(6τ)`.
pub fn qhd_iso_reference(p: &QhdIsoParams) -> MatrixFn {
    let q = p.clone();
    matrix_fn(move |pt| {
        let mut m = RMat::zeros(4, 4);
        for j in 0..D {
            m += skew_unit(4, 0, 1 + j) * pt.direction[j];
        }
        m / (6.0 * q.big_theta(pt.radius).sqrt() * q.tau)
    })
}

pub fn build_qhd_full(p: &QhdFullParams) -> Result<ModelBundle, ModelError> {
    for (name, v) in [
        ("n", p.n),
        ("theta0", p.theta0),
        ("kappa", p.kappa),
        ("tau_p", p.tau_p),
        ("tau_w", p.tau_w),
    ] {
        positive(name, v)?;
    }
    non_negative("hbar", p.hbar)?;
    let g = p.g_bar();
    let n = p.n;
    let mut lhs = MatPoly::new(5, D);
    let mut rhs = MatPoly::new(5, D);
    let lap = Poly::norm_sq(D);
    for j in 0..D {
        let xj = Poly::var(D, j);
        lhs.add_entry(0, 1 + j, &xj.scale(n));
        lhs.add_entry(1 + j, 0, &xj.scale(2.0 / 3.0 * g));
        lhs.add_entry(1 + j, 4, &xj.scale(2.0 / 3.0 * n));
        lhs.add_entry(4, 1 + j, &xj.scale(2.0 / 3.0 * n * g));
        lhs.add_entry(1 + j, 1 + j, &Poly::constant(D, n / p.tau_p));
        rhs.add_entry(1 + j, 0, &lap.mul(&xj).scale(p.hbar * p.hbar / 18.0));
    }
    lhs.add_entry(4, 4, &Poly::constant(D, n / p.tau_w));
    rhs.add_entry(4, 4, &lap.scale(2.0 / 3.0 * p.kappa));
    rhs.add_entry(
        4,
        0,
        &lap.mul(&lap).scale(p.kappa * p.hbar * p.hbar / (36.0 * n)),
    );
    let system = system_from_sides(Some(diag(&[1.0, n, n, n, n])), &lhs, &rhs)?;
    Ok(ModelBundle {
        name: "qhd-full".into(),
        system,
        symmetrizer: None,
        reference_compensator: None,
        expected: Expected {
            coupled: None,
            decay_type: None,
            friedrichs: Feasibility::Infeasible,
            symbol_symmetrizable: false,
        },
        params: to_toml(p),
    })
}

/// Diagonal `S₁(ξ)` symmetrizing the transport pair `(A⁰, A(ξ))` of the
/// full model; it does not symmetrize `B(ξ)`.
pub fn qhd_full_transport_symmetrizer(p: &QhdFullParams) -> SymmetrizerFn {
    let q = p.clone();
    SymmetrizerFn::new("transport-only diag(H/n, I, 1/g)", false, move |pt| {
        let h = 2.0 / 3.0 * q.g_bar() + pt.radius * pt.radius * q.hbar * q.hbar / 18.0;
        diag(&[h / q.n, 1.0, 1.0, 1.0, 1.0 / q.g_bar()])
    })
}

/// `P(|ξ|) = (3H/(2n̄))G + H R ḡ/n̄ − (2/3)ḡ G` with `H = (2/3)ḡ + |ξ|²ħ²/18`,
/// `G = −|ξ|⁴κħ²/(36n̄)`, `R = n̄/τ_w + (2/3)κ|ξ|²`. A symmetrizer of
/// `(A(ξ), B(ξ))` needs `R s₁₁ = P s₅₅`, so `P ≤ 0` rules one out.
pub fn qhd_full_obstruction_poly(p: &QhdFullParams, r: f64) -> f64 {
    let g = p.g_bar();
    let r2 = r * r;
    let h = 2.0 / 3.0 * g + r2 * p.hbar * p.hbar / 18.0;
    let big_g = -r2 * r2 * p.kappa * p.hbar * p.hbar / (36.0 * p.n);
    let big_r = p.n / p.tau_w + 2.0 / 3.0 * p.kappa * r2;
    1.5 * h / p.n * big_g + h * big_r * g / p.n - 2.0 / 3.0 * g * big_g
}

/// Largest `|ξ|` with `P(|ξ|) = 0`; beyond it no pointwise symmetrizer
/// exists. `None` when `ħ = 0` (then `P > 0` throughout).
pub fn qhd_full_threshold(p: &QhdFullParams) -> Option<f64> {
    let f = |r: f64| qhd_full_obstruction_poly(p, r);
    let mut last: Option<(f64, f64)> = None;
    let (lo, hi, steps) = (-3.0f64, 8.0f64, 2200);
    for k in 0..steps {
        let a = 10f64.powf(lo + (hi - lo) * k as f64 / steps as f64);
        let b = 10f64.powf(lo + (hi - lo) * (k + 1) as f64 / steps as f64);
        if f(a) > 0.0 && f(b) <= 0.0 {
            last = Some((a, b));
        }
    }
    let (mut a, mut b) = last?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some(b)
}
