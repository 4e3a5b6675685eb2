//! Random systems with a known constant symmetrizer, either genuinely
//! coupled by construction or carrying a planted eigenvector of `A_S(ξ)`
//! inside `ker B_S(ξ)` at every frequency.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Expected, ModelBundle};
use crate::denselin::RMat;
use crate::structure::{Feasibility, SymmetrizerFn};
use crate::symbolkit::{CoefficientSystem, MultiIndex};

#[derive(Debug, Clone)]
pub struct RandomSystem {
    pub bundle: ModelBundle,
    /// `φ` with `B(ξ)φ = 0` for all `ξ`; in the planted case also
    /// `S A(ξ) φ ∥ S A⁰ φ`.
    pub kernel: DVector<f64>,
    pub planted: bool,
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn gauss_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> RMat {
    RMat::from_fn(r, c, |_, _| gauss(rng))
}

fn unit_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let v = DVector::from_fn(n, |_, _| gauss(rng));
    let nrm = v.norm();
    v / nrm
}

/// Symmetric positive definite matrix with spectrum in `[lo, hi]`.
fn spd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> RMat {
    let q = gauss_mat(rng, n, n).qr().q();
    let d = DVector::from_fn(n, |_, _| rng.gen_range(lo..hi));
    &q * RMat::from_diagonal(&d) * q.transpose()
}

/// Positive semidefinite with kernel exactly `span{φ}`.
fn psd_with_kernel(rng: &mut ChaCha8Rng, n: usize, proj: &RMat) -> RMat {
    let g = gauss_mat(rng, n, n);
    let m = &g * g.transpose() * (0.5 / n as f64) + RMat::identity(n, n) * 0.3;
    proj * m * proj
}

/// Symmetric `Y` with `Y φ = t` (`|φ| = 1`).
fn symmetric_with_action(
    rng: &mut ChaCha8Rng,
    phi: &DVector<f64>,
    proj: &RMat,
    t: &DVector<f64>,
) -> RMat {
    let n = phi.len();
    let g = gauss_mat(rng, n, n);
    let base = proj * (&g + g.transpose()) * 0.5 * proj;
    let c = phi.dot(t);
    base + t * phi.transpose() + phi * t.transpose() - phi * phi.transpose() * c
}

/// Draw one system. `n ∈ [2, 4]`, `d ∈ [1, 3]` (at most `n − 1` when
/// coupled), highest order `m ∈ [1, 4]`.
pub fn random_symmetrizable(seed: u64, planted: bool) -> RandomSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = rng.gen_range(2..=4);
    let d_max = if planted { 3 } else { (n - 1).min(3) };
    let d: usize = rng.gen_range(1..=d_max);
    let m: u32 = rng.gen_range(1..=4);
    let relax = m == 1 || rng.gen_bool(0.5);

    let mass = spd(&mut rng, n, 0.5, 2.0);
    let c0: f64 = rng.gen_range(0.2..1.0);
    let c1: f64 = rng.gen_range(0.2..1.0);
    let s0 = RMat::identity(n, n) * c0 + &mass * c1;
    let s0 = (&s0 + s0.transpose()) * 0.5;
    let s_inv = s0.clone().try_inverse().expect("positive definite");
    let w = &s0 * &mass;

    let phi = unit_vec(&mut rng, n);
    let proj = RMat::identity(n, n) - &phi * phi.transpose();
    let wphi = &w * &phi;

    // coupling directions z_i: orthonormal, orthogonal to Wφ
    let mut basis: Vec<DVector<f64>> = vec![wphi.normalize()];
    let mut z = Vec::new();
    for _ in 0..d {
        let mut v = DVector::from_fn(n, |_, _| gauss(&mut rng));
        for b in &basis {
            v -= b * b.dot(&v);
        }
        let v = v.normalize() * rng.gen_range(0.5..1.5);
        basis.push(v.normalize());
        z.push(v);
    }

    let mut terms: Vec<(MultiIndex, RMat)> = Vec::new();
    for (i, zi) in z.iter().enumerate().take(d) {
        let b: f64 = rng.gen_range(-1.0..1.0);
        let t = if planted { &wphi * b } else { zi + &wphi * b };
        let y = symmetric_with_action(&mut rng, &phi, &proj, &t);
        terms.push((MultiIndex::unit(d, i), &s_inv * y));
    }
    if m >= 3 {
        for i in 0..d {
            let b: f64 = rng.gen_range(-1.0..1.0);
            let kappa: f64 = rng.gen_range(0.0..1.0);
            // order-three part adds −r²ω_i³(−κ z_i): same sign as the first-order part
            let t = if planted {
                &wphi * b
            } else {
                &z[i] * (-kappa) + &wphi * b
            };
            let y = symmetric_with_action(&mut rng, &phi, &proj, &t);
            let mut e = vec![0u32; d];
            e[i] = 3;
            terms.push((MultiIndex::new(e), &s_inv * y));
        }
    }
    if m >= 2 {
        for i in 0..d {
            let p = psd_with_kernel(&mut rng, n, &proj);
            let mut e = vec![0u32; d];
            e[i] = 2;
            terms.push((MultiIndex::new(e), -(&s_inv * p)));
        }
    }
    if m >= 4 {
        for i in 0..d {
            let q = psd_with_kernel(&mut rng, n, &proj) * 0.5;
            let mut e = vec![0u32; d];
            e[i] = 4;
            terms.push((MultiIndex::new(e), &s_inv * q));
        }
    }
    if relax {
        let r = psd_with_kernel(&mut rng, n, &proj);
        terms.push((MultiIndex::new(vec![0; d]), &s_inv * r));
    }
    let system =
        CoefficientSystem::from_terms(n, d, Some(mass), terms).expect("well-formed random system");
    let bundle = ModelBundle {
        name: format!("random-{seed}{}", if planted { "-planted" } else { "" }),
        system,
        symmetrizer: Some(SymmetrizerFn::constant("random constant", s0)),
        reference_compensator: None,
        expected: Expected {
            coupled: Some(!planted),
            decay_type: None,
            friedrichs: Feasibility::Feasible,
            symbol_symmetrizable: true,
        },
        params: format!("seed = {seed}\nplanted = {planted}\n"),
    };
    RandomSystem {
        bundle,
        kernel: phi,
        planted,
    }
}
