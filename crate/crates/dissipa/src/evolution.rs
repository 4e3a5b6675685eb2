//! Time evolution in Fourier space: pointwise propagation, decay-envelope
//! checks and L² norms of solutions by quadrature over frequency.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::denselin::{self, matrix_exp, CMat, LinalgError};
use crate::dissipativity::{directions, fmt_f64, log_radii, ols, DissipativityError};
use crate::structure::{
    symmetrize, validate_compensator, CompensatorTarget, MatrixFn, StructureError, SymmetrizedPair,
    SymmetrizerFn, Tolerances,
};
use crate::symbolkit::{dispersion_matrix, CoefficientSystem, FrequencyPoint};

#[derive(Debug, Clone, Error)]
pub enum EvolutionError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("quadrature not converged: grid-doubling discrepancy {discrepancy:.3e} after {levels} refinements")]
    Resolution { discrepancy: f64, levels: usize },
}

impl From<DissipativityError> for EvolutionError {
    fn from(e: DissipativityError) -> Self {
        EvolutionError::Precondition(e.to_string())
    }
}

pub type CVec = DVector<Complex64>;

/// `exp(−t(i|ξ|A_S + B_S)) v₀`.
pub fn propagate_pair(pair: &SymmetrizedPair, v0: &CVec, t: f64) -> Result<CVec, EvolutionError> {
    if !(t >= 0.0) {
        return Err(EvolutionError::Precondition(format!("negative time {t}")));
    }
    let g = -pair.generator();
    Ok(matrix_exp(&g, t)? * v0)
}

/// Symmetrize at `p` and propagate `v₀` (given in the symmetric variable).
pub fn propagate_point(
    sys: &CoefficientSystem,
    s: &SymmetrizerFn,
    p: &FrequencyPoint,
    v0: &CVec,
    t: f64,
    tols: &Tolerances,
) -> Result<CVec, EvolutionError> {
    let pair = symmetrize(sys, s, p, tols)?;
    propagate_pair(&pair, v0, t)
}

/// Unit complex vector with Gaussian entries.
pub fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    loop {
        let v = CVec::from_fn(n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let nrm = v.norm();
        if nrm > 1e-3 {
            return v / Complex64::new(nrm, 0.0);
        }
    }
}

// ---------------------------------------------------------------------------
// envelopes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeKind {
    /// `rate = |ξ|² f(ξ)/(1+|ξ|²)`.
    Full,
    /// `rate = |ξ|² g(ξ)`.
    RelaxationFree,
}

pub type MarginFn = Arc<dyn Fn(&FrequencyPoint) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct EnvelopeSpec {
    pub kind: EnvelopeKind,
    pub margin: MarginFn,
    /// `(C, k)` to check against; fitted when absent.
    pub constants: Option<(f64, f64)>,
}

impl EnvelopeSpec {
    pub fn constant(kind: EnvelopeKind, value: f64) -> Self {
        EnvelopeSpec {
            kind,
            margin: Arc::new(move |_| value),
            constants: None,
        }
    }

    /// Margin of a compensator on the symmetrized pair; for the
    /// relaxation-free form the margin is divided by `|ξ|²`.
    pub fn from_compensator(
        kind: EnvelopeKind,
        sys: CoefficientSystem,
        s: SymmetrizerFn,
        k: MatrixFn,
        tols: Tolerances,
    ) -> Self {
        let margin: MarginFn = Arc::new(move |p| {
            let Ok(pair) = symmetrize(&sys, &s, p, &tols) else {
                return f64::NAN;
            };
            let th = validate_compensator(&k(p), CompensatorTarget::Symmetrized(&pair)).theta;
            match kind {
                EnvelopeKind::Full => th,
                EnvelopeKind::RelaxationFree => th / (p.radius * p.radius),
            }
        });
        EnvelopeSpec {
            kind,
            margin,
            constants: None,
        }
    }

    pub fn rate(&self, p: &FrequencyPoint) -> f64 {
        let r2 = p.radius * p.radius;
        let m = (self.margin)(p);
        match self.kind {
            EnvelopeKind::Full => r2 * m / (1.0 + r2),
            EnvelopeKind::RelaxationFree => r2 * m,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeViolation {
    pub xi: Vec<f64>,
    pub t: f64,
    pub ratio: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    /// Smallest `C` valid on the sample given `k_fit`.
    pub c_fit: f64,
    /// Smallest `−ln(|V̂(t)|/|v₀|)/(rate·t)` over samples with `rate·t ≥ 1`.
    pub k_fit: f64,
    pub samples: usize,
    /// Against the supplied constants, or the fitted ones.
    pub violations: Vec<EnvelopeViolation>,
    pub min_margin: f64,
    pub pass: bool,
}

/// Sample `|V̂(ξ,t)|/|v₀|` over points × times × `draws` random `v₀` and
/// fit the envelope `C exp(−k·rate(ξ)·t)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_envelope(
    sys: &CoefficientSystem,
    s: &SymmetrizerFn,
    spec: &EnvelopeSpec,
    points: &[FrequencyPoint],
    times: &[f64],
    draws: usize,
    seed: u64,
    tols: &Tolerances,
) -> Result<EnvelopeReport, EvolutionError> {
    if points.is_empty() || times.is_empty() || draws == 0 {
        return Err(EvolutionError::Precondition("empty envelope sample".into()));
    }
    let n = sys.n();
    type PointSamples = (f64, Vec<(usize, f64, f64)>);
    let per_point: Vec<Result<PointSamples, EvolutionError>> = points
        .par_iter()
        .enumerate()
        .map(|(ip, p)| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (ip as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let pair = symmetrize(sys, s, p, tols)?;
            let g = -pair.generator();
            let m = (spec.margin)(p);
            let rate = spec.rate(p);
            let mut out = Vec::with_capacity(times.len() * draws);
            for &t in times {
                let e = matrix_exp(&g, t)?;
                for _ in 0..draws {
                    let v0 = random_unit(&mut rng, n);
                    out.push((ip, rate * t, (&e * v0).norm()));
                }
            }
            Ok((m, out))
        })
        .collect();
    let mut min_margin = f64::INFINITY;
    let mut samples = Vec::new();
    for r in per_point {
        let (m, s) = r?;
        min_margin = min_margin.min(m);
        samples.extend(s);
    }
    let k_fit = samples
        .iter()
        .filter(|(_, rho, _)| *rho >= 1.0)
        .map(|(_, rho, y)| {
            if *y > 0.0 {
                -y.ln() / rho
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min);
    let k_fit = if k_fit.is_finite() { k_fit } else { 0.0 };
    let c_fit = samples
        .iter()
        .map(|(_, rho, y)| y * (k_fit * rho).exp())
        .fold(0.0, f64::max);
    let (c, k) = spec.constants.unwrap_or((c_fit, k_fit));
    let violations: Vec<EnvelopeViolation> = samples
        .iter()
        .filter_map(|&(ip, rho, y)| {
            let bound = c * (-k * rho).exp();
            (y > bound * (1.0 + 1e-9) + 1e-15).then(|| EnvelopeViolation {
                xi: points[ip].xi.clone(),
                t: if spec.rate(&points[ip]) > 0.0 {
                    rho / spec.rate(&points[ip])
                } else {
                    0.0
                },
                ratio: y,
                bound,
            })
        })
        .collect();
    let pass = violations.is_empty() && min_margin > 0.0 && k > 0.0 && c.is_finite();
    Ok(EnvelopeReport {
        c_fit,
        k_fit,
        samples: samples.len(),
        violations,
        min_margin,
        pass,
    })
}

// ---------------------------------------------------------------------------
// L² decay

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Gaussian,
    CompactBump,
    InversePoly,
}

/// Radial initial datum `Û₀(ξ) = amplitude·φ(|ξ|/width)·weights`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct InitialData {
    pub profile: Profile,
    pub amplitude: f64,
    pub width: f64,
    pub weights: Vec<f64>,
}

impl InitialData {
    pub fn gaussian(n: usize) -> Self {
        InitialData {
            profile: Profile::Gaussian,
            amplitude: 1.0,
            width: 1.0,
            weights: vec![1.0; n],
        }
    }

    pub fn shape(&self, r: f64) -> f64 {
        let s = r / self.width;
        let phi = match self.profile {
            Profile::Gaussian => (-s * s).exp(),
            Profile::CompactBump => {
                if s < 1.0 {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }
            Profile::InversePoly => 1.0 / ((1.0 + s * s) * (1.0 + s * s)),
        };
        self.amplitude * phi
    }

    /// Radius beyond which the profile is negligible for quadrature.
    fn cutoff(&self) -> f64 {
        match self.profile {
            Profile::Gaussian => 7.0 * self.width,
            Profile::CompactBump => self.width,
            Profile::InversePoly => 1e3 * self.width,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayOptions {
    /// Derivative order `ℓ`.
    pub derivative: u32,
    /// Weight `(1+|ξ|²)` on the first component.
    pub weight_first: bool,
    pub r_min: f64,
    /// Radial nodes per decade on the coarsest level.
    pub per_decade: usize,
    /// Angular nodes on the coarsest level (`d ≥ 2`).
    pub angles: usize,
    pub rel_tol: f64,
    pub max_levels: usize,
}

impl Default for DecayOptions {
    fn default() -> Self {
        DecayOptions {
            derivative: 0,
            weight_first: false,
            r_min: 1e-6,
            per_decade: 12,
            angles: 8,
            rel_tol: 0.01,
            max_levels: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecaySeries {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Slope of `ln ‖·‖` against `ln(1+t)` between consecutive times.
    pub running_rates: Vec<Option<f64>>,
    /// Fitted exponent on the last decade of times.
    pub exponent: f64,
    pub discrepancy: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
}

fn angular_rule(d: usize, count: usize) -> Result<(Vec<Vec<f64>>, f64), EvolutionError> {
    let dirs = directions(d, count)?;
    let area = match d {
        1 => 1.0,
        2 => std::f64::consts::TAU / dirs.len() as f64,
        _ => 4.0 * std::f64::consts::PI / dirs.len() as f64,
    };
    Ok((dirs, area))
}

/// `∫ |ξ|^{2ℓ} w(ξ)|Û(ξ,t)|² dξ / (2π)^d` for each time, trapezoid in
/// `ln|ξ|` times an equal-weight angular rule.
fn norms_on_grid(
    sys: &CoefficientSystem,
    init: &InitialData,
    opts: &DecayOptions,
    times: &[f64],
    radii: &[f64],
    angles: usize,
) -> Result<Vec<f64>, EvolutionError> {
    let d = sys.d();
    let (dirs, area) = angular_rule(d, angles)?;
    let h = (radii[radii.len() - 1] / radii[0]).ln() / (radii.len() - 1) as f64;
    let u0 = CVec::from_iterator(
        init.weights.len(),
        init.weights.iter().map(|w| Complex64::new(*w, 0.0)),
    );
    let nodes: Vec<(usize, &Vec<f64>)> = (0..radii.len())
        .flat_map(|i| dirs.iter().map(move |w| (i, w)))
        .collect();
    let contrib: Vec<Result<Vec<f64>, EvolutionError>> = nodes
        .par_iter()
        .map(|&(i, w)| {
            let r = radii[i];
            let amp = init.shape(r);
            if amp == 0.0 {
                return Ok(vec![0.0; times.len()]);
            }
            let p = FrequencyPoint::from_polar(r, w).expect("grid node");
            let m: CMat = dispersion_matrix(sys, &p);
            let trap = if i == 0 || i == radii.len() - 1 {
                0.5
            } else {
                1.0
            };
            let jac = trap * h * area * r.powi(d as i32) * r.powi(2 * opts.derivative as i32);
            let mut out = Vec::with_capacity(times.len());
            let v0 = &u0 * Complex64::new(amp, 0.0);
            for &t in times {
                let u = matrix_exp(&m, t)? * &v0;
                let mut s = 0.0;
                for (k, z) in u.iter().enumerate() {
                    let wgt = if k == 0 && opts.weight_first {
                        1.0 + r * r
                    } else {
                        1.0
                    };
                    s += wgt * z.norm_sqr();
                }
                out.push(jac * s);
            }
            Ok(out)
        })
        .collect();
    let mut total = vec![0.0; times.len()];
    for c in contrib {
        for (acc, v) in total.iter_mut().zip(c?) {
            *acc += v;
        }
    }
    let norm = (2.0 * std::f64::consts::PI).powi(d as i32);
    Ok(total.into_iter().map(|v| (v / norm).sqrt()).collect())
}

/// Surrogate `‖∂^ℓ U(t)‖` with grid-doubling control and the fitted
/// algebraic exponent of its late-time decay.
pub fn l2_decay(
    sys: &CoefficientSystem,
    init: &InitialData,
    times: &[f64],
    opts: &DecayOptions,
) -> Result<DecaySeries, EvolutionError> {
    if init.weights.len() != sys.n() {
        return Err(EvolutionError::Precondition(format!(
            "initial data has {} components, system has {}",
            init.weights.len(),
            sys.n()
        )));
    }
    if times.len() < 2
        || times.iter().any(|t| !(*t >= 0.0))
        || times.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(EvolutionError::Precondition(
            "times must be non-negative and increasing".into(),
        ));
    }
    let r_max = init.cutoff();
    if !(opts.r_min < r_max) {
        return Err(EvolutionError::Precondition(
            "r_min beyond the profile cutoff".into(),
        ));
    }
    let mut per_decade = opts.per_decade;
    let mut angles = opts.angles;
    let mut coarse = norms_on_grid(
        sys,
        init,
        opts,
        times,
        &log_radii(opts.r_min, r_max, per_decade)?,
        angles,
    )?;
    let mut levels = 0;
    loop {
        per_decade *= 2;
        angles *= 2;
        levels += 1;
        let radii = log_radii(opts.r_min, r_max, per_decade)?;
        let fine = norms_on_grid(sys, init, opts, times, &radii, angles)?;
        let discrepancy = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| {
                if *b > 0.0 {
                    (a - b).abs() / b
                } else {
                    (a - b).abs()
                }
            })
            .fold(0.0, f64::max);
        if discrepancy < opts.rel_tol {
            let running_rates = (0..fine.len())
                .map(|k| {
                    (k > 0).then(|| {
                        ((fine[k] / fine[k - 1]).ln())
                            / ((1.0 + times[k]) / (1.0 + times[k - 1])).ln()
                    })
                })
                .collect();
            let t_max = times[times.len() - 1];
            let (x, y): (Vec<f64>, Vec<f64>) = times
                .iter()
                .zip(&fine)
                .filter(|(t, v)| **t >= t_max / 10.0 * (1.0 - 1e-12) && **v > 0.0)
                .map(|(t, v)| ((1.0 + t).ln(), v.ln()))
                .unzip();
            let exponent = if x.len() >= 2 {
                ols(&x, &y).0
            } else {
                f64::NAN
            };
            let angular_nodes = if sys.d() == 1 { 2 } else { angles };
            return Ok(DecaySeries {
                times: times.to_vec(),
                norms: fine,
                running_rates,
                exponent,
                discrepancy,
                radial_nodes: radii.len(),
                angular_nodes,
            });
        }
        if levels >= opts.max_levels {
            return Err(EvolutionError::Resolution {
                discrepancy,
                levels,
            });
        }
        coarse = fine;
    }
}

/// `t, norm, fitted_rate_running`.
pub fn write_decay_csv<W: Write>(series: &DecaySeries, out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["t", "norm", "fitted_rate_running"])?;
    for k in 0..series.times.len() {
        w.write_record([
            fmt_f64(series.times[k]),
            fmt_f64(series.norms[k]),
            series.running_rates[k].map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `½ d/dt |V̂|² + ⟨V̂, B_S V̂⟩` by a central difference; zero up to `O(Δt²)`.
pub fn energy_identity_residual(
    pair: &SymmetrizedPair,
    v0: &CVec,
    t: f64,
    dt: f64,
) -> Result<f64, EvolutionError> {
    let vp = propagate_pair(pair, v0, t + dt)?;
    let vm = propagate_pair(pair, v0, (t - dt).max(0.0))?;
    let v = propagate_pair(pair, v0, t)?;
    let span = (t + dt) - (t - dt).max(0.0);
    let ddt = 0.5 * (vp.norm_squared() - vm.norm_squared()) / span;
    let bv = denselin::to_complex(&pair.b_s) * &v;
    let dissip = v.dotc(&bv).re;
    Ok(ddt + dissip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denselin::RMat;
    use crate::models::build_model;
    use crate::symbolkit::MultiIndex;
    use approx::assert_abs_diff_eq;

    fn heat(d: usize) -> CoefficientSystem {
        let terms = (0..d).map(|i| {
            let mut e = vec![0; d];
            e[i] = 2;
            (MultiIndex::new(e), RMat::from_element(1, 1, -1.0))
        });
        CoefficientSystem::from_terms(1, d, None, terms).unwrap()
    }

    #[test]
    fn heat_propagation() {
        let sys = heat(1);
        let s = SymmetrizerFn::identity(1);
        let p = FrequencyPoint::new(vec![1.0]).unwrap();
        let v0 = CVec::from_element(1, Complex64::new(1.0, 0.0));
        let tols = Tolerances::default();
        let v = propagate_point(&sys, &s, &p, &v0, 0.0, &tols).unwrap();
        assert_eq!(v, v0);
        let v = propagate_point(&sys, &s, &p, &v0, 2.0, &tols).unwrap();
        assert_abs_diff_eq!(v[0].re, (-2.0f64).exp(), epsilon = 1e-14);
        assert!(propagate_point(&sys, &s, &p, &v0, -1.0, &tols).is_err());
    }

    #[test]
    fn heat_envelope_is_exact() {
        let sys = heat(1);
        let spec = EnvelopeSpec::constant(EnvelopeKind::RelaxationFree, 1.0);
        let pts: Vec<_> = [0.1, 1.0, 3.0]
            .iter()
            .map(|r| FrequencyPoint::new(vec![*r]).unwrap())
            .collect();
        let rep = verify_envelope(
            &sys,
            &SymmetrizerFn::identity(1),
            &spec,
            &pts,
            &[0.0, 0.5, 2.0, 200.0],
            3,
            7,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(rep.pass);
        assert_abs_diff_eq!(rep.k_fit, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(rep.c_fit, 1.0, epsilon = 1e-9);
        let strict = EnvelopeSpec {
            constants: Some((1.0, 1.5)),
            ..spec
        };
        let rep = verify_envelope(
            &sys,
            &SymmetrizerFn::identity(1),
            &strict,
            &pts,
            &[1.0],
            1,
            7,
            &Tolerances::default(),
        )
        .unwrap();
        assert_eq!(rep.violations.len(), 3);
    }

    #[test]
    fn nsk_is_non_expansive() {
        let b = build_model("nsk2d", None, None).unwrap();
        let s = b.symmetrizer.unwrap();
        let p = FrequencyPoint::new(vec![1.0, 0.0]).unwrap();
        let tols = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v0 = random_unit(&mut rng, 3);
        let mut last = 1.0;
        for t in [0.5, 1.0, 5.0] {
            let v = propagate_point(&b.system, &s, &p, &v0, t, &tols).unwrap();
            assert!(v.norm() <= last + 1e-12);
            last = v.norm();
        }
    }

    #[test]
    fn heat_l2_rate() {
        // ‖e^{tΔ}u₀‖ ~ t^{-d/4}
        let sys = heat(1);
        let times: Vec<f64> = (0..=16)
            .map(|k| 10f64.powf(-1.0 + 0.3125 * k as f64))
            .collect();
        let s = l2_decay(
            &sys,
            &InitialData::gaussian(1),
            &times,
            &DecayOptions::default(),
        )
        .unwrap();
        assert!((s.exponent + 0.25).abs() < 0.02, "{}", s.exponent);
        assert!(s.discrepancy < 0.01);
        let t0 = l2_decay(
            &sys,
            &InitialData::gaussian(1),
            &[0.0, 1.0],
            &DecayOptions::default(),
        )
        .unwrap();
        // ∫ e^{-2ξ²} dξ / 2π
        let want = ((std::f64::consts::PI / 2.0).sqrt() / (2.0 * std::f64::consts::PI)).sqrt();
        assert!((t0.norms[0] - want).abs() / want < 1e-3);
    }

    #[test]
    fn decay_csv() {
        let series = DecaySeries {
            times: vec![0.0, 1.0],
            norms: vec![1.0, 0.5],
            running_rates: vec![None, Some(-1.0)],
            exponent: -1.0,
            discrepancy: 0.0,
            radial_nodes: 1,
            angular_nodes: 1,
        };
        let mut buf = Vec::new();
        write_decay_csv(&series, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,norm,fitted_rate_running\n0.0,1.0,\n1.0,0.5,-1.0\n"
        );
    }
}
