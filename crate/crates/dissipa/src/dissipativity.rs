//! Frequency sweeps of the dispersion relation, strict-dissipativity
//! certification, decay-type classification and high-frequency expansion
//! fits for one-dimensional systems.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::denselin::{self, CMat};
use crate::structure::{
    drazin_compensator, symmetrize, validate_compensator, CompensatorTarget, MatrixFn,
    SymmetrizerFn, Tolerances,
};
use crate::symbolkit::{
    assemble_symbols, dispersion_decomposition, CoefficientSystem, FrequencyPoint, SymbolError,
};

#[derive(Debug, Clone, Error)]
pub enum DissipativityError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("decay type ambiguous: low slope {low_slope:.4}, high slope {high_slope:.4}")]
    Ambiguous { low_slope: f64, high_slope: f64 },
    #[error("branch tracking lost at radius {radius:e} (distance {distance:e}, threshold {threshold:e})")]
    Tracking {
        radius: f64,
        distance: f64,
        threshold: f64,
    },
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

// ---------------------------------------------------------------------------
// grids

/// Product grid of unit directions and log-spaced radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyGrid {
    pub d: usize,
    pub directions: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
}

pub const DEFAULT_DIRECTIONS_2D: usize = 64;
pub const DEFAULT_DIRECTIONS_3D: usize = 144;

/// `⌈per_decade·log10(r_max/r_min)⌉ + 1` log-spaced radii, both ends included.
pub fn log_radii(
    r_min: f64,
    r_max: f64,
    per_decade: usize,
) -> Result<Vec<f64>, DissipativityError> {
    if !(r_min > 0.0 && r_max > r_min && r_max.is_finite() && per_decade > 0) {
        return Err(DissipativityError::Precondition(format!(
            "radii need 0 < r_min < r_max and per_decade > 0 (got {r_min}, {r_max}, {per_decade})"
        )));
    }
    let (a, b) = (r_min.log10(), r_max.log10());
    let steps = ((b - a) * per_decade as f64 - 1e-9).ceil().max(1.0) as usize;
    Ok((0..=steps)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / steps as f64))
        .collect())
}

/// `±1` for `d = 1` (only `+1` when `count = 1`), uniform angles for `d = 2`, Fibonacci-sphere nodes for `d = 3`.
pub fn directions(d: usize, count: usize) -> Result<Vec<Vec<f64>>, DissipativityError> {
    match d {
        1 if count == 1 => Ok(vec![vec![1.0]]),
        1 => Ok(vec![vec![1.0], vec![-1.0]]),
        2 if count > 0 => Ok((0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()),
        3 if count > 0 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            Ok((0..count)
                .map(|k| {
                    let z = 1.0 - (2 * k + 1) as f64 / count as f64;
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * k as f64;
                    let v = [s * phi.cos(), s * phi.sin(), z];
                    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                    v.iter().map(|x| x / n).collect()
                })
                .collect())
        }
        _ => Err(DissipativityError::Precondition(format!(
            "no direction rule for d = {d} with {count} nodes"
        ))),
    }
}

impl FrequencyGrid {
    pub fn new(
        d: usize,
        n_dirs: usize,
        r_min: f64,
        r_max: f64,
        per_decade: usize,
    ) -> Result<Self, DissipativityError> {
        Ok(FrequencyGrid {
            d,
            directions: directions(d, n_dirs)?,
            radii: log_radii(r_min, r_max, per_decade)?,
        })
    }

    /// 64 / 144 directions, radii `1e-3 … 1e3` at 16 per decade.
    pub fn default_for(d: usize) -> Result<Self, DissipativityError> {
        let n = if d == 3 {
            DEFAULT_DIRECTIONS_3D
        } else {
            DEFAULT_DIRECTIONS_2D
        };
        Self::new(d, n, 1e-3, 1e3, 16)
    }

    pub fn with_radii(
        d: usize,
        n_dirs: usize,
        radii: Vec<f64>,
    ) -> Result<Self, DissipativityError> {
        if radii.is_empty()
            || radii.iter().any(|r| !(*r > 0.0 && r.is_finite()))
            || radii.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(DissipativityError::Precondition(
                "radii must be positive and strictly increasing".into(),
            ));
        }
        Ok(FrequencyGrid {
            d,
            directions: directions(d, n_dirs)?,
            radii,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len() * self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Direction-major order: all radii of the first direction, then the next.
    pub fn points(&self) -> Vec<FrequencyPoint> {
        let mut out = Vec::with_capacity(self.len());
        for w in &self.directions {
            for &r in &self.radii {
                out.push(FrequencyPoint::from_polar(r, w).expect("valid grid node"));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// dispersion roots

/// Dispersion roots with a per-root rounding bound.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<Complex64>,
    pub errors: Vec<f64>,
}

const ROUNDING: f64 = 1e3 * f64::EPSILON;

/// Roots of `det(λA⁰ + i|ξ|A + B) = 0`, sorted by decreasing real part.
///
/// Roots much smaller than `‖M‖` lose relative accuracy in a direct
/// eigensolve of `M = −(A⁰)^{-1}(i|ξ|A + B)`; those are recomputed as
/// reciprocals of the dominant eigenvalues of `M^{-1}`.
pub fn dispersion_spectrum(
    sys: &CoefficientSystem,
    p: &FrequencyPoint,
) -> Result<Spectrum, SymbolError> {
    let dec = dispersion_decomposition(sys, p)?;
    let mut values = dec.values;
    let g = assemble_symbols(sys, p).combined();
    let mass = denselin::to_complex(sys.mass());
    let m_norm = denselin::norm2(
        &(-mass
            .clone()
            .lu()
            .solve(&g)
            .expect("mass is positive definite")),
    );
    let mut inv_norm = f64::INFINITY;
    if let Some(x) = g.lu().solve(&mass) {
        let inv: CMat = -x;
        if inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            inv_norm = denselin::norm2(&inv);
            if let Ok(idec) = denselin::eig_general(&inv) {
                let tau = (m_norm / inv_norm).sqrt();
                let small: Vec<usize> = (0..values.len())
                    .filter(|&k| values[k].norm() < tau)
                    .collect();
                let mut recips: Vec<Complex64> = idec
                    .values
                    .iter()
                    .filter(|mu| mu.norm() * tau > 1.0)
                    .map(|mu| mu.inv())
                    .collect();
                if !small.is_empty() && small.len() == recips.len() {
                    for k in small {
                        let (j, _) = recips
                            .iter()
                            .enumerate()
                            .min_by(|a, b| {
                                (a.1 - values[k])
                                    .norm()
                                    .total_cmp(&(b.1 - values[k]).norm())
                            })
                            .expect("matched counts");
                        values[k] = recips.swap_remove(j);
                    }
                }
            }
        }
    }
    let mut errors: Vec<f64> = values
        .iter()
        .map(|l| ROUNDING * m_norm.min(l.norm_sqr() * inv_norm).max(f64::MIN_POSITIVE))
        .collect();
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .re
            .total_cmp(&values[a].re)
            .then(values[a].im.total_cmp(&values[b].im))
    });
    values = idx.iter().map(|&k| values[k]).collect();
    errors = idx.iter().map(|&k| errors[k]).collect();
    Ok(Spectrum { values, errors })
}

// ---------------------------------------------------------------------------
// sweeps

/// How to attach a compensator margin to each record.
#[derive(Clone, Default)]
pub enum CompensatorStrategy {
    #[default]
    None,
    Drazin,
    Reference(MatrixFn),
    /// Drazin, falling back to the reference where clusters are too close.
    DrazinOrReference(MatrixFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CompensatorSource {
    Drazin,
    Reference,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub at: FrequencyPoint,
    /// Sorted by decreasing real part.
    pub eigenvalues: Vec<Complex64>,
    pub max_re: f64,
    /// `max_k (Re λ_k + rounding bound_k)`: an upper estimate of `max_re`.
    pub max_re_upper: f64,
    /// `λ_min([K A_S]^s + B_S)`.
    pub theta: Option<f64>,
    pub compensator: Option<CompensatorSource>,
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

fn margin(
    sys: &CoefficientSystem,
    s: &SymmetrizerFn,
    strategy: &CompensatorStrategy,
    p: &FrequencyPoint,
    tols: &Tolerances,
) -> (Option<f64>, Option<CompensatorSource>) {
    let pair = match symmetrize(sys, s, p, tols) {
        Ok(x) => x,
        Err(_) => return (None, None),
    };
    let reference = |k: &MatrixFn| {
        let r = validate_compensator(&k(p), CompensatorTarget::Symmetrized(&pair));
        (
            Some(r.theta).filter(|t| t.is_finite()),
            Some(CompensatorSource::Reference),
        )
    };
    match strategy {
        CompensatorStrategy::None => (None, None),
        CompensatorStrategy::Drazin => match drazin_compensator(&pair.a_s, &pair.b_s, tols) {
            Ok(r) => (Some(r.theta), Some(CompensatorSource::Drazin)),
            Err(_) => (None, None),
        },
        CompensatorStrategy::Reference(k) => reference(k),
        CompensatorStrategy::DrazinOrReference(k) => {
            match drazin_compensator(&pair.a_s, &pair.b_s, tols) {
                Ok(r) => (Some(r.theta), Some(CompensatorSource::Drazin)),
                Err(_) => reference(k),
            }
        }
    }
}

fn record_at(
    sys: &CoefficientSystem,
    s: Option<&SymmetrizerFn>,
    strategy: &CompensatorStrategy,
    p: &FrequencyPoint,
    tols: &Tolerances,
) -> SweepRecord {
    let (theta, compensator) = match s {
        Some(s) => margin(sys, s, strategy, p, tols),
        None => (None, None),
    };
    match dispersion_spectrum(sys, p) {
        Ok(sp) => {
            let max_re = sp
                .values
                .iter()
                .map(|l| l.re)
                .fold(f64::NEG_INFINITY, f64::max);
            let max_re_upper = sp
                .values
                .iter()
                .zip(&sp.errors)
                .map(|(l, e)| l.re + e)
                .fold(f64::NEG_INFINITY, f64::max);
            SweepRecord {
                at: p.clone(),
                eigenvalues: sp.values,
                max_re,
                max_re_upper,
                theta,
                compensator,
                error: None,
            }
        }
        Err(e) => SweepRecord {
            at: p.clone(),
            eigenvalues: Vec::new(),
            max_re: f64::NAN,
            max_re_upper: f64::NAN,
            theta,
            compensator,
            error: Some(e.to_string()),
        },
    }
}

/// One record per point, in input order. Eigensolver failures are stored
/// in the record.
pub fn sweep_points(
    sys: &CoefficientSystem,
    s: Option<&SymmetrizerFn>,
    strategy: &CompensatorStrategy,
    points: &[FrequencyPoint],
    tols: &Tolerances,
) -> Vec<SweepRecord> {
    points
        .par_iter()
        .map(|p| record_at(sys, s, strategy, p, tols))
        .collect()
}

pub fn sweep(
    sys: &CoefficientSystem,
    s: Option<&SymmetrizerFn>,
    strategy: &CompensatorStrategy,
    grid: &FrequencyGrid,
    tols: &Tolerances,
) -> Result<Vec<SweepRecord>, DissipativityError> {
    if grid.is_empty() {
        return Err(DissipativityError::Precondition("empty grid".into()));
    }
    if grid.d != sys.d() {
        return Err(DissipativityError::Precondition(format!(
            "grid d = {} but system d = {}",
            grid.d,
            sys.d()
        )));
    }
    Ok(sweep_points(sys, s, strategy, &grid.points(), tols))
}

// ---------------------------------------------------------------------------
// strictness

/// `|ξ|²/(1+|ξ|²)²`, the weakest decay profile among the catalog types.
pub fn strict_normalizer(r: f64) -> f64 {
    let r2 = r * r;
    r2 / ((1.0 + r2) * (1.0 + r2))
}

/// Per-point test `max Re λ < −tol·normalizer(|ξ|)`, using the
/// rounding-inflated maximum.
pub fn strict_at(rec: &SweepRecord, tol: f64) -> bool {
    rec.ok() && rec.max_re_upper < -tol * strict_normalizer(rec.at.radius)
}

#[derive(Debug, Clone, Serialize)]
pub struct StrictVerdict {
    pub pass: bool,
    /// Record with the largest `max_re / normalizer`.
    pub worst: SweepRecord,
    pub violations: usize,
}

pub fn certify_strict(
    records: &[SweepRecord],
    tol: f64,
) -> Result<StrictVerdict, DissipativityError> {
    if records.is_empty() {
        return Err(DissipativityError::Precondition("no sweep records".into()));
    }
    let score = |r: &SweepRecord| {
        if r.ok() {
            r.max_re_upper / strict_normalizer(r.at.radius)
        } else {
            f64::INFINITY
        }
    };
    let worst = records
        .iter()
        .max_by(|a, b| score(a).total_cmp(&score(b)))
        .expect("non-empty");
    let violations = records.iter().filter(|r| !strict_at(r, tol)).count();
    Ok(StrictVerdict {
        pass: violations == 0,
        worst: worst.clone(),
        violations,
    })
}

// ---------------------------------------------------------------------------
// decay type

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayKind {
    RegularityGain,
    Standard,
    RegularityLoss,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayClassification {
    pub p: u32,
    pub q: u32,
    /// Largest `c` with `−max Re λ ≥ c|ξ|^{2p}/(1+|ξ|²)^q` on the grid.
    pub c_fit: f64,
    pub low_slope: f64,
    pub high_slope: f64,
    pub kind: DecayKind,
}

/// Ordinary least squares `y ≈ a + s·x`; returns `(s, a)`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let s = sxy / sxx;
    (s, my - s * mx)
}

/// `(|ξ|, −max over directions of max Re λ)` sorted by radius.
pub fn radial_envelope(records: &[SweepRecord]) -> Vec<(f64, f64)> {
    let mut by_r: BTreeMap<u64, f64> = BTreeMap::new();
    for r in records {
        let e = by_r
            .entry(r.at.radius.to_bits())
            .or_insert(f64::NEG_INFINITY);
        *e = e.max(if r.ok() { r.max_re } else { f64::INFINITY });
    }
    let mut out: Vec<(f64, f64)> = by_r
        .into_iter()
        .map(|(k, v)| (f64::from_bits(k), -v))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

const SLOPE_GUARD: f64 = 0.25;

pub fn classify_type(records: &[SweepRecord]) -> Result<DecayClassification, DissipativityError> {
    let env = radial_envelope(records);
    if env.len() < 2 {
        return Err(DissipativityError::Precondition(
            "need at least two radii".into(),
        ));
    }
    if let Some((r, g)) = env.iter().find(|(_, g)| !(*g > 0.0)) {
        return Err(DissipativityError::Precondition(format!(
            "max Re λ = {} ≥ 0 at radius {r:e}",
            -g
        )));
    }
    let (r_lo, r_hi) = (env[0].0, env[env.len() - 1].0);
    let decades = (r_hi / r_lo).log10();
    if decades < 4.0 - 1e-9 {
        return Err(DissipativityError::Precondition(format!(
            "radii span {decades:.2} decades, need 4"
        )));
    }
    let fit = |keep: &dyn Fn(f64) -> bool| -> Result<f64, DissipativityError> {
        let (x, y): (Vec<f64>, Vec<f64>) = env
            .iter()
            .filter(|(r, _)| keep(*r))
            .map(|(r, g)| (r.ln(), g.ln()))
            .unzip();
        if x.len() < 10 {
            return Err(DissipativityError::Precondition(format!(
                "{} radii in an end decade, need 10",
                x.len()
            )));
        }
        Ok(ols(&x, &y).0)
    };
    let low_slope = fit(&|r| r <= r_lo * 10.0 * (1.0 + 1e-9))?;
    let high_slope = fit(&|r| r >= r_hi / 10.0 * (1.0 - 1e-9))?;
    let two_p = low_slope.round();
    let two_pq = high_slope.round();
    let ambiguous = Err(DissipativityError::Ambiguous {
        low_slope,
        high_slope,
    });
    if (low_slope - two_p).abs() > SLOPE_GUARD || (high_slope - two_pq).abs() > SLOPE_GUARD {
        return ambiguous;
    }
    if two_p < 0.0 || two_p as i64 % 2 != 0 || two_pq as i64 % 2 != 0 || two_pq > two_p {
        return ambiguous;
    }
    let p = (two_p / 2.0) as u32;
    let q = ((two_p - two_pq) / 2.0) as u32;
    let c_fit = env
        .iter()
        .map(|(r, g)| g * (1.0 + r * r).powi(q as i32) / r.powi(2 * p as i32))
        .fold(f64::INFINITY, f64::min);
    let kind = match p.cmp(&q) {
        std::cmp::Ordering::Greater => DecayKind::RegularityGain,
        std::cmp::Ordering::Equal => DecayKind::Standard,
        std::cmp::Ordering::Less => DecayKind::RegularityLoss,
    };
    Ok(DecayClassification {
        p,
        q,
        c_fit,
        low_slope,
        high_slope,
        kind,
    })
}

// ---------------------------------------------------------------------------
// high-frequency expansion

pub const ASYMPTOTIC_ORDERS: [i32; 6] = [3, 2, 1, 0, -1, -2];

/// One tracked root `λ(ξ)` fitted as `Σ_n (iξ)^n λ^{(n)}`.
#[derive(Debug, Clone, Serialize)]
pub struct BranchFit {
    /// Same order as [`AsymptoticFit::orders`].
    pub coefficients: Vec<Complex64>,
    /// Relative weighted residual of the fit.
    pub residual: f64,
    pub values: Vec<Complex64>,
}

impl BranchFit {
    pub fn coefficient(&self, orders: &[i32], n: i32) -> Option<Complex64> {
        orders
            .iter()
            .position(|&o| o == n)
            .map(|k| self.coefficients[k])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticFit {
    pub direction: f64,
    pub radii: Vec<f64>,
    pub orders: Vec<i32>,
    /// Ordered by `|λ|` at the smallest radius.
    pub branches: Vec<BranchFit>,
}

impl AsymptoticFit {
    pub fn coefficient(&self, branch: usize, n: i32) -> Option<Complex64> {
        self.branches
            .get(branch)
            .and_then(|b| b.coefficient(&self.orders, n))
    }
}

/// Follow the roots across increasing radii by nearest-neighbour matching.
fn track(
    sys: &CoefficientSystem,
    direction: f64,
    radii: &[f64],
) -> Result<Vec<Vec<Complex64>>, DissipativityError> {
    let mut branches: Vec<Vec<Complex64>> = Vec::new();
    for (k, &r) in radii.iter().enumerate() {
        let p = FrequencyPoint::new(vec![direction * r]).expect("positive radius");
        let vals = dispersion_spectrum(sys, &p)?.values;
        if k == 0 {
            let mut v = vals;
            v.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.im.total_cmp(&b.im)));
            branches = v.into_iter().map(|l| vec![l]).collect();
            continue;
        }
        let spacing: Vec<f64> = (0..vals.len())
            .map(|j| {
                (0..vals.len())
                    .filter(|&i| i != j)
                    .map(|i| (vals[i] - vals[j]).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let mut used = vec![false; vals.len()];
        for b in branches.iter_mut() {
            let prev = *b.last().expect("seeded");
            let (j, dist) = (0..vals.len())
                .filter(|&j| !used[j])
                .map(|j| (j, (vals[j] - prev).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("as many roots as branches");
            let threshold = 0.5 * spacing[j];
            if dist > threshold {
                return Err(DissipativityError::Tracking {
                    radius: r,
                    distance: dist,
                    threshold,
                });
            }
            used[j] = true;
            b.push(vals[j]);
        }
    }
    Ok(branches)
}

/// Least-squares fit of every root branch of a one-dimensional system
/// against `(iξ)^n`, `n ∈ orders`, at `ξ = direction·r`.
pub fn asymptotic_fit(
    sys: &CoefficientSystem,
    direction: f64,
    orders: &[i32],
    radii: &[f64],
) -> Result<AsymptoticFit, DissipativityError> {
    if sys.d() != 1 {
        return Err(DissipativityError::Precondition(format!(
            "expansion fits need d = 1, got {}",
            sys.d()
        )));
    }
    if direction.abs() != 1.0 {
        return Err(DissipativityError::Precondition(
            "direction must be +1 or -1".into(),
        ));
    }
    if radii.len() <= orders.len() || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0)
    {
        return Err(DissipativityError::Precondition(format!(
            "need more than {} increasing positive radii",
            orders.len()
        )));
    }
    let raw = track(sys, direction, radii)?;
    let z: Vec<Complex64> = radii
        .iter()
        .map(|r| Complex64::new(0.0, direction * r))
        .collect();
    let branches = raw
        .into_iter()
        .map(|values| {
            let w: Vec<f64> = values
                .iter()
                .map(|l| if l.norm() > 0.0 { 1.0 / l.norm() } else { 1.0 })
                .collect();
            let mut a = DMatrix::<Complex64>::from_fn(radii.len(), orders.len(), |k, c| {
                z[k].powi(orders[c]) * w[k]
            });
            let rhs = nalgebra::DVector::<Complex64>::from_fn(radii.len(), |k, _| values[k] * w[k]);
            let scale: Vec<f64> = (0..orders.len())
                .map(|c| a.column(c).norm().max(f64::MIN_POSITIVE))
                .collect();
            for (c, s) in scale.iter().enumerate() {
                a.column_mut(c).unscale_mut(*s);
            }
            let svd = a.clone().svd(true, true);
            let y = svd.solve(&rhs, 1e-14).expect("thin SVD with both factors");
            let residual = (&a * &y - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
            let coefficients = y.iter().zip(&scale).map(|(c, s)| c / s).collect();
            BranchFit {
                coefficients,
                residual,
                values,
            }
        })
        .collect();
    Ok(AsymptoticFit {
        direction,
        radii: radii.to_vec(),
        orders: orders.to_vec(),
        branches,
    })
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Columns `xi_1..xi_d, radius, re_lambda_1..n, im_lambda_1..n, max_re, theta`.
pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let d = records.first().map_or(0, |r| r.at.dim());
    let n = records
        .iter()
        .map(|r| r.eigenvalues.len())
        .max()
        .unwrap_or(0);
    let mut header: Vec<String> = (1..=d).map(|i| format!("xi_{i}")).collect();
    header.push("radius".into());
    header.extend((1..=n).map(|i| format!("re_lambda_{i}")));
    header.extend((1..=n).map(|i| format!("im_lambda_{i}")));
    header.push("max_re".into());
    header.push("theta".into());
    w.write_record(&header)?;
    for r in records {
        let mut row: Vec<String> = r.at.xi.iter().map(|x| fmt_f64(*x)).collect();
        row.push(fmt_f64(r.at.radius));
        let get = |k: usize, f: fn(&Complex64) -> f64| {
            r.eigenvalues
                .get(k)
                .map(|l| fmt_f64(f(l)))
                .unwrap_or_default()
        };
        row.extend((0..n).map(|k| get(k, |l| l.re)));
        row.extend((0..n).map(|k| get(k, |l| l.im)));
        row.push(if r.ok() {
            fmt_f64(r.max_re)
        } else {
            String::new()
        });
        row.push(r.theta.map(fmt_f64).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denselin::RMat;
    use crate::models::build_model;
    use crate::symbolkit::MultiIndex;
    use approx::assert_abs_diff_eq;

    /// `u_t = u_xx` in `d` dimensions.
    pub(crate) fn heat(d: usize) -> CoefficientSystem {
        let terms = (0..d).map(|i| {
            let mut e = vec![0; d];
            e[i] = 2;
            (MultiIndex::new(e), RMat::from_element(1, 1, -1.0))
        });
        CoefficientSystem::from_terms(1, d, None, terms).unwrap()
    }

    fn transport() -> CoefficientSystem {
        CoefficientSystem::from_terms(
            1,
            1,
            None,
            [(MultiIndex::unit(1, 0), RMat::from_element(1, 1, 1.0))],
        )
        .unwrap()
    }

    #[test]
    fn grid_shapes() {
        let g = FrequencyGrid::default_for(2).unwrap();
        assert_eq!(g.radii.len(), 97);
        assert_eq!(g.len(), 64 * 97);
        assert_abs_diff_eq!(g.radii[0], 1e-3, epsilon = 1e-18);
        assert_abs_diff_eq!(g.radii[96], 1e3, epsilon = 1e-9);
        let g3 = FrequencyGrid::default_for(3).unwrap();
        assert_eq!(g3.directions.len(), 144);
        for w in &g3.directions {
            assert_abs_diff_eq!(w.iter().map(|x| x * x).sum::<f64>(), 1.0, epsilon = 1e-14);
        }
        assert_eq!(directions(1, 7).unwrap(), vec![vec![1.0], vec![-1.0]]);
        assert!(directions(4, 10).is_err());
        assert!(log_radii(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn heat_sweep_and_type() {
        let sys = heat(1);
        let pts: Vec<_> = [1.0, 2.0, 4.0]
            .iter()
            .map(|r| FrequencyPoint::from_polar(*r, &[1.0]).unwrap())
            .collect();
        let recs = sweep_points(
            &sys,
            None,
            &CompensatorStrategy::None,
            &pts,
            &Tolerances::default(),
        );
        let got: Vec<f64> = recs.iter().map(|r| r.max_re).collect();
        assert_eq!(got, vec![-1.0, -4.0, -16.0]);
        let grid = FrequencyGrid::default_for(1).unwrap();
        let recs = sweep(
            &sys,
            None,
            &CompensatorStrategy::None,
            &grid,
            &Tolerances::default(),
        )
        .unwrap();
        assert!(certify_strict(&recs, 1e-8).unwrap().pass);
        let c = classify_type(&recs).unwrap();
        assert_eq!((c.p, c.q, c.kind), (1, 0, DecayKind::RegularityGain));
        assert_abs_diff_eq!(c.c_fit, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn transport_is_not_strict() {
        let grid = FrequencyGrid::default_for(1).unwrap();
        let recs = sweep(
            &transport(),
            None,
            &CompensatorStrategy::None,
            &grid,
            &Tolerances::default(),
        )
        .unwrap();
        let v = certify_strict(&recs, 1e-8).unwrap();
        assert!(!v.pass);
        assert_eq!(v.worst.max_re, 0.0);
        assert!(classify_type(&recs).is_err());
    }

    #[test]
    fn small_roots_keep_relative_accuracy() {
        let b = build_model("dnsf1d", None, None).unwrap();
        let p = FrequencyPoint::from_polar(1e4, &[1.0]).unwrap();
        let sp = dispersion_spectrum(&b.system, &p).unwrap();
        let slow = sp.values[0];
        assert!((slow.re * 1e8 + 0.5625).abs() < 1e-6, "{slow}");
    }

    #[test]
    fn efk_md_has_imaginary_mode() {
        for d in [2, 3] {
            let b = build_model("efk-md", None, Some(d)).unwrap();
            let grid = FrequencyGrid::new(d, 8, 1e-2, 1e2, 2).unwrap();
            let recs = sweep(
                &b.system,
                None,
                &CompensatorStrategy::None,
                &grid,
                &Tolerances::default(),
            )
            .unwrap();
            assert!(recs.iter().any(|r| r.max_re.abs() <= 1e-9));
            assert!(!certify_strict(&recs, 1e-8).unwrap().pass);
        }
    }

    #[test]
    fn ambiguous_slopes_are_flagged() {
        // Re λ = −|ξ|³ has slope 3 at both ends
        let sys = CoefficientSystem::from_terms(
            1,
            1,
            None,
            [(MultiIndex::unit(1, 0), RMat::from_element(1, 1, 1.0))],
        )
        .unwrap();
        let pts: Vec<_> = log_radii(1e-2, 1e2, 12).unwrap();
        let recs: Vec<SweepRecord> = pts
            .iter()
            .map(|&r| {
                let mut rec = record_at(
                    &sys,
                    None,
                    &CompensatorStrategy::None,
                    &FrequencyPoint::from_polar(r, &[1.0]).unwrap(),
                    &Tolerances::default(),
                );
                rec.max_re = -r.powi(3);
                rec
            })
            .collect();
        match classify_type(&recs) {
            Err(DissipativityError::Ambiguous {
                low_slope,
                high_slope,
            }) => {
                assert_abs_diff_eq!(low_slope, 3.0, epsilon = 1e-9);
                assert_abs_diff_eq!(high_slope, 3.0, epsilon = 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn heat_expansion() {
        let radii = log_radii(1e2, 1e4, 10).unwrap();
        let fit = asymptotic_fit(&heat(1), 1.0, &ASYMPTOTIC_ORDERS, &radii).unwrap();
        assert_eq!(fit.branches.len(), 1);
        let c2 = fit.coefficient(0, 2).unwrap();
        assert_abs_diff_eq!(c2.re, 1.0, epsilon = 1e-9);
        assert!(fit.coefficient(0, 3).unwrap().norm() < 1e-9);
    }

    #[test]
    fn csv_layout() {
        let sys = heat(2);
        let pts = vec![FrequencyPoint::new(vec![1e-7, 2.0]).unwrap()];
        let recs = sweep_points(
            &sys,
            None,
            &CompensatorStrategy::None,
            &pts,
            &Tolerances::default(),
        );
        let mut buf = Vec::new();
        write_sweep_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "xi_1,xi_2,radius,re_lambda_1,im_lambda_1,max_re,theta"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "1e-7");
        assert_eq!(row[0].parse::<f64>().unwrap(), 1e-7);
        assert_eq!(row[6], "");
        assert!(!text.contains('\r'));
    }
}
