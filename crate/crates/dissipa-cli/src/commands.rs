//! `sweep`, `simulate`, `asymptotics` and `list-models`.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use dissipa::dissipativity::{
    asymptotic_fit, fmt_f64, log_radii, sweep, write_sweep_csv, CompensatorStrategy, SweepRecord,
    ASYMPTOTIC_ORDERS,
};
use dissipa::evolution::{l2_decay, write_decay_csv, DecayOptions, DecaySeries, InitialData};
use dissipa::models::{describe, DnsfParams, ModelBundle, MODEL_NAMES};
use dissipa::structure::verify_symmetrizer;

use crate::config::{Format, RunConfig};
use crate::model::{grid_for, load};
use crate::{emit, Provenance, SCHEMA_VERSION};

#[derive(Serialize)]
struct SweepDoc<'a> {
    schema_version: u32,
    provenance: &'a Provenance,
    model: &'a str,
    directions: usize,
    radii: usize,
    records: &'a [SweepRecord],
}

/// Raw sweep records. A compensator margin is attached when the bundled
/// symmetrizer passes verification on the grid.
pub fn cmd_sweep(cfg: &RunConfig, prov: &Provenance) -> Result<i32, String> {
    let loaded = load(cfg)?;
    let b = &loaded.bundle;
    let grid = grid_for(cfg, b.system.d())?;
    let tols = cfg.tol.tolerances();
    let s = b
        .symmetrizer
        .as_ref()
        .filter(|s| verify_symmetrizer(&b.system, s, &grid.points(), &tols).pass);
    let strategy = match (s, &b.reference_compensator) {
        (None, _) => CompensatorStrategy::None,
        (Some(_), Some(k)) => CompensatorStrategy::DrazinOrReference(k.clone()),
        (Some(_), None) => CompensatorStrategy::Drazin,
    };
    let records = sweep(&b.system, s, &strategy, &grid, &tols).map_err(|e| e.to_string())?;
    match cfg.format_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            write_sweep_csv(&records, &mut buf).map_err(|e| e.to_string())?;
            emit(cfg, "sweep.csv", &buf)?;
        }
        Format::Json => {
            let doc = SweepDoc {
                schema_version: SCHEMA_VERSION,
                provenance: prov,
                model: &b.name,
                directions: grid.directions.len(),
                radii: grid.radii.len(),
                records: &records,
            };
            let mut text = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
            text.push('\n');
            emit(cfg, "sweep.json", text.as_bytes())?;
        }
    }
    Ok(if records.iter().all(|r| r.ok()) {
        0
    } else {
        crate::analyze::EXIT_INTERNAL
    })
}

#[derive(Serialize)]
struct SimulateDoc<'a> {
    schema_version: u32,
    provenance: &'a Provenance,
    model: &'a str,
    initial_data: &'a InitialData,
    options: &'a DecayOptions,
    series: &'a DecaySeries,
}

pub fn default_times() -> Vec<f64> {
    let mut t = vec![0.0];
    t.extend(log_radii(1.0, 1e4, 8).expect("fixed range"));
    t
}

pub fn cmd_simulate(cfg: &RunConfig, prov: &Provenance) -> Result<i32, String> {
    let loaded = load(cfg)?;
    let b = &loaded.bundle;
    let n = b.system.n();
    let sc = &cfg.simulate;
    let weights = if sc.weights.is_empty() {
        vec![1.0; n]
    } else {
        sc.weights.clone()
    };
    let init = InitialData {
        profile: sc.profile,
        amplitude: sc.amplitude,
        width: sc.width,
        weights,
    };
    let times = if sc.times.is_empty() {
        default_times()
    } else {
        sc.times.clone()
    };
    let opts = DecayOptions {
        derivative: sc.ell,
        weight_first: sc.weight_first,
        r_min: sc.r_min,
        per_decade: sc.per_decade,
        angles: sc.angles,
        ..DecayOptions::default()
    };
    let series = match l2_decay(&b.system, &init, &times, &opts) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("simulate: {e}");
            return Ok(crate::analyze::EXIT_INTERNAL);
        }
    };
    let doc = SimulateDoc {
        schema_version: SCHEMA_VERSION,
        provenance: prov,
        model: &b.name,
        initial_data: &init,
        options: &opts,
        series: &series,
    };
    let mut json = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
    json.push('\n');
    match cfg.format_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            write_decay_csv(&series, &mut buf).map_err(|e| e.to_string())?;
            emit(cfg, "decay.csv", &buf)?;
            if cfg.out.is_some() {
                emit(cfg, "simulate.json", json.as_bytes())?;
            }
            eprintln!(
                "fitted exponent {} (grid-doubling discrepancy {:.3e})",
                fmt_f64(series.exponent),
                series.discrepancy
            );
        }
        Format::Json => emit(cfg, "simulate.json", json.as_bytes())?,
    }
    Ok(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRow {
    pub branch: usize,
    pub order: i32,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormRow {
    pub quantity: String,
    pub branch: usize,
    pub order: i32,
    pub closed_form: f64,
    pub fitted: f64,
    pub rel_error: f64,
}

#[derive(Serialize)]
struct AsymptoticsDoc<'a> {
    schema_version: u32,
    provenance: &'a Provenance,
    model: &'a str,
    direction: f64,
    radii: usize,
    residuals: Vec<f64>,
    coefficients: &'a [CoefficientRow],
    closed_forms: &'a [ClosedFormRow],
}

fn row(quantity: &str, branch: usize, order: i32, closed: f64, fitted: Complex64) -> ClosedFormRow {
    let rel_error = (fitted - closed).norm() / closed.abs().max(f64::MIN_POSITIVE);
    ClosedFormRow {
        quantity: quantity.into(),
        branch,
        order,
        closed_form: closed,
        fitted: fitted.re,
        rel_error,
    }
}

/// Closed forms to compare against: the dispersive fluid expansion, or the
/// exact polynomial of a scalar equation.
fn closed_forms(
    b: &ModelBundle,
    fit: &dissipa::dissipativity::AsymptoticFit,
) -> Vec<ClosedFormRow> {
    let mut rows = Vec::new();
    if b.name == "dnsf1d" {
        let Ok(p) = toml::from_str::<DnsfParams>(&b.params) else {
            return rows;
        };
        let c3 = 8.0 / (9.0 * p.rho) * p.tau4 * (1.5 / p.theta).sqrt();
        let c2 = (2.0 * p.mu + p.alpha) / (3.0 * p.rho);
        let slow_reference = 9.0 / 8.0 * p.rho * p.alpha * p.theta * p.theta / p.tau4;
        let slow_derived = 9.0 / 16.0 * p.rho * p.alpha * p.theta * p.theta / (p.tau4 * p.tau4);
        let coef = |k: usize, n: i32| {
            fit.coefficient(k, n)
                .unwrap_or(Complex64::new(f64::NAN, 0.0))
        };
        // fast pair: the two largest cubic coefficients; slow root: the smallest |λ|
        let mut fast: Vec<usize> = (0..fit.branches.len()).collect();
        fast.sort_by(|&a, &b| coef(b, 3).norm().total_cmp(&coef(a, 3).norm()));
        for &k in fast.iter().take(2) {
            let f3 = coef(k, 3);
            rows.push(row("lambda3_fast", k, 3, c3.copysign(f3.re), f3));
            rows.push(row("lambda2_fast", k, 2, c2, coef(k, 2)));
        }
        if let Some(&slow) = fast.get(2) {
            rows.push(row(
                "lambda-2_slow_reference",
                slow,
                -2,
                slow_reference,
                coef(slow, -2),
            ));
            rows.push(row(
                "lambda-2_slow_derived",
                slow,
                -2,
                slow_derived,
                coef(slow, -2),
            ));
        }
    } else if b.system.n() == 1 {
        // λ(ξ) = −Σ_k L^k (iξ)^k / A⁰ exactly
        let mass = b.system.mass()[(0, 0)];
        for &n in &fit.orders {
            let exact = if n >= 0 {
                b.system
                    .coeffs()
                    .iter()
                    .filter(|(a, _)| a.order() as i32 == n)
                    .map(|(_, l)| -l[(0, 0)] / mass)
                    .sum::<f64>()
                    + 0.0
            } else {
                0.0
            };
            let fitted = fit
                .coefficient(0, n)
                .unwrap_or(Complex64::new(f64::NAN, 0.0));
            let mut r = row("scalar_exact", 0, n, exact, fitted);
            if exact == 0.0 {
                r.rel_error = fitted.norm();
            }
            rows.push(r);
        }
    }
    rows
}

pub fn cmd_asymptotics(cfg: &RunConfig, prov: &Provenance) -> Result<i32, String> {
    let loaded = load(cfg)?;
    let b = &loaded.bundle;
    if b.system.d() != 1 {
        return Err(format!(
            "asymptotics needs a one-dimensional model, `{}` has d = {}",
            b.name,
            b.system.d()
        ));
    }
    let a = &cfg.asymptotics;
    let radii = log_radii(a.r_min, a.r_max, a.per_decade).map_err(|e| e.to_string())?;
    let fit = match asymptotic_fit(&b.system, a.direction, &ASYMPTOTIC_ORDERS, &radii) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("asymptotics: {e}");
            return Ok(crate::analyze::EXIT_INTERNAL);
        }
    };
    let mut coefficients = Vec::new();
    for (k, br) in fit.branches.iter().enumerate() {
        for (c, &n) in fit.orders.iter().enumerate() {
            coefficients.push(CoefficientRow {
                branch: k,
                order: n,
                re: br.coefficients[c].re,
                im: br.coefficients[c].im,
            });
        }
    }
    let closed = closed_forms(b, &fit);
    match cfg.format_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            {
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(&mut buf);
                w.write_record([
                    "quantity",
                    "branch",
                    "order",
                    "closed_form",
                    "fitted_re",
                    "fitted_im",
                    "rel_error",
                ])
                .map_err(|e| e.to_string())?;
                for r in &coefficients {
                    w.write_record([
                        "coefficient".to_string(),
                        r.branch.to_string(),
                        r.order.to_string(),
                        String::new(),
                        fmt_f64(r.re),
                        fmt_f64(r.im),
                        String::new(),
                    ])
                    .map_err(|e| e.to_string())?;
                }
                for r in &closed {
                    let im = fit
                        .coefficient(r.branch, r.order)
                        .map(|c| c.im)
                        .unwrap_or(f64::NAN);
                    w.write_record([
                        r.quantity.clone(),
                        r.branch.to_string(),
                        r.order.to_string(),
                        fmt_f64(r.closed_form),
                        fmt_f64(r.fitted),
                        fmt_f64(im),
                        fmt_f64(r.rel_error),
                    ])
                    .map_err(|e| e.to_string())?;
                }
                w.flush().map_err(|e| e.to_string())?;
            }
            emit(cfg, "asymptotics.csv", &buf)?;
        }
        Format::Json => {
            let doc = AsymptoticsDoc {
                schema_version: SCHEMA_VERSION,
                provenance: prov,
                model: &b.name,
                direction: fit.direction,
                radii: fit.radii.len(),
                residuals: fit.branches.iter().map(|b| b.residual).collect(),
                coefficients: &coefficients,
                closed_forms: &closed,
            };
            let mut text = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
            text.push('\n');
            emit(cfg, "asymptotics.json", text.as_bytes())?;
        }
    }
    Ok(0)
}

pub fn cmd_list_models(format: Format) -> Result<i32, String> {
    let mut out = std::io::stdout().lock();
    match format {
        Format::Csv => {
            writeln!(out, "name,description").map_err(|e| e.to_string())?;
            for name in MODEL_NAMES {
                writeln!(out, "{name},\"{}\"", describe(name).unwrap_or_default())
                    .map_err(|e| e.to_string())?;
            }
        }
        Format::Json => {
            let list: Vec<_> = MODEL_NAMES
                .iter()
                .map(|n| serde_json::json!({ "name": n, "description": describe(n) }))
                .collect();
            let text = serde_json::to_string_pretty(
                &serde_json::json!({ "schema_version": SCHEMA_VERSION, "models": list }),
            )
            .map_err(|e| e.to_string())?;
            writeln!(out, "{text}").map_err(|e| e.to_string())?;
        }
    }
    Ok(0)
}
