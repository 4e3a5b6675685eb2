//! The `analyze` pipeline and its report.

use rayon::prelude::*;
use serde::Serialize;

use dissipa::dissipativity::{
    certify_strict, classify_type, sweep, CompensatorSource, CompensatorStrategy,
    DecayClassification, SweepRecord,
};
use dissipa::models::{qhd_full_threshold, DecayType, Expected, QhdFullParams};
use dissipa::structure::{
    friedrichs_feasibility, genuine_coupling, pointwise_symmetrizer_feasibility, symmetrize,
    verify_symmetrizer, Feasibility, FeasibilityCertificate,
};
use dissipa::FrequencyPoint;

use crate::config::RunConfig;
use crate::model::{grid_for, load};
use crate::Provenance;

pub const EXIT_OK: i32 = 0;
pub const EXIT_STRICT: i32 = 2;
pub const EXIT_COUPLING: i32 = 3;
pub const EXIT_SYMMETRIZER: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Serialize)]
pub struct ModelInfo {
    pub name: String,
    pub source: String,
    pub n: usize,
    pub d: usize,
    pub m: u32,
    pub params: String,
}

#[derive(Debug, Serialize)]
pub struct GridInfo {
    pub directions: usize,
    pub radii: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

#[derive(Debug, Serialize)]
pub struct SymmetrizerFailureInfo {
    pub xi: Vec<f64>,
    pub check: String,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct SymmetrizerVerdict {
    /// `verified`, `failed` or `absent`.
    pub status: String,
    pub label: Option<String>,
    pub max_asym_sa: Option<f64>,
    pub min_eig_s: Option<f64>,
    pub failure: Option<SymmetrizerFailureInfo>,
}

#[derive(Debug, Serialize)]
pub struct PointwiseEntry {
    pub radius: f64,
    pub verdict: Feasibility,
    pub forced_constraints: String,
}

/// Pointwise symmetrizer feasibility along one direction.
#[derive(Debug, Serialize)]
pub struct PointwiseScan {
    pub direction: Vec<f64>,
    pub entries: Vec<PointwiseEntry>,
    /// Smallest sampled radius from which every sample is infeasible.
    pub infeasible_from: Option<f64>,
    /// Closed-form threshold when the model provides one.
    pub threshold: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct CouplingWitness {
    pub xi: Vec<f64>,
    pub mu: f64,
    pub psi: Vec<f64>,
    pub b_s_psi_norm: f64,
    pub a_s_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct CouplingSummary {
    pub coupled: bool,
    pub points: usize,
    pub uncoupled_points: usize,
    pub min_theta_tilde: f64,
    pub witness: Option<CouplingWitness>,
}

#[derive(Debug, Serialize)]
pub struct ProfileEntry {
    pub radius: f64,
    pub min_theta: f64,
}

#[derive(Debug, Serialize)]
pub struct CompensatorSummary {
    pub min_theta: f64,
    pub min_theta_at: Vec<f64>,
    pub drazin_points: usize,
    pub reference_points: usize,
    pub missing_points: usize,
    pub profile: Vec<ProfileEntry>,
}

#[derive(Debug, Serialize)]
pub struct StrictSummary {
    pub pass: bool,
    pub tol: f64,
    pub violations: usize,
    pub worst_xi: Vec<f64>,
    pub worst_max_re: f64,
}

#[derive(Debug, Serialize)]
pub struct ClassificationSummary {
    pub result: Option<DecayClassification>,
    pub error: Option<String>,
    pub expected: Option<DecayType>,
    pub matches_expected: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct Verdicts {
    pub symmetrizer: SymmetrizerVerdict,
    pub friedrichs: FeasibilityCertificate,
    pub pointwise: Option<PointwiseScan>,
    pub coupling: Option<CouplingSummary>,
    pub strict: Option<StrictSummary>,
    pub classification: Option<ClassificationSummary>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub model: ModelInfo,
    pub grid: GridInfo,
    pub verdicts: Verdicts,
    pub compensator: Option<CompensatorSummary>,
    pub expected: Option<Expected>,
    pub errors: Vec<String>,
    pub status: String,
    pub exit_code: i32,
}

fn raise(code: i32, exit: &mut i32) {
    *exit = (*exit).max(code);
}

fn status_of(code: i32) -> &'static str {
    match code {
        EXIT_OK => "ok",
        EXIT_STRICT => "strict-dissipativity-failed",
        EXIT_COUPLING => "coupling-failed",
        EXIT_SYMMETRIZER => "symmetrizability-failed",
        _ => "internal-error",
    }
}

fn pointwise_scan(
    sys: &dissipa::CoefficientSystem,
    direction: &[f64],
    radii: &[f64],
    seed: u64,
    threshold: Option<f64>,
) -> PointwiseScan {
    let entries: Vec<PointwiseEntry> = radii
        .par_iter()
        .map(|&r| {
            let p = FrequencyPoint::from_polar(r, direction).expect("grid node");
            let c = pointwise_symmetrizer_feasibility(sys, &p, seed);
            PointwiseEntry {
                radius: r,
                verdict: c.verdict,
                forced_constraints: c.forced_constraints,
            }
        })
        .collect();
    let mut infeasible_from = None;
    for e in entries.iter().rev() {
        if e.verdict == Feasibility::Infeasible {
            infeasible_from = Some(e.radius);
        } else {
            break;
        }
    }
    PointwiseScan {
        direction: direction.to_vec(),
        entries,
        infeasible_from,
        threshold,
    }
}

fn compensator_summary(records: &[SweepRecord], radii: &[f64]) -> CompensatorSummary {
    let mut min_theta = f64::INFINITY;
    let mut min_theta_at = Vec::new();
    let (mut drazin, mut reference, mut missing) = (0, 0, 0);
    let mut per_radius = vec![f64::INFINITY; radii.len()];
    for (k, r) in records.iter().enumerate() {
        match r.compensator {
            Some(CompensatorSource::Drazin) => drazin += 1,
            Some(CompensatorSource::Reference) => reference += 1,
            None => missing += 1,
        }
        if let Some(t) = r.theta {
            if t < min_theta {
                min_theta = t;
                min_theta_at = r.at.xi.clone();
            }
            let i = k % radii.len();
            per_radius[i] = per_radius[i].min(t);
        }
    }
    let profile = radii
        .iter()
        .zip(per_radius)
        .map(|(&radius, min_theta)| ProfileEntry { radius, min_theta })
        .collect();
    CompensatorSummary {
        min_theta,
        min_theta_at,
        drazin_points: drazin,
        reference_points: reference,
        missing_points: missing,
        profile,
    }
}

/// Run the full pipeline. Configuration and model errors are returned as
/// `Err`; numerical failures end up in the report with exit code 5.
pub fn run(cfg: &RunConfig, provenance: Provenance) -> Result<Report, String> {
    let loaded = load(cfg)?;
    let b = &loaded.bundle;
    let sys = &b.system;
    let grid = grid_for(cfg, sys.d())?;
    let points = grid.points();
    let tols = cfg.tol.tolerances();
    let mut errors = Vec::new();
    let mut exit = EXIT_OK;

    let friedrichs = friedrichs_feasibility(sys, cfg.seed);
    if let Some(e) = &loaded.expected {
        if e.friedrichs != Feasibility::Unknown && e.friedrichs != friedrichs.verdict {
            errors.push(format!(
                "Friedrichs verdict {:?}, expected {:?}",
                friedrichs.verdict, e.friedrichs
            ));
            raise(EXIT_SYMMETRIZER, &mut exit);
        }
    }

    let mut symmetrizer_ok = false;
    let sym_verdict = match &b.symmetrizer {
        None => SymmetrizerVerdict {
            status: "absent".into(),
            label: None,
            max_asym_sa: None,
            min_eig_s: None,
            failure: None,
        },
        Some(s) => {
            let rep = verify_symmetrizer(sys, s, &points, &tols);
            symmetrizer_ok = rep.pass;
            SymmetrizerVerdict {
                status: if rep.pass { "verified" } else { "failed" }.into(),
                label: Some(s.label.clone()),
                max_asym_sa: Some(rep.max_asym_sa),
                min_eig_s: Some(rep.min_eig_s),
                failure: rep.failure.map(|f| SymmetrizerFailureInfo {
                    xi: f.xi,
                    check: f.check,
                    value: f.value,
                }),
            }
        }
    };
    let pointwise = if symmetrizer_ok {
        None
    } else {
        raise(EXIT_SYMMETRIZER, &mut exit);
        let threshold = if b.name == "qhd-full" {
            toml::from_str::<QhdFullParams>(&b.params)
                .ok()
                .and_then(|p| qhd_full_threshold(&p))
        } else {
            None
        };
        Some(pointwise_scan(
            sys,
            &grid.directions[0],
            &grid.radii,
            cfg.seed,
            threshold,
        ))
    };

    let mut coupling = None;
    let mut compensator = None;
    let mut strategy = CompensatorStrategy::None;
    if symmetrizer_ok {
        let s = b.symmetrizer.as_ref().expect("verified symmetrizer");
        let verdicts: Vec<Result<_, String>> = points
            .par_iter()
            .map(|p| {
                let pair = symmetrize(sys, s, p, &tols).map_err(|e| e.to_string())?;
                let v = genuine_coupling(&pair, &tols).map_err(|e| e.to_string())?;
                Ok((pair, v))
            })
            .collect();
        let mut summary = CouplingSummary {
            coupled: true,
            points: points.len(),
            uncoupled_points: 0,
            min_theta_tilde: f64::INFINITY,
            witness: None,
        };
        for r in verdicts {
            match r {
                Ok((pair, v)) => {
                    summary.min_theta_tilde = summary.min_theta_tilde.min(v.theta_tilde);
                    if !v.coupled {
                        summary.coupled = false;
                        summary.uncoupled_points += 1;
                        if summary.witness.is_none() {
                            if let Some((mu, psi)) = v.witness {
                                summary.witness = Some(CouplingWitness {
                                    xi: pair.at.xi.clone(),
                                    mu,
                                    b_s_psi_norm: (&pair.b_s * &psi).norm(),
                                    a_s_residual: (&pair.a_s * &psi - &psi * mu).norm(),
                                    psi: psi.iter().copied().collect(),
                                });
                            }
                        }
                    }
                }
                Err(e) => {
                    if errors.len() < 8 {
                        errors.push(format!("coupling: {e}"));
                    }
                    raise(EXIT_INTERNAL, &mut exit);
                }
            }
        }
        if !summary.coupled {
            raise(EXIT_COUPLING, &mut exit);
        }
        coupling = Some(summary);
        strategy = match &b.reference_compensator {
            Some(k) => CompensatorStrategy::DrazinOrReference(k.clone()),
            None => CompensatorStrategy::Drazin,
        };
    }

    let symmetrizer = if symmetrizer_ok {
        b.symmetrizer.as_ref()
    } else {
        None
    };
    let records = sweep(sys, symmetrizer, &strategy, &grid, &tols).map_err(|e| e.to_string())?;
    let failed = records.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        errors.push(format!("{failed} grid points without dispersion roots"));
        raise(EXIT_INTERNAL, &mut exit);
    }
    if symmetrizer_ok {
        compensator = Some(compensator_summary(&records, &grid.radii));
    }

    let mut strict = None;
    let mut classification = None;
    match certify_strict(&records, cfg.tol.strict) {
        Ok(v) => {
            if !v.pass {
                raise(EXIT_STRICT, &mut exit);
            }
            strict = Some(StrictSummary {
                pass: v.pass,
                tol: cfg.tol.strict,
                violations: v.violations,
                worst_xi: v.worst.at.xi.clone(),
                worst_max_re: v.worst.max_re,
            });
            if v.pass {
                let expected = loaded.expected.and_then(|e| e.decay_type);
                let c = match classify_type(&records) {
                    Ok(c) => {
                        let matches = expected.map(|e| e.p == c.p && e.q == c.q);
                        ClassificationSummary {
                            result: Some(c),
                            error: None,
                            expected,
                            matches_expected: matches,
                        }
                    }
                    Err(e) => ClassificationSummary {
                        result: None,
                        error: Some(e.to_string()),
                        expected,
                        matches_expected: expected.map(|_| false),
                    },
                };
                if c.result.is_none() || c.matches_expected == Some(false) {
                    raise(EXIT_STRICT, &mut exit);
                }
                classification = Some(c);
            }
        }
        Err(e) => {
            errors.push(e.to_string());
            raise(EXIT_INTERNAL, &mut exit);
        }
    }

    Ok(Report {
        schema_version: crate::SCHEMA_VERSION,
        provenance,
        model: ModelInfo {
            name: b.name.clone(),
            source: loaded.source.clone(),
            n: sys.n(),
            d: sys.d(),
            m: sys.m(),
            params: b.params.clone(),
        },
        grid: GridInfo {
            directions: grid.directions.len(),
            radii: grid.radii.len(),
            r_min: grid.radii[0],
            r_max: grid.radii[grid.radii.len() - 1],
            points: points.len(),
        },
        verdicts: Verdicts {
            symmetrizer: sym_verdict,
            friedrichs,
            pointwise,
            coupling,
            strict,
            classification,
        },
        compensator,
        expected: loaded.expected,
        errors,
        status: status_of(exit).into(),
        exit_code: exit,
    })
}
