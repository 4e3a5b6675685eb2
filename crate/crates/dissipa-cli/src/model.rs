//! Model lookup: catalog names or system documents on disk.

use std::path::Path;

use dissipa::dissipativity::{FrequencyGrid, DEFAULT_DIRECTIONS_2D, DEFAULT_DIRECTIONS_3D};
use dissipa::models::{build_model, describe, Expected, ModelBundle, MODEL_NAMES};
use dissipa::structure::{friedrichs_feasibility, Feasibility, SymmetrizerFn};
use dissipa::CoefficientSystem;

use crate::config::RunConfig;

pub struct Loaded {
    pub bundle: ModelBundle,
    /// Catalog verdicts; `None` for documents.
    pub expected: Option<Expected>,
    pub source: String,
}

/// A catalog name, or a path to a system document. Documents get the
/// constant Friedrichs witness as symmetrizer when one exists.
pub fn load(cfg: &RunConfig) -> Result<Loaded, String> {
    let name = cfg.model.as_str();
    if MODEL_NAMES.contains(&name) {
        let bundle =
            build_model(name, cfg.params_doc().as_deref(), cfg.d).map_err(|e| e.to_string())?;
        let expected = Some(bundle.expected);
        return Ok(Loaded {
            bundle,
            expected,
            source: describe(name).unwrap_or_default().to_string(),
        });
    }
    let path = Path::new(name);
    if !path.is_file() {
        return Err(format!(
            "unknown model `{name}` (not a catalog name or a readable file)"
        ));
    }
    if !cfg.params.is_empty() {
        return Err("parameter overrides apply only to catalog models".into());
    }
    let text = std::fs::read_to_string(path).map_err(|e| format!("{name}: {e}"))?;
    let system = CoefficientSystem::from_document(&text).map_err(|e| format!("{name}: {e}"))?;
    let cert = friedrichs_feasibility(&system, cfg.seed);
    let symmetrizer = cert
        .witness
        .clone()
        .map(|w| SymmetrizerFn::constant("Friedrichs witness", w));
    let bundle = ModelBundle {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| name.to_string()),
        system,
        symmetrizer,
        reference_compensator: None,
        expected: Expected {
            coupled: None,
            decay_type: None,
            friedrichs: Feasibility::Unknown,
            symbol_symmetrizable: cert.verdict == Feasibility::Feasible,
        },
        params: String::new(),
    };
    Ok(Loaded {
        bundle,
        expected: None,
        source: "system document".into(),
    })
}

pub fn grid_for(cfg: &RunConfig, d: usize) -> Result<FrequencyGrid, String> {
    let dirs = cfg.grid.directions.unwrap_or(match d {
        1 => 2,
        3 => DEFAULT_DIRECTIONS_3D,
        _ => DEFAULT_DIRECTIONS_2D,
    });
    FrequencyGrid::new(d, dirs, cfg.grid.r_min, cfg.grid.r_max, cfg.grid.per_decade)
        .map_err(|e| e.to_string())
}
