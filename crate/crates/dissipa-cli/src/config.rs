//! Run configuration: TOML file, command-line overrides, canonical hash.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dissipa::evolution::Profile;
use dissipa::structure::Tolerances;

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
    /// Model-dependent default (2, 64 or 144 by dimension) when absent.
    pub directions: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            r_min: 1e-3,
            r_max: 1e3,
            per_decade: 16,
            directions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TolConfig {
    /// Strictness margin `max Re λ < −strict·|ξ|²/(1+|ξ|²)²`.
    pub strict: f64,
    pub coupling_rel: f64,
    pub rel_gap: f64,
    pub rank_rel: f64,
    pub symmetry: f64,
    pub gap_floor: f64,
    pub identity: f64,
}

impl Default for TolConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        TolConfig {
            strict: 1e-8,
            coupling_rel: t.coupling_rel,
            rel_gap: t.rel_gap,
            rank_rel: t.rank_rel,
            symmetry: t.symmetry,
            gap_floor: t.gap_floor,
            identity: t.identity,
        }
    }
}

impl TolConfig {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            rel_gap: self.rel_gap,
            rank_rel: self.rank_rel,
            coupling_rel: self.coupling_rel,
            symmetry: self.symmetry,
            gap_floor: self.gap_floor,
            identity: self.identity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Empty means `0` followed by `1 … 1e4` at 8 per decade.
    pub times: Vec<f64>,
    pub ell: u32,
    pub profile: Profile,
    pub amplitude: f64,
    pub width: f64,
    /// Component weights; all ones when empty.
    pub weights: Vec<f64>,
    pub weight_first: bool,
    pub r_min: f64,
    pub per_decade: usize,
    pub angles: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            times: Vec::new(),
            ell: 0,
            profile: Profile::Gaussian,
            amplitude: 1.0,
            width: 1.0,
            weights: Vec::new(),
            weight_first: true,
            r_min: 1e-6,
            per_decade: 12,
            angles: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticsConfig {
    pub direction: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
}

impl Default for AsymptoticsConfig {
    fn default() -> Self {
        AsymptoticsConfig {
            direction: 1.0,
            r_min: 1e2,
            r_max: 1e4,
            per_decade: 20,
        }
    }
}

/// Effective configuration. Its canonical TOML form (without `out`) is
/// what the report hash covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    pub d: Option<usize>,
    pub seed: u64,
    pub format: Option<Format>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub params: toml::Table,
    pub grid: GridConfig,
    pub tol: TolConfig,
    pub simulate: SimulateConfig,
    pub asymptotics: AsymptoticsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: String::new(),
            d: None,
            seed: DEFAULT_SEED,
            format: None,
            out: None,
            params: toml::Table::new(),
            grid: GridConfig::default(),
            tol: TolConfig::default(),
            simulate: SimulateConfig::default(),
            asymptotics: AsymptoticsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct RunArgs {
    /// Catalog name or path to a system document.
    #[arg(value_name = "MODEL")]
    pub model_arg: Option<String>,
    /// Same as the positional MODEL.
    #[arg(long = "model", value_name = "MODEL", conflicts_with = "model_arg")]
    pub model: Option<String>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; results go to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format (default depends on the subcommand).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Seed for feasibility sampling and random draws.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Space dimension for `efk-md`.
    #[arg(long)]
    pub d: Option<usize>,
    /// Model parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Smallest radius (default 1e-3).
    #[arg(long = "grid.r_min")]
    pub grid_r_min: Option<f64>,
    /// Largest radius (default 1e3).
    #[arg(long = "grid.r_max")]
    pub grid_r_max: Option<f64>,
    /// Radii per decade (default 16).
    #[arg(long = "grid.per_decade")]
    pub grid_per_decade: Option<usize>,
    /// Number of directions (default 2, 64 or 144 by dimension).
    #[arg(long = "grid.directions")]
    pub grid_directions: Option<usize>,
    /// Strictness margin against |ξ|²/(1+|ξ|²)² (default 1e-8).
    #[arg(long = "tol.strict")]
    pub tol_strict: Option<f64>,
    /// Coupling threshold per dimension, relative to ‖B_S‖.
    #[arg(long = "tol.coupling_rel")]
    pub tol_coupling_rel: Option<f64>,
    /// Eigenvalue clustering threshold.
    #[arg(long = "tol.rel_gap")]
    pub tol_rel_gap: Option<f64>,
    /// Kernel threshold per dimension, relative to ‖M‖.
    #[arg(long = "tol.rank_rel")]
    pub tol_rank_rel: Option<f64>,
    /// Relative symmetry tolerance for symmetrizer checks.
    #[arg(long = "tol.symmetry")]
    pub tol_symmetry: Option<f64>,
    /// Minimum cluster separation for the Drazin compensator.
    #[arg(long = "tol.gap_floor")]
    pub tol_gap_floor: Option<f64>,
    /// Commutator identity bound for the Drazin compensator.
    #[arg(long = "tol.identity")]
    pub tol_identity: Option<f64>,
    /// Derivative order for `simulate`.
    #[arg(long)]
    pub ell: Option<u32>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                toml::from_str::<RunConfig>(&text)
                    .map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(m) = self.model.clone().or_else(|| self.model_arg.clone()) {
            cfg.model = m;
        }
        if cfg.model.is_empty() {
            return Err("no model given".into());
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if self.format.is_some() {
            cfg.format = self.format;
        }
        set(&mut cfg.seed, self.seed);
        if self.d.is_some() {
            cfg.d = self.d;
        }
        for kv in &self.params {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| format!("--param expects KEY=VALUE, got `{kv}`"))?;
            let doc = format!("x = {}", v.trim());
            let value = toml::from_str::<toml::Table>(&doc)
                .map_err(|e| format!("--param {kv}: {e}"))?
                .remove("x")
                .expect("single key");
            cfg.params.insert(k.trim().to_string(), value);
        }
        set(&mut cfg.grid.r_min, self.grid_r_min);
        set(&mut cfg.grid.r_max, self.grid_r_max);
        set(&mut cfg.grid.per_decade, self.grid_per_decade);
        if self.grid_directions.is_some() {
            cfg.grid.directions = self.grid_directions;
        }
        set(&mut cfg.tol.strict, self.tol_strict);
        set(&mut cfg.tol.coupling_rel, self.tol_coupling_rel);
        set(&mut cfg.tol.rel_gap, self.tol_rel_gap);
        set(&mut cfg.tol.rank_rel, self.tol_rank_rel);
        set(&mut cfg.tol.symmetry, self.tol_symmetry);
        set(&mut cfg.tol.gap_floor, self.tol_gap_floor);
        set(&mut cfg.tol.identity, self.tol_identity);
        set(&mut cfg.simulate.ell, self.ell);
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        let t = &self.tol;
        for (name, v) in [
            ("tol.strict", t.strict),
            ("tol.coupling_rel", t.coupling_rel),
            ("tol.rel_gap", t.rel_gap),
            ("tol.rank_rel", t.rank_rel),
            ("tol.symmetry", t.symmetry),
            ("tol.gap_floor", t.gap_floor),
            ("tol.identity", t.identity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        let g = &self.grid;
        if !(g.r_min > 0.0 && g.r_min < g.r_max && g.r_max.is_finite()) {
            return Err(format!(
                "grid needs 0 < r_min < r_max (got {}, {})",
                g.r_min, g.r_max
            ));
        }
        if g.per_decade == 0 || g.directions == Some(0) {
            return Err("grid.per_decade and grid.directions must be positive".into());
        }
        let a = &self.asymptotics;
        if !(a.r_min > 0.0 && a.r_min < a.r_max) || a.per_decade == 0 {
            return Err("asymptotics needs 0 < r_min < r_max and per_decade > 0".into());
        }
        Ok(())
    }

    /// Canonical TOML of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Parameter overrides as a TOML document, `None` when empty.
    pub fn params_doc(&self) -> Option<String> {
        if self.params.is_empty() {
            None
        } else {
            Some(toml::to_string(&self.params).expect("table serializes"))
        }
    }

    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_ignores_out() {
        let mut a = RunConfig {
            model: "nsk2d".into(),
            ..Default::default()
        };
        let h = a.hash();
        assert_eq!(h.len(), 64);
        a.out = Some("/tmp/x".into());
        assert_eq!(a.hash(), h);
        a.seed += 1;
        assert_ne!(a.hash(), h);
    }

    #[test]
    fn file_round_trip() {
        let text = "model = \"efk-md\"\nd = 3\n[grid]\nr_min = 0.01\n[params]\nk = 2.0\n";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.d, Some(3));
        assert_eq!(cfg.grid.r_min, 0.01);
        assert_eq!(cfg.grid.r_max, 1e3);
        assert!(cfg.params_doc().unwrap().contains("k = 2.0"));
        let back: RunConfig = toml::from_str(&cfg.canonical()).unwrap();
        assert_eq!(back, cfg);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig {
            model: "x".into(),
            ..Default::default()
        };
        assert!(c.validate().is_ok());
        c.tol.strict = 0.0;
        assert!(c.validate().is_err());
        c.tol.strict = 1e-8;
        c.grid.r_max = c.grid.r_min;
        assert!(c.validate().is_err());
    }
}
