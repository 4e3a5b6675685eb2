//! `dissipa` command-line tool.

mod analyze;
mod commands;
mod config;
mod model;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{Format, RunArgs, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    fn of(cfg: &RunConfig) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "dissipa",
    version,
    about = "Dissipative-structure analysis of linear evolution systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Symmetrizer, coupling, compensator, strictness and decay type.
    Analyze(RunArgs),
    /// Dispersion roots and compensator margins on the frequency grid.
    Sweep(RunArgs),
    /// L² norm decay of a radial initial datum.
    Simulate(RunArgs),
    /// High-frequency expansion of the roots of a one-dimensional model.
    Asymptotics(RunArgs),
    /// Catalog names and descriptions.
    ListModels {
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

/// Write `bytes` to `<out>/<name>`, or to stdout when no directory is set.
pub fn emit(cfg: &RunConfig, name: &str, bytes: &[u8]) -> Result<(), String> {
    use std::io::Write;
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| e.to_string())
        }
    }
}

fn init_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("DISSIPA_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| format!("DISSIPA_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            return Err("DISSIPA_THREADS must be positive".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run_analyze(cfg: &RunConfig) -> Result<i32, String> {
    let report = analyze::run(cfg, Provenance::of(cfg))?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    text.push('\n');
    emit(cfg, "report.json", text.as_bytes())?;
    if cfg.out.is_some() {
        eprintln!(
            "{}: {} (exit {})",
            report.model.name, report.status, report.exit_code
        );
    }
    Ok(report.exit_code)
}

fn run(cli: Cli) -> Result<i32, String> {
    init_threads()?;
    let with = |args: &RunArgs, f: fn(&RunConfig, &Provenance) -> Result<i32, String>| {
        let cfg = args.resolve()?;
        f(&cfg, &Provenance::of(&cfg))
    };
    match cli.command {
        Command::Analyze(args) => run_analyze(&args.resolve()?),
        Command::Sweep(args) => with(&args, commands::cmd_sweep),
        Command::Simulate(args) => with(&args, commands::cmd_simulate),
        Command::Asymptotics(args) => with(&args, commands::cmd_asymptotics),
        Command::ListModels { format } => commands::cmd_list_models(format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors must not collide with the verdict codes
            return if e.use_stderr() {
                ExitCode::from(analyze::EXIT_INTERNAL as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("dissipa: {e}");
            ExitCode::from(analyze::EXIT_INTERNAL as u8)
        }
    }
}
