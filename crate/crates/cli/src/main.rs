mod commands;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use spdelab_core::{Error, ScenarioConfig};

use crate::output::{Provenance, Sink, TOOL, VERSION};

#[derive(Parser)]
#[command(
    name = "spdelab",
    version,
    about = "Reproducible experiments for degenerate delay SPDE models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the SEED environment variable and the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Structural assumptions, drift moduli and delay-measure domination.
    Validate,
    /// Sample paths and the strong-order study of the mild scheme.
    Simulate,
    /// Plan targets on random draws and E R(T) = 1.
    CouplingCheck,
    /// Log and power Harnack checks with law transfer.
    Harnack,
    /// Shift-Harnack checks; needs an undelayed model.
    ShiftHarnack,
    /// Grid solver for the backward equation and its decay table.
    Zvonkin,
    /// Pathwise Bihari bound with a falsification control.
    Bihari,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Simulate => "simulate",
            Command::CouplingCheck => "coupling-check",
            Command::Harnack => "harnack",
            Command::ShiftHarnack => "shift-harnack",
            Command::Zvonkin => "zvonkin",
            Command::Bihari => "bihari",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(std::io::Error),
    Parse(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl CliError {
    /// Numerical breakdowns count as failed verifications; everything else
    /// is a configuration or assumption problem.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::NonFinite { .. } | Error::NoConvergence { .. }) => 1,
            CliError::Io(_) => 1,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => match e {
                Error::AssumptionViolation { .. } => "assumption-violation",
                Error::SingularGramian { .. } => "singular-gramian",
                Error::GridMismatch(_) => "grid-mismatch",
                Error::DimensionMismatch { .. } => "dimension-mismatch",
                Error::NonFinite { .. } => "non-finite",
                Error::OffGrid { .. } => "off-grid",
                Error::Horizon(_) => "horizon",
                Error::PlanMismatch(_) => "plan-mismatch",
                Error::Domain(_) => "domain",
                Error::MassEscape { .. } => "mass-escape",
                Error::NoConvergence { .. } => "no-convergence",
                Error::ConditionUnsatisfied(_) => "condition-unsatisfied",
                Error::Config(_) => "config",
            },
            CliError::Io(_) => "io",
            CliError::Parse(_) => "config",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Io(e) => e.to_string(),
            CliError::Parse(m) => m.clone(),
        }
    }

    fn condition(&self) -> (Option<&'static str>, Option<&'static str>) {
        match self {
            CliError::Core(Error::AssumptionViolation { condition, .. }) => {
                (Some(condition.label()), Some(condition.name()))
            }
            CliError::Core(Error::SingularGramian { .. }) => (Some("(A5)"), Some("gramian-invertible")),
            _ => (None, None),
        }
    }
}

fn load_config(path: Option<&Path>, seed_flag: Option<u64>) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?;
            toml::from_str::<ScenarioConfig>(&text).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?
        }
        None => ScenarioConfig::default(),
    };
    let env_seed = match std::env::var("SEED") {
        Ok(v) => Some(
            v.trim()
                .parse::<u64>()
                .map_err(|e| CliError::Parse(format!("SEED={v}: {e}")))?,
        ),
        Err(_) => None,
    };
    if let Some(seed) = seed_flag.or(env_seed) {
        cfg.simulation.seed = seed;
    }
    Ok(cfg)
}

fn write_error(out: &Path, command: Command, err: &CliError) {
    let (condition, condition_name) = err.condition();
    let body = json!({
        "tool": TOOL,
        "version": VERSION,
        "subcommand": command.name(),
        "error": err.kind(),
        "condition": condition,
        "condition_name": condition_name,
        "message": err.message(),
        "exit_code": err.exit_code(),
    });
    let _ = std::fs::create_dir_all(out);
    let text = serde_json::to_string_pretty(&body).unwrap_or_default();
    if std::fs::write(out.join("error.json"), text + "\n").is_err() {
        eprintln!("could not write error.json to {}", out.display());
    }
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    let mut sink = Sink::new(&cli.out, Provenance::new(&cfg))?;
    let outcome = match cli.command {
        Command::Validate => commands::validate(&cfg, &mut sink),
        Command::Simulate => commands::simulate(&cfg, &mut sink),
        Command::CouplingCheck => commands::coupling(&cfg, &mut sink),
        Command::Harnack => commands::harnack(&cfg, &mut sink),
        Command::ShiftHarnack => commands::shift_harnack(&cfg, &mut sink),
        Command::Zvonkin => commands::zvonkin(&cfg, &mut sink),
        Command::Bihari => commands::bihari(&cfg, &mut sink),
    }?;
    let report = json!({
        "tool": TOOL,
        "version": VERSION,
        "subcommand": cli.command.name(),
        "config_sha256": sink.prov.config_sha256,
        "seed": sink.prov.seed,
        "timestamp": sink.prov.timestamp,
        "files": sink.written,
        "pass": outcome.pass,
        "result": outcome.result,
    });
    sink.json("report.json", &report)?;
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(true) => {
            println!("{}: pass ({})", cli.command.name(), cli.out.display());
            ExitCode::SUCCESS
        }
        Ok(false) => {
            println!(
                "{}: FAIL, see {}",
                cli.command.name(),
                cli.out.join("report.json").display()
            );
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("{}: {}", cli.command.name(), e.message());
            write_error(&cli.out, cli.command, &e);
            ExitCode::from(e.exit_code())
        }
    }
}
