use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use chlab::config::{ExperimentConfig, ExperimentKind};
use chlab::runner::{emit, run, Format, RunError};

#[derive(Parser)]
#[command(name = "chlab", version, about = "Weighted Calderón–Hardy numerical laboratory")]
struct Cli {
    /// Experiment configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for report files
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Report formats, comma separated (json,csv)
    #[arg(long, global = true, default_value = "json,csv")]
    format: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Muckenhoupt / reverse Hölder classification
    Weights {
        #[command(subcommand)]
        action: WeightsAction,
    },
    /// Atom construction and validation
    Atom {
        #[command(subcommand)]
        action: AtomAction,
    },
    /// Atom potential b = Φ ∗ a
    Potential,
    /// Constructive solve of Δ^m F = f from an atom manifest
    Solve,
    /// Inequality verifications
    Verify {
        #[command(subcommand)]
        action: VerifyAction,
    },
    /// Triviality threshold probe
    Triviality,
}

#[derive(Subcommand)]
enum WeightsAction {
    /// Class constants, divergence flags, critical indices
    Check,
}

#[derive(Subcommand)]
enum AtomAction {
    /// Build an atom from a bump file
    Make,
    /// Validate an atom file against (a1)-(a3)
    Validate,
}

#[derive(Subcommand)]
enum VerifyAction {
    /// Pointwise majorant of N(B; ·)
    Pointwise,
    /// Far-field decay of atom potentials
    Decay,
    /// Vanishing sphere means of top-order kernels
    Sphere,
    /// Double inequality ratio envelope
    Double,
}

fn expected_kind(cmd: &Command) -> ExperimentKind {
    match cmd {
        Command::Weights { .. } => ExperimentKind::Weights,
        Command::Atom { action: AtomAction::Make } => ExperimentKind::AtomMake,
        Command::Atom { action: AtomAction::Validate } => ExperimentKind::AtomValidate,
        Command::Potential => ExperimentKind::Potential,
        Command::Solve => ExperimentKind::Solve,
        Command::Verify { action: VerifyAction::Pointwise } => ExperimentKind::VerifyPointwise,
        Command::Verify { action: VerifyAction::Decay } => ExperimentKind::VerifyDecay,
        Command::Verify { action: VerifyAction::Sphere } => ExperimentKind::VerifySphere,
        Command::Verify { action: VerifyAction::Double } => ExperimentKind::VerifyDouble,
        Command::Triviality => ExperimentKind::Triviality,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();

    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --config PATH is required");
            return ExitCode::from(2);
        }
    };
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", config_path.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let expected = expected_kind(&cli.command);
    if cfg.kind != expected {
        eprintln!(
            "error: config kind '{}' does not match subcommand '{}'",
            cfg.kind.as_str(),
            expected.as_str()
        );
        return ExitCode::from(2);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let formats: Vec<Format> = cli
        .format
        .split(',')
        .filter_map(|f| match f.trim() {
            "json" => Some(Format::Json),
            "csv" => Some(Format::Csv),
            _ => None,
        })
        .collect();
    if formats.is_empty() {
        eprintln!("error: --format must name json and/or csv");
        return ExitCode::from(2);
    }

    match run(&cfg) {
        Ok(report) => {
            if let Err(e) = emit(&report, &formats, &cli.out) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            // wall time stays out of the serialized reports (byte determinism)
            eprintln!(
                "{}: {} checks, {} failed, {:.1} s",
                cfg.kind.as_str(),
                report.checks.len(),
                report.checks.iter().filter(|c| !c.pass).count(),
                started.elapsed().as_secs_f64()
            );
            if let Some(fail) = report.first_failure() {
                eprintln!("FAILED: {}", fail.name);
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(RunError::Validation(m)) => {
            eprintln!("error: validation: {m}");
            ExitCode::from(2)
        }
        Err(RunError::Io(m)) => {
            eprintln!("error: io: {m}");
            ExitCode::from(2)
        }
    }
}
