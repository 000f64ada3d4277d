use clap::{Parser, Subcommand};
use spreadbound::description::parse_model;
use spreadbound_cli::{run_experiment, ExperimentConfig, RunError, RunOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Bounding systems for networked compartmental spreading processes.
#[derive(Debug, Parser)]
#[command(name = "spreadbound", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every system in an experiment config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Check a model description file and print a summary.
    Validate { model: PathBuf },
    /// Run only the exact master-equation solver for a config.
    Oracle {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
}

#[derive(Debug, clap::Args)]
struct Flags {
    /// Output directory (default: the config's `output_dir`, else `out/<label>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output grid step.
    #[arg(long = "grid-step")]
    grid_step: Option<f64>,
    #[arg(long)]
    quiet: bool,
}

fn load(path: &Path, flags: &Flags, oracle_only: bool) -> Result<(ExperimentConfig, RunOptions), RunError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(h) = flags.grid_step {
        cfg.grid.step = h;
    }
    if oracle_only {
        cfg.systems = vec!["exact".into()];
    }
    cfg.check()?;
    let out = flags
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.label));
    let mut opts = RunOptions::new(out);
    opts.quiet = flags.quiet;
    Ok((cfg, opts))
}

fn run(path: &Path, flags: &Flags, oracle_only: bool) -> Result<bool, RunError> {
    let (cfg, opts) = load(path, flags, oracle_only)?;
    let outcome = run_experiment(&cfg, &opts)?;
    Ok(outcome.report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, flags } => run(config, flags, false),
        Command::Oracle { config, flags } => run(config, flags, true),
        Command::Validate { model } => {
            let text = match std::fs::read_to_string(model) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", model.display());
                    return ExitCode::from(1);
                }
            };
            match parse_model(&text) {
                Ok(m) => {
                    println!(
                        "ok: {} nodes, compartments [{}], {} internal and {} external transitions, hash {}",
                        m.node_count(),
                        m.compartments().join(", "),
                        m.internal().len(),
                        m.external().len(),
                        m.content_hash()
                    );
                    return ExitCode::SUCCESS;
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("containment check failed; see report.json");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
