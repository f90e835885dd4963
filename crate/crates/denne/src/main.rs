use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use denne::pipeline::{self, DatasetConfig, ExperimentConfig};
use denne::Error;

/// Denoising network embedding: synthetic graph generation, noise
/// injection, training and evaluation driven by a TOML experiment
/// config.
#[derive(Parser)]
#[command(name = "denne", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's top-level seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the model variant (basic|com|deg|adap|com-deg).
    #[arg(long)]
    variant: Option<String>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(variant) = &self.variant {
            config.variant = variant.parse()?;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic dataset.
    Synth {
        /// Expected generator kind; fails if the config disagrees.
        kind: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Inject the configured noise into the pristine graph.
    Perturb {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train the selected variant on the observed graph.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate trained embeddings.
    Eval {
        #[command(subcommand)]
        task: EvalTask,
    },
    /// Merge metric CSVs and recompute mean/std aggregates.
    Report {
        /// Metric CSV files to merge.
        inputs: Vec<PathBuf>,
        /// Merged CSV destination.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalTask {
    /// Node classification (macro/micro F1 over splits).
    Nc {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Graph reconstruction (precision/recall/F1 over a ratio grid).
    Gr {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn check_kind(expected: &Option<String>, dataset: &DatasetConfig) -> Result<(), Error> {
    let Some(expected) = expected else {
        return Ok(());
    };
    let actual = match dataset {
        DatasetConfig::Geometric { .. } => "geometric",
        DatasetConfig::Partition { .. } => "partition",
        DatasetConfig::Files { .. } => "files",
    };
    if expected != actual {
        return Err(Error::Config(format!(
            "subcommand expects a {expected} dataset but the config declares {actual}"
        )));
    }
    Ok(())
}

fn variant_line(config: &ExperimentConfig) -> String {
    format!(
        "variant={} seed={} out={}",
        config.variant,
        config.seed,
        config.output_dir.display()
    )
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth { kind, config } => {
            let config = config.resolve()?;
            check_kind(&kind, &config.dataset)?;
            let graph = pipeline::run_synth(&config)?;
            println!(
                "synth: {} nodes, {} edges ({})",
                graph.n(),
                graph.edge_count(),
                variant_line(&config)
            );
        }
        Command::Perturb { config } => {
            let config = config.resolve()?;
            let observed = pipeline::run_perturb(&config)?;
            println!(
                "perturb: observed graph has {} edges ({})",
                observed.edge_count(),
                variant_line(&config)
            );
        }
        Command::Train { config } => {
            let config = config.resolve()?;
            let report = pipeline::run_train(&config)?;
            let last = report
                .epochs
                .last()
                .map(|r| r.loss.total)
                .unwrap_or(report.initial.total);
            println!(
                "train: {} positive pairs, {} epochs, probe loss {:.6} -> {:.6} ({})",
                report.positive_pairs,
                report.epochs.len(),
                report.initial.total,
                last,
                variant_line(&config)
            );
        }
        Command::Eval { task } => {
            let (config, rows, label) = match task {
                EvalTask::Nc { config } => {
                    let config = config.resolve()?;
                    let rows = pipeline::run_eval_nc(&config)?;
                    (config, rows, "nc")
                }
                EvalTask::Gr { config } => {
                    let config = config.resolve()?;
                    let rows = pipeline::run_eval_gr(&config)?;
                    (config, rows, "gr")
                }
            };
            println!(
                "eval {label}: {} rows written ({})",
                rows.len(),
                variant_line(&config)
            );
        }
        Command::Report { inputs, out } => {
            if inputs.is_empty() {
                return Err(Error::Config("report needs at least one input CSV".into()));
            }
            let rows = pipeline::run_report(&inputs, &out)?;
            println!("report: {} rows written to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}: {err}", err.category());
            ExitCode::FAILURE
        }
    }
}
