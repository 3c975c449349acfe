use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tabsyn::data::{load_csv, load_schema, read_csv, write_csv};
use tabsyn::harness::{self, ReportFormat, SweepSpec};
use tabsyn::metrics::{evaluate, EvalConfig, Metric};
use tabsyn::synth::{self, TrainConfig, Variant};

#[derive(Parser)]
#[command(name = "tabsyn", version, about = "Tabular GAN synthesizer, metrics and sample-size sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a CSV table.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value = "margctgan")]
        variant: Variant,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON file with further training settings (batch size, widths, ...).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw rows from a trained model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a synthetic table against real train/test tables.
    Eval {
        #[arg(long)]
        synth: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated metric names (default: all nine).
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<Metric>,
        /// Neighbour rank for the distance metrics.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run or resume a sample-size sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Aggregate cell reports into tables.
    Report {
        #[arg(long)]
        cells: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        /// Output directory (default: `<cells>/report`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Fit { data, schema, variant, epochs, seed, config, out } => {
            let table = load_csv(&data, &schema)?;
            let base = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => TrainConfig::default(),
            };
            let cfg = TrainConfig { variant, epochs, seed, ..base };
            let model = synth::train(&table, &cfg)?;
            for d in &model.diagnostics {
                log::warn!("{d}");
            }
            synth::save(&model, &out)?;
            if let Some(last) = model.trace.last() {
                println!(
                    "trained {variant} for {epochs} epochs on {} rows; final critic {:.4}, generator {:.4}, marg {:.4}",
                    table.n_rows(),
                    last.critic_loss,
                    last.generator_loss,
                    last.marg_loss
                );
            }
        }
        Command::Sample { model, n, seed, out } => {
            let model = synth::load(&model)?;
            let table = model.sample(n, &mut ChaCha8Rng::seed_from_u64(seed))?;
            write_csv(&table, &out)?;
            println!("wrote {n} rows to {}", out.display());
        }
        Command::Eval { synth, train, test, schema, seed, metrics, k, out } => {
            let schema = load_schema(&schema)?;
            let (synth, train, test) = (read_csv(&synth, &schema)?, read_csv(&train, &schema)?, read_csv(&test, &schema)?);
            let mut cfg = EvalConfig::default();
            if !metrics.is_empty() {
                cfg.metrics = metrics;
            }
            cfg.neighbors.k = k;
            let report = evaluate(&synth, &train, &test, &cfg, seed)?;
            std::fs::write(&out, report.to_json()?).with_context(|| format!("writing {}", out.display()))?;
            for (m, v) in &report.scores {
                println!("{m:<28} {v:.6}");
            }
        }
        Command::Sweep { config } => {
            let spec = SweepSpec::from_file(&config)?;
            let outcome = harness::run_sweep(&spec)?;
            println!(
                "{} cells ({} models trained, {} reused), {} failures; results in {}",
                outcome.cells.len(),
                outcome.trained,
                outcome.reused,
                outcome.failures.len(),
                spec.output.display()
            );
            for (key, err) in &outcome.failures {
                eprintln!("failed: size {} {} seed {:?}: {err}", key.size.label(), key.variant, key.seed);
            }
            if !outcome.failures.is_empty() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Report { cells, format, out } => {
            if !cells.is_dir() {
                bail!("{} is not a directory", cells.display());
            }
            let out = out.unwrap_or_else(|| cells.join("report"));
            for f in harness::report(&cells, &out, format)? {
                println!("{}", f.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
