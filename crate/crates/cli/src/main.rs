//! `subadv`: train, evaluate, and inspect subset-filtered adversarial
//! training runs from the command line.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use subadv_core::attack::{AttackConfig, ScreenConfig};
use subadv_core::checkpoint::load_checkpoint;
use subadv_core::config::RunConfig;
use subadv_core::data::load_idx;
use subadv_core::filter::filter_subset;
use subadv_core::interval::demo_report;
use subadv_core::rng::Seed;
use subadv_core::runner::{load_datasets, run_experiment, spec_for};
use subadv_core::train::{accuracy, robust_accuracy, sweep_ratio};

#[derive(Parser)]
#[command(
    name = "subadv",
    version,
    about = "Subset-filtered adversarial training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment a config file describes and write its artifacts.
    Train {
        /// JSON experiment config.
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a checkpoint's clean and adversarial accuracy on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: IdxArgs,
        /// Perturbation budget for the adversarial column.
        #[arg(long, default_value_t = 0.3)]
        epsilon: f64,
    },
    /// Screen a dataset against a checkpoint and print the prone subset.
    Filter {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        data: IdxArgs,
        /// Stream seed; the same seed always selects the same subset.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Epoch tag recorded in the output (and folded into the streams).
        #[arg(long, default_value_t = 0)]
        epoch: usize,
        /// Screening noise amplitude on the 0-255 pixel scale.
        #[arg(long, default_value_t = 60.0)]
        amplitude: f64,
    },
    /// Train once per interleaving ratio and tabulate the trade-off.
    SweepRatio {
        /// JSON experiment config; its mode and ratio are overridden.
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated ratios, e.g. `0,1,2,4`.
        #[arg(long, value_delimiter = ',', required = true)]
        ratios: Vec<u32>,
    },
    /// Print the worked interval-propagation example as JSON.
    IntervalDemo,
}

/// An IDX image/label file pair.
#[derive(Args)]
struct IdxArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train { config } => {
            let cfg = RunConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            let summary = run_experiment(&cfg)?;
            println!("mode: {}", summary.mode);
            for run in &summary.runs {
                println!(
                    "seed {:<4} vanilla {:.4}  robust {:.4}  wall {:.0} ms  fallbacks {}",
                    run.seed,
                    run.final_vanilla_acc,
                    run.final_robust_acc,
                    run.total_wall_ms,
                    run.fallback_iterations,
                );
            }
            println!(
                "mean: vanilla {:.4}  robust {:.4}  wall {:.0} ms",
                summary.mean_vanilla_acc, summary.mean_robust_acc, summary.mean_wall_ms,
            );
            println!("artifacts in {}", cfg.out_dir.display());
        }
        Command::Eval {
            checkpoint,
            data,
            epsilon,
        } => {
            let (_, net) = load_checkpoint(&checkpoint)
                .with_context(|| format!("loading {}", checkpoint.display()))?;
            let set = load_idx(&data.images, &data.labels)?;
            let clean = accuracy(&net, &set)?;
            let robust = robust_accuracy(&net, &set, &AttackConfig { epsilon })?;
            println!("samples: {}", set.len());
            println!("vanilla accuracy: {clean:.4}");
            println!("robust accuracy (epsilon {epsilon}): {robust:.4}");
        }
        Command::Filter {
            checkpoint,
            data,
            seed,
            epoch,
            amplitude,
        } => {
            if !(0.0..=255.0).contains(&amplitude) {
                bail!("amplitude must be in [0, 255], got {amplitude}");
            }
            let (_, net) = load_checkpoint(&checkpoint)
                .with_context(|| format!("loading {}", checkpoint.display()))?;
            let set = load_idx(&data.images, &data.labels)?;
            let cfg = ScreenConfig {
                amplitude: amplitude / 255.0,
                ..ScreenConfig::default()
            };
            let subset = filter_subset(&net, &set.images, &cfg, Seed(seed), epoch)?;
            println!("{}", serde_json::to_string_pretty(&subset)?);
        }
        Command::SweepRatio { config, ratios } => {
            let cfg = RunConfig::load(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            let (train_data, test_data) = load_datasets(&cfg.dataset)?;
            let spec = spec_for(&cfg, &train_data, &test_data)?;
            let points = sweep_ratio(&spec, &train_data, &test_data, &cfg.train, &ratios)?;
            println!(
                "{:>7}  {:>8}  {:>8}  {:>10}",
                "ratio_r", "vanilla", "robust", "wall_ms"
            );
            for p in points {
                println!(
                    "{:>7}  {:>8.4}  {:>8.4}  {:>10.0}",
                    p.ratio_r, p.vanilla_acc, p.robust_acc, p.wall_ms,
                );
            }
        }
        Command::IntervalDemo => {
            println!("{}", serde_json::to_string_pretty(&demo_report())?);
        }
    }
    Ok(())
}
