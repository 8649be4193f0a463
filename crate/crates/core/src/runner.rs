//! End-to-end experiment driver: load data, build the model, train once per
//! seed, and leave the artifacts (metrics, checkpoints, summary) on disk.

use std::fs;
use std::path::{Path, PathBuf};

use crate::checkpoint::save_checkpoint;
use crate::config::{DatasetConfig, RunConfig};
use crate::data::{load_cifar_bin, load_idx, synthetic_dataset, DatasetHandle, SyntheticConfig};
use crate::error::{Error, Result};
use crate::nn::{build_model, ModelSpec};
use crate::report::{write_metrics_csv, write_summary_json, RunRecord, Summary};
use crate::rng::Seed;
use crate::train::{train, TrainConfig};

/// Materialize the training and test sets a config points at.
pub fn load_datasets(cfg: &DatasetConfig) -> Result<(DatasetHandle, DatasetHandle)> {
    match cfg {
        DatasetConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            let train = load_idx(train_images, train_labels)?;
            let test = load_idx(test_images, test_labels)?;
            Ok((train, test))
        }
        DatasetConfig::CifarBin { train, test } => {
            let train_paths: Vec<&Path> = train.iter().map(PathBuf::as_path).collect();
            let test_paths: Vec<&Path> = test.iter().map(PathBuf::as_path).collect();
            Ok((load_cifar_bin(&train_paths)?, load_cifar_bin(&test_paths)?))
        }
        DatasetConfig::Synthetic {
            train_n,
            test_n,
            height,
            width,
            classes,
            data_seed,
        } => {
            let base = SyntheticConfig {
                n: *train_n,
                height: *height,
                width: *width,
                classes: *classes,
                ..SyntheticConfig::default()
            };
            let train = synthetic_dataset(Seed(*data_seed), &base)?;
            // a disjoint seed lane keeps the test set from replicating
            // training samples
            let test = synthetic_dataset(
                Seed(*data_seed).offset(1),
                &SyntheticConfig { n: *test_n, ..base },
            )?;
            Ok((train, test))
        }
    }
}

/// The model spec implied by a dataset: its sample shape and label range.
pub fn spec_for(cfg: &RunConfig, train: &DatasetHandle, test: &DatasetHandle) -> Result<ModelSpec> {
    let shape = train.sample_shape();
    let input: [usize; 3] = shape
        .as_slice()
        .try_into()
        .map_err(|_| Error::ShapeMismatch {
            expected: vec![3],
            actual: vec![shape.len()],
            context: "dataset sample shape",
        })?;
    Ok(ModelSpec {
        kind: cfg.model_kind,
        input,
        num_classes: train.num_classes().max(test.num_classes()),
    })
}

/// Run the whole experiment a config describes: `repeats` independent
/// trainings at seeds `seed, seed+1, ...`, each leaving `metrics.csv` and
/// `model.ckpt` behind, plus one `summary.json` over all of them.
///
/// With a single repeat the artifacts land in `out_dir` itself; with several
/// they go to `out_dir/seed-<s>/` so runs cannot clobber each other.
pub fn run_experiment(cfg: &RunConfig) -> Result<Summary> {
    let (train_data, test_data) = load_datasets(&cfg.dataset)?;
    let spec = spec_for(cfg, &train_data, &test_data)?;
    fs::create_dir_all(&cfg.out_dir)?;

    let mut records = Vec::with_capacity(cfg.repeats);
    for k in 0..cfg.repeats {
        let seed = cfg.train.seed + k as u64;
        let run_cfg = TrainConfig {
            seed,
            ..cfg.train.clone()
        };
        let mut net = build_model(&spec, Seed(seed))?;
        let report = train(&mut net, &train_data, &test_data, &run_cfg)?;

        let run_dir = if cfg.repeats == 1 {
            cfg.out_dir.clone()
        } else {
            let d = cfg.out_dir.join(format!("seed-{seed}"));
            fs::create_dir_all(&d)?;
            d
        };
        write_metrics_csv(&run_dir.join("metrics.csv"), &report.rows)?;
        save_checkpoint(&run_dir.join("model.ckpt"), &spec, &net)?;
        records.push(RunRecord::from_report(seed, &report));
    }

    let summary = Summary::from_runs(cfg.train.mode.clone(), records)?;
    write_summary_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkpoint::load_checkpoint;
    use crate::config::ModelConfig;
    use crate::data::{synthetic_bytes, write_idx};
    use crate::nn::ModelKind;
    use crate::report::METRICS_MARKER;

    fn synthetic_run(dir: &Path, repeats: usize, epochs: usize) -> RunConfig {
        let _ = ModelConfig::default(); // keep the config type exercised
        RunConfig {
            dataset: DatasetConfig::Synthetic {
                train_n: 12,
                test_n: 6,
                height: 8,
                width: 8,
                classes: 3,
                data_seed: 11,
            },
            model_kind: ModelKind::MlpSmall,
            train: TrainConfig {
                epochs,
                warmup_epochs: 1,
                batch_size: 4,
                seed: 40,
                ..TrainConfig::default()
            },
            out_dir: dir.to_path_buf(),
            repeats,
        }
    }

    #[test]
    fn single_repeat_writes_artifacts_at_the_output_root() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = synthetic_run(dir.path(), 1, 2);
        let summary = run_experiment(&cfg).unwrap();

        assert_eq!(summary.runs.len(), 1);
        assert_eq!(summary.runs[0].seed, 40);
        let csv = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert!(csv.starts_with(METRICS_MARKER));
        assert_eq!(csv.lines().count(), 2 + 2); // marker + header + one row per epoch
        assert!(dir.path().join("summary.json").exists());

        let (spec, _net) = load_checkpoint(&dir.path().join("model.ckpt")).unwrap();
        assert_eq!(spec.input, [8, 8, 1]);
        assert_eq!(spec.num_classes, 3);
    }

    #[test]
    fn repeats_get_their_own_seed_directories() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = synthetic_run(dir.path(), 2, 1);
        let summary = run_experiment(&cfg).unwrap();

        let seeds: Vec<u64> = summary.runs.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![40, 41]);
        for seed in seeds {
            let d = dir.path().join(format!("seed-{seed}"));
            assert!(d.join("metrics.csv").exists());
            assert!(d.join("model.ckpt").exists());
        }
        // the summary still lands at the root, and nothing was written there
        // besides it
        assert!(dir.path().join("summary.json").exists());
        assert!(!dir.path().join("metrics.csv").exists());
    }

    #[test]
    fn synthetic_train_and_test_sets_differ() {
        let cfg = DatasetConfig::Synthetic {
            train_n: 6,
            test_n: 6,
            height: 8,
            width: 8,
            classes: 3,
            data_seed: 0,
        };
        let (train, test) = load_datasets(&cfg).unwrap();
        assert_eq!(train.len(), 6);
        assert_eq!(test.len(), 6);
        assert_ne!(train.images.values(), test.images.values());
    }

    #[test]
    fn idx_datasets_feed_the_runner() {
        let dir = tempfile::tempdir().unwrap();
        let gen = SyntheticConfig {
            n: 9,
            height: 8,
            width: 8,
            classes: 3,
            ..SyntheticConfig::default()
        };
        let (pixels, labels) = synthetic_bytes(Seed(5), &gen);
        let ti = dir.path().join("train-images.idx");
        let tl = dir.path().join("train-labels.idx");
        write_idx(&ti, &tl, 8, 8, &pixels, &labels).unwrap();

        let out = dir.path().join("out");
        let cfg = RunConfig {
            dataset: DatasetConfig::Idx {
                train_images: ti.clone(),
                train_labels: tl.clone(),
                test_images: ti,
                test_labels: tl,
            },
            model_kind: ModelKind::MlpSmall,
            train: TrainConfig {
                epochs: 1,
                warmup_epochs: 0,
                batch_size: 3,
                ..TrainConfig::default()
            },
            out_dir: out.clone(),
            repeats: 1,
        };
        let summary = run_experiment(&cfg).unwrap();
        assert_eq!(summary.runs.len(), 1);
        assert!(out.join("metrics.csv").exists());
    }
}
