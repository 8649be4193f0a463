//! Ratio sweep: train the mixed mode once per candidate interleaving ratio
//! and report the robustness/cost trade-off of each.

use crate::data::DatasetHandle;
use crate::error::{Error, Result};
use crate::nn::{build_model, ModelSpec};
use crate::rng::Seed;
use crate::train::{train, TrainConfig};

/// Outcome of one point on the ratio axis.
#[derive(Debug, Clone)]
pub struct RatioPoint {
    pub ratio_r: u32,
    pub robust_acc: f64,
    pub vanilla_acc: f64,
    pub wall_ms: f64,
}

/// Train a fresh model per ratio in `ratios`, identical in every other
/// respect (same spec, same seed, same data), and collect the final
/// accuracies and total wall time of each run. `cfg.mode` and `cfg.ratio_r`
/// are overridden; everything else is taken as given.
pub fn sweep_ratio(
    spec: &ModelSpec,
    data: &DatasetHandle,
    test: &DatasetHandle,
    cfg: &TrainConfig,
    ratios: &[u32],
) -> Result<Vec<RatioPoint>> {
    if ratios.is_empty() {
        return Err(Error::InvalidConfig(
            "ratio sweep needs at least one ratio".into(),
        ));
    }
    let mut points = Vec::with_capacity(ratios.len());
    for &r in ratios {
        let mut net = build_model(spec, Seed(cfg.seed))?;
        let run_cfg = TrainConfig {
            mode: "mixed".into(),
            ratio_r: r,
            ..cfg.clone()
        };
        let report = train(&mut net, data, test, &run_cfg)?;
        points.push(RatioPoint {
            ratio_r: r,
            robust_acc: report.final_robust_acc,
            vanilla_acc: report.final_vanilla_acc,
            wall_ms: report.total_wall_ms,
        });
    }
    Ok(points)
}
