//! Accuracy evaluation, clean and under attack.

use crate::attack::{fgsm, AttackConfig};
use crate::data::DatasetHandle;
use crate::error::Result;
use crate::nn::Network;
use crate::tensor::argmax;
use crate::train::Batcher;

/// Evaluation batch size: big enough to amortize dispatch, small enough to
/// keep peak memory flat on desk-scale datasets.
const EVAL_BATCH: usize = 256;

/// Fraction of samples whose logits put the true class first.
pub fn accuracy(net: &Network, data: &DatasetHandle) -> Result<f64> {
    let batcher = Batcher::new(data, EVAL_BATCH);
    let mut correct = 0usize;
    for b in 0..batcher.count() {
        let (x, y) = batcher.get(b);
        let logits = net.forward(&x)?;
        correct += (0..x.num_samples())
            .filter(|&i| argmax(logits.sample(i)) == y[i])
            .count();
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Fraction of samples still correctly classified after a gradient sign
/// attack at the given strength. Deterministic: the attack has no random
/// component.
pub fn robust_accuracy(net: &Network, data: &DatasetHandle, cfg: &AttackConfig) -> Result<f64> {
    let batcher = Batcher::new(data, EVAL_BATCH);
    let mut correct = 0usize;
    for b in 0..batcher.count() {
        let (x, y) = batcher.get(b);
        let adv = fgsm(net, &x, y, cfg)?;
        let logits = net.forward(&adv)?;
        correct += (0..x.num_samples())
            .filter(|&i| argmax(logits.sample(i)) == y[i])
            .count();
    }
    Ok(correct as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;
    use crate::tensor::Tensor;

    /// Predicts class 0 for every input, with certainty.
    fn constant_classifier() -> Network {
        Network::new(
            vec![Layer::Affine {
                weight: Tensor::zeros(vec![2, 4]),
                bias: Tensor::new(vec![2], vec![5.0, 0.0]).unwrap(),
            }],
            vec![4],
            2,
        )
        .unwrap()
    }

    fn dataset(labels: Vec<usize>) -> DatasetHandle {
        let n = labels.len();
        DatasetHandle::new(
            Tensor::new(vec![n, 4], vec![0.5; n * 4]).unwrap(),
            labels,
            "t".into(),
        )
        .unwrap()
    }

    #[test]
    fn constant_classifier_scores_the_majority_class_at_any_epsilon() {
        let net = constant_classifier();
        // 3 of 5 samples are class 0
        let data = dataset(vec![0, 0, 0, 1, 1]);
        assert_eq!(accuracy(&net, &data).unwrap(), 0.6);
        for eps in [0.01, 0.3, 1.0] {
            let r = robust_accuracy(&net, &data, &AttackConfig { epsilon: eps }).unwrap();
            assert_eq!(r, 0.6, "attack cannot move a constant prediction");
        }
    }

    #[test]
    fn vanishing_epsilon_recovers_clean_accuracy() {
        // a net that actually depends on its input
        let net = Network::new(
            vec![Layer::Affine {
                weight: Tensor::new(vec![2, 4], vec![1.0, -0.5, 0.25, 0.0, -1.0, 0.5, 0.0, 0.25])
                    .unwrap(),
                bias: Tensor::zeros(vec![2]),
            }],
            vec![4],
            2,
        )
        .unwrap();
        let data = DatasetHandle::new(
            Tensor::new(
                vec![4, 4],
                vec![
                    0.9, 0.1, 0.8, 0.2, //
                    0.1, 0.9, 0.2, 0.8, //
                    0.7, 0.3, 0.6, 0.4, //
                    0.2, 0.6, 0.1, 0.7,
                ],
            )
            .unwrap(),
            vec![0, 1, 0, 1],
            "t".into(),
        )
        .unwrap();
        let clean = accuracy(&net, &data).unwrap();
        let robust = robust_accuracy(&net, &data, &AttackConfig { epsilon: 1e-9 }).unwrap();
        assert_eq!(clean, robust);
    }
}
