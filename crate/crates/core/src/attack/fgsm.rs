//! Fast gradient sign attack.

use crate::attack::AttackConfig;
use crate::error::Result;
use crate::nn::Network;
use crate::tensor::Tensor;

/// Sign with sign(0) = 0, so pixels the loss does not depend on are left
/// untouched instead of being pushed by epsilon in an arbitrary direction.
pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One-step gradient sign attack on a batch: each pixel moves by epsilon in
/// the direction that increases the loss, then the image is clipped back to
/// the [0, 1] pixel box.
///
/// The returned batch satisfies `|adv - x| <= epsilon` pixelwise *as
/// evaluated in f64*: `x + eps` can round one ulp past the true sum, so after
/// clipping, any pixel whose measured deviation still exceeds epsilon is
/// nudged back by single ulp steps. Unclipped pixels therefore sit within one
/// ulp of exactly epsilon away, and the max-norm check in tests is exact, not
/// tolerance-based.
pub fn fgsm(net: &Network, batch: &Tensor, labels: &[usize], cfg: &AttackConfig) -> Result<Tensor> {
    cfg.validate()?;
    let (_, grads) = net.backward(batch, labels)?;
    let g = grads.input_grad.values();
    let x = batch.values();
    let eps = cfg.epsilon;

    let mut out = batch.clone();
    let vals = out.values_mut();
    for i in 0..vals.len() {
        let mut v = (x[i] + eps * sign(g[i])).clamp(0.0, 1.0);
        while v - x[i] > eps {
            v = v.next_down();
        }
        while v - x[i] < -eps {
            v = v.next_up();
        }
        vals[i] = v;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;
    use crate::rng::Seed;
    use rand::Rng;

    /// 2-feature, 2-class net with identity weights: input grad at a
    /// one-sample batch is softmax(x) - onehot(label), so signs are known in
    /// closed form.
    fn identity_net() -> Network {
        Network::new(
            vec![Layer::Affine {
                weight: Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
                bias: Tensor::zeros(vec![2]),
            }],
            vec![2],
            2,
        )
        .unwrap()
    }

    #[test]
    fn moves_each_pixel_by_exactly_epsilon_against_the_label() {
        let net = identity_net();
        // label 0, x = (0.5, 0.5): grad_x = (p0 - 1, p1) = (-0.5, +0.5)
        let x = Tensor::new(vec![1, 2], vec![0.5, 0.5]).unwrap();
        let cfg = AttackConfig { epsilon: 0.3 };
        let adv = fgsm(&net, &x, &[0], &cfg).unwrap();
        assert!((adv.values()[0] - 0.2).abs() < 1e-12);
        assert!((adv.values()[1] - 0.8).abs() < 1e-12);
        // measured deviation is within an ulp of epsilon and never above it
        for (a, b) in adv.values().iter().zip(x.values()) {
            let d = (a - b).abs();
            assert!(d <= cfg.epsilon, "deviation {} exceeds epsilon", d);
            assert!((d - cfg.epsilon).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gradient_leaves_the_batch_bitwise_unchanged() {
        // all-zero weights: logits are constant in x, so the input grad is 0
        let net = Network::new(
            vec![Layer::Affine {
                weight: Tensor::zeros(vec![2, 2]),
                bias: Tensor::new(vec![2], vec![1.0, 0.0]).unwrap(),
            }],
            vec![2],
            2,
        )
        .unwrap();
        let x = Tensor::new(vec![2, 2], vec![0.1, 0.7, 0.33, 0.9]).unwrap();
        let adv = fgsm(&net, &x, &[0, 1], &AttackConfig { epsilon: 0.3 }).unwrap();
        assert_eq!(adv.values(), x.values());
    }

    #[test]
    fn clips_to_the_pixel_box() {
        let net = identity_net();
        // label 1: grad_x = (p0, p1 - 1), signs (+, -) -> up on pixel 0, down
        // on pixel 1
        let x = Tensor::new(vec![1, 2], vec![0.95, 0.05]).unwrap();
        let adv = fgsm(&net, &x, &[1], &AttackConfig { epsilon: 0.3 }).unwrap();
        assert_eq!(adv.values(), &[1.0, 0.0]);
    }

    #[test]
    fn max_norm_bound_holds_exactly_for_random_nets_and_batches() {
        let seed = Seed(72_316);
        for trial in 0..40u64 {
            let mut rng = seed.lane("fgsm-prop", &[trial]);
            let w: Vec<f64> = (0..12).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let net = Network::new(
                vec![
                    Layer::Affine {
                        weight: Tensor::new(vec![3, 4], w).unwrap(),
                        bias: Tensor::new(vec![3], b).unwrap(),
                    },
                    Layer::Relu,
                ],
                vec![4],
                3,
            )
            .unwrap();
            let x = Tensor::new(
                vec![2, 4],
                (0..8).map(|_| rng.gen_range(0.0..1.0)).collect(),
            )
            .unwrap();
            let eps = rng.gen_range(0.05..0.9);
            let adv = fgsm(&net, &x, &[0, 2], &AttackConfig { epsilon: eps }).unwrap();
            for (a, v) in adv.values().iter().zip(x.values()) {
                assert!(
                    (a - v).abs() <= eps,
                    "trial {}: |{} - {}| > {}",
                    trial,
                    a,
                    v,
                    eps
                );
                assert!((0.0..=1.0).contains(a));
            }
        }
    }
}
