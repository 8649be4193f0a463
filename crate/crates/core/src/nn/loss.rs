//! Softmax and cross-entropy. Softmax lives here, in the loss, and is never
//! stacked as a network layer; `Network::forward` returns raw logits.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-wise softmax probabilities, stabilized by subtracting the row max so
/// logits like ±1000 neither overflow nor collapse to NaN.
pub fn softmax_probs(logits: &Tensor) -> Tensor {
    let n = logits.num_samples();
    let c = logits.sample_len();
    let mut out = Tensor::zeros(logits.shape().to_vec());
    for b in 0..n {
        let row = logits.sample(b);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let orow = out.sample_mut(b);
        let mut sum = 0.0;
        for j in 0..c {
            let e = (row[j] - max).exp();
            orow[j] = e;
            sum += e;
        }
        for v in orow.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn check_labels(logits: &Tensor, labels: &[usize]) -> Result<()> {
    if logits.num_samples() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![logits.num_samples()],
            actual: vec![labels.len()],
            context: "labels per batch",
        });
    }
    let c = logits.sample_len();
    for &l in labels {
        if l >= c {
            return Err(Error::InvalidLabel {
                label: l,
                num_classes: c,
            });
        }
    }
    Ok(())
}

/// Mean cross-entropy over the batch, computed in log-space:
/// `-log_softmax(logits)[label]` stays finite for any finite logits.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    check_labels(logits, labels)?;
    let n = logits.num_samples();
    let mut total = 0.0;
    for (b, &label) in labels.iter().enumerate() {
        let row = logits.sample(b);
        total += -log_softmax_at(row, label);
    }
    Ok(total / n as f64)
}

/// Loss plus its gradient at the logits: `(softmax - onehot) / batch`.
/// The 1/batch factor lives here, so duplicating every sample in a batch
/// leaves parameter gradients unchanged (mean reduction).
pub fn cross_entropy_grad(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    check_labels(logits, labels)?;
    let n = logits.num_samples();
    let inv = 1.0 / n as f64;
    let mut grad = softmax_probs(logits);
    let mut total = 0.0;
    for b in 0..n {
        total += -log_softmax_at(logits.sample(b), labels[b]);
        let g = grad.sample_mut(b);
        g[labels[b]] -= 1.0;
        for v in g.iter_mut() {
            *v *= inv;
        }
    }
    Ok((total * inv, grad))
}

fn log_softmax_at(row: &[f64], idx: usize) -> f64 {
    // log-sum-exp as max + ln(1 + rest): the max contributes exactly 1 to
    // the shifted sum, and ln_1p keeps the tiny remainder from being rounded
    // away, so a very confident correct prediction still has a positive loss
    // instead of flushing to zero
    let (m, at) =
        row.iter().enumerate().fold(
            (f64::NEG_INFINITY, 0),
            |(m, at), (j, &v)| if v > m { (v, j) } else { (m, at) },
        );
    let rest: f64 = row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != at)
        .map(|(_, &v)| (v - m).exp())
        .sum();
    (row[idx] - m) - rest.ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Vec<usize>, v: Vec<f64>) -> Tensor {
        Tensor::new(shape, v).unwrap()
    }

    #[test]
    fn equal_logits_give_half_half() {
        let p = softmax_probs(&t(vec![1, 2], vec![1.0, 1.0]));
        assert!((p.values()[0] - 0.5).abs() < 1e-15);
        assert!((p.values()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn six_zero_logits_match_logistic_value() {
        // e^6 / (1 + e^6) = 0.997527...
        let p = softmax_probs(&t(vec![1, 2], vec![6.0, 0.0]));
        assert!((p.values()[0] - 0.997527).abs() < 5e-5);
        assert!((p.values()[1] - 0.002473).abs() < 5e-5);
    }

    #[test]
    fn rows_sum_to_one_and_extreme_logits_stay_finite() {
        let p = softmax_probs(&t(vec![2, 3], vec![1000.0, 0.0, -1000.0, -5.0, -5.0, -5.0]));
        for b in 0..2 {
            let s: f64 = p.sample(b).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(p.sample(b).iter().all(|v| v.is_finite() && *v >= 0.0));
        }
        assert!((p.sample(0)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_logits_cost_ln_c() {
        let loss = cross_entropy(&t(vec![1, 2], vec![3.0, 3.0]), &[0]).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-12);
        let loss4 = cross_entropy(&t(vec![1, 4], vec![0.0; 4]), &[2]).unwrap();
        assert!((loss4 - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_costs_nearly_nothing() {
        let loss = cross_entropy(&t(vec![1, 2], vec![50.0, 0.0]), &[0]).unwrap();
        assert!(loss > 0.0 && loss < 1e-20);
    }

    #[test]
    fn six_zero_logit_loss_matches_direct_evaluation() {
        let loss = cross_entropy(&t(vec![1, 2], vec![6.0, 0.0]), &[0]).unwrap();
        // independent route: -ln(e^6 / (e^6 + 1))
        let direct = -(6f64.exp() / (6f64.exp() + 1.0)).ln();
        assert!((loss - direct).abs() < 1e-12);
    }

    #[test]
    fn extreme_logits_keep_loss_finite() {
        let loss = cross_entropy(&t(vec![1, 2], vec![-1000.0, 1000.0]), &[0]).unwrap();
        assert!(loss.is_finite());
        assert!((loss - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn bad_labels_are_rejected() {
        assert!(matches!(
            cross_entropy(&t(vec![1, 2], vec![0.0, 0.0]), &[2]),
            Err(Error::InvalidLabel {
                label: 2,
                num_classes: 2
            })
        ));
        assert!(matches!(
            cross_entropy(&t(vec![2, 2], vec![0.0; 4]), &[0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn grad_is_softmax_minus_onehot_over_batch() {
        let logits = t(vec![2, 2], vec![1.0, 1.0, 6.0, 0.0]);
        let (_, g) = cross_entropy_grad(&logits, &[0, 1]).unwrap();
        let p = softmax_probs(&logits);
        assert!((g.sample(0)[0] - (p.sample(0)[0] - 1.0) / 2.0).abs() < 1e-15);
        assert!((g.sample(0)[1] - p.sample(0)[1] / 2.0).abs() < 1e-15);
        assert!((g.sample(1)[1] - (p.sample(1)[1] - 1.0) / 2.0).abs() < 1e-15);
    }
}
