use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// Cross-entropy of one sample for class `label` (`1..=logits.len()`), and
/// its gradient `softmax - one_hot`.
pub fn softmax_ce(logits: ArrayView1<f64>, label: u16) -> (f64, Array1<f64>) {
    let target = label as usize - 1;
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[target];
    let mut grad = logits.mapv(|v| (v - lse).exp());
    grad[target] -= 1.0;
    (loss, grad)
}

/// Mean cross-entropy over the batch and its gradient per logit (already
/// divided by the batch size).
pub fn batch_cross_entropy(logits: ArrayView2<f64>, labels: &[u16]) -> Result<(f64, Array2<f64>)> {
    let (n, classes) = logits.dim();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} logit rows but {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l as usize > classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} outside 1..={classes}"
        )));
    }
    let mut total = 0.0;
    let mut grad = Array2::zeros((n, classes));
    let scale = 1.0 / n as f64;
    for (i, &label) in labels.iter().enumerate() {
        let (loss, g) = softmax_ce(logits.row(i), label);
        total += loss;
        grad.row_mut(i).assign(&(g * scale));
    }
    Ok((total * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_logits() {
        let (loss, grad) = softmax_ce(array![0.3, 0.3, 0.3, 0.3].view(), 2);
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((grad[1] + 0.75).abs() < 1e-12);
        assert!((grad[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn loss_vanishes_with_growing_margin() {
        let mut prev = f64::INFINITY;
        for m in [0.0, 1.0, 5.0, 20.0, 100.0, 800.0] {
            let (loss, _) = softmax_ce(array![m, 0.0, -1.0].view(), 1);
            assert!(loss < prev || loss == 0.0);
            assert!(loss.is_finite());
            prev = loss;
        }
        assert!(prev < 1e-300);
    }

    #[test]
    fn huge_logits_are_stable() {
        let p = softmax(array![1000.0, 1000.0].view());
        assert_eq!(p.to_vec(), vec![0.5, 0.5]);
        let (loss, _) = softmax_ce(array![-1000.0, 1000.0].view(), 1);
        assert_eq!(loss, 2000.0);
    }

    #[test]
    fn batch_rejects_bad_labels() {
        let l = array![[0.0, 1.0]];
        assert!(batch_cross_entropy(l.view(), &[0]).is_err());
        assert!(batch_cross_entropy(l.view(), &[3]).is_err());
        assert!(batch_cross_entropy(l.view(), &[1, 2]).is_err());
    }
}
