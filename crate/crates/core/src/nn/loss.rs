//! Softmax cross-entropy with per-class weights.

use ndarray::Axis;

use super::Matrix;
use crate::error::{Error, Result};

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for mut row in p.axis_iter_mut(Axis(0)) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    p
}

/// `mean_i w[y_i] * -log softmax(logits_i)[y_i]` and its gradient with
/// respect to the logits. `weights = None` means all ones.
pub fn cross_entropy(
    logits: &Matrix,
    targets: &[usize],
    weights: Option<&[f64]>,
) -> Result<(f64, Matrix)> {
    let (b, k) = logits.dim();
    if targets.len() != b || b == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{b} logit rows vs {} targets",
            targets.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} class weights for {k} classes",
                w.len()
            )));
        }
    }
    let mut grad = softmax(logits);
    let mut loss = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        if y >= k {
            return Err(Error::InvalidArgument(format!("target {y} outside 0..{k}")));
        }
        let w = weights.map_or(1.0, |w| w[y]);
        // log-sum-exp form keeps the loss finite when p underflows
        let row = logits.row(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += w * (lse - row[y]);
        grad[[i, y]] -= 1.0;
        grad.row_mut(i).mapv_inplace(|g| g * w / b as f64);
    }
    Ok((loss / b as f64, grad))
}

/// Inverse-frequency weights `total / (n_present * count_c)`; classes absent
/// from `labels` get weight 0.
pub fn balanced_class_weights(labels: &[usize], k: usize) -> Vec<f64> {
    let mut counts = vec![0usize; k];
    for &y in labels {
        if y < k {
            counts[y] += 1;
        }
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    let total: usize = counts.iter().sum();
    counts
        .iter()
        .map(|&c| {
            if c == 0 {
                0.0
            } else {
                total as f64 / (present as f64 * c as f64)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testing::{max_rel_error, numeric_grad, random_matrix};

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Matrix::zeros((3, 5));
        let (l, _) = cross_entropy(&logits, &[0, 3, 4], None).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn peaked_logits() {
        let mut logits = Matrix::zeros((1, 5));
        logits[[0, 0]] = 2.0;
        let (l, _) = cross_entropy(&logits, &[0], None).unwrap();
        let want = -(2f64.exp() / (2f64.exp() + 4.0)).ln();
        assert!((l - want).abs() < 1e-12);
        let p = softmax(&logits);
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_logits_stay_finite() {
        let mut logits = Matrix::zeros((1, 5));
        logits[[0, 1]] = 1000.0;
        let (l, g) = cross_entropy(&logits, &[0], None).unwrap();
        assert!((l - 1000.0).abs() < 1e-9);
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn doubling_a_weight_doubles_its_contribution() {
        let logits = random_matrix(1, 5, 3);
        let mut w = vec![1.0; 5];
        let (l1, g1) = cross_entropy(&logits, &[2], Some(&w)).unwrap();
        w[2] = 2.0;
        let (l2, g2) = cross_entropy(&logits, &[2], Some(&w)).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
        assert!(max_rel_error(&g2, &(g1 * 2.0)) < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let logits = random_matrix(4, 5, 9) * 3.0;
        let y = [0, 4, 2, 2];
        let w = [0.5, 1.0, 2.0, 1.5, 0.7];
        let (_, g) = cross_entropy(&logits, &y, Some(&w)).unwrap();
        let n = numeric_grad(&logits, |m| cross_entropy(m, &y, Some(&w)).unwrap().0);
        assert!(max_rel_error(&g, &n) <= 1e-6);
    }

    #[test]
    fn balanced_weights_examples() {
        let mut labels = vec![0; 10];
        labels.extend(vec![1; 30]);
        labels.extend(vec![2; 60]);
        let w = balanced_class_weights(&labels, 3);
        assert!((w[0] - 10.0 / 3.0).abs() < 1e-12);
        assert!((w[1] - 10.0 / 9.0).abs() < 1e-12);
        assert!((w[2] - 5.0 / 9.0).abs() < 1e-12);

        let w = balanced_class_weights(&[0, 0, 2], 4);
        assert_eq!(w[1], 0.0);
        assert_eq!(w[3], 0.0);
    }

    #[test]
    fn rarer_classes_weigh_more() {
        // supports in label order: approaching, grabbing, holding, releasing, unknown
        let supports = [377usize, 260, 2774, 405, 306];
        let labels: Vec<usize> = supports
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect();
        let w = balanced_class_weights(&labels, 5);
        assert!(w[1] > w[4] && w[4] > w[0] && w[0] > w[3] && w[3] > w[2]);
        assert!(w[1] > 1.0 && w[2] < 1.0);
    }
}
