use ndarray::{Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// Inverse log-frequency weights `1 / ln(1.02 + f_c)`, rescaled to mean 1.
/// `histogram[c]` is the number of labeled pixels of class `c`.
pub fn class_weights(histogram: &[u64]) -> Result<Vec<f64>> {
    let missing: Vec<usize> = (0..histogram.len()).filter(|&c| histogram[c] == 0).collect();
    if !missing.is_empty() {
        return Err(Error::config(format!("classes without labeled pixels: {missing:?}")));
    }
    if histogram.is_empty() {
        return Err(Error::config("empty class histogram"));
    }
    let total: u64 = histogram.iter().sum();
    let raw: Vec<f64> = histogram
        .iter()
        .map(|&n| 1.0 / (1.02 + n as f64 / total as f64).ln())
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    Ok(raw.into_iter().map(|w| w / mean).collect())
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut p = logits.to_owned();
    for mut row in p.axis_iter_mut(Axis(0)) {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCe {
    pub value: f64,
    /// Gradient with respect to the probabilities (or logits).
    pub grad: Array2<f64>,
    /// Labeled pixels whose probability was clamped at 1e-12.
    pub clamped: usize,
    pub labeled: usize,
}

const P_FLOOR: f64 = 1e-12;

fn check(rows: usize, k: usize, labels: &[Option<usize>], weights: &[f64]) -> Result<usize> {
    if labels.len() != rows {
        return Err(Error::input(format!("{} labels for {rows} pixels", labels.len())));
    }
    if weights.len() != k {
        return Err(Error::input(format!("{} weights for {k} classes", weights.len())));
    }
    if let Some(c) = labels.iter().flatten().find(|&&c| c >= k) {
        return Err(Error::input(format!("label {c} out of range for {k} classes")));
    }
    Ok(labels.iter().flatten().count())
}

/// `-(1/L) sum_labeled w_c log p_{i,c}` over the `L` labeled pixels; `None`
/// labels (background) contribute nothing.
pub fn weighted_ce(probs: ArrayView2<f64>, labels: &[Option<usize>], weights: &[f64]) -> Result<WeightedCe> {
    let labeled = check(probs.nrows(), probs.ncols(), labels, weights)?;
    let mut out = WeightedCe {
        value: 0.0,
        grad: Array2::zeros(probs.dim()),
        clamped: 0,
        labeled,
    };
    if labeled == 0 {
        return Ok(out);
    }
    let scale = 1.0 / labeled as f64;
    for (i, l) in labels.iter().enumerate() {
        let Some(c) = *l else { continue };
        let mut p = probs[(i, c)];
        if p < P_FLOOR {
            p = P_FLOOR;
            out.clamped += 1;
        }
        out.value -= weights[c] * p.ln() * scale;
        out.grad[(i, c)] = -weights[c] / p * scale;
    }
    Ok(out)
}

/// Same loss evaluated from logits (softmax applied internally); the
/// gradient is with respect to the logits.
pub fn weighted_ce_logits(logits: ArrayView2<f64>, labels: &[Option<usize>], weights: &[f64]) -> Result<WeightedCe> {
    let labeled = check(logits.nrows(), logits.ncols(), labels, weights)?;
    let mut out = WeightedCe {
        value: 0.0,
        grad: Array2::zeros(logits.dim()),
        clamped: 0,
        labeled,
    };
    if labeled == 0 {
        return Ok(out);
    }
    let scale = 1.0 / labeled as f64;
    for (i, l) in labels.iter().enumerate() {
        let Some(c) = *l else { continue };
        let row = logits.row(i);
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let w = weights[c];
        out.value += w * (lse - row[c]) * scale;
        for (j, &v) in row.iter().enumerate() {
            out.grad[(i, j)] = w * (v - lse).exp() * scale;
        }
        out.grad[(i, c)] -= w * scale;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn weight_examples() {
        assert_eq!(class_weights(&[10, 10, 10]).unwrap(), vec![1.0; 3]);
        let w = class_weights(&[90, 10]).unwrap();
        let expect = [1.0 / 1.92f64.ln(), 1.0 / 1.12f64.ln()];
        let m = (expect[0] + expect[1]) / 2.0;
        assert!((w[0] - expect[0] / m).abs() < 1e-12);
        assert!(w[1] > w[0]);
        assert_eq!(class_weights(&[5]).unwrap(), vec![1.0]);
        assert!(matches!(class_weights(&[3, 0]), Err(Error::Config(_))));
    }

    #[test]
    fn ce_examples() {
        let p = array![[0.2, 0.2, 0.2, 0.2, 0.2], [0.1, 0.1, 0.6, 0.1, 0.1]];
        let all_bg = weighted_ce(p.view(), &[None, None], &[1.0; 5]).unwrap();
        assert_eq!(all_bg.value, 0.0);
        assert!(all_bg.grad.iter().all(|&g| g == 0.0));
        let one = weighted_ce(p.view(), &[Some(3), None], &[1.0; 5]).unwrap();
        assert!((one.value - 5f64.ln()).abs() < 1e-12);
        let hot = array![[0.0, 1.0]];
        assert_eq!(weighted_ce(hot.view(), &[Some(1)], &[1.0, 1.0]).unwrap().value, 0.0);
        let zero = weighted_ce(hot.view(), &[Some(0)], &[1.0, 1.0]).unwrap();
        assert_eq!(zero.clamped, 1);
        assert!(zero.value.is_finite());
    }

    #[test]
    fn logits_form_matches_probability_form() {
        let z = array![[0.3, -1.0, 2.0], [1.0, 1.0, 1.0], [0.0, 4.0, -2.0]];
        let labels = [Some(2), None, Some(0)];
        let w = [0.5, 1.0, 1.5];
        let a = weighted_ce_logits(z.view(), &labels, &w).unwrap();
        let b = weighted_ce(softmax_rows(z.view()).view(), &labels, &w).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax_rows(array![[1000.0, 0.0, -1000.0], [1.0, 2.0, 3.0]].view());
        for r in p.rows() {
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
    }
}
