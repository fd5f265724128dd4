use std::collections::BTreeMap;

use ndarray::Array2;

use super::hungarian;
use crate::imagery::{decode_label, LabelMask};
use crate::{Error, Result};

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::input(format!("label sequences differ in length ({a} vs {b})")));
    }
    Ok(())
}

/// Dense re-indexing of arbitrary label values (sorted order).
fn reindex(labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut values: Vec<usize> = labels.to_vec();
    values.sort_unstable();
    values.dedup();
    let map: BTreeMap<usize, usize> = values.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    (labels.iter().map(|l| map[l]).collect(), values)
}

/// Confusion counts, truth classes as rows and predictions as columns.
pub fn confusion(truth: &[usize], pred: &[usize], k: usize) -> Result<Array2<u64>> {
    check_len(truth.len(), pred.len())?;
    let mut m = Array2::zeros((k, k));
    for (&t, &p) in truth.iter().zip(pred) {
        if t >= k || p >= k {
            return Err(Error::input(format!("label {} out of range for k = {k}", t.max(p))));
        }
        m[(t, p)] += 1;
    }
    Ok(m)
}

/// Optimal one-to-one mapping from cluster values to class values. Clusters
/// matched only to padding (more clusters than classes) are absent.
pub fn class_mapping(pred: &[usize], truth: &[usize]) -> Result<BTreeMap<usize, usize>> {
    check_len(pred.len(), truth.len())?;
    let (p, pvals) = reindex(pred);
    let (t, tvals) = reindex(truth);
    let m = pvals.len().max(tvals.len());
    let mut cost = Array2::<f64>::zeros((m, m));
    for (&a, &b) in p.iter().zip(&t) {
        cost[(a, b)] -= 1.0;
    }
    let assignment = hungarian(&cost)?;
    Ok(pvals
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| tvals.get(assignment.perm[i]).map(|&c| (v, c)))
        .collect())
}

/// Percentage of samples correctly labeled under the best one-to-one
/// mapping of clusters to classes.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_len(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(Error::input("no samples"));
    }
    let map = class_mapping(pred, truth)?;
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| map.get(p) == Some(t))
        .count();
    Ok(100.0 * hits as f64 / pred.len() as f64)
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information 2 I(Y;C) / (H(Y) + H(C)), natural log.
/// Defined as 1 when both labelings are constant.
pub fn nmi(y: &[usize], c: &[usize]) -> Result<f64> {
    check_len(y.len(), c.len())?;
    if y.is_empty() {
        return Err(Error::input("no samples"));
    }
    let (y, yv) = reindex(y);
    let (c, cv) = reindex(c);
    let n = y.len() as f64;
    let mut joint = Array2::<f64>::zeros((yv.len(), cv.len()));
    for (&a, &b) in y.iter().zip(&c) {
        joint[(a, b)] += 1.0;
    }
    let ry: Vec<f64> = joint.rows().into_iter().map(|r| r.sum()).collect();
    let rc: Vec<f64> = joint.columns().into_iter().map(|r| r.sum()).collect();
    let (hy, hc) = (entropy(&ry, n), entropy(&rc, n));
    if hy + hc == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for ((a, b), &v) in joint.indexed_iter() {
        if v > 0.0 {
            mi += v / n * (v * n / (ry[a] * rc[b])).ln();
        }
    }
    Ok((2.0 * mi / (hy + hc)).clamp(0.0, 1.0))
}

/// Per-class pixel counts accumulated over any number of masks. Masks use
/// the encoded labels (0 background, 1..=K classes, 255 void).
#[derive(Debug, Clone, PartialEq)]
pub struct SegCounts {
    pub k: usize,
    /// |pred = c and truth = c|
    pub hits: Vec<u64>,
    /// |pred = c| over pixels with a class in truth
    pub predicted: Vec<u64>,
    /// |truth = c|
    pub actual: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskScores {
    /// `None` for classes absent from both prediction and truth.
    pub per_class: Vec<Option<f64>>,
    pub mean: f64,
}

impl SegCounts {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            hits: vec![0; k],
            predicted: vec![0; k],
            actual: vec![0; k],
        }
    }

    /// Adds one prediction/truth pair. Pixels whose truth is background or
    /// void are skipped.
    pub fn add(&mut self, pred: &LabelMask, truth: &LabelMask) -> Result<()> {
        if (pred.width, pred.height) != (truth.width, truth.height) {
            return Err(Error::input("prediction and truth masks differ in size"));
        }
        for (&p, &t) in pred.data.iter().zip(&truth.data) {
            let Some(t) = decode_label(t) else { continue };
            if t >= self.k {
                return Err(Error::input(format!("truth class {t} out of range")));
            }
            self.actual[t] += 1;
            if let Some(p) = decode_label(p).filter(|&p| p < self.k) {
                self.predicted[p] += 1;
                if p == t {
                    self.hits[t] += 1;
                }
            }
        }
        Ok(())
    }

    pub fn iou(&self) -> MaskScores {
        let per_class: Vec<Option<f64>> = (0..self.k)
            .map(|c| {
                let union = self.predicted[c] + self.actual[c] - self.hits[c];
                (union > 0).then(|| self.hits[c] as f64 / union as f64)
            })
            .collect();
        scores(per_class)
    }

    /// Recall per class over truth pixels of that class; classes without
    /// truth pixels are excluded from the mean.
    pub fn recall(&self) -> MaskScores {
        let per_class = (0..self.k)
            .map(|c| (self.actual[c] > 0).then(|| self.hits[c] as f64 / self.actual[c] as f64))
            .collect();
        scores(per_class)
    }
}

fn scores(per_class: Vec<Option<f64>>) -> MaskScores {
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let mean = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    MaskScores { per_class, mean }
}

pub fn iou_scores(pred: &LabelMask, truth: &LabelMask, k: usize) -> Result<MaskScores> {
    let mut c = SegCounts::new(k);
    c.add(pred, truth)?;
    Ok(c.iou())
}

/// Recall against weak labels: only labeled (non-background) pixels count.
pub fn recall_scores(pred: &LabelMask, weak_truth: &LabelMask, k: usize) -> Result<MaskScores> {
    let mut c = SegCounts::new(k);
    c.add(pred, weak_truth)?;
    Ok(c.recall())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagery::{encode_class, BACKGROUND};

    #[test]
    fn accuracy_basics() {
        let t = [0, 0, 1, 1, 2, 2, 3, 3, 4, 4];
        assert_eq!(clustering_accuracy(&t, &t).unwrap(), 100.0);
        assert_eq!(clustering_accuracy(&[7; 10], &t).unwrap(), 20.0);
        let relabeled: Vec<usize> = t.iter().map(|&x| (x + 3) % 5 + 10).collect();
        assert_eq!(clustering_accuracy(&relabeled, &t).unwrap(), 100.0);
        assert!(clustering_accuracy(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn nmi_basics() {
        let y = [0, 0, 1, 1];
        assert!((nmi(&y, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((nmi(&y, &[5, 5, 3, 3]).unwrap() - 1.0).abs() < 1e-12);
        assert!(nmi(&y, &[0, 1, 0, 1]).unwrap().abs() < 1e-12);
        assert_eq!(nmi(&[1, 1], &[2, 2]).unwrap(), 1.0);
    }

    #[test]
    fn confusion_rows_are_truth() {
        let m = confusion(&[0, 0, 1], &[1, 0, 1], 2).unwrap();
        assert_eq!(m, ndarray::array![[1, 1], [0, 1]]);
    }

    fn mask(w: usize, h: usize, f: impl Fn(usize, usize) -> u8) -> LabelMask {
        let mut m = LabelMask::new(w, h, BACKGROUND);
        for y in 0..h {
            for x in 0..w {
                m.set(x, y, f(x, y));
            }
        }
        m
    }

    #[test]
    fn iou_half_overlap_is_third() {
        // class 0 squares of 4x4 offset by 2 columns, everything else class 1
        let truth = mask(8, 4, |x, _| encode_class(usize::from(!(x < 4))));
        let pred = mask(8, 4, |x, _| encode_class(usize::from(!((2..6).contains(&x)))));
        let s = iou_scores(&pred, &truth, 2).unwrap();
        // class 0: hit 8, pred 16, truth 16 -> 8 / 24
        assert!((s.per_class[0].unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let same = iou_scores(&truth, &truth, 2).unwrap();
        assert_eq!(same.mean, 1.0);
    }

    #[test]
    fn recall_counts_labeled_pixels_only() {
        let weak = mask(10, 10, |x, y| if y < 5 { encode_class(1) } else if x < 5 { encode_class(0) } else { BACKGROUND });
        let pred = mask(10, 10, |x, y| if y < 5 && x < 8 { encode_class(1) } else { encode_class(0) });
        let r = recall_scores(&pred, &weak, 2).unwrap();
        assert!((r.per_class[1].unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(r.per_class[0], Some(1.0));
        let constant = mask(10, 10, |_, _| encode_class(0));
        let r = recall_scores(&constant, &weak, 2).unwrap();
        assert_eq!(r.per_class, vec![Some(1.0), Some(0.0)]);
    }
}
