//! Encoder input normalization: `log(1 + power)`, average pooling to a
//! fixed 16x16 grid, then dataset-wide min-max scaling to [0, 1].

use ndarray::Array2;

use super::Spectrogram;

pub const POOLED_SIDE: usize = 16;

/// Averages `m` over a `rows x cols` grid of near-equal blocks.
pub fn average_pool(m: &Array2<f64>, rows: usize, cols: usize) -> Array2<f64> {
    let (h, w) = m.dim();
    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows {
        let (r0, r1) = (r * h / rows, ((r + 1) * h / rows).max(r * h / rows + 1).min(h));
        for c in 0..cols {
            let (c0, c1) = (c * w / cols, ((c + 1) * w / cols).max(c * w / cols + 1).min(w));
            let mut sum = 0.0;
            for i in r0..r1 {
                for j in c0..c1 {
                    sum += m[[i, j]];
                }
            }
            out[[r, c]] = sum / ((r1 - r0) * (c1 - c0)) as f64;
        }
    }
    out
}

/// Log-compressed, pooled spectrogram flattened frequency-major. Values are
/// not yet min-max scaled.
pub fn encoder_input(spec: &Spectrogram) -> Vec<f64> {
    let logs = spec.values.mapv(f64::ln_1p);
    average_pool(&logs, POOLED_SIDE, POOLED_SIDE).into_iter().collect()
}

/// Scalar min-max scaler fitted on a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrogramNormalizer {
    pub min: f64,
    pub max: f64,
}

impl SpectrogramNormalizer {
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for row in rows {
            for &v in row {
                min = min.min(v);
                max = max.max(v);
            }
        }
        if !min.is_finite() {
            return Self { min: 0.0, max: 1.0 };
        }
        Self { min, max }
    }

    pub fn apply(&self, row: &mut [f64]) {
        let span = self.max - self.min;
        for v in row {
            *v = if span > 0.0 { (*v - self.min) / span } else { 0.0 };
        }
    }
}
