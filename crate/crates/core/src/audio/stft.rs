use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::AudioClip;
use crate::exec::Exec;
use crate::{Error, Result};

pub type ComplexMatrix = Array2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowFn {
    Rectangular,
    Hann,
}

impl WindowFn {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowFn::Rectangular => vec![1.0; n],
            WindowFn::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WindowFn::Rectangular => "rectangular",
            WindowFn::Hann => "hann",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rectangular" | "rect" => Some(WindowFn::Rectangular),
            "hann" => Some(WindowFn::Hann),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftParams {
    pub window_size: usize,
    pub hop: usize,
    pub window_fn: WindowFn,
}

impl Default for StftParams {
    fn default() -> Self {
        Self {
            window_size: 256,
            hop: 128,
            window_fn: WindowFn::Hann,
        }
    }
}

impl StftParams {
    pub fn freq_bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    /// Number of complete frames in a signal of `len` samples.
    pub fn frames(&self, len: usize) -> usize {
        if len < self.window_size {
            0
        } else {
            (len - self.window_size) / self.hop + 1
        }
    }

    pub fn validate(&self, clip_len: usize) -> Result<()> {
        if self.window_size == 0 || self.hop == 0 || self.hop > self.window_size {
            return Err(Error::input(format!(
                "invalid STFT params: window {} hop {} (need 0 < hop <= window)",
                self.window_size, self.hop
            )));
        }
        if self.window_size > clip_len {
            return Err(Error::input(format!(
                "window of {} samples is longer than the clip ({} samples)",
                self.window_size, clip_len
            )));
        }
        Ok(())
    }
}

/// Squared-magnitude time-frequency matrix, `[freq_bins x frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Array2<f64>,
    pub params: StftParams,
}

impl Spectrogram {
    pub fn freq_bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn frames(&self) -> usize {
        self.values.ncols()
    }

    /// Affine rescale of `log(1 + value)` to 0..=255, low frequencies at the
    /// bottom row.
    pub fn to_gray8(&self) -> (usize, usize, Vec<u8>) {
        let (rows, cols) = self.values.dim();
        let logs: Vec<f64> = self.values.iter().map(|v| v.ln_1p()).collect();
        let lo = logs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut out = vec![0u8; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                let v = (logs[r * cols + c] - lo) / span;
                out[(rows - 1 - r) * cols + c] = (v * 255.0).round().clamp(0.0, 255.0) as u8;
            }
        }
        (cols, rows, out)
    }
}

struct Planned {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

impl Planned {
    fn new(params: &StftParams) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fft: planner.plan_fft_forward(params.window_size),
            window: params.window_fn.coefficients(params.window_size),
        }
    }

    fn run(&self, clip: &AudioClip, params: &StftParams) -> ComplexMatrix {
        let n = params.window_size;
        let bins = params.freq_bins();
        let frames = params.frames(clip.len());
        let mut out = ComplexMatrix::zeros((bins, frames));
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for m in 0..frames {
            let start = m * params.hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = Complex64::new(clip.samples[start + i] * self.window[i], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..bins {
                out[[k, m]] = buf[k];
            }
        }
        out
    }
}

/// Windowed DFT of every complete frame. Entry `(k, m)` is bin `k` of the
/// frame starting at sample `m * hop`, with phase referenced to the frame
/// start. Trailing samples that do not fill a frame are dropped.
pub fn stft(clip: &AudioClip, params: &StftParams) -> Result<ComplexMatrix> {
    params.validate(clip.len())?;
    Ok(Planned::new(params).run(clip, params))
}

pub fn spectrogram(clip: &AudioClip, params: &StftParams) -> Result<Spectrogram> {
    let z = stft(clip, params)?;
    Ok(Spectrogram {
        values: z.mapv(|c| c.norm_sqr()),
        params: *params,
    })
}

/// Spectrograms for many clips, sharing one FFT plan.
pub fn spectrogram_batch(
    clips: &[AudioClip],
    params: &StftParams,
    exec: Exec,
) -> Result<Vec<Spectrogram>> {
    for clip in clips {
        params.validate(clip.len())?;
    }
    let planned = Planned::new(params);
    Ok(exec.map(clips, |clip| Spectrogram {
        values: planned.run(clip, params).mapv(|c| c.norm_sqr()),
        params: *params,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, 44_100).unwrap()
    }

    #[test]
    fn zero_signal_gives_zero_matrix() {
        let z = stft(&clip(vec![0.0; 1024]), &StftParams::default()).unwrap();
        assert!(z.iter().all(|c| c.norm() == 0.0));
        assert_eq!(z.dim(), (129, 7));
    }

    #[test]
    fn impulse_has_flat_magnitude() {
        let mut s = vec![0.0; 512];
        s[128] = 1.0;
        let params = StftParams {
            window_size: 128,
            hop: 128,
            window_fn: WindowFn::Rectangular,
        };
        let z = stft(&clip(s), &params).unwrap();
        for k in 0..params.freq_bins() {
            assert!((z[[k, 1]].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn window_longer_than_clip_is_rejected() {
        let err = stft(&clip(vec![0.0; 100]), &StftParams::default()).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn hop_larger_than_window_is_rejected() {
        let params = StftParams {
            window_size: 64,
            hop: 65,
            window_fn: WindowFn::Hann,
        };
        assert!(stft(&clip(vec![0.0; 1000]), &params).is_err());
    }

    #[test]
    fn partial_frames_are_dropped() {
        let params = StftParams {
            window_size: 64,
            hop: 32,
            window_fn: WindowFn::Hann,
        };
        // (200 - 64) / 32 + 1 = 5 frames, 8 trailing samples unused
        assert_eq!(stft(&clip(vec![0.1; 200]), &params).unwrap().ncols(), 5);
    }

    #[test]
    fn scaling_signal_scales_power_quadratically() {
        let s: Vec<f64> = (0..2048).map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5).collect();
        let params = StftParams::default();
        let a = spectrogram(&clip(s.clone()), &params).unwrap();
        let b = spectrogram(&clip(s.iter().map(|v| 3.0 * v).collect()), &params).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!((9.0 * x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }
}
