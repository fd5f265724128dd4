//! Audio clips, short-time Fourier transform, spectrograms and noise
//! injection.

mod noise;
mod normalize;
mod stft;

pub use noise::{add_noise, measured_snr_db, signal_power};
pub use normalize::{average_pool, encoder_input, SpectrogramNormalizer, POOLED_SIDE};
pub use stft::{spectrogram, spectrogram_batch, stft, ComplexMatrix, Spectrogram, StftParams, WindowFn};

use crate::{Error, Result};

/// Default clip length in seconds.
pub const DEFAULT_CLIP_SECONDS: f64 = 0.5;
pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;

/// A mono clip of real-valued samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::input("sample rate must be positive"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
