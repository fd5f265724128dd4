use rand_distr::{Distribution, Normal};

use super::AudioClip;
use crate::{seed, Error, Result};

/// Mean squared sample value.
pub fn signal_power(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64
}

/// Adds zero-mean white Gaussian noise with variance
/// `signal_power / 10^(snr_db / 10)`. `f64::INFINITY` means no noise.
pub fn add_noise(clip: &AudioClip, snr_db: f64, noise_seed: u64) -> Result<AudioClip> {
    if snr_db == f64::INFINITY {
        return Ok(clip.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::input(format!("invalid SNR {snr_db} dB")));
    }
    let power = signal_power(&clip.samples);
    if power <= 0.0 {
        return Err(Error::input("cannot set an SNR on a zero-power clip"));
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::input(e.to_string()))?;
    let mut rng = seed::rng(noise_seed, 0xA0D1);
    let samples = clip
        .samples
        .iter()
        .map(|s| s + normal.sample(&mut rng))
        .collect();
    Ok(AudioClip {
        samples,
        sample_rate_hz: clip.sample_rate_hz,
    })
}

/// SNR in dB of `noisy` relative to the clean reference.
pub fn measured_snr_db(clean: &[f64], noisy: &[f64]) -> f64 {
    let noise: Vec<f64> = clean.iter().zip(noisy).map(|(c, n)| n - c).collect();
    10.0 * (signal_power(clean) / signal_power(&noise)).log10()
}
