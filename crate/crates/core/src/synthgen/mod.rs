//! Reproducible synthetic terrain world: a Voronoi class map, a robot tour
//! through it, per-clip interaction audio, and birds-eye imagery.
//!
//! Everything here is a pure function of the spec and its seed.

mod presets;
mod render;
mod traversal;
mod world;

pub use presets::{easy_spec, hard_spec, shifted_spec, TERRAIN_NAMES};
pub use render::{dense_truth, render_birdseye};
pub use traversal::{plan_tour, simulate_traversal, synthesize_clip, TraversalParams, TraversalRecord, Tour};
pub use world::{generate_world, World};

use crate::{Error, Result};

/// Spectral signature of one terrain class.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignature {
    pub band_centers_hz: Vec<f64>,
    pub band_amplitudes: Vec<f64>,
    /// Standard deviation of the white-noise floor.
    pub broadband_floor: f64,
    /// Band amplitude multiplier per m/s of robot speed.
    pub speed_gain: f64,
}

impl AudioSignature {
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        let nyquist = sample_rate_hz as f64 / 2.0;
        if self.band_centers_hz.len() != self.band_amplitudes.len() {
            return Err(Error::config("band centers and amplitudes differ in length"));
        }
        if let Some(f) = self.band_centers_hz.iter().find(|f| !(**f > 0.0 && **f < nyquist)) {
            return Err(Error::config(format!("band center {f} Hz is not below Nyquist {nyquist} Hz")));
        }
        if self.band_amplitudes.iter().any(|a| !(*a >= 0.0)) || !(self.broadband_floor >= 0.0) {
            return Err(Error::config("amplitudes must be non-negative"));
        }
        Ok(())
    }

    /// Largest distance from a band of one signature to the nearest band of
    /// the other (symmetric Hausdorff distance, Hz).
    pub fn separation(&self, other: &AudioSignature) -> f64 {
        fn directed(a: &[f64], b: &[f64]) -> f64 {
            a.iter()
                .map(|x| b.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        }
        if self.band_centers_hz.is_empty() || other.band_centers_hz.is_empty() {
            return if self.band_centers_hz.len() == other.band_centers_hz.len() { 0.0 } else { f64::INFINITY };
        }
        directed(&self.band_centers_hz, &other.band_centers_hz)
            .max(directed(&other.band_centers_hz, &self.band_centers_hz))
    }
}

/// Ground appearance of one class: base color plus coordinate-keyed grain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisualTexture {
    pub base_rgb: [f64; 3],
    /// Std of luminance grain shared across channels (0..255 units).
    pub grain: f64,
    /// Std of independent per-channel noise.
    pub chroma_noise: f64,
    /// Std of a relative brightness change drawn once per Voronoi region.
    pub region_brightness: f64,
}

/// Global affine color change applied to every rendered pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainShift {
    /// Rotation about the gray axis, degrees.
    pub hue_deg: f64,
    pub gain: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassParams {
    pub audio: AudioSignature,
    pub texture: VisualTexture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub seed: u64,
    pub width_m: f64,
    pub height_m: f64,
    pub meters_per_pixel: f64,
    pub num_classes: usize,
    /// Voronoi sites per class.
    pub sites_per_class: usize,
    pub classes: Vec<ClassParams>,
    pub domain_shift: Option<DomainShift>,
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.num_classes > 254 {
            return Err(Error::config("num_classes must be in 1..=254"));
        }
        if self.classes.len() != self.num_classes {
            return Err(Error::config(format!(
                "{} class parameter sets for {} classes",
                self.classes.len(),
                self.num_classes
            )));
        }
        if !(self.meters_per_pixel > 0.0) {
            return Err(Error::config("meters_per_pixel must be positive"));
        }
        if !(self.width_m >= self.meters_per_pixel && self.height_m >= self.meters_per_pixel) {
            return Err(Error::config("world must be at least one pixel in each dimension"));
        }
        if self.sites_per_class == 0 {
            return Err(Error::config("sites_per_class must be positive"));
        }
        Ok(())
    }

    /// Smallest pairwise spectral separation between classes (Hz).
    pub fn spectral_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.classes.len() {
            for j in i + 1..self.classes.len() {
                best = best.min(self.classes[i].audio.separation(&self.classes[j].audio));
            }
        }
        best
    }
}
