use super::{AudioSignature, ClassParams, DomainShift, VisualTexture, WorldSpec};

pub const TERRAIN_NAMES: [&str; 5] = ["asphalt", "grass", "cobble", "parking", "gravel"];

/// Width of one pooled frequency block of the default 256-sample STFT at
/// 44.1 kHz (129 bins averaged in 16 blocks).
const BLOCK_HZ: f64 = 44_100.0 / 256.0 * (129.0 / 16.0);

fn block(k: f64) -> f64 {
    (k + 0.5) * BLOCK_HZ
}

fn textures() -> [VisualTexture; 5] {
    [
        VisualTexture { base_rgb: [104.0, 104.0, 110.0], grain: 6.0, chroma_noise: 2.0, region_brightness: 0.15 },
        VisualTexture { base_rgb: [78.0, 150.0, 64.0], grain: 16.0, chroma_noise: 6.0, region_brightness: 0.15 },
        VisualTexture { base_rgb: [158.0, 100.0, 74.0], grain: 24.0, chroma_noise: 5.0, region_brightness: 0.15 },
        VisualTexture { base_rgb: [168.0, 172.0, 188.0], grain: 8.0, chroma_noise: 3.0, region_brightness: 0.15 },
        VisualTexture { base_rgb: [118.0, 114.0, 108.0], grain: 20.0, chroma_noise: 4.0, region_brightness: 0.15 },
    ]
}

fn assemble(seed: u64, bands: [[f64; 2]; 5], amplitude: f64) -> WorldSpec {
    let classes = bands
        .iter()
        .zip(textures())
        .map(|(b, texture)| ClassParams {
            audio: AudioSignature {
                band_centers_hz: b.to_vec(),
                band_amplitudes: vec![amplitude; 2],
                broadband_floor: 0.002,
                speed_gain: 1.0,
            },
            texture,
        })
        .collect();
    WorldSpec {
        seed,
        width_m: 40.0,
        height_m: 40.0,
        meters_per_pixel: 0.05,
        num_classes: 5,
        sites_per_class: 3,
        classes,
        domain_shift: None,
    }
}

/// Five terrains whose two acoustic bands each fall in distinct pooled
/// frequency blocks (separation over 1.3 kHz).
pub fn easy_spec(seed: u64) -> WorldSpec {
    let b = |k: [f64; 2]| [block(k[0]), block(k[1])];
    assemble(
        seed,
        [b([1.0, 7.0]), b([2.0, 9.0]), b([3.0, 11.0]), b([4.0, 13.0]), b([5.0, 15.0])],
        0.05,
    )
}

/// Five terrains whose bands are packed within a few STFT bins of each
/// other, so that classes share pooled blocks.
pub fn hard_spec(seed: u64) -> WorldSpec {
    let base = [block(3.0), block(8.0)];
    let step = 60.0;
    let bands = std::array::from_fn(|k| [base[0] + step * k as f64, base[1] + step * k as f64]);
    assemble(seed, bands, 0.02)
}

/// The easy world seen under different lighting: darker, hue-rotated.
pub fn shifted_spec(seed: u64) -> WorldSpec {
    WorldSpec {
        domain_shift: Some(DomainShift { hue_deg: 150.0, gain: 0.5, offset: 0.0 }),
        ..easy_spec(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for spec in [easy_spec(1), hard_spec(1), shifted_spec(1)] {
            spec.validate().unwrap();
            for c in &spec.classes {
                c.audio.validate(44_100).unwrap();
            }
        }
    }

    #[test]
    fn easy_is_more_separable_than_hard() {
        let e = easy_spec(0).spectral_separation();
        let h = hard_spec(0).spectral_separation();
        assert!(e > 1000.0, "{e}");
        assert!(h < 100.0, "{h}");
    }

    #[test]
    fn separation_is_symmetric_hausdorff() {
        let a = AudioSignature { band_centers_hz: vec![100.0, 500.0], band_amplitudes: vec![1.0; 2], broadband_floor: 0.0, speed_gain: 1.0 };
        let b = AudioSignature { band_centers_hz: vec![120.0], band_amplitudes: vec![1.0], broadband_floor: 0.0, speed_gain: 1.0 };
        assert_eq!(a.separation(&b), 380.0);
        assert_eq!(b.separation(&a), 380.0);
        assert_eq!(a.separation(&a), 0.0);
    }
}
