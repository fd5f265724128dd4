use super::{DomainShift, World};
use crate::geometry::{BirdsEyeView, Pose};
use crate::imagery::{encode_class, LabelMask, RgbImage, VOID, VOID_RGB};
use crate::{seed, Error, Result};

/// World point under the center of pixel `(c, r)` for a north-up view
/// centered on `pose`.
fn pixel_to_world(pose: &Pose, c: usize, r: usize, size: usize, mpp: f64) -> (f64, f64) {
    let half = size as f64 / 2.0;
    (
        pose.position.x + (c as f64 + 0.5 - half) * mpp,
        pose.position.y - (r as f64 + 0.5 - half) * mpp,
    )
}

fn shift_color(rgb: [f64; 3], shift: &DomainShift) -> [f64; 3] {
    let (s, c) = shift.hue_deg.to_radians().sin_cos();
    let k = (1.0 - c) / 3.0;
    let q = (1.0f64 / 3.0).sqrt() * s;
    let m = [
        [c + k, k - q, k + q],
        [k + q, c + k, k - q],
        [k - q, k + q, c + k],
    ];
    let mut out = [0.0; 3];
    for (i, row) in m.iter().enumerate() {
        let v: f64 = row.iter().zip(rgb).map(|(a, b)| a * b).sum();
        out[i] = v * shift.gain + shift.offset;
    }
    out
}

/// Color of world cell `(col, row)`; noise is keyed to the cell so that all
/// views of a cell agree.
fn cell_color(world: &World, col: usize, row: usize) -> [u8; 3] {
    let class = world.classes[row * world.width_px + col] as usize;
    let tex = &world.spec.classes[class].texture;
    let s = world.spec.seed;
    let (a, b) = (col as i64, row as i64);
    let g = tex.grain * seed::hash_normal(s, a, b, 0);
    let region = world.regions[row * world.width_px + col] as i64;
    let light = 1.0 + tex.region_brightness * seed::hash_normal(s, region, -1, 4);
    let mut rgb = [0.0; 3];
    for (ch, v) in rgb.iter_mut().enumerate() {
        *v = tex.base_rgb[ch] * light + g + tex.chroma_noise * seed::hash_normal(s, a, b, 1 + ch as u64);
    }
    if let Some(shift) = &world.spec.domain_shift {
        rgb = shift_color(rgb, shift);
    }
    let out = rgb.map(|v| v.round().clamp(0.0, 255.0) as u8);
    if out == VOID_RGB {
        [254, 0, 255]
    } else {
        out
    }
}

/// North-up birds-eye image of `size x size` pixels centered on `pose`.
/// Pixels beyond the world are void.
pub fn render_birdseye(world: &World, pose: &Pose, image_size_px: usize, meters_per_pixel: f64) -> Result<BirdsEyeView> {
    if !world.contains(pose.position.x, pose.position.y) {
        return Err(Error::input("view pose lies outside the world"));
    }
    if !(meters_per_pixel > 0.0) {
        return Err(Error::input("meters_per_pixel must be positive"));
    }
    let mut image = RgbImage::new(image_size_px, image_size_px);
    for r in 0..image_size_px {
        for c in 0..image_size_px {
            let (x, y) = pixel_to_world(pose, c, r, image_size_px, meters_per_pixel);
            let rgb = match world.cell_of(x, y) {
                Some((col, row)) => cell_color(world, col, row),
                None => VOID_RGB,
            };
            image.set_pixel(c, r, rgb);
        }
    }
    Ok(BirdsEyeView {
        image,
        frame_pose: pose.north_up(),
    })
}

/// Dense ground-truth labels (encoded, void outside the world) for the view
/// rendered at `pose`.
pub fn dense_truth(world: &World, pose: &Pose, image_size_px: usize, meters_per_pixel: f64) -> LabelMask {
    let mut mask = LabelMask::new(image_size_px, image_size_px, VOID);
    for r in 0..image_size_px {
        for c in 0..image_size_px {
            let (x, y) = pixel_to_world(pose, c, r, image_size_px, meters_per_pixel);
            if let Some((col, row)) = world.cell_of(x, y) {
                mask.set(c, r, encode_class(world.classes[row * world.width_px + col] as usize));
            }
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{easy_spec, generate_world};

    fn world(shift: bool) -> World {
        let mut spec = easy_spec(4);
        spec.width_m = 10.0;
        spec.height_m = 10.0;
        if shift {
            spec.domain_shift = crate::synthgen::shifted_spec(4).domain_shift;
        }
        generate_world(&spec).unwrap()
    }

    #[test]
    fn same_pose_same_image() {
        let w = world(false);
        let p = Pose::planar(0.0, 5.0, 5.0, 0.3);
        assert_eq!(render_birdseye(&w, &p, 32, 0.05).unwrap(), render_birdseye(&w, &p, 32, 0.05).unwrap());
    }

    #[test]
    fn overlapping_views_agree() {
        let w = world(false);
        let a = render_birdseye(&w, &Pose::planar(0.0, 5.0, 5.0, 0.0), 40, 0.05).unwrap();
        // shifted east by half a view (20 px = 1 m)
        let b = render_birdseye(&w, &Pose::planar(0.0, 6.0, 5.0, 0.0), 40, 0.05).unwrap();
        assert_eq!(a.image.crop(20, 0, 20, 40), b.image.crop(0, 0, 20, 40));
    }

    #[test]
    fn outside_world_is_void() {
        let w = world(false);
        let v = render_birdseye(&w, &Pose::planar(0.0, 0.2, 0.2, 0.0), 32, 0.05).unwrap();
        assert!(v.image.is_void(0, 31));
        assert!(!v.image.is_void(31, 0));
        let t = dense_truth(&w, &Pose::planar(0.0, 0.2, 0.2, 0.0), 32, 0.05);
        assert_eq!(t.get(0, 31), VOID);
    }

    #[test]
    fn pose_outside_world_rejected() {
        let w = world(false);
        assert!(render_birdseye(&w, &Pose::planar(0.0, -1.0, 5.0, 0.0), 8, 0.05).is_err());
    }

    #[test]
    fn single_class_image_stays_near_base_color() {
        let mut w = world(false);
        w.classes.iter_mut().for_each(|c| *c = 1);
        w.spec.classes[1].texture.region_brightness = 0.0;
        let v = render_birdseye(&w, &Pose::planar(0.0, 5.0, 5.0, 0.0), 32, 0.05).unwrap();
        let base = w.spec.classes[1].texture.base_rgb;
        let n = (32 * 32) as f64;
        for ch in 0..3 {
            let mean: f64 = v.image.data.chunks(3).map(|p| p[ch] as f64).sum::<f64>() / n;
            assert!((mean - base[ch]).abs() < 8.0, "channel {ch}: {mean} vs {}", base[ch]);
        }
    }

    #[test]
    fn domain_shift_changes_colors() {
        let a = world(false);
        let b = world(true);
        assert!(b.spec.domain_shift.is_some());
        let p = Pose::planar(0.0, 5.0, 5.0, 0.0);
        assert_ne!(render_birdseye(&a, &p, 16, 0.05).unwrap(), render_birdseye(&b, &p, 16, 0.05).unwrap());
    }

    #[test]
    fn zero_hue_unit_gain_is_identity() {
        let s = DomainShift { hue_deg: 0.0, gain: 1.0, offset: 0.0 };
        let out = shift_color([10.0, 20.0, 30.0], &s);
        for (a, b) in out.iter().zip([10.0, 20.0, 30.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
