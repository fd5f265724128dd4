use ndarray::Array2;

use crate::exec::Exec;
use crate::imagery::{RgbImage, VOID_RGB};
use crate::{Error, Result};

const BINS: usize = 8;
/// 3 x 8 color-histogram bins plus 4 texture statistics.
pub const FEATURE_DIM: usize = 3 * BINS + 4;

#[derive(Default)]
struct Moments {
    n: f64,
    sum: f64,
    sum2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum2 += v * v;
    }

    fn mean_var(&self) -> (f64, f64) {
        if self.n == 0.0 {
            return (0.0, 0.0);
        }
        let m = self.sum / self.n;
        (m, (self.sum2 / self.n - m * m).max(0.0))
    }
}

/// Descriptor of the `w x h` window whose top-left corner is `(x0, y0)`;
/// coordinates outside the image are clamped to the nearest edge pixel.
/// Void pixels are ignored; `None` if every pixel is void.
pub fn descriptor_window(img: &RgbImage, x0: isize, y0: isize, w: usize, h: usize) -> Option<[f64; FEATURE_DIM]> {
    let clampx = |x: isize| x.clamp(0, img.width as isize - 1) as usize;
    let clampy = |y: isize| y.clamp(0, img.height as isize - 1) as usize;
    let mut out = [0.0; FEATURE_DIM];
    let mut count = 0.0;
    let mut gray = vec![None; w * h];
    for dy in 0..h {
        for dx in 0..w {
            let p = img.pixel(clampx(x0 + dx as isize), clampy(y0 + dy as isize));
            if p == VOID_RGB {
                continue;
            }
            for ch in 0..3 {
                out[ch * BINS + p[ch] as usize * BINS / 256] += 1.0;
            }
            count += 1.0;
            gray[dy * w + dx] = Some((p[0] as f64 + p[1] as f64 + p[2] as f64) / (3.0 * 255.0));
        }
    }
    if count == 0.0 {
        return None;
    }
    out[..3 * BINS].iter_mut().for_each(|v| *v /= count);
    let (mut hor, mut ver) = (Moments::default(), Moments::default());
    for dy in 0..h {
        for dx in 0..w {
            let Some(g) = gray[dy * w + dx] else { continue };
            if dx + 1 < w {
                if let Some(r) = gray[dy * w + dx + 1] {
                    hor.push(r - g);
                }
            }
            if dy + 1 < h {
                if let Some(b) = gray[(dy + 1) * w + dx] {
                    ver.push(b - g);
                }
            }
        }
    }
    let (hm, hv) = hor.mean_var();
    let (vm, vv) = ver.mean_var();
    out[3 * BINS..].copy_from_slice(&[hm, hv, vm, vv]);
    Some(out)
}

/// Normalized per-channel 8-bin color histograms followed by the mean and
/// variance of horizontal and vertical first differences of gray level
/// (in [0, 1]). Void pixels are excluded.
pub fn visual_features(patch: &RgbImage) -> Result<[f64; FEATURE_DIM]> {
    if patch.width == 0 || patch.height == 0 {
        return Err(Error::input("empty patch"));
    }
    descriptor_window(patch, 0, 0, patch.width, patch.height)
        .ok_or_else(|| Error::input("patch has only void pixels"))
}

/// Features of many patches as rows of a matrix.
pub fn visual_features_batch(patches: &[&RgbImage], exec: Exec) -> Result<Array2<f64>> {
    let rows = exec.try_map(patches, |p| visual_features(p))?;
    let mut m = Array2::zeros((rows.len(), FEATURE_DIM));
    for (i, r) in rows.iter().enumerate() {
        m.row_mut(i).assign(&ndarray::ArrayView1::from(&r[..]));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(rgb: [u8; 3], n: usize) -> RgbImage {
        let mut img = RgbImage::new(n, n);
        for y in 0..n {
            for x in 0..n {
                img.set_pixel(x, y, rgb);
            }
        }
        img
    }

    #[test]
    fn constant_patch() {
        let f = visual_features(&solid([10, 100, 250], 6)).unwrap();
        assert_eq!(f[0], 1.0);
        assert_eq!(f[BINS + 3], 1.0);
        assert_eq!(f[2 * BINS + 7], 1.0);
        assert_eq!(f[..3 * BINS].iter().sum::<f64>(), 3.0);
        assert_eq!(&f[3 * BINS..], &[0.0; 4]);
    }

    #[test]
    fn void_pixels_excluded() {
        let mut img = solid([40, 40, 40], 4);
        img.set_pixel(0, 0, VOID_RGB);
        let f = visual_features(&img).unwrap();
        assert_eq!(f[1], 1.0);
        assert!(visual_features(&solid(VOID_RGB, 3)).is_err());
    }

    #[test]
    fn gradient_statistics() {
        let mut img = RgbImage::new(3, 1);
        for x in 0..3 {
            let v = (x * 51) as u8;
            img.set_pixel(x, 0, [v, v, v]);
        }
        let f = visual_features(&img).unwrap();
        assert!((f[24] - 0.2).abs() < 1e-12);
        assert!(f[25].abs() < 1e-12);
        assert_eq!((f[26], f[27]), (0.0, 0.0));
    }

    #[test]
    fn clamped_window_repeats_edges() {
        let img = solid([90, 90, 90], 3);
        assert_eq!(descriptor_window(&img, -4, -4, 9, 9).unwrap(), visual_features(&img).unwrap());
    }
}
