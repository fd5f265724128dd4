use super::WeakLabelImage;
use crate::imagery::{decode_label, RgbImage};

/// Square crop of terrain on the labeled path, tied to one audio clip.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainPatch {
    pub pixels: RgbImage,
    pub clip_index: usize,
    /// Pose row of the clip midpoint (poses are one per clip).
    pub center_pose_index: usize,
    /// Distance in pixels from the patch center to the image center.
    pub offset_from_center_px: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchSkip {
    /// The square would leave the image.
    OutOfView,
    /// Some pixels of the square are not on the labeled path.
    OffPath,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatchExtraction {
    pub patches: Vec<TerrainPatch>,
    pub skipped: Vec<(usize, PatchSkip)>,
}

/// Cuts one `patch_px` square per clip midpoint visible in the image. A
/// square is kept only when it lies in the image and every pixel is on the
/// labeled path; patches of neighbouring clips may overlap.
pub fn extract_patches(weak: &WeakLabelImage, patch_px: usize) -> PatchExtraction {
    let mut out = PatchExtraction::default();
    let img = &weak.view.image;
    let (w, h) = (img.width as i64, img.height as i64);
    let half = patch_px as i64 / 2;
    for s in &weak.samples {
        if patch_px == 0 {
            break;
        }
        let x0 = s.pixel.x.floor() as i64 - half;
        let y0 = s.pixel.y.floor() as i64 - half;
        if x0 < 0 || y0 < 0 || x0 + patch_px as i64 > w || y0 + patch_px as i64 > h {
            out.skipped.push((s.clip, PatchSkip::OutOfView));
            continue;
        }
        let (x0, y0) = (x0 as usize, y0 as usize);
        let on_path = (y0..y0 + patch_px)
            .all(|y| (x0..x0 + patch_px).all(|x| decode_label(weak.labels.get(x, y)).is_some()));
        if !on_path {
            out.skipped.push((s.clip, PatchSkip::OffPath));
            continue;
        }
        let cx = x0 as f64 + patch_px as f64 / 2.0 - w as f64 / 2.0;
        let cy = y0 as f64 + patch_px as f64 / 2.0 - h as f64 / 2.0;
        out.patches.push(TerrainPatch {
            pixels: img.crop(x0, y0, patch_px, patch_px),
            clip_index: s.clip,
            center_pose_index: s.clip,
            offset_from_center_px: cx.hypot(cy),
        });
    }
    out
}
