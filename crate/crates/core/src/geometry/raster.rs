use nalgebra::Point2;

use super::BirdsEyeView;
use crate::imagery::{LabelMask, BACKGROUND};
use crate::{Error, Result};

/// Radius of the robot's circular footprint.
pub const FOOTPRINT_RADIUS_M: f64 = 0.4;

/// Stroke half-width in pixels for a footprint radius.
pub fn stroke_half_width_px(footprint_radius_m: f64, meters_per_pixel: f64) -> Result<usize> {
    if !(meters_per_pixel > 0.0) || footprint_radius_m < 0.0 {
        return Err(Error::input("meters_per_pixel must be positive and radius non-negative"));
    }
    Ok((footprint_radius_m / meters_per_pixel).round() as usize)
}

/// Polyline piece with the label it paints and the clip it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: Point2<f64>,
    pub b: Point2<f64>,
    pub label: u8,
    pub owner: Option<u32>,
}

impl Segment {
    fn distance(&self, p: Point2<f64>) -> f64 {
        let ab = self.b - self.a;
        let len2 = ab.norm_squared();
        let t = if len2 > 0.0 {
            ((p - self.a).dot(&ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (p - (self.a + ab * t)).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRaster {
    pub labels: LabelMask,
    /// Index of the segment that painted each pixel.
    pub segment: Vec<Option<u32>>,
    /// Clip index of the painting segment, if it has one.
    pub provenance: Vec<Option<u32>>,
}

/// Paints every pixel whose center lies within `half_width_px` of a segment
/// with the label of its nearest segment. Equal distances go to the lower
/// segment index.
pub fn rasterize_segments(segments: &[Segment], half_width_px: usize, width: usize, height: usize) -> PathRaster {
    let n = width * height;
    let mut best = vec![f64::INFINITY; n];
    let mut out = PathRaster {
        labels: LabelMask::new(width, height, BACKGROUND),
        segment: vec![None; n],
        provenance: vec![None; n],
    };
    let hw = half_width_px as f64;
    for (si, seg) in segments.iter().enumerate() {
        let x0 = (seg.a.x.min(seg.b.x) - hw - 1.0).floor().max(0.0);
        let y0 = (seg.a.y.min(seg.b.y) - hw - 1.0).floor().max(0.0);
        let x1 = (seg.a.x.max(seg.b.x) + hw + 1.0).ceil().min(width as f64);
        let y1 = (seg.a.y.max(seg.b.y) + hw + 1.0).ceil().min(height as f64);
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        for y in y0 as usize..y1 as usize {
            for x in x0 as usize..x1 as usize {
                let d = seg.distance(Point2::new(x as f64 + 0.5, y as f64 + 0.5));
                let i = y * width + x;
                if d <= hw + 1e-9 && d < best[i] {
                    best[i] = d;
                    out.labels.data[i] = seg.label;
                    out.segment[i] = Some(si as u32);
                    out.provenance[i] = seg.owner;
                }
            }
        }
    }
    out
}

/// Rasterizes the footprint stroke around a pixel polyline. Segment `j`
/// joins points `j` and `j + 1` and paints `class_per_segment[j]`; a
/// single-point curve paints a disc with `class_per_segment[0]`. An empty
/// curve gives an all-background mask.
pub fn rasterize_path(
    pixel_curve: &[Point2<f64>],
    class_per_segment: &[u8],
    footprint_radius_m: f64,
    meters_per_pixel: f64,
    width: usize,
    height: usize,
) -> Result<LabelMask> {
    let hw = stroke_half_width_px(footprint_radius_m, meters_per_pixel)?;
    let needed = pixel_curve.len().saturating_sub(1).max(usize::from(!pixel_curve.is_empty()));
    if class_per_segment.len() < needed {
        return Err(Error::input(format!(
            "{} segment classes for {} segments",
            class_per_segment.len(),
            needed
        )));
    }
    let segments: Vec<Segment> = match pixel_curve {
        [] => Vec::new(),
        [p] => vec![Segment { a: *p, b: *p, label: class_per_segment[0], owner: None }],
        pts => pts
            .windows(2)
            .zip(class_per_segment)
            .map(|(w, &label)| Segment { a: w[0], b: w[1], label, owner: None })
            .collect(),
    };
    Ok(rasterize_segments(&segments, hw, width, height).labels)
}

/// Splits a polyline through clip midpoints into half-segments so that each
/// clip owns the stretch of path nearest to its midpoint. `points[i]` is
/// `(clip index, pixel)`; consecutive entries must be consecutive clips for
/// the path to be joined.
pub fn clip_segments(points: &[(usize, Point2<f64>)], labels: &[u8]) -> Vec<Segment> {
    let mut out = Vec::with_capacity(points.len() * 2);
    for (k, &(clip, p)) in points.iter().enumerate() {
        let label = labels[clip];
        let owner = Some(clip as u32);
        let prev = k.checked_sub(1).map(|j| points[j]).filter(|(c, _)| c + 1 == clip);
        let next = points.get(k + 1).copied().filter(|(c, _)| *c == clip + 1);
        if prev.is_none() && next.is_none() {
            out.push(Segment { a: p, b: p, label, owner });
        }
        if let Some((_, q)) = prev {
            out.push(Segment { a: nalgebra::center(&q, &p), b: p, label, owner });
        }
        if let Some((_, q)) = next {
            out.push(Segment { a: p, b: nalgebra::center(&p, &q), label, owner });
        }
    }
    out
}

/// Projected clip midpoint inside a view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub clip: usize,
    pub pixel: Point2<f64>,
}

/// Birds-eye image with labels painted on the traversed path.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakLabelImage {
    pub view: BirdsEyeView,
    pub labels: LabelMask,
    /// Source clip per pixel; `None` on background.
    pub provenance: Vec<Option<u32>>,
    /// Clip midpoints that project inside the image.
    pub samples: Vec<PathSample>,
}

/// Paints the footprint of a projected clip trajectory onto a view.
/// `projected` holds `(clip index, pixel)` for all projectable clips, in
/// clip order; `clip_labels[clip]` is the encoded label of each clip.
pub fn weak_label_image(
    view: &BirdsEyeView,
    projected: &[(usize, Point2<f64>)],
    clip_labels: &[u8],
    footprint_radius_m: f64,
    meters_per_pixel: f64,
) -> Result<WeakLabelImage> {
    let hw = stroke_half_width_px(footprint_radius_m, meters_per_pixel)?;
    let (w, h) = (view.image.width, view.image.height);
    let margin = hw as f64 + 2.0;
    let near = |p: &Point2<f64>| {
        p.x > -margin && p.y > -margin && p.x < w as f64 + margin && p.y < h as f64 + margin
    };
    // Keep runs that come near the view plus one neighbour on each side so
    // half-segments crossing the border are complete.
    let mut keep = vec![false; projected.len()];
    for (k, (_, p)) in projected.iter().enumerate() {
        if near(p) {
            for j in k.saturating_sub(1)..(k + 2).min(projected.len()) {
                keep[j] = true;
            }
        }
    }
    let local: Vec<(usize, Point2<f64>)> = projected
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(p, _)| *p)
        .collect();
    let raster = rasterize_segments(&clip_segments(&local, clip_labels), hw, w, h);
    let samples = local
        .iter()
        .filter(|(_, p)| p.x >= 0.0 && p.y >= 0.0 && p.x < w as f64 && p.y < h as f64)
        .map(|&(clip, pixel)| PathSample { clip, pixel })
        .collect();
    Ok(WeakLabelImage {
        view: view.clone(),
        labels: raster.labels,
        provenance: raster.provenance,
        samples,
    })
}
