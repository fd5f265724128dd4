use nalgebra::Point2;
use rand::Rng;

use super::WorldSpec;
use crate::{seed, Result};

/// Rasterized class map, north-up: row 0 is the northern edge.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub spec: WorldSpec,
    pub width_px: usize,
    pub height_px: usize,
    pub classes: Vec<u8>,
    /// Index of the Voronoi site owning each cell.
    pub regions: Vec<u16>,
    /// Voronoi sites (meters) and their class.
    pub sites: Vec<(Point2<f64>, usize)>,
    /// Number of times the sites were redrawn because a class covered
    /// less than 1% of the world.
    pub site_retries: u32,
}

const MAX_SITE_ATTEMPTS: u32 = 64;

impl World {
    pub fn meters_per_pixel(&self) -> f64 {
        self.spec.meters_per_pixel
    }

    /// Cell containing world point `(x, y)`, if inside.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let mpp = self.spec.meters_per_pixel;
        let col = (x / mpp).floor();
        let row = ((self.spec.height_m - y) / mpp).floor();
        if col < 0.0 || row < 0.0 || col >= self.width_px as f64 || row >= self.height_px as f64 {
            return None;
        }
        Some((col as usize, row as usize))
    }

    pub fn class_at(&self, x: f64, y: f64) -> Option<usize> {
        self.cell_of(x, y)
            .map(|(c, r)| self.classes[r * self.width_px + c] as usize)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.spec.width_m).contains(&x) && (0.0..=self.spec.height_m).contains(&y)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.spec.num_classes];
        for &c in &self.classes {
            counts[c as usize] += 1;
        }
        counts
    }

    /// Center of cell `(col, row)` in meters.
    pub fn cell_center(&self, col: usize, row: usize) -> Point2<f64> {
        let mpp = self.spec.meters_per_pixel;
        Point2::new((col as f64 + 0.5) * mpp, self.spec.height_m - (row as f64 + 0.5) * mpp)
    }
}

fn draw_sites(spec: &WorldSpec, attempt: u32) -> Vec<(Point2<f64>, usize)> {
    let mut rng = seed::rng(spec.seed, 0x5175 + attempt as u64);
    (0..spec.num_classes * spec.sites_per_class)
        .map(|i| {
            let p = Point2::new(
                rng.random_range(0.0..spec.width_m),
                rng.random_range(0.0..spec.height_m),
            );
            (p, i % spec.num_classes)
        })
        .collect()
}

fn paint(spec: &WorldSpec, sites: &[(Point2<f64>, usize)], w: usize, h: usize) -> (Vec<u8>, Vec<u16>) {
    let mpp = spec.meters_per_pixel;
    let mut out = vec![0u8; w * h];
    let mut regions = vec![0u16; w * h];
    for row in 0..h {
        let y = spec.height_m - (row as f64 + 0.5) * mpp;
        for col in 0..w {
            let x = (col as f64 + 0.5) * mpp;
            let mut best = (f64::INFINITY, 0usize);
            for (i, (p, _)) in sites.iter().enumerate() {
                let d = (p.x - x).powi(2) + (p.y - y).powi(2);
                if d < best.0 {
                    best = (d, i);
                }
            }
            out[row * w + col] = sites[best.1].1 as u8;
            regions[row * w + col] = best.1 as u16;
        }
    }
    (out, regions)
}

/// Seeded Voronoi partition of the world into class regions. Sites are
/// redrawn (deterministically) while any class covers under 1% of cells.
pub fn generate_world(spec: &WorldSpec) -> Result<World> {
    spec.validate()?;
    let w = (spec.width_m / spec.meters_per_pixel).round() as usize;
    let h = (spec.height_m / spec.meters_per_pixel).round() as usize;
    let min_cells = (w * h) / 100;
    let mut attempt = 0;
    loop {
        let sites = draw_sites(spec, attempt);
        let (classes, regions) = paint(spec, &sites, w, h);
        let mut counts = vec![0usize; spec.num_classes];
        for &c in &classes {
            counts[c as usize] += 1;
        }
        let ok = counts.iter().all(|&n| n >= min_cells.max(1));
        if ok || attempt + 1 >= MAX_SITE_ATTEMPTS {
            return Ok(World {
                spec: spec.clone(),
                width_px: w,
                height_px: h,
                classes,
                regions,
                sites,
                site_retries: attempt,
            });
        }
        attempt += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::easy_spec;

    #[test]
    fn single_class_world_is_uniform() {
        let mut spec = easy_spec(7);
        spec.num_classes = 1;
        spec.classes.truncate(1);
        spec.width_m = 5.0;
        spec.height_m = 5.0;
        let w = generate_world(&spec).unwrap();
        assert!(w.classes.iter().all(|&c| c == 0));
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = easy_spec(3);
        spec.width_m = 6.0;
        spec.height_m = 6.0;
        assert_eq!(generate_world(&spec).unwrap(), generate_world(&spec).unwrap());
    }

    #[test]
    fn invalid_dimensions_rejected() {
        let mut spec = easy_spec(1);
        spec.meters_per_pixel = 0.0;
        assert!(generate_world(&spec).is_err());
        let mut spec = easy_spec(1);
        spec.width_m = 0.0;
        assert!(generate_world(&spec).is_err());
    }

    #[test]
    fn five_classes_all_present() {
        let mut spec = easy_spec(11);
        spec.width_m = 10.0;
        spec.height_m = 10.0; // 200 x 200 px at 0.05
        let w = generate_world(&spec).unwrap();
        assert_eq!((w.width_px, w.height_px), (200, 200));
        for (k, n) in w.class_counts().iter().enumerate() {
            assert!(*n * 100 >= 200 * 200, "class {k} covers {n} cells");
        }
    }

    #[test]
    fn cell_lookup_is_north_up() {
        let mut spec = easy_spec(2);
        spec.width_m = 2.0;
        spec.height_m = 1.0;
        let w = generate_world(&spec).unwrap();
        assert_eq!(w.cell_of(0.01, 0.99), Some((0, 0)));
        assert_eq!(w.cell_of(1.99, 0.01), Some((39, 19)));
        assert_eq!(w.cell_of(-0.01, 0.5), None);
        let c = w.cell_center(3, 4);
        assert_eq!(w.cell_of(c.x, c.y), Some((3, 4)));
    }
}
