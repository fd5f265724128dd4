use std::collections::BTreeMap;

use nalgebra::Point2;

use crate::geometry::{CameraModel, Pose};
use crate::imagery::{decode_label, encode_class, LabelMask, VOID};
use crate::{Error, Result};

/// North-up global grid: cell `(row, col)` covers
/// `x in [col, col+1) * mpp`, `y in (H - (row+1) mpp, H - row mpp]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    pub width: usize,
    pub height: usize,
    pub meters_per_pixel: f64,
    pub num_classes: usize,
    /// `votes[(row * width + col) * K + c]`
    pub votes: Vec<u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FuseReport {
    /// Map cells that received a vote.
    pub voted: usize,
    /// View pixels whose ground position fell outside the map.
    pub clipped: usize,
}

impl SemanticMap {
    pub fn new(width: usize, height: usize, meters_per_pixel: f64, num_classes: usize) -> Result<Self> {
        if !(meters_per_pixel > 0.0) || num_classes == 0 || num_classes > 254 {
            return Err(Error::config("map needs positive resolution and 1..=254 classes"));
        }
        Ok(Self {
            width,
            height,
            meters_per_pixel,
            num_classes,
            votes: vec![0; width * height * num_classes],
        })
    }

    pub fn height_m(&self) -> f64 {
        self.height as f64 * self.meters_per_pixel
    }

    pub fn cell_votes(&self, row: usize, col: usize) -> &[u32] {
        let i = (row * self.width + col) * self.num_classes;
        &self.votes[i..i + self.num_classes]
    }

    /// Voted class (lowest id on ties), `None` if never observed.
    pub fn class_at(&self, row: usize, col: usize) -> Option<usize> {
        let v = self.cell_votes(row, col);
        let mut best = 0;
        for c in 1..v.len() {
            if v[c] > v[best] {
                best = c;
            }
        }
        (v[best] > 0).then_some(best)
    }

    /// Encoded class grid (void where unobserved).
    pub fn class_mask(&self) -> LabelMask {
        let mut m = LabelMask::new(self.width, self.height, VOID);
        for r in 0..self.height {
            for c in 0..self.width {
                if let Some(k) = self.class_at(r, c) {
                    m.set(c, r, encode_class(k));
                }
            }
        }
        m
    }

    /// Adds one vote per map cell seen by a predicted mask. Each map cell
    /// center is projected into the view through the ground homography of
    /// `pose`; cells landing on a classified pixel vote for that class.
    pub fn fuse_observation(&mut self, mask: &LabelMask, pose: &Pose, camera: &CameraModel) -> Result<FuseReport> {
        let h = camera.ground_homography(pose);
        let inv = h
            .inverse()
            .ok_or_else(|| Error::input("view homography is not invertible"))?;
        let mpp = self.meters_per_pixel;
        let top = self.height_m();
        // ground footprint of the view
        let corners = [(0.0, 0.0), (mask.width as f64, 0.0), (0.0, mask.height as f64), (mask.width as f64, mask.height as f64)];
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (u, v) in corners {
            let g = inv
                .apply(Point2::new(u, v))
                .ok_or_else(|| Error::input("view corner does not reach the ground"))?;
            lo = (lo.0.min(g.x), lo.1.min(g.y));
            hi = (hi.0.max(g.x), hi.1.max(g.y));
        }
        let mut report = FuseReport::default();
        let c0 = (lo.0 / mpp).floor() as i64 - 1;
        let c1 = (hi.0 / mpp).ceil() as i64 + 1;
        let r0 = ((top - hi.1) / mpp).floor() as i64 - 1;
        let r1 = ((top - lo.1) / mpp).ceil() as i64 + 1;
        for r in r0..=r1 {
            for c in c0..=c1 {
                let center = Point2::new((c as f64 + 0.5) * mpp, top - (r as f64 + 0.5) * mpp);
                let Some(px) = h.apply(center) else { continue };
                let (u, v) = (px.x.floor(), px.y.floor());
                if u < 0.0 || v < 0.0 || u >= mask.width as f64 || v >= mask.height as f64 {
                    continue;
                }
                let Some(class) = decode_label(mask.get(u as usize, v as usize)) else { continue };
                if class >= self.num_classes {
                    return Err(Error::input(format!("mask class {class} out of range")));
                }
                if r < 0 || c < 0 || r >= self.height as i64 || c >= self.width as i64 {
                    report.clipped += 1;
                    continue;
                }
                let i = (r as usize * self.width + c as usize) * self.num_classes + class;
                self.votes[i] += 1;
                report.voted += 1;
            }
        }
        Ok(report)
    }
}

/// Per-cell traversal cost, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMap {
    pub width: usize,
    pub height: usize,
    pub costs: Vec<f64>,
}

impl CostMap {
    pub fn uniform(width: usize, height: usize, cost: f64) -> Self {
        Self {
            width,
            height,
            costs: vec![cost; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.costs[row * self.width + col]
    }
}

/// Looks up each cell's class cost; unobserved cells get `unknown_cost`.
/// Costs must be positive (infinite marks an impassable class).
pub fn assign_costs(map: &SemanticMap, table: &BTreeMap<usize, f64>, unknown_cost: f64) -> Result<CostMap> {
    if let Some((c, v)) = table.iter().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::config(format!("cost {v} for class {c} is not positive")));
    }
    if !(unknown_cost > 0.0) {
        return Err(Error::config("unknown cost must be positive"));
    }
    let mut costs = Vec::with_capacity(map.width * map.height);
    for r in 0..map.height {
        for c in 0..map.width {
            costs.push(match map.class_at(r, c) {
                Some(k) => *table
                    .get(&k)
                    .ok_or_else(|| Error::config(format!("no cost for class {k}")))?,
                None => unknown_cost,
            });
        }
    }
    Ok(CostMap {
        width: map.width,
        height: map.height,
        costs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera() -> CameraModel {
        CameraModel::birds_eye(10, 10, 0.1, 5.0).unwrap()
    }

    fn filled(v: u8) -> LabelMask {
        LabelMask::new(10, 10, v)
    }

    #[test]
    fn single_observation_reproduces_mask() {
        let mut mask = filled(encode_class(0));
        for y in 0..10 {
            for x in 5..10 {
                mask.set(x, y, encode_class(1));
            }
        }
        let mut map = SemanticMap::new(20, 20, 0.1, 2).unwrap();
        // view centered at (1.0, 1.0) covers map cols 5..15, rows 5..15
        let r = map.fuse_observation(&mask, &Pose::planar(0.0, 1.0, 1.0, 0.0), &camera()).unwrap();
        assert_eq!(r.voted, 100);
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(map.class_at(y + 5, x + 5), mask.class_at(x, y));
            }
        }
        assert_eq!(map.class_at(0, 0), None);
    }

    #[test]
    fn majority_and_ties() {
        let pose = Pose::planar(0.0, 0.5, 0.5, 0.0);
        let mut map = SemanticMap::new(10, 10, 0.1, 3).unwrap();
        map.fuse_observation(&filled(encode_class(2)), &pose, &camera()).unwrap();
        map.fuse_observation(&filled(encode_class(1)), &pose, &camera()).unwrap();
        assert_eq!(map.class_at(3, 3), Some(1));
        map.fuse_observation(&filled(encode_class(2)), &pose, &camera()).unwrap();
        assert_eq!(map.class_at(3, 3), Some(2));
    }

    #[test]
    fn out_of_map_cells_are_clipped() {
        let mut map = SemanticMap::new(10, 10, 0.1, 1).unwrap();
        let r = map.fuse_observation(&filled(encode_class(0)), &Pose::planar(0.0, 0.0, 0.0, 0.0), &camera()).unwrap();
        assert_eq!(r.voted, 25);
        assert_eq!(r.clipped, 75);
    }

    #[test]
    fn cost_lookup() {
        let mut map = SemanticMap::new(4, 1, 0.1, 2).unwrap();
        map.votes[0 * 2] = 1; // cell 0 class 0
        map.votes[1 * 2 + 1] = 1; // cell 1 class 1
        map.votes[2 * 2] = 1; // cell 2 class 0
        let table = BTreeMap::from([(0, 1.0), (1, 100.0)]);
        let cm = assign_costs(&map, &table, 50.0).unwrap();
        assert_eq!(cm.costs, vec![1.0, 100.0, 1.0, 50.0]);
        assert!(assign_costs(&map, &BTreeMap::from([(0, 1.0), (1, 0.0)]), 1.0).is_err());
        assert!(assign_costs(&map, &BTreeMap::from([(0, 1.0)]), 1.0).is_err());
    }
}
