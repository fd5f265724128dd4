use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::CostMap;
use crate::{Error, Result};

/// Cell sequence `(row, col)` from start to goal and the sum of the costs
/// of every cell on it, start included.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub cells: Vec<(usize, usize)>,
    pub cost: f64,
}

#[derive(PartialEq)]
struct Key(f64, u64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Sum of the cell costs along a path.
pub fn path_cost(map: &CostMap, cells: &[(usize, usize)]) -> f64 {
    cells.iter().map(|&(r, c)| map.get(r, c)).sum()
}

/// Dijkstra over the 4-connected grid where entering a cell costs the
/// cell's value. Neighbours are expanded east, north, west, south and only
/// strictly cheaper routes replace a recorded one, so equal-cost ties are
/// resolved deterministically. `Ok(None)` when the goal is unreachable
/// (infinite costs).
pub fn plan(map: &CostMap, start: (usize, usize), goal: (usize, usize)) -> Result<Option<Trajectory>> {
    let (w, h) = (map.width, map.height);
    for (name, (r, c)) in [("start", start), ("goal", goal)] {
        if r >= h || c >= w {
            return Err(Error::input(format!("{name} ({r}, {c}) outside the {h}x{w} map")));
        }
    }
    if map.costs.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::input("cell costs must be positive"));
    }
    let idx = |r: usize, c: usize| r * w + c;
    let mut dist = vec![f64::INFINITY; w * h];
    let mut prev = vec![usize::MAX; w * h];
    let mut done = vec![false; w * h];
    let s = idx(start.0, start.1);
    if !map.costs[s].is_finite() {
        return Ok(None);
    }
    dist[s] = map.costs[s];
    let mut seq = 0u64;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Key(dist[s], seq), s)));
    let g = idx(goal.0, goal.1);
    while let Some(Reverse((Key(d, _), u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == g {
            break;
        }
        let (r, c) = (u / w, u % w);
        let neighbours = [
            (c + 1 < w).then(|| idx(r, c + 1)),
            (r > 0).then(|| idx(r - 1, c)),
            (c > 0).then(|| idx(r, c - 1)),
            (r + 1 < h).then(|| idx(r + 1, c)),
        ];
        for v in neighbours.into_iter().flatten() {
            let nd = d + map.costs[v];
            if !done[v] && nd < dist[v] {
                dist[v] = nd;
                prev[v] = u;
                seq += 1;
                heap.push(Reverse((Key(nd, seq), v)));
            }
        }
    }
    if !dist[g].is_finite() {
        return Ok(None);
    }
    let mut cells = vec![(goal.0, goal.1)];
    let mut u = g;
    while u != s {
        u = prev[u];
        cells.push((u / w, u % w));
    }
    cells.reverse();
    Ok(Some(Trajectory { cells, cost: dist[g] }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_is_manhattan() {
        let m = CostMap::uniform(7, 5, 1.0);
        let t = plan(&m, (0, 0), (4, 6)).unwrap().unwrap();
        assert_eq!(t.cells.len(), 4 + 6 + 1);
        assert_eq!(t.cost, 11.0);
        for p in t.cells.windows(2) {
            let d = p[0].0.abs_diff(p[1].0) + p[0].1.abs_diff(p[1].1);
            assert_eq!(d, 1);
        }
    }

    #[test]
    fn start_is_goal() {
        let mut m = CostMap::uniform(3, 3, 1.0);
        m.costs[4] = 7.5;
        let t = plan(&m, (1, 1), (1, 1)).unwrap().unwrap();
        assert_eq!(t.cells, vec![(1, 1)]);
        assert_eq!(t.cost, 7.5);
    }

    #[test]
    fn wall_gap_is_used() {
        let mut m = CostMap::uniform(9, 9, 1.0);
        for r in 0..9 {
            if r != 6 {
                m.costs[r * 9 + 4] = 1000.0;
            }
        }
        let t = plan(&m, (1, 0), (1, 8)).unwrap().unwrap();
        assert!(t.cells.contains(&(6, 4)));
        assert_eq!(t.cost, path_cost(&m, &t.cells));
    }

    #[test]
    fn unreachable_goal() {
        let mut m = CostMap::uniform(3, 3, 1.0);
        for r in 0..3 {
            m.costs[r * 3 + 1] = f64::INFINITY;
        }
        assert_eq!(plan(&m, (0, 0), (0, 2)).unwrap(), None);
        assert!(plan(&m, (0, 0), (5, 0)).is_err());
    }

    #[test]
    fn ties_prefer_east_first() {
        let m = CostMap::uniform(2, 2, 1.0);
        let t = plan(&m, (1, 0), (0, 1)).unwrap().unwrap();
        assert_eq!(t.cells, vec![(1, 0), (1, 1), (0, 1)]);
    }
}
