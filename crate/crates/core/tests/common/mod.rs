//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use ndarray::Array2;
use rustfft::num_complex::Complex64;

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Minimum assignment cost by enumerating every permutation.
pub fn brute_force_assignment(cost: &Array2<f64>) -> f64 {
    permutations(cost.nrows())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Best accuracy (percent) over every one-to-one relabeling of `k` clusters.
pub fn exhaustive_accuracy(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    let best = permutations(k)
        .iter()
        .map(|p| pred.iter().zip(truth).filter(|(a, b)| p[**a] == **b).count())
        .max()
        .unwrap_or(0);
    100.0 * best as f64 / pred.len() as f64
}

/// Windowed DFT of every full frame, computed term by term.
pub fn direct_stft(x: &[f64], window: &[f64], hop: usize) -> Array2<Complex64> {
    let n = window.len();
    let frames = if x.len() < n { 0 } else { (x.len() - n) / hop + 1 };
    let bins = n / 2 + 1;
    let mut out = Array2::zeros((bins, frames));
    for m in 0..frames {
        for k in 0..bins {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..n {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                acc += Complex64::from_polar(window[t] * x[m * hop + t], ang);
            }
            out[(k, m)] = acc;
        }
    }
    out
}

/// Node-weighted 4-connected shortest path cost by Bellman-Ford
/// relaxation; `None` when unreachable.
pub fn bellman_ford(costs: &[f64], w: usize, h: usize, start: (usize, usize), goal: (usize, usize)) -> Option<f64> {
    let mut dist = vec![f64::INFINITY; w * h];
    dist[start.0 * w + start.1] = costs[start.0 * w + start.1];
    for _ in 0..w * h {
        let mut changed = false;
        for r in 0..h {
            for c in 0..w {
                let d = dist[r * w + c];
                if !d.is_finite() {
                    continue;
                }
                let mut nb = Vec::new();
                if c + 1 < w { nb.push((r, c + 1)); }
                if r > 0 { nb.push((r - 1, c)); }
                if c > 0 { nb.push((r, c - 1)); }
                if r + 1 < h { nb.push((r + 1, c)); }
                for (rr, cc) in nb {
                    let nd = d + costs[rr * w + cc];
                    if nd < dist[rr * w + cc] {
                        dist[rr * w + cc] = nd;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let d = dist[goal.0 * w + goal.1];
    d.is_finite().then_some(d)
}
