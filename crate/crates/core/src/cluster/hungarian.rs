use ndarray::Array2;

use crate::{Error, Result};

/// Row-to-column assignment: `perm[row] = col`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost value of the square assignment problem restricted to
/// `rows x cols` (O(n^3) shortest augmenting path with potentials).
fn optimum(cost: &Array2<f64>, rows: &[usize], cols: &[usize]) -> (f64, Vec<usize>) {
    let n = rows.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let c = |i: usize, j: usize| cost[(rows[i - 1], cols[j - 1])];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = c(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost[(rows[i], cols[perm[i]])]).sum();
    (total, perm)
}

/// Optimal assignment for a square cost matrix. Among optimal
/// permutations the lexicographically smallest (by `perm`) is returned.
pub fn hungarian(cost: &Array2<f64>) -> Result<Assignment> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(Error::input(format!("cost matrix is {n}x{m}, not square")));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("cost matrix has non-finite entries"));
    }
    let all: Vec<usize> = (0..n).collect();
    let (best, _) = optimum(cost, &all, &all);
    let scale = cost.iter().fold(1.0f64, |a, v| a.max(v.abs())) * n.max(1) as f64;
    let tol = 1e-9 * scale;

    // Fix rows in order, each to the smallest column that keeps the
    // remaining sub-problem optimal.
    let mut perm = Vec::with_capacity(n);
    let mut free_cols = all.clone();
    let mut spent = 0.0;
    for i in 0..n {
        let rest_rows: Vec<usize> = (i + 1..n).collect();
        let mut chosen = None;
        for (k, &j) in free_cols.iter().enumerate() {
            let mut cols = free_cols.clone();
            cols.remove(k);
            let (rest, _) = optimum(cost, &rest_rows, &cols);
            if spent + cost[(i, j)] + rest <= best + tol {
                chosen = Some(k);
                break;
            }
        }
        // Floating-point fallback: take the sub-problem's own choice.
        let k = chosen.unwrap_or_else(|| {
            let rows: Vec<usize> = (i..n).collect();
            let (_, p) = optimum(cost, &rows, &free_cols);
            p[0]
        });
        let j = free_cols.remove(k);
        spent += cost[(i, j)];
        perm.push(j);
    }
    let total = (0..n).map(|i| cost[(i, perm[i])]).sum();
    Ok(Assignment { perm, cost: total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_favoring() {
        let c = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        let a = hungarian(&c).unwrap();
        assert_eq!(a.perm, vec![0, 1, 2]);
        assert_eq!(a.cost, 0.0);
    }

    #[test]
    fn small_known_instance() {
        let c = array![[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]];
        let a = hungarian(&c).unwrap();
        assert_eq!(a.cost, 5.0);
        assert_eq!(a.perm, vec![1, 0, 2]);
    }

    #[test]
    fn all_equal_gives_identity() {
        let c = Array2::from_elem((4, 4), 7.0);
        let a = hungarian(&c).unwrap();
        assert_eq!(a.perm, vec![0, 1, 2, 3]);
        assert_eq!(a.cost, 28.0);
    }

    #[test]
    fn rejects_non_square_and_empty_ok() {
        assert!(hungarian(&Array2::zeros((2, 3))).is_err());
        let a = hungarian(&Array2::zeros((0, 0))).unwrap();
        assert!(a.perm.is_empty());
    }
}
