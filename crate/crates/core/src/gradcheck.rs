//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;

use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// max over checked coordinates of |analytic - numeric| / max(1, |analytic|)
    pub max_rel_error: f64,
    pub worst_coord: usize,
    pub coords_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

/// Compares `analytic` against central differences of `loss` with step
/// `eps` on `n_coords` distinct coordinates drawn with `check_seed` (all
/// coordinates when there are fewer).
pub fn grad_check(
    theta: &[f64],
    analytic: &[f64],
    loss: impl Fn(&[f64]) -> f64,
    eps: f64,
    n_coords: usize,
    check_seed: u64,
) -> GradCheckReport {
    assert_eq!(theta.len(), analytic.len());
    let n = theta.len();
    let coords: Vec<usize> = if n_coords >= n {
        (0..n).collect()
    } else {
        sample(&mut seed::rng(check_seed, 0x6C), n, n_coords).into_vec()
    };
    let mut work = theta.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_coord: 0,
        coords_checked: coords.len(),
    };
    for &i in &coords {
        let orig = work[i];
        work[i] = orig + eps;
        let up = loss(&work);
        work[i] = orig - eps;
        let down = loss(&work);
        work[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        if !(err <= report.max_rel_error) {
            report.max_rel_error = err;
            report.worst_coord = i;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_passes_and_perturbed_fails() {
        let theta = [0.3, -1.2, 2.0];
        let f = |t: &[f64]| t.iter().map(|x| x * x * x).sum::<f64>();
        let g: Vec<f64> = theta.iter().map(|x| 3.0 * x * x).collect();
        assert!(grad_check(&theta, &g, f, 1e-5, 10, 0).passes(1e-8));
        let mut bad = g.clone();
        bad[1] += 1e-2;
        let r = grad_check(&theta, &bad, f, 1e-5, 10, 0);
        assert!(!r.passes(1e-4));
        assert_eq!(r.worst_coord, 1);
    }
}
