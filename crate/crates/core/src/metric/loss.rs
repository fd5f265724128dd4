use ndarray::{Array2, ArrayView2, Zip};

use crate::{Error, Result};

/// Triplet hinge loss and its gradients with respect to the anchor,
/// positive, and negative embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletLoss {
    pub value: f64,
    pub grad_anchor: Array2<f64>,
    pub grad_positive: Array2<f64>,
    pub grad_negative: Array2<f64>,
    /// Triplets with a positive hinge argument.
    pub active: usize,
}

/// Mean over triplets of `max(|a-p|^2 + alpha - |a-n|^2, 0)` with squared
/// Euclidean distances. The subgradient at the hinge point is 0.
pub fn triplet_loss(a: ArrayView2<f64>, p: ArrayView2<f64>, n: ArrayView2<f64>, alpha: f64) -> Result<TripletLoss> {
    if a.dim() != p.dim() || a.dim() != n.dim() {
        return Err(Error::input("anchor, positive and negative batches differ in shape"));
    }
    let b = a.nrows();
    let mut out = TripletLoss {
        value: 0.0,
        grad_anchor: Array2::zeros(a.dim()),
        grad_positive: Array2::zeros(a.dim()),
        grad_negative: Array2::zeros(a.dim()),
        active: 0,
    };
    if b == 0 {
        return Ok(out);
    }
    let scale = 1.0 / b as f64;
    for i in 0..b {
        let (ai, pi, ni) = (a.row(i), p.row(i), n.row(i));
        let dap: f64 = ai.iter().zip(pi).map(|(x, y)| (x - y) * (x - y)).sum();
        let dan: f64 = ai.iter().zip(ni).map(|(x, y)| (x - y) * (x - y)).sum();
        let v = dap + alpha - dan;
        if v > 0.0 {
            out.value += v;
            out.active += 1;
            for j in 0..a.ncols() {
                let (x, y, z) = (ai[j], pi[j], ni[j]);
                out.grad_anchor[(i, j)] = 2.0 * (z - y) * scale;
                out.grad_positive[(i, j)] = -2.0 * (x - y) * scale;
                out.grad_negative[(i, j)] = 2.0 * (x - z) * scale;
            }
        }
    }
    out.value *= scale;
    Ok(out)
}

/// Hinge arguments `|a-p|^2 + alpha - |a-n|^2` per triplet.
pub fn triplet_margins(a: ArrayView2<f64>, p: ArrayView2<f64>, n: ArrayView2<f64>, alpha: f64) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| {
            let d = |u: ndarray::ArrayView1<f64>| -> f64 {
                a.row(i).iter().zip(u).map(|(x, y)| (x - y) * (x - y)).sum()
            };
            d(p.row(i)) + alpha - d(n.row(i))
        })
        .collect()
}

/// Mean over rows of the per-sample sum of squared errors, with gradient
/// `2 (x_hat - x) / batch` with respect to `x_hat`.
pub fn reconstruction_loss(x: ArrayView2<f64>, x_hat: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    if x.dim() != x_hat.dim() {
        return Err(Error::input("reconstruction and target differ in shape"));
    }
    let b = x.nrows().max(1) as f64;
    let mut grad = Array2::zeros(x.dim());
    let mut sum = 0.0;
    Zip::from(&mut grad).and(&x).and(&x_hat).for_each(|g, &t, &r| {
        let d = r - t;
        sum += d * d;
        *g = 2.0 * d / b;
    });
    Ok((sum / b, grad))
}

/// `beta * lt + (1 - beta) * lr`.
pub fn combined_loss(lt: f64, lr: f64, beta: f64) -> f64 {
    if beta == 1.0 {
        lt
    } else if beta == 0.0 {
        lr
    } else {
        beta * lt + (1.0 - beta) * lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn triplet_examples() {
        let z = array![[0.3, -0.2]];
        assert_eq!(triplet_loss(z.view(), z.view(), z.view(), 1.0).unwrap().value, 1.0);
        let a = array![[0.0, 0.0]];
        let n = array![[1.0, 0.0]];
        let l = triplet_loss(a.view(), a.view(), n.view(), 1.0).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.grad_anchor.iter().all(|&g| g == 0.0));
        let p = array![[0.5f64.sqrt(), 0.0]];
        let n = array![[0.0, 0.2f64.sqrt()]];
        let l = triplet_loss(a.view(), p.view(), n.view(), 1.0).unwrap();
        assert!((l.value - 1.3).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_examples() {
        let x = Array2::<f64>::zeros((1, 100));
        let r = Array2::from_elem((1, 100), 0.1);
        let (v, g) = reconstruction_loss(x.view(), r.view()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(g.iter().all(|&g| (g - 0.2).abs() < 1e-15));
        assert_eq!(reconstruction_loss(r.view(), r.view()).unwrap().0, 0.0);
    }

    #[test]
    fn combined_endpoints() {
        assert_eq!(combined_loss(2.0, 4.0, 1.0), 2.0);
        assert_eq!(combined_loss(2.0, 4.0, 0.0), 4.0);
        assert_eq!(combined_loss(2.0, 4.0, 0.5), 3.0);
    }
}
