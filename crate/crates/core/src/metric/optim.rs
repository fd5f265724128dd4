use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// Heavy-ball SGD: `v = mu v - lr g; theta += v`.
    SgdMomentum,
    /// AdaDelta with decay `rho`; the step is scaled by the learning rate.
    AdaDelta,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::SgdMomentum => "sgd_momentum",
            OptimizerKind::AdaDelta => "adadelta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sgd_momentum" | "sgd" => Some(OptimizerKind::SgdMomentum),
            "adadelta" => Some(OptimizerKind::AdaDelta),
            _ => None,
        }
    }
}

const ADADELTA_EPS: f64 = 1e-6;

/// First-order optimizer over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    /// Momentum for SGD, decay rate for AdaDelta.
    mu: f64,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, mu: f64, n: usize) -> Result<Self> {
        if !(lr > 0.0) || !(0.0..1.0).contains(&mu) {
            return Err(Error::config(format!("learning rate {lr} / momentum {mu} out of range")));
        }
        Ok(Self {
            kind,
            lr,
            mu,
            s1: vec![0.0; n],
            s2: if kind == OptimizerKind::AdaDelta { vec![0.0; n] } else { Vec::new() },
        })
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(theta.len(), grad.len());
        match self.kind {
            OptimizerKind::SgdMomentum => {
                for ((t, v), g) in theta.iter_mut().zip(&mut self.s1).zip(grad) {
                    *v = self.mu * *v - self.lr * g;
                    *t += *v;
                }
            }
            OptimizerKind::AdaDelta => {
                let rho = self.mu;
                for (((t, eg), ed), g) in theta.iter_mut().zip(&mut self.s1).zip(&mut self.s2).zip(grad) {
                    *eg = rho * *eg + (1.0 - rho) * g * g;
                    let d = -((*ed + ADADELTA_EPS).sqrt() / (*eg + ADADELTA_EPS).sqrt()) * g;
                    *ed = rho * *ed + (1.0 - rho) * d * d;
                    *t += self.lr * d;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_momentum_steps() {
        let mut o = Optimizer::new(OptimizerKind::SgdMomentum, 0.1, 0.9, 1).unwrap();
        let mut t = [1.0];
        o.step(&mut t, &[1.0]);
        assert!((t[0] - 0.9).abs() < 1e-15);
        o.step(&mut t, &[1.0]);
        assert!((t[0] - (0.9 - 0.19)).abs() < 1e-15);
    }

    #[test]
    fn both_minimize_a_quadratic() {
        for kind in [OptimizerKind::SgdMomentum, OptimizerKind::AdaDelta] {
            let lr = if kind == OptimizerKind::AdaDelta { 1.0 } else { 0.05 };
            let mut o = Optimizer::new(kind, lr, 0.9, 2).unwrap();
            let mut t = [3.0, -2.0];
            for _ in 0..2000 {
                let g = [2.0 * t[0], 2.0 * t[1]];
                o.step(&mut t, &g);
            }
            assert!(t[0].abs() < 1e-2 && t[1].abs() < 1e-2, "{kind:?}: {t:?}");
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        for kind in [OptimizerKind::SgdMomentum, OptimizerKind::AdaDelta] {
            let mut o = Optimizer::new(kind, 0.1, 0.9, 2).unwrap();
            let mut t = [1.5, -0.5];
            o.step(&mut t, &[0.0, 0.0]);
            assert_eq!(t, [1.5, -0.5]);
        }
    }
}
