use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;

use crate::exec::Exec;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Tanh => 1,
            Activation::Linear => 0,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Linear),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// Fully connected network with all weights and biases in one flat
/// vector. Layer `l` stores its `out x in` weight matrix (row-major)
/// followed by its `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    acts: Vec<Activation>,
    pub theta: Vec<f64>,
}

/// Activations of every layer from a forward pass (`[0]` is the input).
pub struct ForwardTrace {
    pub layers: Vec<Array2<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.layers.last().unwrap()
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(sizes: &[usize], acts: &[Activation], rng: &mut impl Rng) -> Result<Self> {
        let mut m = Self::zeros(sizes, acts)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            for v in &mut m.theta[off..off + w[0] * w[1]] {
                *v = rng.random_range(-limit..=limit);
            }
            off += w[0] * w[1] + w[1];
        }
        Ok(m)
    }

    pub fn zeros(sizes: &[usize], acts: &[Activation]) -> Result<Self> {
        if sizes.len() < 2 || acts.len() != sizes.len() - 1 || sizes.contains(&0) {
            return Err(Error::config("network needs >= 2 positive sizes and one activation per layer"));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            acts: acts.to_vec(),
            theta: vec![0.0; param_count(sizes)],
        })
    }

    pub fn from_parts(sizes: Vec<usize>, acts: Vec<Activation>, theta: Vec<f64>) -> Result<Self> {
        let m = Self::zeros(&sizes, &acts)?;
        if theta.len() != m.theta.len() {
            return Err(Error::input(format!("{} parameters for a network of {}", theta.len(), m.theta.len())));
        }
        Ok(Self { theta, ..m })
    }

    /// Encoder `input -> 256 -> 64 -> 16`, tanh hidden, linear output.
    pub fn encoder(input_dim: usize, init_seed: u64) -> Result<Self> {
        let mut rng = seed::rng(init_seed, 0xE4C);
        Self::new(
            &[input_dim, 256, 64, 16],
            &[Activation::Tanh, Activation::Tanh, Activation::Linear],
            &mut rng,
        )
    }

    /// Decoder `16 -> 64 -> 256 -> output`, tanh hidden, linear output.
    pub fn decoder(output_dim: usize, init_seed: u64) -> Result<Self> {
        let mut rng = seed::rng(init_seed, 0xDEC);
        Self::new(
            &[16, 64, 256, output_dim],
            &[Activation::Tanh, Activation::Tanh, Activation::Linear],
            &mut rng,
        )
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.acts
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    fn offset(&self, layer: usize) -> usize {
        param_count(&self.sizes[..=layer])
    }

    pub fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        let (i, o) = (self.sizes[layer], self.sizes[layer + 1]);
        let off = self.offset(layer);
        ArrayView2::from_shape((o, i), &self.theta[off..off + o * i]).unwrap()
    }

    pub fn biases(&self, layer: usize) -> ArrayView1<'_, f64> {
        let (i, o) = (self.sizes[layer], self.sizes[layer + 1]);
        let off = self.offset(layer) + o * i;
        ArrayView1::from(&self.theta[off..off + o])
    }

    /// Mutable weights and biases of one layer.
    pub fn layer_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let (i, o) = (self.sizes[layer], self.sizes[layer + 1]);
        let off = self.offset(layer);
        self.theta[off..off + o * i + o].split_at_mut(o * i)
    }

    pub fn num_layers(&self) -> usize {
        self.acts.len()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::input(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass keeping every layer's activation. Rows are samples.
    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Result<ForwardTrace> {
        self.check_input(&x)?;
        let mut layers = vec![x.to_owned()];
        for l in 0..self.num_layers() {
            let mut z = layers[l].dot(&self.weights(l).t());
            z += &self.biases(l);
            if self.acts[l] == Activation::Tanh {
                z.mapv_inplace(f64::tanh);
            }
            layers.push(z);
        }
        Ok(ForwardTrace { layers })
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_trace(x)?.layers.pop().unwrap())
    }

    /// Forward pass over row chunks, optionally in parallel. Identical to
    /// [`Mlp::forward`] row for row.
    pub fn forward_batched(&self, x: ArrayView2<f64>, chunk: usize, exec: Exec) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let chunk = chunk.max(1);
        let starts: Vec<usize> = (0..x.nrows()).step_by(chunk).collect();
        let parts = exec.try_map(&starts, |&s| {
            let e = (s + chunk).min(x.nrows());
            self.forward(x.slice(ndarray::s![s..e, ..]))
        })?;
        if parts.is_empty() {
            return Ok(Array2::zeros((0, self.output_dim())));
        }
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        Ok(ndarray::concatenate(Axis(0), &views).unwrap())
    }

    /// Backpropagates `grad_out` (d loss / d output, same shape as the
    /// output) through a recorded forward pass, adding parameter gradients
    /// into `grad`. Returns d loss / d input when `want_input` is set.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_out: Array2<f64>,
        grad: &mut [f64],
        want_input: bool,
    ) -> Option<Array2<f64>> {
        assert_eq!(grad.len(), self.theta.len());
        let mut g = grad_out;
        for l in (0..self.num_layers()).rev() {
            if self.acts[l] == Activation::Tanh {
                g.zip_mut_with(&trace.layers[l + 1], |d, &a| *d *= 1.0 - a * a);
            }
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.offset(l);
            {
                let (gw, gb) = grad[off..off + o * i + o].split_at_mut(o * i);
                let mut gw = ArrayViewMut2::from_shape((o, i), gw).unwrap();
                general_mat_mul(1.0, &g.t(), &trace.layers[l], 1.0, &mut gw);
                for (b, s) in gb.iter_mut().zip(g.sum_axis(Axis(0))) {
                    *b += s;
                }
            }
            if l == 0 && !want_input {
                return None;
            }
            g = g.dot(&self.weights(l));
        }
        Some(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_last_layer_gives_zero_output() {
        let mut m = Mlp::encoder(8, 1).unwrap();
        let last = m.num_layers() - 1;
        let (w, b) = m.layer_mut(last);
        w.fill(0.0);
        b.fill(0.0);
        let out = m.forward(Array2::from_elem((2, 8), 0.3).view()).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
        let zero = Mlp::encoder(8, 1).unwrap().forward(Array2::zeros((1, 8)).view()).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shapes_and_determinism() {
        let m = Mlp::encoder(256, 5).unwrap();
        assert_eq!(m.num_params(), 256 * 256 + 256 + 256 * 64 + 64 + 64 * 16 + 16);
        let x = Array2::from_shape_fn((3, 256), |(i, j)| ((i + j) % 7) as f64 / 7.0);
        assert_eq!(m.forward(x.view()).unwrap(), m.forward(x.view()).unwrap());
        assert_eq!(m.forward(x.view()).unwrap().dim(), (3, 16));
        assert!(m.forward(Array2::zeros((1, 3)).view()).is_err());
        assert_eq!(
            m.forward_batched(x.view(), 2, Exec::Parallel).unwrap(),
            m.forward(x.view()).unwrap()
        );
    }

    #[test]
    fn hand_computed_linear_layer() {
        let m = Mlp::from_parts(vec![2, 1], vec![Activation::Linear], vec![2.0, -1.0, 0.5]).unwrap();
        let out = m.forward(array![[1.0, 3.0]].view()).unwrap();
        assert_eq!(out[(0, 0)], 2.0 - 3.0 + 0.5);
        let t = m.forward_trace(array![[1.0, 3.0]].view()).unwrap();
        let mut g = vec![0.0; 3];
        let gi = m.backward(&t, array![[1.0]], &mut g, true).unwrap();
        assert_eq!(g, vec![1.0, 3.0, 1.0]);
        assert_eq!(gi, array![[2.0, -1.0]]);
    }

    #[test]
    fn init_within_glorot_bounds() {
        let m = Mlp::encoder(256, 2).unwrap();
        let limit = (6.0f64 / 512.0).sqrt();
        assert!(m.weights(0).iter().all(|w| w.abs() <= limit));
        assert!(m.biases(0).iter().all(|&b| b == 0.0));
        assert_ne!(Mlp::encoder(256, 2).unwrap(), Mlp::encoder(256, 3).unwrap());
    }
}
