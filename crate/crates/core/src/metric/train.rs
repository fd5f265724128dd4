use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;

use super::loss::{combined_loss, reconstruction_loss, triplet_loss, triplet_margins};
use super::mlp::Mlp;
use super::optim::{Optimizer, OptimizerKind};
use crate::exec::Exec;
use crate::gradcheck::{grad_check, GradCheckReport};
use crate::triplets::Triplet;
use crate::{checkpoint, seed, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Triplet margin.
    pub alpha: f64,
    /// Weight of the triplet term; 1 trains the plain Siamese encoder.
    pub beta: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// SGD momentum or AdaDelta decay.
    pub momentum: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-2,
            momentum: 0.9,
            seed: 0,
            optimizer: OptimizerKind::SgdMomentum,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::config("alpha must be positive"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config("beta must lie in [0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        Ok(())
    }
}

/// Losses of one epoch. Epoch 0 evaluates the initial parameters on all
/// triplets; later epochs average the minibatch losses seen while training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub triplet: f64,
    pub reconstruction: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub trace: Vec<EpochLoss>,
}

/// Freshly initialized encoder/decoder pair for `input_dim` inputs.
pub fn initial_networks(input_dim: usize, init_seed: u64) -> Result<(Mlp, Mlp)> {
    Ok((Mlp::encoder(input_dim, init_seed)?, Mlp::decoder(input_dim, init_seed)?))
}

fn check_triplets(inputs: &Array2<f64>, triplets: &[Triplet]) -> Result<()> {
    let n = inputs.nrows();
    if let Some(t) = triplets.iter().find(|t| t.anchor.max(t.positive).max(t.negative) >= n) {
        return Err(Error::input(format!("triplet {t:?} indexes past {n} samples")));
    }
    Ok(())
}

/// Stacks anchor, positive and negative rows of a batch.
fn gather(inputs: &Array2<f64>, batch: &[Triplet]) -> Array2<f64> {
    let b = batch.len();
    let mut x = Array2::zeros((3 * b, inputs.ncols()));
    for (i, t) in batch.iter().enumerate() {
        x.row_mut(i).assign(&inputs.row(t.anchor));
        x.row_mut(b + i).assign(&inputs.row(t.positive));
        x.row_mut(2 * b + i).assign(&inputs.row(t.negative));
    }
    x
}

struct BatchLoss {
    lt: f64,
    lr: f64,
}

/// Loss of one batch and, when `grads` is given, the gradients of
/// `beta * Lt + (1 - beta) * Lr` added into the encoder and decoder
/// gradient buffers. Reconstruction is scored on anchors.
fn batch_loss(
    enc: &Mlp,
    dec: &Mlp,
    x: &Array2<f64>,
    alpha: f64,
    beta: f64,
    grads: Option<(&mut [f64], &mut [f64])>,
) -> Result<BatchLoss> {
    let b = x.nrows() / 3;
    let te = enc.forward_trace(x.view())?;
    let e = te.output();
    let (ea, ep, en) = (e.slice(s![..b, ..]), e.slice(s![b..2 * b, ..]), e.slice(s![2 * b.., ..]));
    let tl = triplet_loss(ea, ep, en, alpha)?;
    let td = dec.forward_trace(ea)?;
    let xa = x.slice(s![..b, ..]);
    let (lr, grec) = reconstruction_loss(xa, td.output().view())?;
    if let Some((genc, gdec)) = grads {
        let mut de = Array2::zeros(e.dim());
        if beta != 0.0 {
            de.slice_mut(s![..b, ..]).scaled_add(beta, &tl.grad_anchor);
            de.slice_mut(s![b..2 * b, ..]).scaled_add(beta, &tl.grad_positive);
            de.slice_mut(s![2 * b.., ..]).scaled_add(beta, &tl.grad_negative);
        }
        if beta != 1.0 {
            let gin = dec.backward(&td, grec * (1.0 - beta), gdec, true).unwrap();
            de.slice_mut(s![..b, ..]).scaled_add(1.0, &gin);
        }
        enc.backward(&te, de, genc, false);
    }
    Ok(BatchLoss { lt: tl.value, lr })
}

/// Mean losses over all triplets for fixed parameters.
pub fn evaluate(enc: &Mlp, dec: &Mlp, inputs: &Array2<f64>, triplets: &[Triplet], alpha: f64, beta: f64) -> Result<EpochLoss> {
    check_triplets(inputs, triplets)?;
    let (mut lt, mut lr) = (0.0, 0.0);
    for chunk in triplets.chunks(512) {
        let l = batch_loss(enc, dec, &gather(inputs, chunk), alpha, beta, None)?;
        lt += l.lt * chunk.len() as f64;
        lr += l.lr * chunk.len() as f64;
    }
    let n = triplets.len().max(1) as f64;
    let (lt, lr) = (lt / n, lr / n);
    Ok(EpochLoss {
        epoch: 0,
        triplet: lt,
        reconstruction: lr,
        combined: combined_loss(lt, lr, beta),
    })
}

fn diverged(epoch: usize, enc: &Mlp, dec: &Mlp) -> Error {
    Error::Diverged {
        stage: "train-encoder",
        epoch,
        checkpoint: checkpoint::encode(&[enc, dec]),
    }
}

fn epoch_order(triplets: &[Triplet], train_seed: u64, epoch: usize) -> Vec<Triplet> {
    let mut order = triplets.to_vec();
    order.shuffle(&mut seed::rng(train_seed, 0x5EED_0000 + epoch as u64));
    order
}

/// Trains the encoder/decoder pair on the combined objective
/// `beta * Lt + (1 - beta) * Lr` with minibatches of shuffled triplets.
pub fn train(inputs: &Array2<f64>, triplets: &[Triplet], config: &TrainConfig) -> Result<TrainOutput> {
    let (enc, dec) = initial_networks(inputs.ncols(), config.seed)?;
    train_from(enc, dec, inputs, triplets, config)
}

/// As [`train`], starting from the given networks.
pub fn train_from(mut enc: Mlp, mut dec: Mlp, inputs: &Array2<f64>, triplets: &[Triplet], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    check_triplets(inputs, triplets)?;
    if enc.input_dim() != inputs.ncols() || dec.output_dim() != inputs.ncols() || dec.input_dim() != enc.output_dim() {
        return Err(Error::input("network shapes do not match the inputs"));
    }
    let mut trace = vec![evaluate(&enc, &dec, inputs, triplets, config.alpha, config.beta)?];
    let mut opt_e = Optimizer::new(config.optimizer, config.learning_rate, config.momentum, enc.num_params())?;
    let mut opt_d = Optimizer::new(config.optimizer, config.learning_rate, config.momentum, dec.num_params())?;
    let mut ge = vec![0.0; enc.num_params()];
    let mut gd = vec![0.0; dec.num_params()];
    let mut last_good = (enc.clone(), dec.clone());
    for epoch in 1..=config.epochs {
        let (mut lt, mut lr) = (0.0, 0.0);
        for batch in epoch_order(triplets, config.seed, epoch).chunks(config.batch_size) {
            ge.fill(0.0);
            gd.fill(0.0);
            let x = gather(inputs, batch);
            let l = batch_loss(&enc, &dec, &x, config.alpha, config.beta, Some((&mut ge, &mut gd)))?;
            if !(l.lt.is_finite() && l.lr.is_finite()) {
                return Err(diverged(epoch, &last_good.0, &last_good.1));
            }
            lt += l.lt * batch.len() as f64;
            lr += l.lr * batch.len() as f64;
            opt_e.step(&mut enc.theta, &ge);
            if config.beta != 1.0 {
                opt_d.step(&mut dec.theta, &gd);
            }
        }
        if enc.theta.iter().chain(&dec.theta).any(|v| !v.is_finite()) {
            return Err(diverged(epoch, &last_good.0, &last_good.1));
        }
        let n = triplets.len().max(1) as f64;
        let (lt, lr) = (lt / n, lr / n);
        trace.push(EpochLoss {
            epoch,
            triplet: lt,
            reconstruction: lr,
            combined: combined_loss(lt, lr, config.beta),
        });
        last_good = (enc.clone(), dec.clone());
    }
    Ok(TrainOutput { encoder: enc, decoder: dec, trace })
}

/// Triplet-only training of the encoder. The decoder is initialized
/// exactly as in [`train`] but never updated; its reconstruction loss is
/// reported for comparison.
pub fn train_se(inputs: &Array2<f64>, triplets: &[Triplet], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    check_triplets(inputs, triplets)?;
    let (mut enc, dec) = initial_networks(inputs.ncols(), config.seed)?;
    let first = evaluate(&enc, &dec, inputs, triplets, config.alpha, 1.0)?;
    let mut trace = vec![first];
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, config.momentum, enc.num_params())?;
    let mut g = vec![0.0; enc.num_params()];
    let mut last_good = enc.clone();
    for epoch in 1..=config.epochs {
        let (mut lt, mut lr) = (0.0, 0.0);
        for batch in epoch_order(triplets, config.seed, epoch).chunks(config.batch_size) {
            let b = batch.len();
            let x = gather(inputs, batch);
            let te = enc.forward_trace(x.view())?;
            let e = te.output();
            let ea = e.slice(s![..b, ..]);
            let tl = triplet_loss(ea, e.slice(s![b..2 * b, ..]), e.slice(s![2 * b.., ..]), config.alpha)?;
            let recon = dec.forward(ea)?;
            let (l_rec, _) = reconstruction_loss(x.slice(s![..b, ..]), recon.view())?;
            if !(tl.value.is_finite() && l_rec.is_finite()) {
                return Err(diverged(epoch, &last_good, &dec));
            }
            let mut de = Array2::zeros(e.dim());
            de.slice_mut(s![..b, ..]).assign(&tl.grad_anchor);
            de.slice_mut(s![b..2 * b, ..]).assign(&tl.grad_positive);
            de.slice_mut(s![2 * b.., ..]).assign(&tl.grad_negative);
            g.fill(0.0);
            enc.backward(&te, de, &mut g, false);
            opt.step(&mut enc.theta, &g);
            lt += tl.value * b as f64;
            lr += l_rec * b as f64;
        }
        if enc.theta.iter().any(|v| !v.is_finite()) {
            return Err(diverged(epoch, &last_good, &dec));
        }
        let n = triplets.len().max(1) as f64;
        trace.push(EpochLoss {
            epoch,
            triplet: lt / n,
            reconstruction: lr / n,
            combined: lt / n,
        });
        last_good = enc.clone();
    }
    Ok(TrainOutput { encoder: enc, decoder: dec, trace })
}

/// Embeddings of every input row.
pub fn embed(encoder: &Mlp, inputs: ArrayView2<f64>, exec: Exec) -> Result<Array2<f64>> {
    encoder.forward_batched(inputs, 256, exec)
}

/// Loss and gradient of the combined objective on one batch, with the
/// encoder parameters followed by the decoder parameters.
pub fn combined_loss_and_grad(
    enc: &Mlp,
    dec: &Mlp,
    inputs: &Array2<f64>,
    batch: &[Triplet],
    alpha: f64,
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    check_triplets(inputs, batch)?;
    let mut ge = vec![0.0; enc.num_params()];
    let mut gd = vec![0.0; dec.num_params()];
    let l = batch_loss(enc, dec, &gather(inputs, batch), alpha, beta, Some((&mut ge, &mut gd)))?;
    ge.extend(gd);
    Ok((combined_loss(l.lt, l.lr, beta), ge))
}

/// Finite-difference check of the combined-objective gradient. Triplets
/// whose hinge argument lies within 1e-3 of zero are left out of the batch.
#[allow(clippy::too_many_arguments)]
pub fn grad_check_combined(
    enc: &Mlp,
    dec: &Mlp,
    inputs: &Array2<f64>,
    batch: &[Triplet],
    alpha: f64,
    beta: f64,
    eps: f64,
    n_coords: usize,
    check_seed: u64,
) -> Result<GradCheckReport> {
    check_triplets(inputs, batch)?;
    let x = gather(inputs, batch);
    let e = enc.forward(x.view())?;
    let b = batch.len();
    let margins = triplet_margins(e.slice(s![..b, ..]), e.slice(s![b..2 * b, ..]), e.slice(s![2 * b.., ..]), alpha);
    let kept: Vec<Triplet> = batch
        .iter()
        .zip(&margins)
        .filter(|(_, m)| m.abs() >= 1e-3)
        .map(|(t, _)| *t)
        .collect();
    let (_, analytic) = combined_loss_and_grad(enc, dec, inputs, &kept, alpha, beta)?;
    let split = enc.num_params();
    let mut theta = enc.theta.clone();
    theta.extend(&dec.theta);
    let xk = gather(inputs, &kept);
    let loss = |t: &[f64]| {
        let mut e2 = enc.clone();
        let mut d2 = dec.clone();
        e2.theta.copy_from_slice(&t[..split]);
        d2.theta.copy_from_slice(&t[split..]);
        let l = batch_loss(&e2, &d2, &xk, alpha, beta, None).expect("shapes checked");
        combined_loss(l.lt, l.lr, beta)
    };
    Ok(grad_check(&theta, &analytic, loss, eps, n_coords, check_seed))
}
