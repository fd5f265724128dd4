//! Siamese encoder with optional reconstruction decoder, trained with a
//! triplet objective blended with a reconstruction objective.

mod loss;
mod mlp;
mod optim;
mod train;

pub use loss::{combined_loss, reconstruction_loss, triplet_loss, triplet_margins, TripletLoss};
pub use mlp::{Activation, ForwardTrace, Mlp};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{
    combined_loss_and_grad, embed, evaluate, grad_check_combined, initial_networks, train, train_from,
    train_se, EpochLoss, TrainConfig, TrainOutput,
};

pub type EncoderParams = Mlp;
pub type DecoderParams = Mlp;

use crate::{Error, Result};

/// Embedding of one normalized encoder input.
pub fn encode(input: &[f64], encoder: &EncoderParams) -> Result<Vec<f64>> {
    if input.len() != encoder.input_dim() {
        return Err(Error::input(format!("input of length {} for encoder of {}", input.len(), encoder.input_dim())));
    }
    let x = ndarray::ArrayView2::from_shape((1, input.len()), input).unwrap();
    Ok(encoder.forward(x)?.into_raw_vec_and_offset().0)
}

/// Reconstruction of an encoder input from an embedding.
pub fn decode(embedding: &[f64], decoder: &DecoderParams) -> Result<Vec<f64>> {
    if embedding.len() != decoder.input_dim() {
        return Err(Error::input(format!("embedding of length {} for decoder of {}", embedding.len(), decoder.input_dim())));
    }
    let x = ndarray::ArrayView2::from_shape((1, embedding.len()), embedding).unwrap();
    Ok(decoder.forward(x)?.into_raw_vec_and_offset().0)
}
