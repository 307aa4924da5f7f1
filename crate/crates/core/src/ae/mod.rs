//! Graph autoencoder: MPP encoder, UMP decoder, training.

mod model;
pub mod ops;
mod spec;
mod train;

pub use model::{AEModel, DecoderMap, Padding};
pub use spec::LayerSpec;
pub use train::{batch_loss_and_grad, mean_loss, train, Adam, TrainConfig, TrainReport};
