//! ID-conditioned auto-encoder (IDCAE) for unsupervised anomalous sound
//! detection.
//!
//! The pipeline runs from audio to ensemble:
//!
//! - [`audio`]: WAV I/O, dataset manifests, synthetic machine sounds
//! - [`features`]: STFT, log-mel spectrograms, standardization, windows
//! - [`nn`]: dense layers, batch-norm, activations, losses, Adam
//! - [`model`]: encoder/decoder with FiLM label conditioning, `.idcae` files
//! - [`train`]: match/non-match label sampling and the training loop
//! - [`eval`]: anomaly scores, AUC, pAUC, mAUC
//! - [`ensemble`]: hyperparameter grid and convex score combination
//! - [`presets`]: named configuration bundles and flat config files
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar type.

pub mod audio;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod model;
pub mod nn;
pub mod presets;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{ContainerError, Error, Result};
pub use scalar::Real;
pub use tensor::Tensor;

pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type Model64 = model::IdcaeModel<f64>;
pub type Model32 = model::IdcaeModel<f32>;
pub type Spectrogram64 = features::Spectrogram<f64>;
pub type Scaler64 = features::Scaler<f64>;
