//! The ID-conditioned auto-encoder: encoder, decoder, FiLM conditioners,
//! parameter accounting and the `.idcae` container.

mod container;
mod film;
mod network;
mod persist;

pub use container::{Container, CONTAINER_VERSION, MAGIC};
pub use film::{film_backward, film_condition};
pub use network::{Conditioner, DenseBlock, ForwardCache, IdcaeModel, ParamCounts};
pub use persist::{load_model, save_model};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::features::MelConfig;
use crate::nn::Norm;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Layer sizes and switches of one IDCAE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchDescriptor {
    pub frame_size: usize,
    pub n_mels: usize,
    pub n_ids: usize,
    /// Hidden encoder widths followed by the latent width.
    pub encoder_units: Vec<usize>,
    pub decoder_units: Vec<usize>,
    pub cond_hidden: usize,
    pub conditioning_enabled: bool,
    /// Sigmoid after the second conditioner layer as well as the first.
    pub conditioner_output_sigmoid: bool,
}

impl ArchDescriptor {
    pub fn standard(frame_size: usize, n_mels: usize, n_ids: usize) -> Self {
        Self {
            frame_size,
            n_mels,
            n_ids,
            encoder_units: vec![128, 64, 32, 16],
            decoder_units: vec![128, 128, 128, 128],
            cond_hidden: 16,
            conditioning_enabled: true,
            conditioner_output_sigmoid: true,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.frame_size * self.n_mels
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder_units.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_size == 0 || self.n_mels == 0 {
            return Err(Error::validation("frame size and mel count must be positive"));
        }
        if self.encoder_units.is_empty() || self.decoder_units.is_empty() {
            return Err(Error::validation("encoder and decoder need at least one block"));
        }
        if self.encoder_units.iter().chain(&self.decoder_units).any(|&u| u == 0) || self.cond_hidden == 0 {
            return Err(Error::validation("layer widths must be positive"));
        }
        if self.n_ids == 0 {
            return Err(Error::validation("need at least one machine id"));
        }
        Ok(())
    }
}

/// Provenance stored next to the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInfo {
    pub machine_type: String,
    pub id_vocabulary: Vec<String>,
    pub mel: MelConfig,
    /// Norm used in training; scoring reuses it.
    pub norm: Norm,
    /// Flat resolved configuration used for training.
    pub config: BTreeMap<String, String>,
}

impl Default for ModelInfo {
    fn default() -> Self {
        Self {
            machine_type: String::new(),
            id_vocabulary: Vec::new(),
            mel: MelConfig::default(),
            norm: Norm::L1,
            config: BTreeMap::new(),
        }
    }
}

impl ModelInfo {
    /// SHA-256 over the sorted `key=value` configuration lines.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (k, v) in &self.config {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Exactly one hot entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHotLabel {
    index: usize,
    n_ids: usize,
}

impl OneHotLabel {
    pub fn new(index: usize, n_ids: usize) -> Result<Self> {
        if index >= n_ids {
            return Err(Error::validation(format!("label index {index} out of range for {n_ids} ids")));
        }
        Ok(Self { index, n_ids })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn n_ids(&self) -> usize {
        self.n_ids
    }

    pub fn to_vec<T: Real>(&self) -> Vec<T> {
        (0..self.n_ids).map(|i| if i == self.index { T::one() } else { T::zero() }).collect()
    }
}

/// Stacks label indices into a `batch x n_ids` one-hot matrix.
pub fn one_hot_batch<T: Real>(indices: &[usize], n_ids: usize) -> Result<Tensor<T>> {
    let mut t = Tensor::zeros(&[indices.len(), n_ids]);
    for (r, &i) in indices.iter().enumerate() {
        if i >= n_ids {
            return Err(Error::validation(format!("label index {i} out of range for {n_ids} ids")));
        }
        t.set2(r, i, T::one());
    }
    Ok(t)
}

/// Rejects label matrices whose rows are not one-hot.
pub fn check_one_hot<T: Real>(labels: &Tensor<T>, n_ids: usize) -> Result<()> {
    if labels.cols() != n_ids {
        return Err(Error::Shape(format!("labels have {} columns, model has {n_ids} ids", labels.cols())));
    }
    for r in 0..labels.rows() {
        let row = labels.row(r);
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || ones + zeros != n_ids {
            return Err(Error::validation(format!("label row {r} is not one-hot")));
        }
    }
    Ok(())
}
