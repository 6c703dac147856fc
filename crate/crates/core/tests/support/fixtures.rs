//! Small models and training data shared by several test files.

use idcae::features::Spectrogram;
use idcae::model::ArchDescriptor;
use idcae::train::{TrainConfig, TrainingSet};
use idcae::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn small_arch(conditioning: bool) -> ArchDescriptor {
    ArchDescriptor {
        encoder_units: vec![16, 8],
        decoder_units: vec![16],
        cond_hidden: 4,
        conditioning_enabled: conditioning,
        ..ArchDescriptor::standard(3, 6, 2)
    }
}

/// Standardized random spectrograms, `per_id` for each of `n_ids` IDs,
/// with an ID-dependent offset so the IDs are distinguishable.
pub fn tiny_set(n_ids: usize, per_id: usize, n_mels: usize, frames: usize, seed: u64) -> TrainingSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectrograms = Vec::new();
    let mut ids = Vec::new();
    for id in 0..n_ids {
        for j in 0..per_id {
            let data: Vec<f64> = (0..n_mels * frames)
                .map(|i| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    0.3 * z + if i / frames == id % n_mels { 1.5 } else { 0.0 }
                })
                .collect();
            let mut s = Spectrogram::new(Tensor::from_vec(&[n_mels, frames], data).unwrap(), format!("c{id}_{j}"));
            s.standardized = true;
            spectrograms.push(s);
            ids.push(id);
        }
    }
    TrainingSet { spectrograms, ids, n_ids }
}

pub fn quick_config(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig { epochs, frames_per_spec: 8, batch_size: 16, seed, ..TrainConfig::default() }
}
