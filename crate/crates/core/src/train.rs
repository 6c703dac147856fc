//! Match/non-match label sampling and the IDCAE training loop.
//!
//! Each time a window enters a batch it is conditioned on its own ID with
//! probability `alpha` (target: the window itself) or on a uniformly chosen
//! other ID (target: the constant `C` everywhere).

use std::fmt::Write as _;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{Manifest, Split};
use crate::error::{Error, Result};
use crate::features::{log_mel_spectrogram, sample_starts, FeatureWindow, MelConfig, Scaler, Spectrogram};
use crate::model::{one_hot_batch, ArchDescriptor, IdcaeModel, ModelInfo, OneHotLabel};
use crate::nn::{loss, per_sample_loss, AdamConfig, AdamState, LrSchedule, Mode, Norm};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Probability of conditioning on the matching label.
    pub alpha: f64,
    /// Constant target for non-matching labels.
    pub c_value: f64,
    pub norm: Norm,
    pub epochs: usize,
    pub frames_per_spec: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub schedule: LrSchedule,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.75,
            c_value: 5.0,
            norm: Norm::L1,
            epochs: 100,
            frames_per_spec: 300,
            batch_size: 512,
            seed: 0,
            schedule: LrSchedule::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_ids: usize, conditioning: bool) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::validation(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if self.alpha < 1.0 && n_ids < 2 {
            return Err(Error::validation("alpha < 1 needs at least two machine ids"));
        }
        if self.alpha < 1.0 && !conditioning {
            return Err(Error::validation("alpha < 1 requires conditioning to be enabled"));
        }
        if self.batch_size < 2 {
            return Err(Error::validation("batch size must be at least 2"));
        }
        if self.frames_per_spec == 0 {
            return Err(Error::validation("frames_per_spec must be positive"));
        }
        if !self.c_value.is_finite() {
            return Err(Error::validation("C must be finite"));
        }
        Ok(())
    }
}

/// Independent random streams derived from one root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngStream {
    Init = 1,
    Sampling = 2,
    Labels = 3,
}

pub fn rng_for(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Returns the assigned label and whether it matches `true_id`.
pub fn assign_label<R: Rng + ?Sized>(true_id: usize, n_ids: usize, alpha: f64, rng: &mut R) -> (OneHotLabel, bool) {
    let draw: f64 = rng.random();
    if n_ids <= 1 || draw < alpha {
        return (OneHotLabel::new(true_id, n_ids.max(true_id + 1)).expect("true id in range"), true);
    }
    let k = rng.random_range(0..n_ids - 1);
    let idx = if k >= true_id { k + 1 } else { k };
    (OneHotLabel::new(idx, n_ids).expect("index in range"), false)
}

/// A window with its assigned label and reconstruction target.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedSample<T> {
    pub window: FeatureWindow<T>,
    pub true_id: usize,
    pub assigned_label: OneHotLabel,
    pub is_match: bool,
    pub target: Tensor<T>,
}

impl<T: Real> ConditionedSample<T> {
    pub fn new(window: FeatureWindow<T>, true_id: usize, assigned_label: OneHotLabel, c_value: f64) -> Self {
        let is_match = assigned_label.index() == true_id;
        let target = if is_match { window.values.clone() } else { Tensor::full(window.values.shape(), T::lit(c_value)) };
        Self { window, true_id, assigned_label, is_match, target }
    }
}

/// Stacks samples into `(inputs, labels, targets)`.
pub fn build_batch<T: Real>(samples: &[ConditionedSample<T>]) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let first = samples.first().ok_or_else(|| Error::validation("empty batch"))?;
    let shape = first.window.values.shape().to_vec();
    let n_ids = first.assigned_label.n_ids();
    let per = first.window.values.len();
    let mut x = Vec::with_capacity(samples.len() * per);
    let mut y = Vec::with_capacity(samples.len() * per);
    for s in samples {
        if s.window.values.shape() != shape.as_slice() || s.assigned_label.n_ids() != n_ids {
            return Err(Error::Shape("batch samples disagree in shape".into()));
        }
        x.extend_from_slice(s.window.values.data());
        y.extend_from_slice(s.target.data());
    }
    let mut full = vec![samples.len()];
    full.extend(&shape);
    let idx: Vec<usize> = samples.iter().map(|s| s.assigned_label.index()).collect();
    Ok((Tensor::from_vec(&full, x)?, one_hot_batch(&idx, n_ids)?, Tensor::from_vec(&full, y)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    pub match_loss: f64,
    /// NaN when no non-matching sample was drawn.
    pub nonmatch_loss: f64,
    pub samples: usize,
    pub match_samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Clips dropped because they are shorter than one window.
    pub skipped: Vec<String>,
}

impl TrainLog {
    /// Tab-separated, one line per epoch.
    pub fn to_text(&self) -> String {
        let mut out = String::from("epoch\tlr\tmean_loss\tmatch_loss\tnonmatch_loss\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{}\t{:e}\t{:.8}\t{:.8}\t{:.8}", e.epoch, e.lr, e.mean_loss, e.match_loss, e.nonmatch_loss);
        }
        out
    }
}

/// Standardized training spectrograms with their ID indices.
#[derive(Debug, Clone)]
pub struct TrainingSet<T> {
    pub spectrograms: Vec<Spectrogram<T>>,
    pub ids: Vec<usize>,
    pub n_ids: usize,
}

/// Trains a fresh model on prepared spectrograms.
pub fn train_on_spectrograms<T: Real>(
    arch: &ArchDescriptor,
    cfg: &TrainConfig,
    data: &TrainingSet<T>,
) -> Result<(IdcaeModel<T>, TrainLog)> {
    let mut arch = arch.clone();
    arch.n_ids = data.n_ids;
    if let Some(s) = data.spectrograms.first() {
        arch.n_mels = s.n_mels();
    }
    cfg.validate(arch.n_ids, arch.conditioning_enabled)?;
    let f = arch.frame_size;
    let m = arch.n_mels;

    let mut log = TrainLog::default();
    let mut frames = Vec::new();
    let mut ids = Vec::new();
    for (s, &id) in data.spectrograms.iter().zip(&data.ids) {
        if !s.standardized {
            return Err(Error::Usage(format!("`{}` must be standardized before training", s.clip_id)));
        }
        if s.n_mels() != m {
            return Err(Error::Shape(format!("`{}` has {} mels, expected {m}", s.clip_id, s.n_mels())));
        }
        if id >= data.n_ids {
            return Err(Error::validation(format!("id index {id} out of range for {} ids", data.n_ids)));
        }
        if s.n_frames() < f {
            warn!("skipping `{}`: {} frames is shorter than the {f}-frame window", s.clip_id, s.n_frames());
            log.skipped.push(s.clip_id.clone());
            continue;
        }
        frames.push(s.frames_major());
        ids.push(id);
    }
    if frames.is_empty() {
        return Err(Error::validation("no training spectrogram is long enough for one window"));
    }

    let mut model = IdcaeModel::<T>::new(arch, &mut rng_for(cfg.seed, RngStream::Init))?;
    let mut sampling = rng_for(cfg.seed, RngStream::Sampling);
    let mut labels_rng = rng_for(cfg.seed, RngStream::Labels);
    let mut adam = AdamState::<T>::new(cfg.adam);
    let n_ids = model.arch.n_ids;
    let per = f * m;
    let c = T::lit(cfg.c_value);

    for epoch in 0..cfg.epochs {
        adam.set_lr(&cfg.schedule, epoch);
        let mut order: Vec<(usize, usize)> = Vec::with_capacity(frames.len() * cfg.frames_per_spec);
        for (si, fr) in frames.iter().enumerate() {
            order.extend(sample_starts(fr.rows(), f, cfg.frames_per_spec, &mut sampling).into_iter().map(|s| (si, s)));
        }
        order.shuffle(&mut sampling);

        let (mut total, mut match_total, mut nonmatch_total) = (0.0, 0.0, 0.0);
        let (mut count, mut match_count) = (0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let b = chunk.len();
            let mut x = Vec::with_capacity(b * per);
            let mut y = Vec::with_capacity(b * per);
            let mut label_idx = Vec::with_capacity(b);
            let mut matched = Vec::with_capacity(b);
            for &(si, start) in chunk {
                let window = &frames[si].data()[start * m..(start + f) * m];
                x.extend_from_slice(window);
                let (label, is_match) = assign_label(ids[si], n_ids, cfg.alpha, &mut labels_rng);
                if is_match {
                    y.extend_from_slice(window);
                } else {
                    y.extend(std::iter::repeat_n(c, per));
                }
                label_idx.push(label.index());
                matched.push(is_match);
            }
            let x = Tensor::from_vec(&[b, f, m], x)?;
            let y = Tensor::from_vec(&[b, f, m], y)?;
            let labels = one_hot_batch(&label_idx, n_ids)?;

            let (pred, cache) = model.forward_train(&x, &labels)?;
            let (batch_loss, grad) = loss(&pred, &y, cfg.norm)?;
            if !batch_loss.is_finite() {
                return Err(Error::Numeric(format!("loss became {batch_loss} at epoch {epoch}")));
            }
            for (l, &is_match) in per_sample_loss(&pred, &y, cfg.norm)?.into_iter().zip(&matched) {
                let l = l.to_f64_lossless();
                total += l;
                if is_match {
                    match_total += l;
                    match_count += 1;
                } else {
                    nonmatch_total += l;
                }
            }
            count += b;
            model.backward(&cache, &grad)?;
            adam.step(&mut model.parameters_mut())?;
        }
        let nonmatch = count - match_count;
        let entry = EpochLog {
            epoch,
            lr: adam.config.lr,
            mean_loss: total / count.max(1) as f64,
            match_loss: if match_count > 0 { match_total / match_count as f64 } else { f64::NAN },
            nonmatch_loss: if nonmatch > 0 { nonmatch_total / nonmatch as f64 } else { f64::NAN },
            samples: count,
            match_samples: match_count,
        };
        info!(
            "epoch {epoch}: lr {:.3e} loss {:.5} (match {:.5}, non-match {:.5})",
            entry.lr, entry.mean_loss, entry.match_loss, entry.nonmatch_loss
        );
        log.epochs.push(entry);
    }
    model.set_mode(Mode::Infer);
    Ok((model, log))
}

/// Log-mel spectrograms for one machine type and split, with manifest entry indices.
pub fn extract_features<T: Real>(
    manifest: &Manifest,
    machine_type: &str,
    split: Split,
    mel: &MelConfig,
) -> Result<Vec<(usize, Spectrogram<T>)>> {
    manifest
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.machine_type == machine_type && e.split == split)
        .map(|(i, e)| {
            let clip = e.load()?;
            Ok((i, log_mel_spectrogram(&clip, mel, &e.key)?))
        })
        .collect()
}

/// Everything needed to train from a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSetup {
    pub machine_type: String,
    pub mel: MelConfig,
    pub arch: ArchDescriptor,
    pub train: TrainConfig,
    /// Fit a frequency-wise scaler; otherwise the identity scaler is used.
    pub scaler_enabled: bool,
    /// Flat configuration recorded in the model file.
    pub provenance: std::collections::BTreeMap<String, String>,
}

/// Features, scaler, training and provenance for one machine type.
pub fn train<T: Real>(manifest: &Manifest, setup: &TrainSetup) -> Result<(IdcaeModel<T>, TrainLog)> {
    let mt = setup.machine_type.as_str();
    let vocab = manifest
        .vocabulary(mt)
        .ok_or_else(|| Error::validation(format!("machine type `{mt}` not in manifest")))?
        .to_vec();
    manifest.check_sample_rate(mt)?;
    let raw = extract_features::<T>(manifest, mt, Split::Train, &setup.mel)?;
    if raw.is_empty() {
        return Err(Error::validation(format!("no training clips for `{mt}`")));
    }
    let specs: Vec<Spectrogram<T>> = raw.iter().map(|(_, s)| s.clone()).collect();
    let scaler = if setup.scaler_enabled { Scaler::fit(&specs)? } else { Scaler::identity(setup.mel.n_mels) };
    let mut data = TrainingSet { spectrograms: Vec::with_capacity(specs.len()), ids: Vec::new(), n_ids: vocab.len() };
    for ((i, _), s) in raw.iter().zip(&specs) {
        let e = &manifest.entries[*i];
        data.ids.push(manifest.id_index(mt, &e.machine_id).expect("manifest validated ids"));
        data.spectrograms.push(scaler.apply(s)?);
    }
    let mut arch = setup.arch.clone();
    arch.n_mels = setup.mel.n_mels;
    let (mut model, log) = train_on_spectrograms(&arch, &setup.train, &data)?;
    model.set_scaler(scaler)?;
    model.info = ModelInfo {
        machine_type: mt.to_string(),
        id_vocabulary: vocab,
        mel: setup.mel.clone(),
        norm: setup.train.norm,
        config: setup.provenance.clone(),
    };
    Ok((model, log))
}
