//! Flat configuration bundle and the six ablation presets.
//!
//! Every field is addressable through a dotted key (`train.alpha`,
//! `mel.n_mels`, ...). Bundles serialize to `key = value` lines and parse back.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::ensemble::{GridSpec, ScoreNormalization};
use crate::error::{Error, Result};
use crate::eval::PaucMode;
use crate::features::MelConfig;
use crate::model::ArchDescriptor;
use crate::nn::Norm;
use crate::train::{TrainConfig, TrainSetup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PresetName {
    BaselineLike,
    Architect,
    Scaler,
    Condition,
    AddDataset,
    Ensemble,
}

impl PresetName {
    /// Ablation order; each preset builds on the previous one.
    pub const ALL: [PresetName; 6] = [
        PresetName::BaselineLike,
        PresetName::Architect,
        PresetName::Scaler,
        PresetName::Condition,
        PresetName::AddDataset,
        PresetName::Ensemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::BaselineLike => "baseline_like",
            PresetName::Architect => "architect",
            PresetName::Scaler => "scaler",
            PresetName::Condition => "condition",
            PresetName::AddDataset => "add_dataset",
            PresetName::Ensemble => "ensemble",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            PresetName::BaselineLike => "plain AE shaped like the DCASE baseline (approximate), no scaler, no conditioning",
            PresetName::Architect => "small encoder 128-64-32 with 16-unit latent, F=10, L1 loss with lr decay",
            PresetName::Scaler => "adds frequency-wise standardization",
            PresetName::Condition => "adds ID conditioning with alpha=0.75, C=5",
            PresetName::AddDataset => "trains on additional IDs merged from an extra manifest",
            PresetName::Ensemble => "grid search, top-3 selection and weighted score ensemble",
        }
    }

    /// Keys each step changes relative to its predecessor.
    pub fn delta_keys(self) -> &'static [&'static str] {
        match self {
            PresetName::BaselineLike => &[],
            PresetName::Architect => &["arch.encoder_units", "arch.frame_size", "train.lr_decay", "train.norm"],
            PresetName::Scaler => &["features.scaler"],
            PresetName::Condition => &["arch.conditioning_enabled", "train.alpha", "train.c_value"],
            PresetName::AddDataset => &["data.additional"],
            PresetName::Ensemble => &["grid.enabled"],
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = PresetName::ALL.iter().map(|p| p.as_str()).collect();
            Error::Usage(format!("unknown preset `{s}` (known: {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSettings {
    pub top_k: usize,
    pub resolution: usize,
    pub normalization: ScoreNormalization,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self { top_k: 3, resolution: 100, normalization: ScoreNormalization::MinMax }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigBundle {
    pub preset: Option<PresetName>,
    pub machine_type: Option<String>,
    pub mel: MelConfig,
    /// `n_mels` and `n_ids` are taken from `mel` and the data at train time.
    pub arch: ArchDescriptor,
    pub train: TrainConfig,
    pub scaler_enabled: bool,
    pub includes_additional_data: bool,
    pub extra_manifest: Option<PathBuf>,
    pub grid_enabled: bool,
    pub grid: GridSpec,
    pub ensemble: EnsembleSettings,
    pub eval_p: f64,
    pub pauc_mode: PaucMode,
    pub deterministic: bool,
    /// 0 means all available cores.
    pub jobs: usize,
}

impl Default for ConfigBundle {
    /// The full conditioned model without extra data or ensembling.
    fn default() -> Self {
        let mel = MelConfig::default();
        Self {
            preset: None,
            machine_type: None,
            arch: ArchDescriptor::standard(10, mel.n_mels, 1),
            mel,
            train: TrainConfig::default(),
            scaler_enabled: true,
            includes_additional_data: false,
            extra_manifest: None,
            grid_enabled: false,
            grid: GridSpec::default(),
            ensemble: EnsembleSettings::default(),
            eval_p: 0.1,
            pauc_mode: PaucMode::McClish,
            deterministic: false,
            jobs: 0,
        }
    }
}

pub fn expand_preset(name: PresetName) -> ConfigBundle {
    let mut b = ConfigBundle { preset: Some(name), ..Default::default() };
    let rank = PresetName::ALL.iter().position(|&p| p == name).expect("listed");
    let at_least = |p: PresetName| rank >= PresetName::ALL.iter().position(|&q| q == p).expect("listed");

    if !at_least(PresetName::Architect) {
        b.arch.frame_size = 5;
        b.arch.encoder_units = vec![128, 128, 128, 128, 8];
        b.train.norm = Norm::L2Sq;
        b.train.schedule.enabled = false;
    }
    if !at_least(PresetName::Scaler) {
        b.scaler_enabled = false;
    }
    if !at_least(PresetName::Condition) {
        b.arch.conditioning_enabled = false;
        b.train.alpha = 1.0;
        b.train.c_value = 0.0;
    }
    b.includes_additional_data = at_least(PresetName::AddDataset);
    b.grid_enabled = at_least(PresetName::Ensemble);
    b
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| Error::validation(format!("bad list item `{s}` for `{key}`"))))
        .collect()
}

fn parse_val<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>().map_err(|_| Error::validation(format!("bad value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::validation(format!("bad boolean `{v}` for `{key}`"))),
    }
}

impl ConfigBundle {
    /// Every key with its value, in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        vec![
            ("preset", self.preset.map_or_else(|| "none".into(), |p| p.to_string())),
            ("data.machine_type", self.machine_type.clone().unwrap_or_else(|| "auto".into())),
            ("data.additional", self.includes_additional_data.to_string()),
            ("data.extra_manifest", self.extra_manifest.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string())),
            ("mel.n_fft", self.mel.n_fft.to_string()),
            ("mel.hop", self.mel.hop.to_string()),
            ("mel.n_mels", self.mel.n_mels.to_string()),
            ("mel.fmin", self.mel.fmin.to_string()),
            ("mel.fmax", self.mel.fmax.map_or_else(|| "nyquist".into(), |f| f.to_string())),
            ("mel.log_floor", format!("{:e}", self.mel.log_floor)),
            ("features.scaler", self.scaler_enabled.to_string()),
            ("arch.frame_size", self.arch.frame_size.to_string()),
            ("arch.encoder_units", join(&self.arch.encoder_units)),
            ("arch.decoder_units", join(&self.arch.decoder_units)),
            ("arch.cond_hidden", self.arch.cond_hidden.to_string()),
            ("arch.conditioning_enabled", self.arch.conditioning_enabled.to_string()),
            ("arch.conditioner_output_sigmoid", self.arch.conditioner_output_sigmoid.to_string()),
            ("train.alpha", t.alpha.to_string()),
            ("train.c_value", t.c_value.to_string()),
            ("train.norm", t.norm.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.frames_per_spec", t.frames_per_spec.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.seed", t.seed.to_string()),
            ("train.lr", format!("{:e}", t.schedule.initial)),
            ("train.lr_decay", t.schedule.enabled.to_string()),
            ("train.lr_factor", t.schedule.factor.to_string()),
            ("train.lr_every", t.schedule.every.to_string()),
            ("train.adam_beta1", t.adam.beta1.to_string()),
            ("train.adam_beta2", t.adam.beta2.to_string()),
            ("train.adam_eps", format!("{:e}", t.adam.eps)),
            ("grid.enabled", self.grid_enabled.to_string()),
            ("grid.alphas", join(&self.grid.alphas)),
            ("grid.c_values", join(&self.grid.c_values)),
            ("grid.mel_counts", join(&self.grid.mel_counts)),
            ("grid.norms", join(&self.grid.norms)),
            ("grid.frame_size", self.grid.frame_size.to_string()),
            ("ensemble.top_k", self.ensemble.top_k.to_string()),
            ("ensemble.resolution", self.ensemble.resolution.to_string()),
            ("ensemble.normalization", self.ensemble.normalization.to_string()),
            ("eval.p", self.eval_p.to_string()),
            ("eval.pauc_mode", self.pauc_mode.to_string()),
            ("run.deterministic", self.deterministic.to_string()),
            ("run.jobs", self.jobs.to_string()),
        ]
    }

    /// Known keys, in dump order.
    pub fn keys() -> Vec<&'static str> {
        ConfigBundle::default().to_pairs().into_iter().map(|(k, _)| k).collect()
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.to_pairs().into_iter().find(|(k, _)| *k == key).map(|(_, v)| v)
    }

    /// Sets one dotted key. `preset` expands the named preset first, so it
    /// must come before other keys that should survive.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.train;
        match key {
            "preset" => {
                *self = if v == "none" { ConfigBundle::default() } else { expand_preset(v.parse()?) };
            }
            "data.machine_type" => self.machine_type = (v != "auto").then(|| v.to_string()),
            "data.additional" => self.includes_additional_data = parse_bool(key, v)?,
            "data.extra_manifest" => self.extra_manifest = (v != "none").then(|| PathBuf::from(v)),
            "mel.n_fft" => self.mel.n_fft = parse_val(key, v)?,
            "mel.hop" => self.mel.hop = parse_val(key, v)?,
            "mel.n_mels" => self.mel.n_mels = parse_val(key, v)?,
            "mel.fmin" => self.mel.fmin = parse_val(key, v)?,
            "mel.fmax" => self.mel.fmax = if v == "nyquist" { None } else { Some(parse_val(key, v)?) },
            "mel.log_floor" => self.mel.log_floor = parse_val(key, v)?,
            "features.scaler" => self.scaler_enabled = parse_bool(key, v)?,
            "arch.frame_size" => self.arch.frame_size = parse_val(key, v)?,
            "arch.encoder_units" => self.arch.encoder_units = parse_list(key, v)?,
            "arch.decoder_units" => self.arch.decoder_units = parse_list(key, v)?,
            "arch.cond_hidden" => self.arch.cond_hidden = parse_val(key, v)?,
            "arch.conditioning_enabled" => self.arch.conditioning_enabled = parse_bool(key, v)?,
            "arch.conditioner_output_sigmoid" => self.arch.conditioner_output_sigmoid = parse_bool(key, v)?,
            "train.alpha" => t.alpha = parse_val(key, v)?,
            "train.c_value" => t.c_value = parse_val(key, v)?,
            "train.norm" => t.norm = v.parse()?,
            "train.epochs" => t.epochs = parse_val(key, v)?,
            "train.frames_per_spec" => t.frames_per_spec = parse_val(key, v)?,
            "train.batch_size" => t.batch_size = parse_val(key, v)?,
            "train.seed" => t.seed = parse_val(key, v)?,
            "train.lr" => t.schedule.initial = parse_val(key, v)?,
            "train.lr_decay" => t.schedule.enabled = parse_bool(key, v)?,
            "train.lr_factor" => t.schedule.factor = parse_val(key, v)?,
            "train.lr_every" => t.schedule.every = parse_val(key, v)?,
            "train.adam_beta1" => t.adam.beta1 = parse_val(key, v)?,
            "train.adam_beta2" => t.adam.beta2 = parse_val(key, v)?,
            "train.adam_eps" => t.adam.eps = parse_val(key, v)?,
            "grid.enabled" => self.grid_enabled = parse_bool(key, v)?,
            "grid.alphas" => self.grid.alphas = parse_list(key, v)?,
            "grid.c_values" => self.grid.c_values = parse_list(key, v)?,
            "grid.mel_counts" => self.grid.mel_counts = parse_list(key, v)?,
            "grid.norms" => {
                self.grid.norms = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_>>()?
            }
            "grid.frame_size" => self.grid.frame_size = parse_val(key, v)?,
            "ensemble.top_k" => self.ensemble.top_k = parse_val(key, v)?,
            "ensemble.resolution" => self.ensemble.resolution = parse_val(key, v)?,
            "ensemble.normalization" => self.ensemble.normalization = v.parse()?,
            "eval.p" => self.eval_p = parse_val(key, v)?,
            "eval.pauc_mode" => self.pauc_mode = v.parse()?,
            "run.deterministic" => self.deterministic = parse_bool(key, v)?,
            "run.jobs" => self.jobs = parse_val(key, v)?,
            other => return Err(Error::Usage(format!("unknown configuration key `{other}`"))),
        }
        self.train.adam.lr = self.train.schedule.initial;
        Ok(())
    }

    /// `key = value` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Applies a `key = value` text; `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::validation_at(i + 1, format!("expected `key = value`, got `{line}`")))?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        // a preset line resets the bundle, so it is applied before everything else
        pairs.sort_by_key(|(_, k, _)| k != "preset");
        for (line, k, v) in pairs {
            self.set(&k, &v).map_err(|e| match e {
                Error::Validation { message, .. } => Error::validation_at(line, message),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut b = ConfigBundle::default();
        b.apply_text(text)?;
        Ok(b)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Keys whose values differ, in dump order. The `preset` label is ignored.
    pub fn diff(&self, other: &ConfigBundle) -> Vec<&'static str> {
        self.to_pairs()
            .into_iter()
            .zip(other.to_pairs())
            .filter(|((k, a), (_, b))| *k != "preset" && a != b)
            .map(|((k, _), _)| k)
            .collect()
    }

    /// Keys that affect the trained weights.
    pub fn provenance(&self) -> BTreeMap<String, String> {
        self.to_pairs()
            .into_iter()
            .filter(|(k, _)| {
                ["mel.", "features.", "arch.", "train.", "data.machine_type"].iter().any(|p| k.starts_with(p))
            })
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    pub fn train_setup(&self, machine_type: &str) -> TrainSetup {
        let mut arch = self.arch.clone();
        arch.n_mels = self.mel.n_mels;
        let mut prov = self.provenance();
        prov.insert("data.machine_type".into(), machine_type.to_string());
        TrainSetup {
            machine_type: machine_type.to_string(),
            mel: self.mel.clone(),
            arch,
            train: self.train.clone(),
            scaler_enabled: self.scaler_enabled,
            provenance: prov,
        }
    }
}
