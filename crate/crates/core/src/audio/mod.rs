//! Audio clips, WAV files, dataset manifests and the synthetic machine-sound
//! generator.

mod dataset;
mod manifest;
mod synth;
mod wav;

use std::fmt;
use std::str::FromStr;

pub use dataset::{id_name, PlannedClip, SynthDataset};
pub use manifest::{ClipSource, Manifest, ManifestEntry};
pub use synth::{synth_clip, AnomalyKind, SynthSpec};
pub use wav::{load_wav, write_wav, WavEncoding};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Normal,
    Anomaly,
    Unknown,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Normal => "normal",
            Label::Anomaly => "anomaly",
            Label::Unknown => "unknown",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Label::Normal),
            "anomaly" | "anomalous" => Ok(Label::Anomaly),
            "unknown" => Ok(Label::Unknown),
            other => Err(Error::validation(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::validation(format!("unknown split `{other}`"))),
        }
    }
}

/// Mono PCM audio with its dataset provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub machine_type: String,
    pub machine_id: String,
    pub label: Label,
    pub split: Split,
}

impl AudioClip {
    /// Validates the sample invariants; metadata defaults to unknown/test.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::validation("audio clip has no samples"));
        }
        if sample_rate == 0 {
            return Err(Error::validation("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::validation(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
            machine_type: String::new(),
            machine_id: String::new(),
            label: Label::Unknown,
            split: Split::Test,
        })
    }

    pub fn with_meta(mut self, machine_type: &str, machine_id: &str, label: Label, split: Split) -> Self {
        self.machine_type = machine_type.to_string();
        self.machine_id = machine_id.to_string();
        self.label = label;
        self.split = split;
        self
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}
