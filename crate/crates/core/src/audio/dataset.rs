//! Synthetic datasets: a manifest plus optional WAV files.

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::manifest::{ClipSource, Manifest, ManifestEntry};
use super::synth::{synth_clip, SynthSpec};
use super::wav::{write_wav, WavEncoding};
use super::{Label, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub machine_type: String,
    pub n_ids: usize,
    /// First ID index; lets a second dataset add new IDs.
    pub id_offset: usize,
    pub clips_per_id: usize,
    /// Defaults to `clips_per_id` when `None`.
    pub test_clips_per_id: Option<usize>,
    /// Share of each ID's test clips that are anomalous.
    pub anomaly_fraction: f64,
    pub seed: u64,
    pub duration_s: f64,
    pub sample_rate: u32,
}

impl Default for SynthDataset {
    fn default() -> Self {
        Self {
            machine_type: "synth".into(),
            n_ids: 3,
            id_offset: 0,
            clips_per_id: 24,
            test_clips_per_id: None,
            anomaly_fraction: 0.5,
            seed: 0,
            duration_s: 2.0,
            sample_rate: 16_000,
        }
    }
}

/// One planned clip.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedClip {
    pub file_name: String,
    pub spec: SynthSpec,
    pub machine_id: String,
    pub label: Label,
    pub split: Split,
}

pub fn id_name(index: usize) -> String {
    format!("id_{index:02}")
}

impl SynthDataset {
    pub fn validate(&self) -> Result<()> {
        if self.n_ids == 0 || self.clips_per_id == 0 {
            return Err(Error::validation("need at least one id and one training clip per id"));
        }
        if !(0.0..=1.0).contains(&self.anomaly_fraction) {
            return Err(Error::validation(format!("anomaly fraction must be in [0, 1], got {}", self.anomaly_fraction)));
        }
        Ok(())
    }

    /// Clip list in manifest order. Each ID draws its seeds from its own
    /// stream, so an ID's clips do not depend on how many IDs are generated.
    pub fn plan(&self) -> Result<Vec<PlannedClip>> {
        self.validate()?;
        let n_test = self.test_clips_per_id.unwrap_or(self.clips_per_id);
        let n_anom = (self.anomaly_fraction * n_test as f64).round() as usize;
        let mut out = Vec::new();
        for id in self.id_offset..self.id_offset + self.n_ids {
            let mut seeds = ChaCha8Rng::seed_from_u64(self.seed);
            seeds.set_stream(1000 + id as u64);
            let name = id_name(id);
            let mut push = |i: usize, anomalous: bool, split: Split, seeds: &mut ChaCha8Rng| {
                let base = if anomalous { SynthSpec::anomalous(id, seeds.next_u64()) } else { SynthSpec::normal(id, seeds.next_u64()) };
                let spec = SynthSpec { duration_s: self.duration_s, sample_rate: self.sample_rate, ..base };
                let label = if anomalous { Label::Anomaly } else { Label::Normal };
                out.push(PlannedClip {
                    file_name: format!("{split}/{}_{name}_{label}_{i:04}.wav", self.machine_type),
                    spec,
                    machine_id: name.clone(),
                    label,
                    split,
                });
            };
            for i in 0..self.clips_per_id {
                push(i, false, Split::Train, &mut seeds);
            }
            for i in 0..n_test {
                push(i, i < n_anom, Split::Test, &mut seeds);
            }
        }
        Ok(out)
    }

    /// Manifest whose sources are `synth:` specs, without touching the disk.
    pub fn manifest(&self) -> Result<Manifest> {
        let entries = self
            .plan()?
            .into_iter()
            .map(|c| ManifestEntry {
                key: format!("synth:{}", c.spec),
                source: ClipSource::Synth(c.spec),
                machine_type: self.machine_type.clone(),
                machine_id: c.machine_id,
                label: c.label,
                split: c.split,
            })
            .collect();
        Manifest::from_entries(entries)
    }

    /// Writes PCM16 WAVs and `manifest.tsv` under `out_dir`.
    pub fn write(&self, out_dir: &Path) -> Result<Manifest> {
        let plan = self.plan()?;
        let mut entries = Vec::with_capacity(plan.len());
        for c in plan {
            let path = out_dir.join(&c.file_name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let clip = synth_clip(&c.spec)?;
            write_wav(&path, &clip, WavEncoding::Pcm16)?;
            entries.push(ManifestEntry {
                key: c.file_name,
                source: ClipSource::File(path),
                machine_type: self.machine_type.clone(),
                machine_id: c.machine_id,
                label: c.label,
                split: c.split,
            });
        }
        let manifest = Manifest::from_entries(entries)?;
        let path = out_dir.join("manifest.tsv");
        std::fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}
