use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::synth::{synth_clip, SynthSpec};
use super::{load_wav, AudioClip, Label, Split};
use crate::error::{Error, Result};

/// Where an entry's audio comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ClipSource {
    File(PathBuf),
    Synth(SynthSpec),
}

impl ClipSource {
    fn parse(token: &str, base: &Path) -> Result<Self> {
        match token.strip_prefix("synth:") {
            Some(rest) => Ok(ClipSource::Synth(rest.parse()?)),
            None => {
                let p = Path::new(token);
                Ok(ClipSource::File(if p.is_absolute() { p.to_path_buf() } else { base.join(p) }))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Path column exactly as written (also used as the clip id).
    pub key: String,
    pub source: ClipSource,
    pub machine_type: String,
    pub machine_id: String,
    pub label: Label,
    pub split: Split,
}

impl ManifestEntry {
    pub fn load(&self) -> Result<AudioClip> {
        let clip = match &self.source {
            ClipSource::File(p) => load_wav(p)?,
            ClipSource::Synth(spec) => synth_clip(spec)?,
        };
        Ok(clip.with_meta(&self.machine_type, &self.machine_id, self.label, self.split))
    }

    pub fn sample_rate(&self) -> Result<u32> {
        match &self.source {
            ClipSource::File(p) => hound::WavReader::open(p)
                .map(|r| r.spec().sample_rate)
                .map_err(|e| Error::Format { path: p.clone(), reason: e.to_string() }),
            ClipSource::Synth(spec) => Ok(spec.sample_rate),
        }
    }
}

/// Validated dataset listing with one ID vocabulary per machine type.
///
/// Text format, one record per line:
/// `path<TAB>machine_type<TAB>machine_id<TAB>label<TAB>split`.
/// Lines starting with `#` are comments. A line
/// `@vocab<TAB>machine_type<TAB>id_a,id_b,...` pins the vocabulary order for
/// a machine type; otherwise the sorted set of observed IDs is used.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    vocabularies: BTreeMap<String, Vec<String>>,
}

impl Manifest {
    pub fn parse(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse_str(&text, base)
    }

    pub fn parse_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut explicit: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols[0] == "@vocab" {
                if cols.len() != 3 {
                    return Err(Error::validation_at(line_no, "@vocab needs machine_type and a comma-separated id list"));
                }
                let ids: Vec<String> = cols[2].split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
                let unique: HashSet<&String> = ids.iter().collect();
                if unique.len() != ids.len() {
                    return Err(Error::validation_at(line_no, format!("duplicate id in vocabulary for `{}`", cols[1])));
                }
                if explicit.insert(cols[1].to_string(), ids).is_some() {
                    return Err(Error::validation_at(line_no, format!("vocabulary for `{}` given twice", cols[1])));
                }
                continue;
            }
            if cols.len() != 5 {
                return Err(Error::validation_at(line_no, format!("expected 5 tab-separated fields, got {}", cols.len())));
            }
            let label: Label = cols[3].parse().map_err(|e: Error| at_line(e, line_no))?;
            let split: Split = cols[4].parse().map_err(|e: Error| at_line(e, line_no))?;
            let source = ClipSource::parse(cols[0], base_dir).map_err(|e| at_line(e, line_no))?;
            entries.push((line_no, ManifestEntry {
                key: cols[0].to_string(),
                source,
                machine_type: cols[1].to_string(),
                machine_id: cols[2].to_string(),
                label,
                split,
            }));
        }
        Self::build(entries, explicit)
    }

    /// Builds a manifest from entries, validating like `parse`.
    pub fn from_entries(entries: Vec<ManifestEntry>) -> Result<Self> {
        Self::build(entries.into_iter().enumerate().map(|(i, e)| (i + 1, e)).collect(), BTreeMap::new())
    }

    fn build(entries: Vec<(usize, ManifestEntry)>, explicit: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut observed: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (line, e) in &entries {
            if !seen.insert(e.key.clone()) {
                return Err(Error::validation_at(*line, format!("duplicate entry `{}`", e.key)));
            }
            if e.split == Split::Train && e.label != Label::Normal {
                return Err(Error::validation_at(
                    *line,
                    format!("train split entries must be labeled normal, `{}` is {}", e.key, e.label),
                ));
            }
            if let Some(vocab) = explicit.get(&e.machine_type) {
                if !vocab.contains(&e.machine_id) {
                    return Err(Error::validation_at(
                        *line,
                        format!("machine id `{}` not in the vocabulary of `{}`", e.machine_id, e.machine_type),
                    ));
                }
            }
            observed.entry(e.machine_type.clone()).or_default().insert(e.machine_id.clone());
        }
        let mut vocabularies: BTreeMap<String, Vec<String>> =
            observed.into_iter().map(|(mt, ids)| (mt, ids.into_iter().collect())).collect();
        vocabularies.extend(explicit);
        Ok(Self { entries: entries.into_iter().map(|(_, e)| e).collect(), vocabularies })
    }

    pub fn machine_types(&self) -> Vec<&str> {
        self.vocabularies.keys().map(String::as_str).collect()
    }

    pub fn vocabulary(&self, machine_type: &str) -> Option<&[String]> {
        self.vocabularies.get(machine_type).map(Vec::as_slice)
    }

    pub fn one_hot_dim(&self, machine_type: &str) -> usize {
        self.vocabulary(machine_type).map_or(0, <[String]>::len)
    }

    pub fn id_index(&self, machine_type: &str, machine_id: &str) -> Option<usize> {
        self.vocabulary(machine_type)?.iter().position(|id| id == machine_id)
    }

    pub fn select<'a>(&'a self, machine_type: &'a str, split: Split) -> impl Iterator<Item = &'a ManifestEntry> + 'a {
        self.entries.iter().filter(move |e| e.machine_type == machine_type && e.split == split)
    }

    /// Resolves the single machine type, or errors when the choice is ambiguous.
    pub fn resolve_machine_type(&self, requested: Option<&str>) -> Result<String> {
        match requested {
            Some(mt) if self.vocabularies.contains_key(mt) => Ok(mt.to_string()),
            Some(mt) => Err(Error::validation(format!("machine type `{mt}` not present in manifest"))),
            None => match self.machine_types().as_slice() {
                [only] => Ok(only.to_string()),
                [] => Err(Error::validation("manifest is empty")),
                many => Err(Error::Usage(format!("manifest has several machine types ({}); pick one", many.join(", ")))),
            },
        }
    }

    /// All entries of one machine type must share a sample rate.
    pub fn check_sample_rate(&self, machine_type: &str) -> Result<u32> {
        let mut rate = None;
        for e in self.entries.iter().filter(|e| e.machine_type == machine_type) {
            let r = e.sample_rate()?;
            match rate {
                None => rate = Some(r),
                Some(prev) if prev != r => {
                    return Err(Error::validation(format!(
                        "mixed sample rates for `{machine_type}`: {prev} Hz and {r} Hz (`{}`)",
                        e.key
                    )))
                }
                _ => {}
            }
        }
        rate.ok_or_else(|| Error::validation(format!("no entries for `{machine_type}`")))
    }

    /// Union of two manifests; vocabularies merge as sorted unions.
    pub fn merge(&self, other: &Manifest) -> Result<Manifest> {
        let mut entries: Vec<ManifestEntry> = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        let mut merged = Manifest::from_entries(entries)?;
        for (mt, vocab) in self.vocabularies.iter().chain(&other.vocabularies) {
            let v = merged.vocabularies.entry(mt.clone()).or_default();
            for id in vocab {
                if !v.contains(id) {
                    v.push(id.clone());
                }
            }
            v.sort();
        }
        Ok(merged)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# path\tmachine_type\tmachine_id\tlabel\tsplit\n");
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", e.key, e.machine_type, e.machine_id, e.label, e.split);
        }
        out
    }
}

fn at_line(e: Error, line: usize) -> Error {
    match e {
        Error::Validation { message, .. } => Error::validation_at(line, message),
        other => other,
    }
}
