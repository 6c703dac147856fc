//! Anomaly scoring with matching labels and the ROC metrics AUC, pAUC and mAUC.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::audio::{AudioClip, Label, Manifest, Split};
use crate::error::{Error, Result};
use crate::features::{log_mel_spectrogram, Scaler, Spectrogram};
use crate::model::{one_hot_batch, IdcaeModel};
use crate::nn::per_sample_loss;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Windows per inference batch.
const SCORE_BATCH: usize = 512;

/// Per-window reconstruction errors of a standardized spectrogram under an
/// arbitrary label, using the model's training norm.
pub fn window_errors<T: Real>(model: &IdcaeModel<T>, spec: &Spectrogram<T>, label_index: usize) -> Result<Vec<f64>> {
    let f = model.arch.frame_size;
    let m = model.arch.n_mels;
    if !spec.standardized {
        return Err(Error::Usage(format!("`{}` must be standardized before scoring", spec.clip_id)));
    }
    if spec.n_mels() != m {
        return Err(Error::Shape(format!("`{}` has {} mels, model expects {m}", spec.clip_id, spec.n_mels())));
    }
    if spec.n_frames() < f {
        return Err(Error::InputTooShort(format!(
            "`{}` has {} frames, one window needs {f}",
            spec.clip_id,
            spec.n_frames()
        )));
    }
    let n_ids = model.arch.n_ids;
    if label_index >= n_ids {
        return Err(Error::validation(format!("label index {label_index} out of range for {n_ids} ids")));
    }
    let frames = spec.frames_major();
    let n_windows = spec.n_frames() - f + 1;
    let per = f * m;
    let mut out = Vec::with_capacity(n_windows);
    let mut start = 0;
    while start < n_windows {
        let b = SCORE_BATCH.min(n_windows - start);
        let mut x = Vec::with_capacity(b * per);
        for s in start..start + b {
            x.extend_from_slice(&frames.data()[s * m..(s + f) * m]);
        }
        let x = Tensor::from_vec(&[b, f, m], x)?;
        let labels = one_hot_batch(&vec![label_index; b], n_ids)?;
        let y = model.infer(&x, &labels)?;
        out.extend(per_sample_loss(&y, &x, model.info.norm)?.into_iter().map(Real::to_f64_lossless));
        start += b;
    }
    Ok(out)
}

/// Mean window error of a standardized spectrogram under an arbitrary label.
pub fn reconstruction_error<T: Real>(model: &IdcaeModel<T>, spec: &Spectrogram<T>, label_index: usize) -> Result<f64> {
    let errs = window_errors(model, spec, label_index)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Standardized features of a clip, using the model's mel settings and scaler.
pub fn clip_features<T: Real>(model: &IdcaeModel<T>, clip: &AudioClip, clip_id: &str) -> Result<Spectrogram<T>> {
    let spec = log_mel_spectrogram::<T>(clip, &model.info.mel, clip_id)?;
    match &model.scaler {
        Some(s) => s.apply(&spec),
        None => Scaler::identity(spec.n_mels()).apply(&spec),
    }
}

/// Score of one clip, always conditioned on the clip's own ID.
pub fn anomaly_score<T: Real>(model: &IdcaeModel<T>, clip: &AudioClip, clip_id: &str) -> Result<f64> {
    let idx = model
        .info
        .id_vocabulary
        .iter()
        .position(|v| *v == clip.machine_id)
        .ok_or_else(|| Error::validation(format!("machine id `{}` of `{clip_id}` is not in the model vocabulary", clip.machine_id)))?;
    let spec = clip_features(model, clip, clip_id)?;
    let score = reconstruction_error(model, &spec, idx)?;
    if !score.is_finite() {
        return Err(Error::Numeric(format!("score of `{clip_id}` is {score}")));
    }
    Ok(score)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub clip_id: String,
    pub machine_type: String,
    pub machine_id: String,
    pub label: Label,
    pub score: f64,
}

/// Clip scores, kept sorted by clip id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(mut rows: Vec<ScoreRow>) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| !r.score.is_finite()) {
            return Err(Error::validation(format!("score of `{}` is not finite", r.clip_id)));
        }
        rows.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
        if let Some(w) = rows.windows(2).find(|w| w[0].clip_id == w[1].clip_id) {
            return Err(Error::validation(format!("duplicate clip id `{}`", w[0].clip_id)));
        }
        Ok(Self { rows })
    }

    /// Table from parallel score and label slices; clip ids are zero-padded indices.
    pub fn from_scores(scores: &[f64], labels: &[Label]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Shape("scores and labels differ in length".into()));
        }
        let w = scores.len().to_string().len();
        Self::new(
            scores
                .iter()
                .zip(labels)
                .enumerate()
                .map(|(i, (&score, &label))| ScoreRow {
                    clip_id: format!("{i:0w$}"),
                    machine_type: "any".into(),
                    machine_id: "any".into(),
                    label,
                    score,
                })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.score).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn filter(&self, keep: impl Fn(&ScoreRow) -> bool) -> Self {
        Self { rows: self.rows.iter().filter(|r| keep(r)).cloned().collect() }
    }

    /// Rows grouped by `(machine_type, machine_id)`.
    pub fn by_id(&self) -> BTreeMap<(String, String), ScoreTable> {
        let mut out: BTreeMap<(String, String), ScoreTable> = BTreeMap::new();
        for r in &self.rows {
            out.entry((r.machine_type.clone(), r.machine_id.clone())).or_default().rows.push(r.clone());
        }
        out
    }

    pub fn by_machine_type(&self) -> BTreeMap<String, ScoreTable> {
        let mut out: BTreeMap<String, ScoreTable> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.machine_type.clone()).or_default().rows.push(r.clone());
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{:e}", r.clip_id, r.machine_type, r.machine_id, r.label, r.score);
        }
        out
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(Error::validation_at(i + 1, format!("expected 5 columns, found {}", cols.len())));
            }
            let label = cols[3].parse::<Label>().map_err(|e| Error::validation_at(i + 1, e.to_string()))?;
            let score = cols[4]
                .parse::<f64>()
                .map_err(|_| Error::validation_at(i + 1, format!("bad score `{}`", cols[4])))?;
            rows.push(ScoreRow {
                clip_id: cols[0].into(),
                machine_type: cols[1].into(),
                machine_id: cols[2].into(),
                label,
                score,
            });
        }
        Self::new(rows)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse_str(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// A clip that could not be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFailure {
    pub clip_id: String,
    pub reason: String,
}

/// Scores every `split` clip of the model's machine type. Data errors on
/// individual clips are collected rather than aborting; numeric failures abort.
pub fn score_manifest<T: Real>(
    model: &IdcaeModel<T>,
    manifest: &Manifest,
    split: Split,
) -> Result<(ScoreTable, Vec<ScoreFailure>)> {
    let mt = model.info.machine_type.clone();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for e in manifest.select(&mt, split) {
        let scored = e.load().and_then(|clip| anomaly_score(model, &clip, &e.key));
        match scored {
            Ok(score) => rows.push(ScoreRow {
                clip_id: e.key.clone(),
                machine_type: e.machine_type.clone(),
                machine_id: e.machine_id.clone(),
                label: e.label,
                score,
            }),
            Err(err @ Error::Numeric(_)) => return Err(err),
            Err(err) => {
                log::warn!("cannot score `{}`: {err}", e.key);
                failures.push(ScoreFailure { clip_id: e.key.clone(), reason: err.to_string() });
            }
        }
    }
    Ok((ScoreTable::new(rows)?, failures))
}

/// Splits into anomaly (positive) and normal (negative) scores, ignoring unknown labels.
fn split_classes(scores: &[f64], labels: &[Label]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (&s, &l) in scores.iter().zip(labels) {
        match l {
            Label::Anomaly => pos.push(s),
            Label::Normal => neg.push(s),
            Label::Unknown => {}
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "ROC metrics need both classes ({} anomalies, {} normals)",
            pos.len(),
            neg.len()
        )));
    }
    Ok((pos, neg))
}

/// Mann-Whitney AUC from midranks; anomalies are positive.
pub fn auc_scores(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let (pos, neg) = split_classes(scores, labels)?;
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1..=j share the midrank
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * all[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// ROC vertices in counts plus the positive and negative totals.
type RocCounts = (Vec<(f64, f64)>, usize, usize);

/// Empirical ROC vertices in counts `(false positives, true positives)`,
/// one vertex per distinct score, descending thresholds.
fn roc_counts(scores: &[f64], labels: &[Label]) -> Result<RocCounts> {
    let (pos, neg) = split_classes(scores, labels)?;
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut pts = vec![(0.0, 0.0)];
    let (mut fp, mut tp) = (0.0, 0.0);
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            j += 1;
        }
        pts.push((fp, tp));
        i = j;
    }
    Ok((pts, pos.len(), neg.len()))
}

/// ROC curve as `(fpr, tpr)` points from `(0, 0)` to `(1, 1)`.
pub fn roc_curve(table: &ScoreTable) -> Result<Vec<(f64, f64)>> {
    let (pts, np, nn) = roc_counts(&table.scores(), &table.labels())?;
    Ok(pts.into_iter().map(|(f, t)| (f / nn as f64, t / np as f64)).collect())
}

/// Normalization of the partial area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaucMode {
    /// `0.5 (1 + (A - p^2/2) / (p - p^2/2))`, range `[0.5, 1]` above chance.
    #[default]
    McClish,
    /// `A / p`, range `[0, 1]`.
    Raw,
}

impl fmt::Display for PaucMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PaucMode::McClish => "mcclish",
            PaucMode::Raw => "raw",
        })
    }
}

impl FromStr for PaucMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcclish" | "standardized" => Ok(PaucMode::McClish),
            "raw" => Ok(PaucMode::Raw),
            other => Err(Error::validation(format!("unknown pAUC mode `{other}`"))),
        }
    }
}

/// Area under the ROC curve for FPR in `[0, p]`, in unit-square terms.
fn partial_area(scores: &[f64], labels: &[Label], p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::validation(format!("p must be in (0, 1], got {p}")));
    }
    let (pts, np, nn) = roc_counts(scores, labels)?;
    let limit = p * nn as f64;
    let mut area = 0.0;
    for w in pts.windows(2) {
        let ((f0, t0), (f1, t1)) = (w[0], w[1]);
        if f1 == f0 {
            continue;
        }
        if f1 <= limit {
            area += (f1 - f0) * (t0 + t1) / 2.0;
        } else {
            if f0 < limit {
                let t = t0 + (limit - f0) / (f1 - f0) * (t1 - t0);
                area += (limit - f0) * (t0 + t) / 2.0;
            }
            break;
        }
    }
    Ok(area / (np as f64 * nn as f64))
}

pub fn pauc_scores(scores: &[f64], labels: &[Label], p: f64, mode: PaucMode) -> Result<f64> {
    let a = partial_area(scores, labels, p)?;
    Ok(match mode {
        PaucMode::Raw => a / p,
        PaucMode::McClish => {
            let a_min = p * p / 2.0;
            0.5 * (1.0 + (a - a_min) / (p - a_min))
        }
    })
}

pub fn auc(table: &ScoreTable) -> Result<f64> {
    auc_scores(&table.scores(), &table.labels())
}

pub fn pauc(table: &ScoreTable, p: f64, mode: PaucMode) -> Result<f64> {
    pauc_scores(&table.scores(), &table.labels(), p, mode)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocResult {
    pub auc: f64,
    pub pauc: f64,
    pub p: f64,
    pub mauc: f64,
}

impl RocResult {
    pub fn new(auc: f64, pauc: f64, p: f64) -> Self {
        Self { auc, pauc, p, mauc: (auc + pauc) / 2.0 }
    }
}

pub fn mauc_scores(scores: &[f64], labels: &[Label], p: f64, mode: PaucMode) -> Result<RocResult> {
    Ok(RocResult::new(auc_scores(scores, labels)?, pauc_scores(scores, labels, p, mode)?, p))
}

pub fn mauc(table: &ScoreTable, p: f64, mode: PaucMode) -> Result<RocResult> {
    mauc_scores(&table.scores(), &table.labels(), p, mode)
}

/// Metrics per machine ID and pooled per machine type.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_id: Vec<(String, String, Result<RocResult, String>)>,
    pub per_type: Vec<(String, Result<RocResult, String>)>,
}

pub fn evaluate(table: &ScoreTable, p: f64, mode: PaucMode) -> Result<EvalReport> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::validation(format!("p must be in (0, 1], got {p}")));
    }
    let per_id = table
        .by_id()
        .into_iter()
        .map(|((mt, id), t)| (mt, id, mauc(&t, p, mode).map_err(|e| e.to_string())))
        .collect();
    let per_type: Vec<_> = table
        .by_machine_type()
        .into_iter()
        .map(|(mt, t)| (mt, mauc(&t, p, mode).map_err(|e| e.to_string())))
        .collect();
    if per_type.iter().all(|(_, r)| r.is_err()) {
        return Err(Error::UndefinedMetric("no machine type has both normal and anomalous clips".into()));
    }
    Ok(EvalReport { per_id, per_type })
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = String::from("scope\tmachine_type\tmachine_id\tauc\tpauc\tmauc\n");
        let mut line = |scope: &str, mt: &str, id: &str, r: &Result<RocResult, String>| match r {
            Ok(r) => {
                let _ = writeln!(out, "{scope}\t{mt}\t{id}\t{:.6}\t{:.6}\t{:.6}", r.auc, r.pauc, r.mauc);
            }
            Err(e) => {
                let _ = writeln!(out, "{scope}\t{mt}\t{id}\tNA\tNA\tNA\t# {e}");
            }
        };
        for (mt, id, r) in &self.per_id {
            line("id", mt, id, r);
        }
        for (mt, r) in &self.per_type {
            line("type", mt, "*", r);
        }
        out
    }
}

/// `fpr<TAB>tpr` lines.
pub fn roc_to_text(points: &[(f64, f64)]) -> String {
    let mut out = String::from("fpr\ttpr\n");
    for (f, t) in points {
        let _ = writeln!(out, "{f:.8}\t{t:.8}");
    }
    out
}

/// Equal-width histogram of scores per label over the observed range.
pub fn score_histogram(table: &ScoreTable, bins: usize) -> Result<String> {
    if bins == 0 || table.is_empty() {
        return Err(Error::validation("histogram needs at least one bin and one score"));
    }
    let scores = table.scores();
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![[0usize; 3]; bins];
    for r in table.rows() {
        let b = (((r.score - lo) / width) as usize).min(bins - 1);
        let col = match r.label {
            Label::Normal => 0,
            Label::Anomaly => 1,
            Label::Unknown => 2,
        };
        counts[b][col] += 1;
    }
    let mut out = String::from("bin_lo\tbin_hi\tnormal\tanomaly\tunknown\n");
    for (i, c) in counts.iter().enumerate() {
        let a = lo + i as f64 * width;
        let _ = writeln!(out, "{a:e}\t{:e}\t{}\t{}\t{}", a + width, c[0], c[1], c[2]);
    }
    Ok(out)
}

/// Orders two results for model selection: higher mAUC, then higher pAUC.
pub fn compare_results(a: &RocResult, b: &RocResult) -> Ordering {
    b.mauc.total_cmp(&a.mauc).then(b.pauc.total_cmp(&a.pauc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Anomaly as A, Normal as N};

    #[test]
    fn four_point_example() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let l = [N, N, A, A];
        assert_eq!(auc_scores(&s, &l).unwrap(), 0.75);
    }

    #[test]
    fn perfect_and_tied() {
        let l = [N, N, A, A];
        assert_eq!(auc_scores(&[0.0, 0.1, 0.5, 0.9], &l).unwrap(), 1.0);
        assert_eq!(auc_scores(&[1.0; 4], &l).unwrap(), 0.5);
        for mode in [PaucMode::McClish, PaucMode::Raw] {
            assert_eq!(pauc_scores(&[0.0, 0.1, 0.5, 0.9], &l, 0.1, mode).unwrap(), 1.0);
        }
        // diagonal ROC
        assert!((pauc_scores(&[1.0; 4], &l, 0.1, PaucMode::McClish).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(auc_scores(&[0.1, 0.2], &[N, N]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(pauc_scores(&[0.1, 0.2], &[A, A], 0.1, PaucMode::Raw), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn full_range_pauc_equals_auc() {
        let s = [0.3, 0.3, 0.1, 0.9, 0.5, 0.5, 0.2];
        let l = [A, N, N, A, N, A, N];
        assert_eq!(pauc_scores(&s, &l, 1.0, PaucMode::Raw).unwrap(), auc_scores(&s, &l).unwrap());
    }

    #[test]
    fn mauc_is_mean() {
        let r = RocResult::new(0.8, 0.6, 0.1);
        assert!((r.mauc - 0.7).abs() < 1e-15);
    }

    #[test]
    fn table_round_trip_sorted() {
        let t = ScoreTable::new(vec![
            ScoreRow { clip_id: "b".into(), machine_type: "fan".into(), machine_id: "id_00".into(), label: N, score: 0.25 },
            ScoreRow { clip_id: "a".into(), machine_type: "fan".into(), machine_id: "id_01".into(), label: A, score: 1.5e-3 },
        ])
        .unwrap();
        assert_eq!(t.rows()[0].clip_id, "a");
        assert_eq!(ScoreTable::parse_str(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn roc_ends_at_corners() {
        let t = ScoreTable::from_scores(&[0.1, 0.4, 0.35, 0.8], &[N, N, A, A]).unwrap();
        let c = roc_curve(&t).unwrap();
        assert_eq!(c.first(), Some(&(0.0, 0.0)));
        assert_eq!(c.last(), Some(&(1.0, 1.0)));
    }
}
