//! Hyperparameter grid search, top-k selection by mAUC and convex
//! combination of member scores over the weight simplex.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;

use log::{info, warn};

use crate::audio::{Manifest, Split};
use crate::error::{Error, Result};
use crate::eval::{compare_results, mauc, mauc_scores, score_manifest, PaucMode, RocResult, ScoreRow, ScoreTable};
use crate::model::save_model;
use crate::nn::Norm;
use crate::presets::ConfigBundle;
use crate::train::train;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub alphas: Vec<f64>,
    pub c_values: Vec<f64>,
    pub mel_counts: Vec<usize>,
    pub norms: Vec<Norm>,
    pub frame_size: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            alphas: vec![0.9, 0.75, 0.5],
            c_values: vec![0.0, 2.5, 5.0, 10.0],
            mel_counts: vec![128, 256],
            norms: vec![Norm::L1, Norm::L2Sq],
            frame_size: 10,
        }
    }
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.alphas.len() * self.c_values.len() * self.mel_counts.len() * self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every configuration, alpha varying slowest.
    pub fn configs(&self) -> Vec<GridConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &alpha in &self.alphas {
            for &c_value in &self.c_values {
                for &n_mels in &self.mel_counts {
                    for &norm in &self.norms {
                        out.push(GridConfig { alpha, c_value, n_mels, norm, frame_size: self.frame_size });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub alpha: f64,
    pub c_value: f64,
    pub n_mels: usize,
    pub norm: Norm,
    pub frame_size: usize,
}

impl GridConfig {
    /// Stable identifier, also used in file names.
    pub fn key(&self) -> String {
        format!("a{}_c{}_m{}_{}_f{}", self.alpha, self.c_value, self.n_mels, self.norm, self.frame_size)
    }

    pub fn apply(&self, base: &ConfigBundle) -> ConfigBundle {
        let mut b = base.clone();
        b.train.alpha = self.alpha;
        b.train.c_value = self.c_value;
        b.train.norm = self.norm;
        b.mel.n_mels = self.n_mels;
        b.arch.frame_size = self.frame_size;
        b
    }
}

impl fmt::Display for GridConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub config: GridConfig,
    pub model_path: PathBuf,
    pub scores: ScoreTable,
    pub roc: RocResult,
}

#[derive(Debug, Clone, Default)]
pub struct GridRun {
    /// Successful configurations in grid order.
    pub results: Vec<GridResult>,
    pub failures: Vec<(GridConfig, String)>,
    /// Configurations loaded from an earlier run instead of retrained.
    pub resumed: usize,
}

const LEDGER_HEADER: &str = "key\talpha\tc_value\tn_mels\tnorm\tframe_size\tstatus\tauc\tpauc\tmauc\tmodel_path\tmessage";

pub const LEDGER_FILE: &str = "ledger.tsv";

/// Completed ledger rows by key; later rows win.
fn read_ledger(path: &Path) -> Result<BTreeMap<String, (String, PathBuf)>> {
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 11 {
            return Err(Error::validation_at(i + 1, format!("grid ledger `{}` has a short row", path.display())));
        }
        out.insert(cols[0].to_string(), (cols[6].to_string(), PathBuf::from(cols[10])));
    }
    Ok(out)
}

fn scores_path(out_dir: &Path, cfg: &GridConfig) -> PathBuf {
    out_dir.join(format!("{}.scores.tsv", cfg.key()))
}

/// Trains and scores one model per grid configuration. Completed entries of
/// an existing ledger in `out_dir` are reused; failures are recorded and the
/// run continues. `jobs` configurations train concurrently.
pub fn run_grid(manifest: &Manifest, base: &ConfigBundle, grid: &GridSpec, out_dir: &Path, jobs: usize) -> Result<GridRun> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let ledger_path = out_dir.join(LEDGER_FILE);
    let done = read_ledger(&ledger_path)?;
    if !ledger_path.exists() {
        std::fs::write(&ledger_path, format!("{LEDGER_HEADER}\n")).map_err(|e| Error::io(&ledger_path, e))?;
    }
    let machine_type = manifest.resolve_machine_type(base.machine_type.as_deref())?;
    let configs = grid.configs();
    let p = base.eval_p;
    let mode = base.pauc_mode;

    let mut slots: Vec<Option<std::result::Result<GridResult, String>>> = vec![None; configs.len()];
    let mut resumed = 0;
    for (i, cfg) in configs.iter().enumerate() {
        if let Some((status, model_path)) = done.get(&cfg.key()) {
            let sp = scores_path(out_dir, cfg);
            if status == "ok" && model_path.exists() && sp.exists() {
                let scores = ScoreTable::read(&sp)?;
                let roc = mauc(&scores, p, mode)?;
                slots[i] = Some(Ok(GridResult { config: *cfg, model_path: model_path.clone(), scores, roc }));
                resumed += 1;
                info!("grid: reusing completed `{}`", cfg.key());
            }
        }
    }

    let pending: Vec<usize> = (0..configs.len()).filter(|&i| slots[i].is_none()).collect();
    let next = AtomicUsize::new(0);
    let ledger = Mutex::new(());
    let finished = Mutex::new(Vec::new());
    let run_one = |cfg: &GridConfig| -> Result<GridResult> {
        let mut bundle = cfg.apply(base);
        bundle.machine_type = Some(machine_type.clone());
        let (model, _) = train::<f64>(manifest, &bundle.train_setup(&machine_type))?;
        let model_path = out_dir.join(format!("{}.idcae", cfg.key()));
        save_model(&model, &model_path)?;
        let (scores, failures) = score_manifest(&model, manifest, Split::Test)?;
        if !failures.is_empty() {
            warn!("grid `{}`: {} test clips could not be scored", cfg.key(), failures.len());
        }
        scores.write(scores_path(out_dir, cfg))?;
        let roc = mauc(&scores, p, mode)?;
        Ok(GridResult { config: *cfg, model_path, scores, roc })
    };
    let worker = || loop {
        let n = next.fetch_add(1, AtomicOrdering::SeqCst);
        let Some(&i) = pending.get(n) else { break };
        let cfg = &configs[i];
        info!("grid: training `{}` ({}/{})", cfg.key(), n + 1, pending.len());
        let outcome = run_one(cfg).map_err(|e| e.to_string());
        let row = match &outcome {
            Ok(r) => format!(
                "{}\t{}\t{}\t{}\t{}\t{}\tok\t{:.8}\t{:.8}\t{:.8}\t{}\t",
                cfg.key(),
                cfg.alpha,
                cfg.c_value,
                cfg.n_mels,
                cfg.norm,
                cfg.frame_size,
                r.roc.auc,
                r.roc.pauc,
                r.roc.mauc,
                r.model_path.display()
            ),
            Err(msg) => {
                warn!("grid `{}` failed: {msg}", cfg.key());
                format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\tfailed\tNA\tNA\tNA\t-\t{}",
                    cfg.key(),
                    cfg.alpha,
                    cfg.c_value,
                    cfg.n_mels,
                    cfg.norm,
                    cfg.frame_size,
                    msg.replace(['\t', '\n'], " ")
                )
            }
        };
        {
            let _guard = ledger.lock().expect("ledger lock");
            if let Ok(mut f) = OpenOptions::new().append(true).open(&ledger_path) {
                let _ = writeln!(f, "{row}");
            }
        }
        finished.lock().expect("results lock").push((i, outcome));
    };
    std::thread::scope(|s| {
        for _ in 1..jobs.max(1).min(pending.len().max(1)) {
            s.spawn(worker);
        }
        worker();
    });
    for (i, outcome) in finished.into_inner().expect("results lock") {
        slots[i] = Some(outcome);
    }

    let mut run = GridRun { resumed, ..Default::default() };
    for (cfg, slot) in configs.iter().zip(slots) {
        match slot.expect("every configuration ran") {
            Ok(r) => run.results.push(r),
            Err(msg) => run.failures.push((*cfg, msg)),
        }
    }
    Ok(run)
}

/// Best `k` by mAUC, then pAUC, then configuration key.
pub fn select_top(results: &[GridResult], k: usize) -> Vec<&GridResult> {
    let mut sorted: Vec<&GridResult> = results.iter().collect();
    sorted.sort_by(|a, b| compare_results(&a.roc, &b.roc).then_with(|| a.config.key().cmp(&b.config.key())));
    if sorted.len() < k {
        warn!("only {} results available, fewer than the requested {k}", sorted.len());
    }
    sorted.truncate(k);
    sorted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreNormalization {
    /// Each member rescaled to `[0, 1]` by its own minimum and maximum.
    #[default]
    MinMax,
    Raw,
}

impl fmt::Display for ScoreNormalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreNormalization::MinMax => "minmax",
            ScoreNormalization::Raw => "raw",
        })
    }
}

impl FromStr for ScoreNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(ScoreNormalization::MinMax),
            "raw" => Ok(ScoreNormalization::Raw),
            other => Err(Error::validation(format!("unknown score normalization `{other}`"))),
        }
    }
}

/// Member scores aligned by clip id, one column per table, after normalization.
fn aligned_columns(tables: &[&ScoreTable], normalization: ScoreNormalization) -> Result<Vec<Vec<f64>>> {
    let first = tables.first().ok_or_else(|| Error::validation("no score tables to combine"))?;
    for (i, t) in tables.iter().enumerate().skip(1) {
        let same = t.len() == first.len() && t.rows().iter().zip(first.rows()).all(|(a, b)| a.clip_id == b.clip_id);
        if !same {
            return Err(Error::validation(format!("score table {} covers a different clip set than table 1", i + 1)));
        }
    }
    Ok(tables
        .iter()
        .map(|t| {
            let s = t.scores();
            match normalization {
                ScoreNormalization::Raw => s,
                ScoreNormalization::MinMax => {
                    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let span = hi - lo;
                    if span > 0.0 {
                        s.iter().map(|&x| (x - lo) / span).collect()
                    } else {
                        vec![0.0; s.len()]
                    }
                }
            }
        })
        .collect())
}

fn weighted(columns: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let n = columns[0].len();
    (0..n).map(|r| columns.iter().zip(weights).map(|(c, &w)| w * c[r]).sum()).collect()
}

fn check_weights(weights: &[f64], members: usize) -> Result<()> {
    if weights.len() != members {
        return Err(Error::validation(format!("{} weights for {members} tables", weights.len())));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::validation("weights must be non-negative and sum to 1"));
    }
    Ok(())
}

/// Per-clip weighted sum of member scores.
pub fn combine_scores(tables: &[&ScoreTable], weights: &[f64], normalization: ScoreNormalization) -> Result<ScoreTable> {
    check_weights(weights, tables.len())?;
    let columns = aligned_columns(tables, normalization)?;
    let combined = weighted(&columns, weights);
    ScoreTable::new(
        tables[0]
            .rows()
            .iter()
            .zip(combined)
            .map(|(r, score)| ScoreRow { score, ..r.clone() })
            .collect(),
    )
}

/// Integer compositions of `total` into `parts` parts, lexicographically ascending.
pub fn simplex_lattice(parts: usize, total: usize) -> Vec<Vec<usize>> {
    fn rec(parts: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for i in 0..=total {
            prefix.push(i);
            rec(parts - 1, total - i, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(parts, total, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub weights: Vec<f64>,
    pub best: RocResult,
    /// Each member's own metrics.
    pub members: Vec<RocResult>,
    /// `(weights, mAUC)` at every lattice point, when requested.
    pub surface: Option<Vec<(Vec<f64>, f64)>>,
}

impl EnsembleResult {
    pub fn best_mauc(&self) -> f64 {
        self.best.mauc
    }

    pub fn surface_text(&self) -> Option<String> {
        let surface = self.surface.as_ref()?;
        let k = self.weights.len();
        let mut out: String = (1..=k).map(|i| format!("w{i}\t")).collect();
        out.push_str("mauc\n");
        for (w, m) in surface {
            for x in w {
                let _ = write!(out, "{x}\t");
            }
            let _ = writeln!(out, "{m:.8}");
        }
        Some(out)
    }
}

/// Exhaustive search over `{counts / resolution}` on the weight simplex;
/// ties keep the lexicographically smallest weights.
pub fn search_weights(
    tables: &[&ScoreTable],
    resolution: usize,
    normalization: ScoreNormalization,
    p: f64,
    mode: PaucMode,
    keep_surface: bool,
) -> Result<EnsembleResult> {
    if resolution == 0 {
        return Err(Error::validation("weight resolution must be at least 1"));
    }
    let columns = aligned_columns(tables, normalization)?;
    let labels = tables[0].labels();
    let members = tables.iter().map(|t| mauc(t, p, mode)).collect::<Result<Vec<_>>>()?;
    let mut best: Option<(Vec<f64>, RocResult)> = None;
    let mut surface = keep_surface.then(Vec::new);
    let r = resolution as f64;
    for counts in simplex_lattice(tables.len(), resolution) {
        let w: Vec<f64> = counts.iter().map(|&c| c as f64 / r).collect();
        let roc = mauc_scores(&weighted(&columns, &w), &labels, p, mode)?;
        if best.as_ref().is_none_or(|(_, b)| roc.mauc > b.mauc) {
            best = Some((w.clone(), roc));
        }
        if let Some(s) = surface.as_mut() {
            s.push((w, roc.mauc));
        }
    }
    let (weights, best) = best.expect("lattice is never empty");
    Ok(EnsembleResult { weights, best, members, surface })
}
