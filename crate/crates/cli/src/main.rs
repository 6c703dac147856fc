//! `idcae` command-line driver.
//!
//! Configuration precedence, lowest to highest: `--preset`, `--config` file,
//! `--set key=value` (in order), then the dedicated flags such as `--alpha`.
//! A `preset = name` line in a config file resets everything before it.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use idcae::audio::{Manifest, Split, SynthDataset};
use idcae::ensemble::{combine_scores, run_grid, search_weights, select_top};
use idcae::eval::{evaluate, roc_curve, roc_to_text, score_histogram, score_manifest, PaucMode, ScoreTable};
use idcae::model::{load_model, save_model};
use idcae::presets::{expand_preset, ConfigBundle, PresetName};
use idcae::train::train;
use idcae::{Error, Model64};

#[derive(Parser, Debug)]
#[command(name = "idcae", version, about = "ID-conditioned auto-encoder for anomalous sound detection")]
struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic machine-sound dataset and its manifest.
    Synth(SynthArgs),
    /// Train one model for a machine type.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Model file to write (`.idcae`).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score clips with matching labels.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// AUC, pAUC and mAUC per machine ID and per machine type.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        #[arg(long, default_value = "mcclish")]
        pauc_mode: String,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// ROC curve points (`fpr tpr`).
        #[arg(long)]
        export_roc: Option<PathBuf>,
        /// Score histogram by label.
        #[arg(long)]
        export_hist: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        bins: usize,
    },
    /// Train and score every grid configuration (resumable).
    Grid {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Weighted ensemble of the top grid models, or of given score tables.
    Ensemble {
        /// Runs (or resumes) the grid on this manifest.
        #[arg(long, required_unless_present = "scores")]
        manifest: Option<PathBuf>,
        /// Combine these score tables instead of running the grid.
        #[arg(long, num_args = 1.., conflicts_with = "manifest")]
        scores: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Write the mAUC value at every lattice point.
        #[arg(long)]
        surface: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Inspect presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand, Debug)]
enum PresetAction {
    /// Names and one-line descriptions.
    List,
    /// Print the fully resolved configuration.
    Dump {
        name: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 3)]
    n_ids: usize,
    #[arg(long, default_value_t = 0)]
    id_offset: usize,
    /// Normal training clips per ID.
    #[arg(long, default_value_t = 24)]
    clips_per_id: usize,
    /// Test clips per ID (default: same as --clips-per-id).
    #[arg(long)]
    test_clips_per_id: Option<usize>,
    /// Share of test clips that are anomalous.
    #[arg(long, default_value_t = 0.5)]
    anomaly_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    duration: f64,
    #[arg(long, default_value_t = 16_000)]
    sample_rate: u32,
    #[arg(long, default_value = "synth")]
    machine_type: String,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    #[arg(long)]
    preset: Option<String>,
    /// File of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set train.epochs=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c_value: Option<f64>,
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    n_mels: Option<usize>,
    #[arg(long)]
    frame_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    machine_type: Option<String>,
    /// Manifest with additional IDs to merge into training.
    #[arg(long)]
    extra_manifest: Option<PathBuf>,
    /// Single-threaded, reproducible run.
    #[arg(long)]
    deterministic: bool,
    /// Parallel jobs (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
}

impl ConfigArgs {
    fn resolve(&self, preset_override: Option<&str>) -> anyhow::Result<ConfigBundle> {
        let mut b = match preset_override.or(self.preset.as_deref()) {
            Some(name) => expand_preset(name.parse::<PresetName>()?),
            None => ConfigBundle::default(),
        };
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            b.apply_text(&text).with_context(|| format!("in config file {}", path.display()))?;
        }
        for s in &self.sets {
            let (k, v) = s.split_once('=').ok_or_else(|| Error::Usage(format!("--set expects KEY=VALUE, got `{s}`")))?;
            b.set(k.trim(), v)?;
        }
        let mut flag = |key: &str, v: Option<String>| -> anyhow::Result<()> {
            if let Some(v) = v {
                b.set(key, &v)?;
            }
            Ok(())
        };
        flag("train.alpha", self.alpha.map(|v| v.to_string()))?;
        flag("train.c_value", self.c_value.map(|v| v.to_string()))?;
        flag("train.norm", self.norm.clone())?;
        flag("train.epochs", self.epochs.map(|v| v.to_string()))?;
        flag("mel.n_mels", self.n_mels.map(|v| v.to_string()))?;
        flag("arch.frame_size", self.frame_size.map(|v| v.to_string()))?;
        flag("train.seed", self.seed.map(|v| v.to_string()))?;
        flag("data.machine_type", self.machine_type.clone())?;
        flag("run.jobs", self.jobs.map(|v| v.to_string()))?;
        if let Some(p) = &self.extra_manifest {
            b.extra_manifest = Some(p.clone());
            b.includes_additional_data = true;
        }
        if self.deterministic {
            b.deterministic = true;
        }
        if b.deterministic {
            b.jobs = 1;
        }
        Ok(b)
    }
}

fn jobs(b: &ConfigBundle) -> usize {
    if b.jobs > 0 {
        b.jobs
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Main manifest merged with the extra one when the configuration asks for it.
fn load_training_manifest(path: &Path, b: &ConfigBundle) -> anyhow::Result<Manifest> {
    let base = Manifest::parse(path)?;
    if !b.includes_additional_data {
        return Ok(base);
    }
    let extra_path = b
        .extra_manifest
        .as_ref()
        .ok_or_else(|| Error::Usage("additional data requested but no --extra-manifest given".into()))?;
    let extra = Manifest::parse(extra_path)?;
    Ok(base.merge(&extra)?)
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// `dir/stem.suffix` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_synth(a: &SynthArgs) -> anyhow::Result<()> {
    let ds = SynthDataset {
        machine_type: a.machine_type.clone(),
        n_ids: a.n_ids,
        id_offset: a.id_offset,
        clips_per_id: a.clips_per_id,
        test_clips_per_id: a.test_clips_per_id,
        anomaly_fraction: a.anomaly_fraction,
        seed: a.seed,
        duration_s: a.duration,
        sample_rate: a.sample_rate,
    };
    let m = ds.write(&a.out_dir)?;
    let anomalies = m.entries.iter().filter(|e| e.label == idcae::audio::Label::Anomaly).count();
    let train = m.entries.iter().filter(|e| e.split == Split::Train).count();
    println!(
        "wrote {} clips ({train} train, {} test, {anomalies} anomalous) and {}",
        m.entries.len(),
        m.entries.len() - train,
        a.out_dir.join("manifest.tsv").display()
    );
    Ok(())
}

fn cmd_train(manifest: &Path, out: &Path, config: &ConfigArgs) -> anyhow::Result<()> {
    let b = config.resolve(None)?;
    if b.grid_enabled {
        warn!("this configuration enables the grid; `idcae train` trains a single model (see `idcae ensemble`)");
    }
    let m = load_training_manifest(manifest, &b)?;
    let mt = m.resolve_machine_type(b.machine_type.as_deref())?;
    let (model, log) = train::<f64>(&m, &b.train_setup(&mt))?;
    save_model(&model, out)?;
    write_file(&sibling(out, "train_log.tsv"), &log.to_text())?;
    write_file(&sibling(out, "run_config.txt"), &b.dump())?;
    let last = log.epochs.last().map_or(f64::NAN, |e| e.mean_loss);
    println!("trained `{mt}` for {} epochs (final loss {last:.6}); wrote {}", log.epochs.len(), out.display());
    if !log.skipped.is_empty() {
        println!("skipped {} clips shorter than one window", log.skipped.len());
    }
    Ok(())
}

fn cmd_score(model: &Path, manifest: &Path, out: &Path, split: &str) -> anyhow::Result<()> {
    let model: Model64 = load_model(model)?;
    let m = Manifest::parse(manifest)?;
    let split: Split = split.parse().map_err(|e: Error| Error::Usage(e.to_string()))?;
    let (table, failures) = score_manifest(&model, &m, split)?;
    table.write(out)?;
    let mut errors = String::from("clip_id\treason\n");
    for f in &failures {
        errors.push_str(&format!("{}\t{}\n", f.clip_id, f.reason.replace(['\t', '\n'], " ")));
    }
    write_file(&sibling(out, "errors.tsv"), &errors)?;
    println!("scored {} clips into {} ({} errors)", table.len(), out.display(), failures.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    scores: &Path,
    p: f64,
    mode: &str,
    out: Option<&Path>,
    roc: Option<&Path>,
    hist: Option<&Path>,
    bins: usize,
) -> anyhow::Result<()> {
    let table = ScoreTable::read(scores)?;
    let mode: PaucMode = mode.parse().map_err(|e: Error| Error::Usage(e.to_string()))?;
    let report = evaluate(&table, p, mode)?;
    let text = report.to_text();
    print!("{text}");
    if let Some(path) = out {
        write_file(path, &text)?;
    }
    if let Some(path) = roc {
        write_file(path, &roc_to_text(&roc_curve(&table)?))?;
    }
    if let Some(path) = hist {
        write_file(path, &score_histogram(&table, bins)?)?;
    }
    Ok(())
}

fn grid_for(manifest: &Path, out_dir: &Path, b: &ConfigBundle) -> anyhow::Result<idcae::ensemble::GridRun> {
    let m = load_training_manifest(manifest, b)?;
    write_file(&out_dir.join("run_config.txt"), &b.dump())?;
    let run = run_grid(&m, b, &b.grid, out_dir, jobs(b))?;
    for r in &run.results {
        println!("{}\tauc {:.4}\tpauc {:.4}\tmauc {:.4}", r.config.key(), r.roc.auc, r.roc.pauc, r.roc.mauc);
    }
    for (cfg, msg) in &run.failures {
        println!("{}\tfailed: {msg}", cfg.key());
    }
    info!("{} configurations reused from the ledger", run.resumed);
    Ok(run)
}

fn cmd_grid(manifest: &Path, out_dir: &Path, config: &ConfigArgs) -> anyhow::Result<()> {
    let b = config.resolve(None)?;
    let run = grid_for(manifest, out_dir, &b)?;
    if run.results.is_empty() {
        bail!(Error::validation("every grid configuration failed"));
    }
    Ok(())
}

fn cmd_ensemble(
    manifest: Option<&Path>,
    score_paths: &[PathBuf],
    out_dir: &Path,
    surface: Option<&Path>,
    config: &ConfigArgs,
) -> anyhow::Result<()> {
    let b = config.resolve(None)?;
    let (names, tables): (Vec<String>, Vec<ScoreTable>) = match manifest {
        Some(m) => {
            let run = grid_for(m, out_dir, &b)?;
            select_top(&run.results, b.ensemble.top_k).into_iter().map(|r| (r.config.key(), r.scores.clone())).unzip()
        }
        None => {
            write_file(&out_dir.join("run_config.txt"), &b.dump())?;
            score_paths
                .iter()
                .map(|p| Ok((p.display().to_string(), ScoreTable::read(p)?)))
                .collect::<anyhow::Result<Vec<_>>>()?
                .into_iter()
                .unzip()
        }
    };
    if tables.is_empty() {
        bail!(Error::validation("no members to ensemble"));
    }
    let refs: Vec<&ScoreTable> = tables.iter().collect();
    let res = search_weights(&refs, b.ensemble.resolution, b.ensemble.normalization, b.eval_p, b.pauc_mode, surface.is_some())?;
    let combined = combine_scores(&refs, &res.weights, b.ensemble.normalization)?;
    combined.write(out_dir.join("ensemble_scores.tsv"))?;

    let mut text = String::from("member\tweight\tauc\tpauc\tmauc\n");
    for ((name, w), r) in names.iter().zip(&res.weights).zip(&res.members) {
        text.push_str(&format!("{name}\t{w}\t{:.6}\t{:.6}\t{:.6}\n", r.auc, r.pauc, r.mauc));
    }
    text.push_str(&format!("ensemble\t1\t{:.6}\t{:.6}\t{:.6}\n", res.best.auc, res.best.pauc, res.best.mauc));
    write_file(&out_dir.join("ensemble.tsv"), &text)?;
    if let (Some(path), Some(s)) = (surface, res.surface_text()) {
        write_file(path, &s)?;
    }
    let weights: Vec<String> = res.weights.iter().map(|w| w.to_string()).collect();
    println!("weights ({}) best_mauc {:.6}", weights.join(", "), res.best_mauc());
    Ok(())
}

fn cmd_preset(action: &PresetAction) -> anyhow::Result<()> {
    match action {
        PresetAction::List => {
            for p in PresetName::ALL {
                println!("{:<14}{}", p.as_str(), p.description());
            }
        }
        PresetAction::Dump { name, config } => print!("{}", config.resolve(name.as_deref())?.dump()),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train { manifest, out, config } => cmd_train(manifest, out, config),
        Command::Score { model, manifest, out, split } => cmd_score(model, manifest, out, split),
        Command::Eval { scores, p, pauc_mode, out, export_roc, export_hist, bins } => cmd_eval(
            scores,
            *p,
            pauc_mode,
            out.as_deref(),
            export_roc.as_deref(),
            export_hist.as_deref(),
            *bins,
        ),
        Command::Grid { manifest, out_dir, config } => cmd_grid(manifest, out_dir, config),
        Command::Ensemble { manifest, scores, out_dir, surface, config } => {
            cmd_ensemble(manifest.as_deref(), scores, out_dir, surface.as_deref(), config)
        }
        Command::Preset { action } => cmd_preset(action),
    }
}

/// 1 usage, 2 data or validation, 3 numeric failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Usage(_)) => 1,
        Some(Error::Numeric(_)) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::anyhow;

    #[test]
    fn flags_override_sets_and_presets() {
        let args = ConfigArgs {
            preset: Some("scaler".into()),
            sets: vec!["train.alpha=0.9".into(), "train.epochs=7".into()],
            alpha: Some(0.5),
            ..Default::default()
        };
        let b = args.resolve(None).unwrap();
        assert_eq!(b.train.alpha, 0.5);
        assert_eq!(b.train.epochs, 7);
        assert!(!b.arch.conditioning_enabled);
    }

    #[test]
    fn preset_equals_explicit_flags() {
        let preset = ConfigArgs { preset: Some("condition".into()), ..Default::default() }.resolve(None).unwrap();
        let explicit = ConfigArgs {
            preset: Some("scaler".into()),
            sets: vec!["arch.conditioning_enabled=true".into()],
            alpha: Some(0.75),
            c_value: Some(5.0),
            ..Default::default()
        }
        .resolve(None)
        .unwrap();
        assert_eq!(preset.diff(&explicit), Vec::<&str>::new());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&anyhow!(Error::Usage("x".into()))), 1);
        assert_eq!(exit_code(&anyhow!(Error::validation("x"))), 2);
        assert_eq!(exit_code(&anyhow!(Error::Numeric("x".into()))), 3);
        assert_eq!(exit_code(&anyhow!(Error::UndefinedMetric("x".into()))), 2);
    }
}
