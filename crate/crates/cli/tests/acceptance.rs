//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use idcae::audio::{Label, Manifest, Split, SynthDataset};
use idcae::ensemble::{run_grid, search_weights, select_top, GridSpec, ScoreNormalization};
use idcae::eval::{clip_features, mauc, reconstruction_error, score_manifest, PaucMode, ScoreTable};
use idcae::model::{ArchDescriptor, IdcaeModel};
use idcae::nn::{LrSchedule, Norm};
use idcae::presets::{expand_preset, ConfigBundle, PresetName};
use idcae::train::{train, train_on_spectrograms, TrainConfig};
use idcae::Model64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "../../core/tests/support/mod.rs"]
mod support;

const SEEDS: [u64; 3] = [0, 1, 2];
const P: f64 = 0.1;
const MODE: PaucMode = PaucMode::McClish;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fixture_bundle(preset: PresetName, seed: u64) -> ConfigBundle {
    let mut b = expand_preset(preset);
    for (k, v) in [("mel.n_mels", "64"), ("arch.frame_size", "10"), ("train.epochs", "30")] {
        b.set(k, v).unwrap();
    }
    b.set("train.seed", &seed.to_string()).unwrap();
    b
}

fn fit(manifest: &Manifest, bundle: &ConfigBundle) -> Model64 {
    train::<f64>(manifest, &bundle.train_setup("synth")).unwrap().0
}

fn test_mauc(model: &Model64, manifest: &Manifest) -> (ScoreTable, f64) {
    let (table, failures) = score_manifest(model, manifest, Split::Test).unwrap();
    assert!(failures.is_empty());
    let m = mauc(&table, P, MODE).unwrap().mauc;
    (table, m)
}

/// Mean error of normal clips under their own ID, anomalies under their own
/// ID, and normal clips under every other ID.
fn error_ordering(model: &Model64, manifest: &Manifest) -> [f64; 3] {
    let vocab = &model.info.id_vocabulary;
    let mut sums = [(0.0, 0usize); 3];
    for e in manifest.select("synth", Split::Test) {
        let clip = e.load().unwrap();
        let spec = clip_features(model, &clip, &e.key).unwrap();
        let own = vocab.iter().position(|v| *v == e.machine_id).unwrap();
        for idx in 0..vocab.len() {
            let slot = match (e.label, idx == own) {
                (Label::Normal, true) => 0,
                (Label::Anomaly, true) => 1,
                (Label::Normal, false) => 2,
                _ => continue,
            };
            sums[slot].0 += reconstruction_error(model, &spec, idx).unwrap();
            sums[slot].1 += 1;
        }
    }
    sums.map(|(s, n)| s / n as f64)
}

fn criterion_1() -> Outcome {
    let model = IdcaeModel::<f64>::new(ArchDescriptor::standard(10, 128, 7), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let c = model.count_params();
    let got = (c.encoder, c.decoder, c.conditioning, c.total);
    outcome(
        got == (175_792, 218_880, 800, 395_472),
        format!("encoder {} decoder {} conditioning {} total {}", c.encoder, c.decoder, c.conditioning, c.total),
    )
}

fn criterion_2() -> Outcome {
    let checks = support::gradcheck::all();
    let worst = checks.iter().map(|(_, r)| r.max_rel).fold(0.0, f64::max);
    let checked: usize = checks.iter().map(|(_, r)| r.checked).sum();
    let skipped: usize = checks.iter().map(|(_, r)| r.skipped).sum();
    let failing: Vec<&str> = checks.iter().filter(|(_, r)| !r.passes()).map(|(n, _)| *n).collect();
    outcome(
        failing.is_empty() && worst <= 1e-5,
        format!("{} checks, {checked} entries ({skipped} at kinks), max rel err {worst:.2e}, failing {failing:?}", checks.len()),
    )
}

fn criterion_3() -> Outcome {
    let s = support::oracles::metric_sweep(2024, 200, 500, P);
    outcome(
        s.auc_mismatches == 0 && s.max_pauc_err <= 1e-4,
        format!("{} tables, {} AUC mismatches, max pAUC err {:.2e}", s.tables, s.auc_mismatches, s.max_pauc_err),
    )
}

struct SeedRun {
    idcae: f64,
    unconditioned: f64,
    ordering: [f64; 3],
}

fn criterion_4(manifest: &Manifest) -> (Outcome, Vec<SeedRun>) {
    let mut runs = Vec::new();
    for &seed in &SEEDS {
        let cond = fit(manifest, &fixture_bundle(PresetName::Condition, seed));
        let plain = fit(manifest, &fixture_bundle(PresetName::Scaler, seed));
        let run = SeedRun {
            idcae: test_mauc(&cond, manifest).1,
            unconditioned: test_mauc(&plain, manifest).1,
            ordering: error_ordering(&cond, manifest),
        };
        println!(
            "  seed {seed}: idcae mAUC {:.4}, unconditioned {:.4}, errors match {:.4} anomaly {:.4} non-match {:.4}",
            run.idcae, run.unconditioned, run.ordering[0], run.ordering[1], run.ordering[2]
        );
        runs.push(run);
    }
    let n = runs.len() as f64;
    let idcae = runs.iter().map(|r| r.idcae).sum::<f64>() / n;
    let plain = runs.iter().map(|r| r.unconditioned).sum::<f64>() / n;
    let ord: Vec<f64> = (0..3).map(|i| runs.iter().map(|r| r.ordering[i]).sum::<f64>() / n).collect();
    let ordered = ord[0] < ord[1] && ord[1] < ord[2];
    (
        outcome(
            ordered && idcae - plain >= 0.02,
            format!(
                "errors {:.4} < {:.4} < {:.4}: {ordered}; mAUC idcae {idcae:.4} vs unconditioned {plain:.4} (gain {:.4})",
                ord[0],
                ord[1],
                ord[2],
                idcae - plain
            ),
        ),
        runs,
    )
}

fn criterion_5(manifest: &Manifest, three_id: &[SeedRun]) -> Outcome {
    let six = SynthDataset { n_ids: 6, ..Default::default() }.manifest().unwrap();
    let mut six_scores = Vec::new();
    for &seed in &SEEDS {
        let model = fit(&six, &fixture_bundle(PresetName::Condition, seed));
        let m = test_mauc(&model, manifest).1;
        println!("  seed {seed}: 6-id mAUC {m:.4}");
        six_scores.push(m);
    }
    let n = SEEDS.len() as f64;
    let six = six_scores.iter().sum::<f64>() / n;
    let three = three_id.iter().map(|r| r.idcae).sum::<f64>() / n;
    outcome(six >= three - 0.01, format!("mAUC 6 ids {six:.4} vs 3 ids {three:.4} on the 3-id test set"))
}

fn random_members(rng: &mut ChaCha8Rng) -> Vec<ScoreTable> {
    let n = rng.random_range(4..60);
    let mut labels: Vec<Label> = (0..n).map(|_| if rng.random_bool(0.4) { Label::Anomaly } else { Label::Normal }).collect();
    labels[0] = Label::Anomaly;
    labels[1] = Label::Normal;
    (0..3)
        .map(|_| {
            let scores: Vec<f64> = labels
                .iter()
                .map(|l| rng.random_range(0.0..1.0) + if *l == Label::Anomaly { rng.random_range(0.0..0.6) } else { 0.0 })
                .collect();
            ScoreTable::from_scores(&scores, &labels).unwrap()
        })
        .collect()
}

fn dominates(members: &[&ScoreTable], resolution: usize) -> (bool, f64, f64) {
    let best = search_weights(members, resolution, ScoreNormalization::MinMax, P, MODE, false).unwrap().best_mauc();
    let top = members.iter().map(|t| mauc(t, P, MODE).unwrap().mauc).fold(f64::MIN, f64::max);
    (best >= top, best, top)
}

fn criterion_6(manifest: &Manifest, work: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let random_ok = (0..300).all(|_| {
        let m = random_members(&mut rng);
        dominates(&m.iter().collect::<Vec<_>>(), 30).0
    });

    let grid = GridSpec {
        alphas: vec![0.9, 0.75],
        c_values: vec![2.5, 5.0],
        mel_counts: vec![64],
        norms: vec![Norm::L1, Norm::L2Sq],
        frame_size: 10,
    };
    let run = run_grid(manifest, &fixture_bundle(PresetName::Ensemble, 0), &grid, &work.join("grid"), 1).unwrap();
    for r in &run.results {
        println!("  {}: mAUC {:.4}", r.config.key(), r.roc.mauc);
    }
    let top = select_top(&run.results, 3);
    let tables: Vec<&ScoreTable> = top.iter().map(|r| &r.scores).collect();
    let (ok, best, member) = dominates(&tables, 100);
    outcome(
        run.results.len() == 8 && top.len() == 3 && ok && random_ok,
        format!(
            "{} configs trained; ensemble best mAUC {best:.4} vs best member {member:.4}; 300 random inputs dominated: {random_ok}",
            run.results.len()
        ),
    )
}

fn cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_idcae")).args(args).output().unwrap();
    assert!(out.status.success(), "idcae {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn criterion_7(work: &Path) -> Outcome {
    let data = work.join("cli_data");
    let manifest = data.join("manifest.tsv");
    cli(&["synth", "--out-dir", data.to_str().unwrap()]);
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let model = work.join(format!("{run}.idcae"));
        let scores = work.join(format!("{run}.scores.tsv"));
        let (m, s, mf) = (model.to_str().unwrap(), scores.to_str().unwrap(), manifest.to_str().unwrap());
        cli(&["train", "--manifest", mf, "--out", m, "--deterministic", "--seed", "7", "--epochs", "3", "--n-mels", "64", "--frame-size", "10"]);
        cli(&["score", "--model", m, "--manifest", mf, "--out", s]);
        files.push((std::fs::read(&model).unwrap(), std::fs::read(&scores).unwrap()));
    }
    let same_model = files[0].0 == files[1].0;
    let same_scores = files[0].1 == files[1].1;
    outcome(
        same_model && same_scores,
        format!("model files identical: {same_model} ({} bytes); score tables identical: {same_scores}", files[0].0.len()),
    )
}

fn criterion_8() -> Outcome {
    let data = support::fixtures::tiny_set(2, 1, 6, 4, 4);
    let cfg = TrainConfig { frames_per_spec: 1, batch_size: 2, ..support::fixtures::quick_config(100, 0) };
    let (_, log) = train_on_spectrograms(&support::fixtures::small_arch(true), &cfg, &data).unwrap();
    let s = LrSchedule::default();
    let want = [(0, 1e-3), (5, 9.5e-4), (99, 1e-3 * 0.95f64.powi(19))];
    let mut ok = log.epochs.len() == 100;
    let mut parts = Vec::new();
    for (epoch, value) in want {
        let lr = log.epochs[epoch].lr;
        ok &= lr == s.lr(epoch) && (lr - value).abs() <= 1e-15 * value;
        parts.push(format!("epoch {epoch} lr {lr:e}"));
    }
    outcome(ok, parts.join(", "))
}

fn report(n: usize, started: Instant, o: Outcome, results: &mut Vec<(usize, Outcome)>) {
    println!("{} criterion {n}: {} [{:.0}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, started.elapsed().as_secs_f64());
    results.push((n, o));
}

fn main() {
    let work = tempfile::tempdir().unwrap();
    let manifest = SynthDataset::default().manifest().unwrap();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let t = Instant::now();
    report(1, t, criterion_1(), &mut results);
    let t = Instant::now();
    report(2, t, criterion_2(), &mut results);
    let t = Instant::now();
    report(3, t, criterion_3(), &mut results);
    let t = Instant::now();
    let (o4, runs) = criterion_4(&manifest);
    report(4, t, o4, &mut results);
    let t = Instant::now();
    report(5, t, criterion_5(&manifest, &runs), &mut results);
    let t = Instant::now();
    report(6, t, criterion_6(&manifest, work.path()), &mut results);
    let t = Instant::now();
    report(7, t, criterion_7(work.path()), &mut results);
    let t = Instant::now();
    report(8, t, criterion_8(), &mut results);

    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
