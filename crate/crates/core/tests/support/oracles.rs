//! Brute-force reference implementations.

use std::f64::consts::PI;

use idcae::audio::Label;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `P(anomaly > normal) + P(tie) / 2` by counting every pair.
pub fn pairwise_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| **l == Label::Anomaly).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, l)| **l == Label::Normal).map(|(s, _)| *s).collect();
    let mut twice = 0u64;
    for &a in &pos {
        for &n in &neg {
            twice += if a > n { 2 } else if a == n { 1 } else { 0 };
        }
    }
    twice as f64 / (2 * pos.len() * neg.len()) as f64
}

/// ROC vertices from every threshold `score >= t`, ties contributing a
/// straight segment.
fn threshold_points(scores: &[f64], labels: &[Label]) -> Vec<(f64, f64)> {
    let np = labels.iter().filter(|l| **l == Label::Anomaly).count() as f64;
    let nn = labels.iter().filter(|l| **l == Label::Normal).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut pts = vec![(0.0, 0.0)];
    for t in thresholds {
        let tp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l == Label::Anomaly).count() as f64;
        let fp = scores.iter().zip(labels).filter(|(s, l)| **s >= t && **l == Label::Normal).count() as f64;
        pts.push((fp / nn, tp / np));
    }
    pts
}

/// Area under the ROC for FPR in `[0, p]` by the midpoint rule on `steps` cells.
pub fn grid_partial_area(scores: &[f64], labels: &[Label], p: f64, steps: usize) -> f64 {
    let pts = threshold_points(scores, labels);
    let du = p / steps as f64;
    let mut seg = 0;
    let mut area = 0.0;
    for i in 0..steps {
        let u = (i as f64 + 0.5) * du;
        // invariant afterwards: pts[seg].0 < u <= pts[seg + 1].0
        while pts[seg + 1].0 < u {
            seg += 1;
        }
        let ((f0, t0), (f1, t1)) = (pts[seg], pts[seg + 1]);
        area += (t0 + (u - f0) / (f1 - f0) * (t1 - t0)) * du;
    }
    area
}

pub fn mcclish(area: f64, p: f64) -> f64 {
    0.5 * (1.0 + (area - p * p / 2.0) / (p - p * p / 2.0))
}

/// Random table of size `n` in `[2, max_n]` with both classes and many ties.
pub fn random_table(rng: &mut ChaCha8Rng, max_n: usize) -> (Vec<f64>, Vec<Label>) {
    loop {
        let n = rng.random_range(2..=max_n);
        let levels = rng.random_range(2..=n.max(2));
        let shift: f64 = rng.random_range(0.0..2.0);
        let frac = rng.random_range(0.1..0.9);
        let labels: Vec<Label> =
            (0..n).map(|_| if rng.random_bool(frac) { Label::Anomaly } else { Label::Normal }).collect();
        let scores: Vec<f64> = labels
            .iter()
            .map(|l| {
                let base = rng.random_range(0..levels) as f64 / levels as f64;
                if *l == Label::Anomaly { base + shift * rng.random_range(0.0..0.5) } else { base }
            })
            .map(|s| (s * 64.0).round() / 64.0)
            .collect();
        if labels.contains(&Label::Anomaly) && labels.contains(&Label::Normal) {
            return (scores, labels);
        }
    }
}

/// Power spectrum of each frame by the textbook DFT, `bins x frames`.
pub fn direct_stft_power(x: &[f64], n_fft: usize, hop: usize) -> Vec<Vec<f64>> {
    let window: Vec<f64> = (0..n_fft).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n_fft as f64).cos()).collect();
    let frames = (x.len() - n_fft) / hop + 1;
    let bins = n_fft / 2 + 1;
    let mut out = vec![vec![0.0; frames]; bins];
    for t in 0..frames {
        let frame = &x[t * hop..t * hop + n_fft];
        for (k, row) in out.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, (&s, &w)) in frame.iter().zip(&window).enumerate() {
                let ang = -2.0 * PI * (k * i % n_fft) as f64 / n_fft as f64;
                re += s * w * ang.cos();
                im += s * w * ang.sin();
            }
            row[t] = re * re + im * im;
        }
    }
    out
}

#[derive(Debug, Default)]
pub struct MetricSweep {
    pub tables: usize,
    pub auc_mismatches: usize,
    /// Largest absolute pAUC difference against the grid oracle, over both modes.
    pub max_pauc_err: f64,
}

/// Library metrics against the oracles on `tables` random tables.
pub fn metric_sweep(seed: u64, tables: usize, max_n: usize, p: f64) -> MetricSweep {
    use idcae::eval::{auc_scores, pauc_scores, PaucMode};
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = MetricSweep { tables, ..Default::default() };
    let steps = (p / 1e-6).round() as usize;
    for _ in 0..tables {
        let (s, l) = random_table(&mut rng, max_n);
        if auc_scores(&s, &l).unwrap() != pairwise_auc(&s, &l) {
            out.auc_mismatches += 1;
        }
        let area = grid_partial_area(&s, &l, p, steps);
        let raw = pauc_scores(&s, &l, p, PaucMode::Raw).unwrap();
        let std = pauc_scores(&s, &l, p, PaucMode::McClish).unwrap();
        out.max_pauc_err = out.max_pauc_err.max((raw - area / p).abs()).max((std - mcclish(area, p)).abs());
    }
    out
}
