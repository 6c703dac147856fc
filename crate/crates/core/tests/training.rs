//! Label sampling and the training loop.

use idcae::error::Error;
use idcae::nn::LrSchedule;
use idcae::train::{assign_label, rng_for, train_on_spectrograms, RngStream, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod support;
use support::fixtures::{quick_config, small_arch, tiny_set};

#[test]
fn label_sampling_frequencies() {
    let draws = 100_000;
    for (alpha, n_ids, true_id) in [(0.75, 4, 2), (0.5, 3, 0), (0.9, 2, 1)] {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = vec![0usize; n_ids];
        let mut matches = 0;
        for _ in 0..draws {
            let (label, is_match) = assign_label(true_id, n_ids, alpha, &mut rng);
            assert_eq!(is_match, label.index() == true_id);
            counts[label.index()] += 1;
            matches += usize::from(is_match);
        }
        let rate = matches as f64 / draws as f64;
        let sd = (alpha * (1.0 - alpha) / draws as f64).sqrt();
        assert!((rate - alpha).abs() < 5.0 * sd, "alpha {alpha}: match rate {rate}");
        let misses = draws - matches;
        let expected = misses as f64 / (n_ids - 1) as f64;
        for (id, &c) in counts.iter().enumerate().filter(|(id, _)| *id != true_id) {
            let q = 1.0 / (n_ids - 1) as f64;
            let sd = (misses as f64 * q * (1.0 - q)).sqrt();
            assert!((c as f64 - expected).abs() < 5.0 * sd.max(1.0), "id {id}: {c} vs {expected}");
        }
    }
}

#[test]
fn single_id_or_alpha_one_always_matches() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        assert!(assign_label(0, 1, 0.3, &mut rng).1);
        assert!(assign_label(2, 5, 1.0, &mut rng).1);
    }
}

#[test]
fn streams_are_independent() {
    use rand::RngCore;
    let a = rng_for(3, RngStream::Init).next_u64();
    let b = rng_for(3, RngStream::Sampling).next_u64();
    let c = rng_for(3, RngStream::Labels).next_u64();
    assert!(a != b && b != c && a != c);
    assert_eq!(a, rng_for(3, RngStream::Init).next_u64());
}

#[test]
fn loss_decreases_on_a_tiny_set() {
    let data = tiny_set(2, 3, 6, 20, 2);
    let cfg = TrainConfig { frames_per_spec: 16, ..quick_config(40, 0) };
    let (_, log) = train_on_spectrograms(&small_arch(true), &cfg, &data).unwrap();
    let first = log.epochs[0].mean_loss;
    let last = log.epochs.last().unwrap().mean_loss;
    assert!(last < 0.8 * first, "loss {first} -> {last}");
    let e = &log.epochs[0];
    assert_eq!(e.samples, 6 * 16);
    assert!(e.match_samples > 0 && e.match_samples < e.samples);
    assert!(e.match_loss.is_finite() && e.nonmatch_loss.is_finite());
}

#[test]
fn same_seed_same_model() {
    let data = tiny_set(2, 2, 6, 12, 4);
    let run = |seed| train_on_spectrograms(&small_arch(true), &quick_config(4, seed), &data).unwrap();
    let ((a, la), (b, lb), (c, _)) = (run(7), run(7), run(8));
    assert_eq!(a.to_container().to_bytes().unwrap(), b.to_container().to_bytes().unwrap());
    assert_eq!(la.to_text(), lb.to_text());
    assert_ne!(a.to_container().to_bytes().unwrap(), c.to_container().to_bytes().unwrap());
}

#[test]
fn logged_learning_rate_follows_schedule() {
    let data = tiny_set(2, 1, 6, 4, 4);
    let cfg = TrainConfig { frames_per_spec: 1, batch_size: 2, ..quick_config(100, 0) };
    let (_, log) = train_on_spectrograms(&small_arch(true), &cfg, &data).unwrap();
    let s = LrSchedule::default();
    for e in &log.epochs {
        assert_eq!(e.lr, s.lr(e.epoch));
    }
    assert_eq!(log.epochs[0].lr, 1e-3);
    assert!((log.epochs[5].lr - 9.5e-4).abs() < 1e-15);
    assert!((log.epochs[99].lr - 1e-3 * 0.95f64.powi(19)).abs() < 1e-15);
    assert!(log.to_text().starts_with("epoch\tlr\tmean_loss"));
}

#[test]
fn short_spectrograms_are_skipped() {
    let mut data = tiny_set(2, 2, 6, 12, 4);
    data.spectrograms[1] = tiny_set(1, 1, 6, 2, 9).spectrograms.remove(0);
    let (_, log) = train_on_spectrograms(&small_arch(true), &quick_config(1, 0), &data).unwrap();
    assert_eq!(log.skipped, vec!["c0_0".to_string()]);
}

#[test]
fn rejects_bad_inputs() {
    let data = tiny_set(2, 2, 6, 12, 4);
    let mut raw = data.clone();
    raw.spectrograms[0].standardized = false;
    assert!(matches!(train_on_spectrograms(&small_arch(true), &quick_config(1, 0), &raw), Err(Error::Usage(_))));

    let unconditioned = train_on_spectrograms(&small_arch(false), &quick_config(1, 0), &data);
    assert!(matches!(unconditioned, Err(Error::Validation { .. })));

    let mut nan = data.clone();
    nan.spectrograms[0].values.data_mut()[3] = f64::NAN;
    let cfg = TrainConfig { alpha: 1.0, frames_per_spec: 12, ..quick_config(1, 0) };
    let run = train_on_spectrograms(&small_arch(true), &TrainConfig { frames_per_spec: 10, ..cfg }, &nan);
    assert!(matches!(run, Err(Error::Numeric(_))));
}

#[test]
fn adam_steps_reduce_loss_on_a_fixed_batch() {
    use idcae::model::{one_hot_batch, IdcaeModel};
    use idcae::nn::{loss, AdamConfig, AdamState, Norm};
    use idcae::Tensor;
    use rand_distr::{Distribution, StandardNormal};

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut model = IdcaeModel::<f64>::new(small_arch(true), &mut rng).unwrap();
    let x = Tensor::from_vec(&[8, 3, 6], (0..144).map(|_| StandardNormal.sample(&mut rng)).collect()).unwrap();
    let labels = one_hot_batch(&[0, 1, 0, 1, 0, 1, 0, 1], 2).unwrap();
    let mut adam = AdamState::<f64>::new(AdamConfig { lr: 1e-4, ..AdamConfig::default() });
    let mut losses = Vec::new();
    for _ in 0..10 {
        let (pred, cache) = model.forward_train(&x, &labels).unwrap();
        let (l, grad) = loss(&pred, &x, Norm::L2Sq).unwrap();
        losses.push(l);
        model.backward(&cache, &grad).unwrap();
        adam.step(&mut model.parameters_mut()).unwrap();
    }
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}
