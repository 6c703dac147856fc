use rand::Rng;

use super::Spectrogram;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// `F` consecutive spectrogram frames, laid out frames x mels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow<T> {
    pub values: Tensor<T>,
    pub source_clip: String,
    pub start_frame: usize,
}

fn check<T: Real>(spec: &Spectrogram<T>, frame_size: usize) -> Result<()> {
    if frame_size == 0 {
        return Err(Error::validation("frame size must be positive"));
    }
    if spec.n_frames() < frame_size {
        return Err(Error::InputTooShort(format!(
            "`{}` has {} frames, window needs {frame_size}",
            spec.clip_id,
            spec.n_frames()
        )));
    }
    if !spec.standardized {
        return Err(Error::Usage(format!("`{}` must be standardized before windowing", spec.clip_id)));
    }
    Ok(())
}

fn window_at<T: Real>(spec: &Spectrogram<T>, frame_size: usize, start: usize) -> FeatureWindow<T> {
    let m = spec.n_mels();
    let mut values = Tensor::zeros(&[frame_size, m]);
    for i in 0..frame_size {
        for j in 0..m {
            values.set2(i, j, spec.values.get2(j, start + i));
        }
    }
    FeatureWindow { values, source_clip: spec.clip_id.clone(), start_frame: start }
}

/// `n` start frames drawn uniformly with replacement from `[0, frames - frame_size]`.
pub fn sample_starts<R: Rng + ?Sized>(frames: usize, frame_size: usize, n: usize, rng: &mut R) -> Vec<usize> {
    let last = frames - frame_size;
    (0..n).map(|_| rng.random_range(0..=last)).collect()
}

pub fn sample_windows<T: Real, R: Rng + ?Sized>(
    spec: &Spectrogram<T>,
    frame_size: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<FeatureWindow<T>>> {
    check(spec, frame_size)?;
    Ok(sample_starts(spec.n_frames(), frame_size, n, rng)
        .into_iter()
        .map(|s| window_at(spec, frame_size, s))
        .collect())
}

/// Every stride-1 window, in order.
pub fn all_windows<T: Real>(spec: &Spectrogram<T>, frame_size: usize) -> Result<Vec<FeatureWindow<T>>> {
    check(spec, frame_size)?;
    Ok((0..=spec.n_frames() - frame_size).map(|s| window_at(spec, frame_size, s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(frames: usize) -> Spectrogram<f64> {
        let rows: Vec<Vec<f64>> = (0..3).map(|m| (0..frames).map(|t| (m * 1000 + t) as f64).collect()).collect();
        Spectrogram { standardized: true, ..Spectrogram::new(Tensor::from_rows(&rows), "c") }
    }

    #[test]
    fn sampled_starts_in_range_and_seeded() {
        let s = spec(311);
        let w = sample_windows(&s, 10, 300, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(w.len(), 300);
        assert!(w.iter().all(|w| w.start_frame <= 301));
        let again = sample_windows(&s, 10, 300, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(w, again);
    }

    #[test]
    fn all_windows_enumerates_stride_one() {
        let s = spec(311);
        let w = all_windows(&s, 10).unwrap();
        assert_eq!(w.len(), 302);
        assert_eq!(w[5].values.get2(0, 1), 1005.0);
        assert_eq!(w[5].values.shape(), &[10, 3]);
        for i in 0..w.len() - 1 {
            assert_eq!(&w[i].values.data()[3..], &w[i + 1].values.data()[..27]);
        }
        assert_eq!(all_windows(&spec(10), 10).unwrap().len(), 1);
    }

    #[test]
    fn too_short_or_unstandardized() {
        assert!(matches!(all_windows(&spec(9), 10), Err(Error::InputTooShort(_))));
        let mut s = spec(20);
        s.standardized = false;
        assert!(matches!(all_windows(&s, 10), Err(Error::Usage(_))));
    }
}
