use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::MelConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Power spectrogram `|FFT(w * frame)|^2`, shape `(n_fft/2 + 1) x T`.
///
/// Frame `t` covers samples `[t * hop, t * hop + n_fft)`; no padding.
pub fn stft_power<T: Real>(samples: &[f64], cfg: &MelConfig) -> Result<Tensor<T>> {
    let n_fft = cfg.n_fft;
    let frames = cfg.frame_count(samples.len()).ok_or_else(|| {
        Error::InputTooShort(format!("{} samples is shorter than one {n_fft}-sample window", samples.len()))
    })?;
    let bins = cfg.n_bins();
    let window: Vec<T> = hann_window(n_fft).into_iter().map(T::lit).collect();
    let fft = FftPlanner::<T>::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
    let mut out = Tensor::zeros(&[bins, frames]);
    for t in 0..frames {
        let frame = &samples[t * cfg.hop..t * cfg.hop + n_fft];
        for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&window) {
            *b = Complex::new(T::lit(s) * w, T::zero());
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, c) in buf.iter().take(bins).enumerate() {
            out.set2(k, t, c.norm_sqr());
        }
    }
    Ok(out)
}
