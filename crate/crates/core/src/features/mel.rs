use super::MelConfig;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filterbank, shape `n_mels x (n_fft/2 + 1)`.
///
/// Triangle edges sit at `n_mels + 2` points equally spaced in mel between
/// `fmin` and `fmax`. Each triangle is scaled by `2 / (f_hi - f_lo)` so that
/// its continuous area is one. A triangle narrower than the FFT bin spacing
/// may contain no bin centre; it then takes unit peak weight on the bin
/// nearest its centre frequency before scaling, so no row is empty.
pub fn mel_filterbank<T: Real>(cfg: &MelConfig, sample_rate: u32) -> Result<Tensor<T>> {
    cfg.validate(sample_rate)?;
    let bins = cfg.n_bins();
    let fmax = cfg.fmax_for(sample_rate);
    let (mel_lo, mel_hi) = (hz_to_mel(cfg.fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / cfg.n_fft as f64;

    let mut fb = Tensor::zeros(&[cfg.n_mels, bins]);
    for m in 0..cfg.n_mels {
        let (lo, centre, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let scale = 2.0 / (hi - lo);
        let mut any = false;
        for k in 0..bins {
            let f = k as f64 * bin_hz;
            let rising = (f - lo) / (centre - lo);
            let falling = (hi - f) / (hi - centre);
            let w = rising.min(falling).max(0.0);
            if w > 0.0 {
                any = true;
                fb.set2(m, k, T::lit(w * scale));
            }
        }
        if !any {
            let k = ((centre / bin_hz).round() as usize).min(bins - 1);
            fb.set2(m, k, T::lit(scale));
        }
    }
    Ok(fb)
}

/// `filterbank @ power`, shape `n_mels x T`.
pub fn mel_project<T: Real>(power: &Tensor<T>, filterbank: &Tensor<T>) -> Result<Tensor<T>> {
    if power.rows() != filterbank.cols() {
        return Err(Error::Shape(format!(
            "power has {} bins, filterbank expects {}",
            power.rows(),
            filterbank.cols()
        )));
    }
    filterbank.matmul(power)
}
