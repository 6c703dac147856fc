//! Standardized log-mel spectrograms and the `(F x M)` windows cut from them.

mod mel;
mod scaler;
mod stft;
mod window;

pub use mel::{hz_to_mel, mel_filterbank, mel_project, mel_to_hz};
pub use scaler::Scaler;
pub use stft::{hann_window, stft_power};
pub use window::{all_windows, sample_starts, sample_windows, FeatureWindow};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub fmin: f64,
    /// Upper filterbank edge; `None` means the Nyquist frequency.
    pub fmax: Option<f64>,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self { n_fft: 1024, hop: 512, n_mels: 128, fmin: 0.0, fmax: None, log_floor: 1e-10 }
    }
}

impl MelConfig {
    pub fn with_mels(n_mels: usize) -> Self {
        Self { n_mels, ..Self::default() }
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn fmax_for(&self, sample_rate: u32) -> f64 {
        self.fmax.unwrap_or(sample_rate as f64 / 2.0)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return Err(Error::validation(format!("n_fft must be a power of two, got {}", self.n_fft)));
        }
        if self.hop == 0 {
            return Err(Error::validation("hop must be positive"));
        }
        if self.n_mels == 0 {
            return Err(Error::validation("n_mels must be at least 1"));
        }
        let fmax = self.fmax_for(sample_rate);
        if !(self.fmin >= 0.0 && self.fmin < fmax && fmax <= sample_rate as f64 / 2.0) {
            return Err(Error::validation(format!(
                "need 0 <= fmin < fmax <= sample_rate/2, got fmin={} fmax={fmax} at {sample_rate} Hz",
                self.fmin
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::validation("log_floor must be positive"));
        }
        Ok(())
    }

    /// `floor((n - n_fft) / hop) + 1`, or `None` when shorter than one window.
    pub fn frame_count(&self, num_samples: usize) -> Option<usize> {
        (num_samples >= self.n_fft).then(|| (num_samples - self.n_fft) / self.hop + 1)
    }
}

/// Mel bins x time frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    pub values: Tensor<T>,
    pub standardized: bool,
    pub clip_id: String,
}

impl<T: Real> Spectrogram<T> {
    pub fn new(values: Tensor<T>, clip_id: impl Into<String>) -> Self {
        Self { values, standardized: false, clip_id: clip_id.into() }
    }

    pub fn n_mels(&self) -> usize {
        self.values.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }

    /// Time-major copy (`T x M`), so that consecutive frames are contiguous.
    pub fn frames_major(&self) -> Tensor<T> {
        self.values.transpose()
    }
}

/// `10 log10(max(x, floor))` elementwise.
pub fn log_compress<T: Real>(mel_power: &Tensor<T>, log_floor: f64) -> Tensor<T> {
    let floor = T::lit(log_floor);
    let ten = T::lit(10.0);
    mel_power.map(|x| ten * x.max(floor).log10())
}

/// STFT power, mel projection and log compression of one clip.
pub fn log_mel_spectrogram<T: Real>(clip: &AudioClip, cfg: &MelConfig, clip_id: &str) -> Result<Spectrogram<T>> {
    cfg.validate(clip.sample_rate)?;
    let power = stft_power::<T>(&clip.samples, cfg)?;
    let fb = mel_filterbank::<T>(cfg, clip.sample_rate)?;
    let mel = mel_project(&power, &fb)?;
    let out = log_compress(&mel, cfg.log_floor);
    if !out.all_finite() {
        return Err(Error::Numeric(format!("non-finite log-mel value in `{clip_id}`")));
    }
    Ok(Spectrogram::new(out, clip_id))
}
