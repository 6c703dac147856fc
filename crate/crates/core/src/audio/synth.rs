//! Deterministic machine-like test signals.
//!
//! A normal clip for ID `k` is a four-harmonic stack on
//! `f0 = 180 + 60 k` Hz with geometrically decaying partials, a slow
//! amplitude modulation and Gaussian noise 30 dB below the signal.
//! Anomalous clips add one fault on top of the same base signal; the
//! frequency-shift fault moves `f0` onto the next ID's fundamental.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{AudioClip, Label, Split};
use crate::error::{Error, Result};

const HARMONICS: usize = 4;
const HARMONIC_DECAY: f64 = 0.6;
const GAIN: f64 = 0.25;
const NOISE_DB: f64 = -30.0;
const BURST_DB: f64 = 6.0;
/// Equal to the spacing between ID fundamentals.
const SHIFT_HZ: f64 = 60.0;
const CLICK_RATE_HZ: f64 = 4.0;
const CLICK_MS: f64 = 4.0;
const CLICK_GAIN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnomalyKind {
    NoiseBurst,
    FrequencyShift,
    Clicks,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 3] = [AnomalyKind::NoiseBurst, AnomalyKind::FrequencyShift, AnomalyKind::Clicks];

    fn token(self) -> &'static str {
        match self {
            AnomalyKind::NoiseBurst => "noise_burst",
            AnomalyKind::FrequencyShift => "shift",
            AnomalyKind::Clicks => "clicks",
        }
    }
}

impl FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnomalyKind::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| Error::validation(format!("unknown anomaly kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub id_index: usize,
    pub anomalous: bool,
    /// Fault to inject; chosen from the seed when `None`.
    pub kind: Option<AnomalyKind>,
    pub seed: u64,
    pub duration_s: f64,
    pub sample_rate: u32,
}

impl SynthSpec {
    pub fn normal(id_index: usize, seed: u64) -> Self {
        Self { id_index, anomalous: false, kind: None, seed, duration_s: 2.0, sample_rate: 16_000 }
    }

    pub fn anomalous(id_index: usize, seed: u64) -> Self {
        Self { anomalous: true, ..Self::normal(id_index, seed) }
    }

    pub fn fundamental(&self) -> f64 {
        180.0 + 60.0 * self.id_index as f64
    }

    /// Fault actually injected, `None` for normal clips.
    pub fn resolved_kind(&self) -> Option<AnomalyKind> {
        if !self.anomalous {
            return None;
        }
        Some(self.kind.unwrap_or_else(|| {
            let mut rng = stream(self.seed, 2);
            AnomalyKind::ALL[rng.random_range(0..AnomalyKind::ALL.len())]
        }))
    }
}

/// `id=1,anomalous=1,kind=clicks,seed=7,duration=2,rate=16000`
impl FromStr for SynthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = SynthSpec::normal(0, 0);
        for pair in s.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::validation(format!("synth spec field `{pair}` is not key=value")))?;
            let bad = || Error::validation(format!("bad value for synth field `{k}`: `{v}`"));
            match k {
                "id" => spec.id_index = v.parse().map_err(|_| bad())?,
                "anomalous" => spec.anomalous = matches!(v, "1" | "true" | "yes"),
                "kind" => {
                    spec.kind = Some(v.parse()?);
                    spec.anomalous = true;
                }
                "seed" => spec.seed = v.parse().map_err(|_| bad())?,
                "duration" => spec.duration_s = v.parse().map_err(|_| bad())?,
                "rate" => spec.sample_rate = v.parse().map_err(|_| bad())?,
                other => return Err(Error::validation(format!("unknown synth field `{other}`"))),
            }
        }
        Ok(spec)
    }
}

impl fmt::Display for SynthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "id={},anomalous={}", self.id_index, u8::from(self.anomalous))?;
        if let Some(k) = self.kind {
            write!(f, ",kind={}", k.token())?;
        }
        write!(f, ",seed={},duration={},rate={}", self.seed, self.duration_s, self.sample_rate)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

fn harmonic_stack(f0: f64, n: usize, rate: f64, phases: &[f64; HARMONICS], am: (f64, f64, f64)) -> Vec<f64> {
    let (am_rate, am_depth, am_phase) = am;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let env = 1.0 + am_depth * (2.0 * PI * am_rate * t + am_phase).sin();
            let tone: f64 = (0..HARMONICS)
                .map(|h| {
                    let freq = f0 * (h + 1) as f64;
                    if freq >= rate / 2.0 {
                        return 0.0;
                    }
                    HARMONIC_DECAY.powi(h as i32) * (2.0 * PI * freq * t + phases[h]).sin()
                })
                .sum();
            GAIN * env * tone
        })
        .collect()
}

/// Generates the clip described by `spec`; a pure function of the spec.
pub fn synth_clip(spec: &SynthSpec) -> Result<AudioClip> {
    if !(spec.duration_s > 0.0 && spec.duration_s.is_finite()) {
        return Err(Error::validation(format!("synth duration must be positive, got {}", spec.duration_s)));
    }
    if spec.sample_rate < 8000 {
        return Err(Error::validation(format!("synth sample rate must be at least 8000, got {}", spec.sample_rate)));
    }
    let rate = spec.sample_rate as f64;
    let n = (spec.duration_s * rate).round().max(1.0) as usize;

    let mut base = stream(spec.seed, 0);
    let mut phases = [0.0; HARMONICS];
    phases.iter_mut().for_each(|p| *p = base.random_range(0.0..2.0 * PI));
    let am = (base.random_range(0.3..1.2), base.random_range(0.1..0.3), base.random_range(0.0..2.0 * PI));
    let jitter = base.random_range(-0.01..0.01);

    let kind = spec.resolved_kind();
    let f0 = spec.fundamental() * (1.0 + jitter);
    let f0 = if kind == Some(AnomalyKind::FrequencyShift) { f0 + SHIFT_HZ } else { f0 };
    let mut x = harmonic_stack(f0, n, rate, &phases, am);

    let level = rms(&x);
    let mut noise = stream(spec.seed, 1);
    let sigma = level * 10f64.powf(NOISE_DB / 20.0);
    for v in &mut x {
        let z: f64 = noise.sample(StandardNormal);
        *v += sigma * z;
    }

    let mut fault = stream(spec.seed, 3);
    match kind {
        Some(AnomalyKind::NoiseBurst) => {
            let len = ((fault.random_range(0.1..0.3) * rate) as usize).min(n);
            let start = fault.random_range(0..=n - len);
            let burst_sigma = level * 10f64.powf(BURST_DB / 20.0);
            for v in &mut x[start..start + len] {
                let z: f64 = fault.sample(StandardNormal);
                *v += burst_sigma * z;
            }
        }
        Some(AnomalyKind::Clicks) => {
            let period = (rate / CLICK_RATE_HZ) as usize;
            let click_len = ((CLICK_MS / 1000.0) * rate) as usize;
            let mut pos = fault.random_range(0..period.max(1));
            while pos < n {
                for j in 0..click_len.min(n - pos) {
                    let decay = (-(j as f64) / (click_len as f64 / 4.0)).exp();
                    let z: f64 = fault.sample(StandardNormal);
                    x[pos + j] += CLICK_GAIN * level * decay * z;
                }
                pos += period;
            }
        }
        Some(AnomalyKind::FrequencyShift) | None => {}
    }
    x.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));

    let label = if spec.anomalous { Label::Anomaly } else { Label::Normal };
    let split = if spec.anomalous { Split::Test } else { Split::Train };
    Ok(AudioClip::new(x, spec.sample_rate)?.with_meta("synth", &format!("id_{:02}", spec.id_index), label, split))
}
