use super::Parameter;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Step-wise learning-rate decay: `initial * factor^floor(epoch / every)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    pub factor: f64,
    pub every: usize,
    pub enabled: bool,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { initial: 1e-3, factor: 0.95, every: 5, enabled: true }
    }
}

impl LrSchedule {
    /// Epochs are numbered from 0.
    pub fn lr(&self, epoch: usize) -> f64 {
        if !self.enabled || self.every == 0 {
            return self.initial;
        }
        self.initial * self.factor.powi((epoch / self.every) as i32)
    }
}

/// Adam with bias correction. Moment buffers are allocated on the first step
/// and matched to parameters by position.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn set_lr(&mut self, schedule: &LrSchedule, epoch: usize) {
        self.config.lr = schedule.lr(epoch);
    }

    pub fn step(&mut self, params: &mut [&mut Parameter<T>]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
            return Err(Error::Shape("adam: parameter set changed between steps".into()));
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let b1 = T::lit(beta1);
        let b2 = T::lit(beta2);
        let c1 = T::lit(1.0 - beta1.powi(self.t as i32));
        let c2 = T::lit(1.0 - beta2.powi(self.t as i32));
        let (lr, eps) = (T::lit(lr), T::lit(eps));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);

        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let Parameter { value, grad } = &mut **p;
            for (((w, &g), mi), vi) in value.data_mut().iter_mut().zip(grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + one_b1 * g;
                *vi = b2 * *vi + one_b2 * g * g;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
