use super::Spectrogram;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Per-mel-bin standardization fitted on training spectrograms.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Real> Scaler<T> {
    /// Lower clamp on fitted standard deviations.
    pub const STD_FLOOR: f64 = 1e-8;

    pub fn identity(n_mels: usize) -> Self {
        Self { mean: vec![T::zero(); n_mels], std: vec![T::one(); n_mels] }
    }

    pub fn from_parts(mean: Vec<T>, std: Vec<T>) -> Result<Self> {
        if mean.len() != std.len() || mean.is_empty() {
            return Err(Error::validation(format!("scaler mean/std lengths {} and {}", mean.len(), std.len())));
        }
        if std.iter().any(|s| !(*s > T::zero())) {
            return Err(Error::validation("scaler std entries must be positive"));
        }
        Ok(Self { mean, std })
    }

    pub fn n_mels(&self) -> usize {
        self.mean.len()
    }

    /// Population mean and standard deviation per bin over every frame.
    pub fn fit(train: &[Spectrogram<T>]) -> Result<Self> {
        let first = train.first().ok_or_else(|| Error::validation("cannot fit a scaler on no spectrograms"))?;
        let m = first.n_mels();
        if let Some(bad) = train.iter().find(|s| s.n_mels() != m) {
            return Err(Error::Shape(format!("spectrogram `{}` has {} mels, expected {m}", bad.clip_id, bad.n_mels())));
        }
        if train.iter().any(|s| s.standardized) {
            return Err(Error::Usage("scaler must be fitted on unstandardized spectrograms".into()));
        }
        let count: usize = train.iter().map(Spectrogram::n_frames).sum();
        if count == 0 {
            return Err(Error::validation("scaler input has no frames"));
        }
        let nf = T::from_usize_lossy(count);
        let mut mean = vec![T::zero(); m];
        for s in train {
            for (j, mu) in mean.iter_mut().enumerate() {
                *mu += s.values.row(j).iter().copied().sum::<T>();
            }
        }
        mean.iter_mut().for_each(|v| *v /= nf);
        let mut var = vec![T::zero(); m];
        for s in train {
            for (j, acc) in var.iter_mut().enumerate() {
                *acc += s.values.row(j).iter().map(|&v| (v - mean[j]) * (v - mean[j])).sum::<T>();
            }
        }
        let floor = T::lit(Self::STD_FLOOR);
        let std = var.into_iter().map(|v| (v / nf).sqrt().max(floor)).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, spec: &Spectrogram<T>) -> Result<Spectrogram<T>> {
        if spec.standardized {
            return Err(Error::Usage(format!("spectrogram `{}` is already standardized", spec.clip_id)));
        }
        self.check(spec)?;
        let mut out = spec.clone();
        for j in 0..self.n_mels() {
            let (mu, sd) = (self.mean[j], self.std[j]);
            out.values.row_mut(j).iter_mut().for_each(|v| *v = (*v - mu) / sd);
        }
        out.standardized = true;
        Ok(out)
    }

    pub fn invert(&self, spec: &Spectrogram<T>) -> Result<Spectrogram<T>> {
        if !spec.standardized {
            return Err(Error::Usage(format!("spectrogram `{}` is not standardized", spec.clip_id)));
        }
        self.check(spec)?;
        let mut out = spec.clone();
        for j in 0..self.n_mels() {
            let (mu, sd) = (self.mean[j], self.std[j]);
            out.values.row_mut(j).iter_mut().for_each(|v| *v = *v * sd + mu);
        }
        out.standardized = false;
        Ok(out)
    }

    fn check(&self, spec: &Spectrogram<T>) -> Result<()> {
        if spec.n_mels() != self.n_mels() {
            return Err(Error::Shape(format!("scaler has {} mels, spectrogram {}", self.n_mels(), spec.n_mels())));
        }
        Ok(())
    }

    pub fn mean_tensor(&self) -> Tensor<T> {
        Tensor::from_vec(&[self.n_mels()], self.mean.clone()).expect("shape")
    }

    pub fn std_tensor(&self) -> Tensor<T> {
        Tensor::from_vec(&[self.n_mels()], self.std.clone()).expect("shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rows: &[Vec<f64>]) -> Spectrogram<f64> {
        Spectrogram::new(Tensor::from_rows(rows), "s")
    }

    #[test]
    fn constant_row_clamps_std() {
        let s = Scaler::fit(&[spec(&[vec![3.0, 3.0, 3.0]])]).unwrap();
        assert_eq!(s.mean, vec![3.0]);
        assert_eq!(s.std, vec![1e-8]);
    }

    #[test]
    fn population_std() {
        let s = Scaler::fit(&[spec(&[vec![0.0, 2.0]])]).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (1.0, 1.0));
    }

    #[test]
    fn standardizes_fitting_set() {
        let a = spec(&[vec![1.0, 5.0, -2.0], vec![10.0, 11.0, 15.0]]);
        let b = spec(&[vec![0.5, 3.0], vec![9.0, 20.0]]);
        let s = Scaler::fit(&[a.clone(), b.clone()]).unwrap();
        let (za, zb) = (s.apply(&a).unwrap(), s.apply(&b).unwrap());
        for j in 0..2 {
            let vals: Vec<f64> = za.values.row(j).iter().chain(zb.values.row(j)).copied().collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() <= 1e-6);
            assert!((var.sqrt() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn identity_and_misuse() {
        let a = spec(&[vec![1.0, 2.0]]);
        let z = Scaler::identity(1).apply(&a).unwrap();
        assert_eq!(z.values, a.values);
        assert!(z.standardized);
        assert!(matches!(Scaler::identity(1).apply(&z), Err(Error::Usage(_))));
        assert!(Scaler::<f64>::fit(&[]).is_err());
        assert!(Scaler::identity(2).apply(&a).is_err());
    }
}
