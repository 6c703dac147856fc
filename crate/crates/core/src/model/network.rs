use rand::Rng;

use super::film::{film_backward, film_condition};
use super::{check_one_hot, ArchDescriptor, ModelInfo};
use crate::error::{Error, Result};
use crate::features::Scaler;
use crate::nn::{
    relu_backward, relu_forward, sigmoid_backward, sigmoid_forward, BatchNorm, BatchNormCache, Dense, Mode,
    Parameter,
};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Dense, batch-norm, ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseBlock<T> {
    pub dense: Dense<T>,
    pub bn: BatchNorm<T>,
}

struct BlockCache<T> {
    input: Tensor<T>,
    normed: Tensor<T>,
    bn: Option<BatchNormCache<T>>,
}

impl<T: Real> DenseBlock<T> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self { dense: Dense::glorot(inputs, outputs, rng), bn: BatchNorm::new(outputs) }
    }

    pub fn param_count(&self) -> usize {
        self.dense.param_count() + self.bn.param_count()
    }

    fn forward_train(&mut self, x: Tensor<T>) -> Result<(Tensor<T>, BlockCache<T>)> {
        let z = self.dense.forward(&x)?;
        let (normed, bn) = self.bn.forward(&z)?;
        let out = relu_forward(&normed);
        Ok((out, BlockCache { input: x, normed, bn }))
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(relu_forward(&self.bn.infer(&self.dense.forward(x)?)?))
    }

    fn backward(&mut self, cache: &BlockCache<T>, dy: &Tensor<T>, want_dx: bool) -> Result<Option<Tensor<T>>> {
        let du = relu_backward(&cache.normed, dy);
        let dz = self.bn.backward(cache.bn.as_ref(), &du)?;
        self.dense.backward(&cache.input, &dz, want_dx)
    }

    fn params_mut(&mut self) -> [&mut Parameter<T>; 4] {
        [&mut self.dense.weight, &mut self.dense.bias, &mut self.bn.gamma, &mut self.bn.beta]
    }
}

/// Label network: dense + sigmoid, dense (+ sigmoid when enabled).
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioner<T> {
    pub hidden: Dense<T>,
    pub output: Dense<T>,
    pub output_sigmoid: bool,
}

struct CondCache<T> {
    hidden: Tensor<T>,
    out: Tensor<T>,
}

impl<T: Real> Conditioner<T> {
    pub fn new<R: Rng + ?Sized>(n_ids: usize, hidden: usize, latent: usize, output_sigmoid: bool, rng: &mut R) -> Self {
        Self { hidden: Dense::glorot(n_ids, hidden, rng), output: Dense::glorot(hidden, latent, rng), output_sigmoid }
    }

    pub fn param_count(&self) -> usize {
        self.hidden.param_count() + self.output.param_count()
    }

    fn forward(&self, labels: &Tensor<T>) -> Result<CondCache<T>> {
        let hidden = sigmoid_forward(&self.hidden.forward(labels)?);
        let pre = self.output.forward(&hidden)?;
        let out = if self.output_sigmoid { sigmoid_forward(&pre) } else { pre };
        Ok(CondCache { hidden, out })
    }

    fn backward(&mut self, labels: &Tensor<T>, cache: &CondCache<T>, dout: &Tensor<T>) -> Result<()> {
        let dpre = if self.output_sigmoid { sigmoid_backward(&cache.out, dout) } else { dout.clone() };
        let dhidden = self.output.backward(&cache.hidden, &dpre, true)?.expect("requested dx");
        let dh_pre = sigmoid_backward(&cache.hidden, &dhidden);
        self.hidden.backward(labels, &dh_pre, false)?;
        Ok(())
    }

    fn params_mut(&mut self) -> [&mut Parameter<T>; 4] {
        [&mut self.hidden.weight, &mut self.hidden.bias, &mut self.output.weight, &mut self.output.bias]
    }
}

/// Parameter totals; batch-norm layers count four values per unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCounts {
    pub encoder: usize,
    pub decoder: usize,
    pub conditioning: usize,
    pub total: usize,
}

/// Everything a train-mode forward pass saves for `backward`.
pub struct ForwardCache<T> {
    labels: Tensor<T>,
    encoder: Vec<BlockCache<T>>,
    latent: Tensor<T>,
    film: Option<(CondCache<T>, CondCache<T>)>,
    decoder: Vec<BlockCache<T>>,
    decoder_top: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdcaeModel<T> {
    pub arch: ArchDescriptor,
    pub encoder: Vec<DenseBlock<T>>,
    pub decoder: Vec<DenseBlock<T>>,
    pub output: Dense<T>,
    /// `(H_gamma, H_beta)`; absent when conditioning is disabled.
    pub conditioners: Option<(Conditioner<T>, Conditioner<T>)>,
    pub scaler: Option<Scaler<T>>,
    pub info: ModelInfo,
}

impl<T: Real> IdcaeModel<T> {
    pub fn new<R: Rng + ?Sized>(arch: ArchDescriptor, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let mut width = arch.input_dim();
        let mut encoder = Vec::with_capacity(arch.encoder_units.len());
        for &u in &arch.encoder_units {
            encoder.push(DenseBlock::new(width, u, rng));
            width = u;
        }
        let latent = width;
        let mut decoder = Vec::with_capacity(arch.decoder_units.len());
        for &u in &arch.decoder_units {
            decoder.push(DenseBlock::new(width, u, rng));
            width = u;
        }
        let output = Dense::glorot(width, arch.input_dim(), rng);
        let conditioners = arch.conditioning_enabled.then(|| {
            let g = Conditioner::new(arch.n_ids, arch.cond_hidden, latent, arch.conditioner_output_sigmoid, rng);
            let b = Conditioner::new(arch.n_ids, arch.cond_hidden, latent, arch.conditioner_output_sigmoid, rng);
            (g, b)
        });
        Ok(Self { arch, encoder, decoder, output, conditioners, scaler: None, info: ModelInfo::default() })
    }

    pub fn set_scaler(&mut self, scaler: Scaler<T>) -> Result<()> {
        if scaler.n_mels() != self.arch.n_mels {
            return Err(Error::validation(format!(
                "scaler has {} mels, model expects {}",
                scaler.n_mels(),
                self.arch.n_mels
            )));
        }
        self.scaler = Some(scaler);
        Ok(())
    }

    pub fn count_params(&self) -> ParamCounts {
        let encoder = self.encoder.iter().map(DenseBlock::param_count).sum();
        let decoder = self.decoder.iter().map(DenseBlock::param_count).sum::<usize>() + self.output.param_count();
        let conditioning = self.conditioners.as_ref().map_or(0, |(g, b)| g.param_count() + b.param_count());
        ParamCounts { encoder, decoder, conditioning, total: encoder + decoder + conditioning }
    }

    pub fn set_mode(&mut self, mode: Mode) {
        for b in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            b.bn.mode = mode;
        }
    }

    /// Trainable tensors in a fixed order (optimizer state is matched by position).
    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut out = Vec::new();
        for b in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            out.extend(b.params_mut());
        }
        out.push(&mut self.output.weight);
        out.push(&mut self.output.bias);
        if let Some((g, b)) = self.conditioners.as_mut() {
            out.extend(g.params_mut());
            out.extend(b.params_mut());
        }
        out
    }

    fn check_input(&self, x: &Tensor<T>, labels: &Tensor<T>) -> Result<()> {
        if x.cols() != self.arch.input_dim() {
            return Err(Error::Shape(format!(
                "input windows have {} values, model expects {}x{}",
                x.cols(),
                self.arch.frame_size,
                self.arch.n_mels
            )));
        }
        if labels.rows() != x.rows() {
            return Err(Error::Shape(format!("{} labels for {} windows", labels.rows(), x.rows())));
        }
        check_one_hot(labels, self.arch.n_ids)
    }

    fn flatten(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.clone().reshape(&[x.rows(), self.arch.input_dim()])
    }

    fn unflatten(&self, y: Tensor<T>) -> Result<Tensor<T>> {
        let b = y.rows();
        y.reshape(&[b, self.arch.frame_size, self.arch.n_mels])
    }

    /// `(H_gamma(l), H_beta(l))`, each `batch x latent`.
    pub fn modulation(&self, labels: &Tensor<T>) -> Result<Option<(Tensor<T>, Tensor<T>)>> {
        check_one_hot(labels, self.arch.n_ids)?;
        match &self.conditioners {
            None => Ok(None),
            Some((g, b)) => Ok(Some((g.forward(labels)?.out, b.forward(labels)?.out))),
        }
    }

    /// Encoder output for a batch of windows, using running statistics.
    pub fn encode(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut a = self.flatten(x)?;
        for block in &self.encoder {
            a = block.infer(&a)?;
        }
        Ok(a)
    }

    /// Decoder output, shape `batch x F x M`.
    pub fn decode(&self, h: &Tensor<T>) -> Result<Tensor<T>> {
        let mut a = h.clone();
        for block in &self.decoder {
            a = block.infer(&a)?;
        }
        self.unflatten(self.output.forward(&a)?)
    }

    /// Inference forward `D(H(E(x), l))`; immutable, so a model can be shared.
    pub fn infer(&self, x: &Tensor<T>, labels: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x, labels)?;
        let z = self.encode(x)?;
        let h = match self.modulation(labels)? {
            Some((gamma, beta)) => film_condition(&z, &gamma, &beta)?,
            None => z,
        };
        self.decode(&h)
    }

    /// Inference with caller-supplied modulation vectors in place of the conditioners.
    pub fn infer_modulated(&self, x: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<Tensor<T>> {
        let z = self.encode(x)?;
        self.decode(&film_condition(&z, gamma, beta)?)
    }

    /// Forward in the requested batch-norm mode.
    pub fn forward(&mut self, x: &Tensor<T>, labels: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        match mode {
            Mode::Infer => self.infer(x, labels),
            Mode::Train => Ok(self.forward_train(x, labels)?.0),
        }
    }

    /// Train-mode forward; updates batch-norm running statistics.
    pub fn forward_train(&mut self, x: &Tensor<T>, labels: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        self.check_input(x, labels)?;
        self.set_mode(Mode::Train);
        let mut a = self.flatten(x)?;
        let mut encoder = Vec::with_capacity(self.encoder.len());
        for block in &mut self.encoder {
            let (next, cache) = block.forward_train(a)?;
            encoder.push(cache);
            a = next;
        }
        let latent = a;
        let (h, film) = match &self.conditioners {
            Some((g, b)) => {
                let gc = g.forward(labels)?;
                let bc = b.forward(labels)?;
                (film_condition(&latent, &gc.out, &bc.out)?, Some((gc, bc)))
            }
            None => (latent.clone(), None),
        };
        let mut a = h;
        let mut decoder = Vec::with_capacity(self.decoder.len());
        for block in &mut self.decoder {
            let (next, cache) = block.forward_train(a)?;
            decoder.push(cache);
            a = next;
        }
        let y = self.output.forward(&a)?;
        let cache = ForwardCache { labels: labels.clone(), encoder, latent, film, decoder, decoder_top: a };
        Ok((self.unflatten(y)?, cache))
    }

    /// Backpropagates `d_out` (same shape as the reconstruction) into every
    /// parameter gradient.
    pub fn backward(&mut self, cache: &ForwardCache<T>, d_out: &Tensor<T>) -> Result<()> {
        let d_out = d_out.clone().reshape(&[d_out.rows(), self.arch.input_dim()])?;
        let mut d = self.output.backward(&cache.decoder_top, &d_out, true)?.expect("requested dx");
        for (block, c) in self.decoder.iter_mut().zip(&cache.decoder).rev() {
            d = block.backward(c, &d, true)?.expect("requested dx");
        }
        if let (Some((g, b)), Some((gc, bc))) = (self.conditioners.as_mut(), cache.film.as_ref()) {
            let (dz, dgamma, dbeta) = film_backward(&cache.latent, &gc.out, &d)?;
            g.backward(&cache.labels, gc, &dgamma)?;
            b.backward(&cache.labels, bc, &dbeta)?;
            d = dz;
        }
        // the input layer needs no dx
        for (i, (block, c)) in self.encoder.iter_mut().zip(&cache.encoder).enumerate().rev() {
            if let Some(next) = block.backward(c, &d, i > 0)? {
                d = next;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::one_hot_batch;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn standard_parameter_counts() {
        let m = IdcaeModel::<f64>::new(ArchDescriptor::standard(10, 128, 7), &mut rng()).unwrap();
        assert_eq!(
            m.count_params(),
            ParamCounts { encoder: 175_792, decoder: 218_880, conditioning: 800, total: 395_472 }
        );
    }

    #[test]
    fn conditioning_count_formula() {
        for n_ids in 1..10 {
            let m = IdcaeModel::<f64>::new(ArchDescriptor::standard(2, 4, n_ids), &mut rng()).unwrap();
            assert_eq!(m.count_params().conditioning, 32 * n_ids + 576);
        }
    }

    #[test]
    fn wider_mel_first_layer() {
        let m = IdcaeModel::<f64>::new(ArchDescriptor::standard(10, 256, 7), &mut rng()).unwrap();
        assert_eq!(m.encoder[0].dense.param_count(), 327_808);
        let c = m.count_params();
        assert_eq!(c.encoder, 175_792 - 163_968 + 327_808);
        assert_eq!(c.decoder, 218_880 - 165_120 + (128 * 2560 + 2560));
    }

    #[test]
    fn output_shape_and_determinism() {
        let mut m = IdcaeModel::<f64>::new(ArchDescriptor::standard(3, 5, 2), &mut rng()).unwrap();
        let x = Tensor::from_vec(&[4, 3, 5], (0..60).map(|i| (i as f64 * 0.3).sin()).collect()).unwrap();
        let l = one_hot_batch(&[0, 1, 1, 0], 2).unwrap();
        let y = m.forward(&x, &l, Mode::Train).unwrap();
        assert_eq!(y.shape(), &[4, 3, 5]);
        let a = m.infer(&x, &l).unwrap();
        let b = m.infer(&x, &l).unwrap();
        assert_eq!(a, b);
        assert!(m.infer(&x, &one_hot_batch(&[0, 1, 1, 0], 3).unwrap()).is_err());
    }

    #[test]
    fn labels_ignored_without_conditioning() {
        let arch = ArchDescriptor { conditioning_enabled: false, ..ArchDescriptor::standard(2, 4, 3) };
        let m = IdcaeModel::<f64>::new(arch, &mut rng()).unwrap();
        assert_eq!(m.count_params().conditioning, 0);
        let x = Tensor::from_vec(&[2, 8], (0..16).map(|i| i as f64 / 7.0).collect()).unwrap();
        let a = m.infer(&x, &one_hot_batch(&[0, 0], 3).unwrap()).unwrap();
        let b = m.infer(&x, &one_hot_batch(&[2, 1], 3).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
