use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::container::Container;
use super::{ArchDescriptor, IdcaeModel, ModelInfo};
use crate::error::{ContainerError, Error, Result};
use crate::features::{MelConfig, Scaler};
use crate::nn::{Dense, Mode, Parameter};
use crate::scalar::Real;
use crate::tensor::Tensor;

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn split_units(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.parse().map_err(|_| ContainerError::Header(format!("bad unit list `{s}`")).into()))
        .collect()
}

impl<T: Real> IdcaeModel<T> {
    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        let a = &self.arch;
        c.set_meta("format", "idcae-model");
        c.set_meta("scalar", T::NAME);
        c.set_meta("arch.frame_size", a.frame_size);
        c.set_meta("arch.n_mels", a.n_mels);
        c.set_meta("arch.n_ids", a.n_ids);
        c.set_meta("arch.encoder_units", join(&a.encoder_units));
        c.set_meta("arch.decoder_units", join(&a.decoder_units));
        c.set_meta("arch.cond_hidden", a.cond_hidden);
        c.set_meta("arch.conditioning_enabled", a.conditioning_enabled);
        c.set_meta("arch.conditioner_output_sigmoid", a.conditioner_output_sigmoid);
        if let Some(bn) = self.encoder.first().map(|b| &b.bn) {
            c.set_meta("bn.momentum", bn.momentum.to_f64_lossless());
            c.set_meta("bn.eps", bn.eps.to_f64_lossless());
        }
        let i = &self.info;
        c.set_meta("info.machine_type", &i.machine_type);
        c.set_meta("info.id_vocabulary", i.id_vocabulary.join(","));
        c.set_meta("info.norm", i.norm);
        c.set_meta("info.fingerprint", i.fingerprint());
        c.set_meta("mel.n_fft", i.mel.n_fft);
        c.set_meta("mel.hop", i.mel.hop);
        c.set_meta("mel.n_mels", i.mel.n_mels);
        c.set_meta("mel.fmin", i.mel.fmin);
        c.set_meta("mel.fmax", i.mel.fmax.map_or("nyquist".to_string(), |f| f.to_string()));
        c.set_meta("mel.log_floor", i.mel.log_floor);
        for (k, v) in &i.config {
            c.set_meta(format!("config.{k}"), v);
        }

        for (name, b) in block_names("encoder", &self.encoder).chain(block_names("decoder", &self.decoder)) {
            push_dense(&mut c, &format!("{name}.dense"), &b.dense);
            c.push(format!("{name}.bn.gamma"), &b.bn.gamma.value);
            c.push(format!("{name}.bn.beta"), &b.bn.beta.value);
            c.push(format!("{name}.bn.running_mean"), &vec_tensor(&b.bn.running_mean));
            c.push(format!("{name}.bn.running_var"), &vec_tensor(&b.bn.running_var));
        }
        push_dense(&mut c, "decoder.output", &self.output);
        if let Some((g, b)) = &self.conditioners {
            for (name, cond) in [("cond.gamma", g), ("cond.beta", b)] {
                push_dense(&mut c, &format!("{name}.hidden"), &cond.hidden);
                push_dense(&mut c, &format!("{name}.output"), &cond.output);
            }
        }
        if let Some(s) = &self.scaler {
            c.push("scaler.mean", &s.mean_tensor());
            c.push("scaler.std", &s.std_tensor());
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.meta("format")? != "idcae-model" {
            return Err(ContainerError::Header("container does not hold a model".into()).into());
        }
        let arch = ArchDescriptor {
            frame_size: c.parse_meta("arch.frame_size")?,
            n_mels: c.parse_meta("arch.n_mels")?,
            n_ids: c.parse_meta("arch.n_ids")?,
            encoder_units: split_units(c.meta("arch.encoder_units")?)?,
            decoder_units: split_units(c.meta("arch.decoder_units")?)?,
            cond_hidden: c.parse_meta("arch.cond_hidden")?,
            conditioning_enabled: c.parse_meta("arch.conditioning_enabled")?,
            conditioner_output_sigmoid: c.parse_meta("arch.conditioner_output_sigmoid")?,
        };
        let mut model = IdcaeModel::<T>::new(arch, &mut ChaCha8Rng::seed_from_u64(0))?;
        let momentum = T::lit(c.parse_meta::<f64>("bn.momentum")?);
        let eps = T::lit(c.parse_meta::<f64>("bn.eps")?);

        let names: Vec<String> = (0..model.encoder.len())
            .map(|i| format!("encoder.{i}"))
            .chain((0..model.decoder.len()).map(|i| format!("decoder.{i}")))
            .collect();
        for (name, b) in names.iter().zip(model.encoder.iter_mut().chain(model.decoder.iter_mut())) {
            load_dense(c, &format!("{name}.dense"), &mut b.dense)?;
            load_param(c, &format!("{name}.bn.gamma"), &mut b.bn.gamma)?;
            load_param(c, &format!("{name}.bn.beta"), &mut b.bn.beta)?;
            b.bn.running_mean = load_vec(c, &format!("{name}.bn.running_mean"), b.bn.units())?;
            b.bn.running_var = load_vec(c, &format!("{name}.bn.running_var"), b.bn.units())?;
            b.bn.momentum = momentum;
            b.bn.eps = eps;
        }
        load_dense(c, "decoder.output", &mut model.output)?;
        if let Some((g, b)) = model.conditioners.as_mut() {
            for (name, cond) in [("cond.gamma", g), ("cond.beta", b)] {
                load_dense(c, &format!("{name}.hidden"), &mut cond.hidden)?;
                load_dense(c, &format!("{name}.output"), &mut cond.output)?;
            }
        }
        if c.tensors.iter().any(|(n, _)| n == "scaler.mean") {
            let mean = c.tensor::<T>("scaler.mean")?.into_data();
            let std = c.tensor::<T>("scaler.std")?.into_data();
            model.set_scaler(Scaler::from_parts(mean, std)?)?;
        }

        let fmax = c.meta("mel.fmax")?;
        let mel = MelConfig {
            n_fft: c.parse_meta("mel.n_fft")?,
            hop: c.parse_meta("mel.hop")?,
            n_mels: c.parse_meta("mel.n_mels")?,
            fmin: c.parse_meta("mel.fmin")?,
            fmax: if fmax == "nyquist" { None } else { Some(c.parse_meta("mel.fmax")?) },
            log_floor: c.parse_meta("mel.log_floor")?,
        };
        if mel.n_mels != model.arch.n_mels {
            return Err(Error::validation(format!(
                "feature config has {} mels, model expects {}",
                mel.n_mels, model.arch.n_mels
            )));
        }
        let vocab = c.meta("info.id_vocabulary")?;
        model.info = ModelInfo {
            machine_type: c.meta("info.machine_type")?.to_string(),
            id_vocabulary: if vocab.is_empty() { Vec::new() } else { vocab.split(',').map(String::from).collect() },
            mel,
            norm: c.meta("info.norm")?.parse()?,
            config: c
                .meta
                .iter()
                .filter_map(|(k, v)| k.strip_prefix("config.").map(|k| (k.to_string(), v.clone())))
                .collect(),
        };
        if model.info.fingerprint() != c.meta("info.fingerprint")? {
            return Err(Error::validation("stored configuration does not match its fingerprint"));
        }
        if !model.info.id_vocabulary.is_empty() && model.info.id_vocabulary.len() != model.arch.n_ids {
            return Err(Error::validation(format!(
                "vocabulary lists {} ids, model has {}",
                model.info.id_vocabulary.len(),
                model.arch.n_ids
            )));
        }
        model.set_mode(Mode::Infer);
        Ok(model)
    }
}

fn block_names<'a, T>(
    prefix: &'a str,
    blocks: &'a [super::DenseBlock<T>],
) -> impl Iterator<Item = (String, &'a super::DenseBlock<T>)> + 'a {
    blocks.iter().enumerate().map(move |(i, b)| (format!("{prefix}.{i}"), b))
}

fn vec_tensor<T: Real>(v: &[T]) -> Tensor<T> {
    Tensor::from_vec(&[v.len()], v.to_vec()).expect("shape")
}

fn push_dense<T: Real>(c: &mut Container, name: &str, d: &Dense<T>) {
    c.push(format!("{name}.weight"), &d.weight.value);
    c.push(format!("{name}.bias"), &d.bias.value);
}

fn load_param<T: Real>(c: &Container, name: &str, p: &mut Parameter<T>) -> Result<()> {
    let t = c.tensor::<T>(name)?;
    if t.shape() != p.value.shape() {
        return Err(Error::validation(format!(
            "tensor `{name}` has shape {:?}, architecture needs {:?}",
            t.shape(),
            p.value.shape()
        )));
    }
    *p = Parameter::new(t);
    Ok(())
}

fn load_dense<T: Real>(c: &Container, name: &str, d: &mut Dense<T>) -> Result<()> {
    load_param(c, &format!("{name}.weight"), &mut d.weight)?;
    load_param(c, &format!("{name}.bias"), &mut d.bias)
}

fn load_vec<T: Real>(c: &Container, name: &str, len: usize) -> Result<Vec<T>> {
    let t = c.tensor::<T>(name)?;
    if t.len() != len {
        return Err(Error::validation(format!("tensor `{name}` has {} values, expected {len}", t.len())));
    }
    Ok(t.into_data())
}

pub fn save_model<T: Real>(model: &IdcaeModel<T>, path: impl AsRef<Path>) -> Result<()> {
    model.to_container().write(path)
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<IdcaeModel<T>> {
    IdcaeModel::from_container(&Container::read(path)?)
}
