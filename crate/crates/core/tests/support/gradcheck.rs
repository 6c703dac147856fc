//! Gradient checks for each layer and a tiny end-to-end model.

use idcae::model::{film_backward, film_condition, one_hot_batch, ArchDescriptor, IdcaeModel};
use idcae::nn::{
    loss, relu_backward, relu_forward, sigmoid_backward, sigmoid_forward, BatchNorm, Dense, Norm,
};
use idcae::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fd::{check, randn, weighted_sum, with, Report};

pub fn dense_layer() -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut layer = Dense::<f64>::glorot(5, 4, &mut rng);
    let x = randn(&mut rng, &[3, 5]);
    let w = randn(&mut rng, &[3, 4]);
    let dx = layer.backward(&x, &w, true).unwrap().unwrap();
    let mut r = Report::default();

    check(x.data(), dx.data(), |v| weighted_sum(&layer.forward(&with(&x, v)).unwrap(), &w), &mut r);
    let weight = layer.weight.value.clone();
    let dw = layer.weight.grad.clone();
    check(weight.data(), dw.data(), |v| {
        let mut l = layer.clone();
        l.weight.value = with(&weight, v);
        weighted_sum(&l.forward(&x).unwrap(), &w)
    }, &mut r);
    let bias = layer.bias.value.clone();
    let db = layer.bias.grad.clone();
    check(bias.data(), db.data(), |v| {
        let mut l = layer.clone();
        l.bias.value = with(&bias, v);
        weighted_sum(&l.forward(&x).unwrap(), &w)
    }, &mut r);
    r
}

pub fn batchnorm_train_mode() -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bn = BatchNorm::<f64>::new(4);
    bn.gamma.value = randn(&mut rng, &[4]);
    bn.beta.value = randn(&mut rng, &[4]);
    let x = randn(&mut rng, &[6, 4]);
    let w = randn(&mut rng, &[6, 4]);
    let (_, cache) = bn.forward(&x).unwrap();
    let (dx, dgamma, dbeta) = bn.gradients(cache.as_ref(), &w).unwrap();
    let eval = |b: &BatchNorm<f64>, x: &Tensor<f64>| {
        let mut b = b.clone();
        weighted_sum(&b.forward(x).unwrap().0, &w)
    };
    let mut r = Report::default();
    check(x.data(), dx.data(), |v| eval(&bn, &with(&x, v)), &mut r);
    let g = bn.gamma.value.clone();
    check(g.data(), dgamma.data(), |v| {
        let mut b = bn.clone();
        b.gamma.value = with(&g, v);
        eval(&b, &x)
    }, &mut r);
    let beta = bn.beta.value.clone();
    check(beta.data(), dbeta.data(), |v| {
        let mut b = bn.clone();
        b.beta.value = with(&beta, v);
        eval(&b, &x)
    }, &mut r);
    r
}

pub fn activations() -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = randn(&mut rng, &[4, 5]);
    let w = randn(&mut rng, &[4, 5]);
    let mut r = Report::default();
    let d = relu_backward(&x, &w);
    check(x.data(), d.data(), |v| weighted_sum(&relu_forward(&with(&x, v)), &w), &mut r);
    let y = sigmoid_forward(&x);
    let d = sigmoid_backward(&y, &w);
    check(x.data(), d.data(), |v| weighted_sum(&sigmoid_forward(&with(&x, v)), &w), &mut r);
    r
}

pub fn loss_fn(norm: Norm) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pred = randn(&mut rng, &[3, 2, 4]);
    let target = randn(&mut rng, &[3, 2, 4]);
    let (_, g) = loss(&pred, &target, norm).unwrap();
    let mut r = Report::default();
    check(pred.data(), g.data(), |v| loss(&with(&pred, v), &target, norm).unwrap().0, &mut r);
    r
}

pub fn film() -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let z = randn(&mut rng, &[3, 4]);
    let gamma = randn(&mut rng, &[3, 4]);
    let beta = randn(&mut rng, &[3, 4]);
    let w = randn(&mut rng, &[3, 4]);
    let (dz, dgamma, dbeta) = film_backward(&z, &gamma, &w).unwrap();
    let mut r = Report::default();
    check(z.data(), dz.data(), |v| weighted_sum(&film_condition(&with(&z, v), &gamma, &beta).unwrap(), &w), &mut r);
    check(gamma.data(), dgamma.data(), |v| weighted_sum(&film_condition(&z, &with(&gamma, v), &beta).unwrap(), &w), &mut r);
    check(beta.data(), dbeta.data(), |v| weighted_sum(&film_condition(&z, &gamma, &with(&beta, v)).unwrap(), &w), &mut r);
    r
}

pub fn tiny_arch(conditioning: bool, output_sigmoid: bool) -> ArchDescriptor {
    ArchDescriptor {
        frame_size: 2,
        n_mels: 4,
        n_ids: 2,
        encoder_units: vec![6, 3],
        decoder_units: vec![5],
        cond_hidden: 4,
        conditioning_enabled: conditioning,
        conditioner_output_sigmoid: output_sigmoid,
    }
}

pub fn end_to_end(arch: ArchDescriptor, norm: Norm, seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = IdcaeModel::<f64>::new(arch, &mut rng).unwrap();
    let x = randn(&mut rng, &[6, 2, 4]);
    let labels = one_hot_batch::<f64>(&[0, 1, 1, 0, 1, 0], 2).unwrap();
    let mut target = x.clone();
    // two non-matching rows with a constant target
    for v in &mut target.data_mut()[8..24] {
        *v = 5.0;
    }
    let objective = |m: &IdcaeModel<f64>| {
        let mut m = m.clone();
        let (y, _) = m.forward_train(&x, &labels).unwrap();
        loss(&y, &target, norm).unwrap().0
    };
    let (y, cache) = model.forward_train(&x, &labels).unwrap();
    let (_, g) = loss(&y, &target, norm).unwrap();
    model.backward(&cache, &g).unwrap();

    let snapshot = model.clone();
    let mut grads: Vec<Tensor<f64>> = Vec::new();
    let mut values: Vec<Tensor<f64>> = Vec::new();
    for p in model.parameters_mut() {
        grads.push(p.grad.clone());
        values.push(p.value.clone());
    }
    let mut r = Report::default();
    for (pi, (value, grad)) in values.iter().zip(&grads).enumerate() {
        check(value.data(), grad.data(), |v| {
            let mut m = snapshot.clone();
            m.parameters_mut()[pi].value = with(value, v);
            objective(&m)
        }, &mut r);
    }
    r
}

/// Every check, labelled.
pub fn all() -> Vec<(&'static str, Report)> {
    vec![
        ("dense", dense_layer()),
        ("batch-norm", batchnorm_train_mode()),
        ("relu and sigmoid", activations()),
        ("l1 loss", loss_fn(Norm::L1)),
        ("l2sq loss", loss_fn(Norm::L2Sq)),
        ("film", film()),
        ("tiny idcae, l2sq", end_to_end(tiny_arch(true, true), Norm::L2Sq, 10)),
        ("tiny idcae, l1", end_to_end(tiny_arch(true, true), Norm::L1, 11)),
        ("tiny idcae, linear conditioner output", end_to_end(tiny_arch(true, false), Norm::L2Sq, 12)),
        ("tiny plain autoencoder", end_to_end(tiny_arch(false, true), Norm::L2Sq, 13)),
    ]
}
