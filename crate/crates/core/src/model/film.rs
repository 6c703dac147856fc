use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// `gamma * z + beta` row by row.
pub fn film_condition<T: Real>(z: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<Tensor<T>> {
    if z.shape() != gamma.shape() || z.shape() != beta.shape() {
        return Err(Error::Shape(format!(
            "film: z {:?}, gamma {:?}, beta {:?}",
            z.shape(),
            gamma.shape(),
            beta.shape()
        )));
    }
    let mut out = z.clone();
    for ((o, &g), &b) in out.data_mut().iter_mut().zip(gamma.data()).zip(beta.data()) {
        *o = g * *o + b;
    }
    Ok(out)
}

/// Returns `(dz, dgamma, dbeta)` for upstream gradient `dh`.
pub fn film_backward<T: Real>(
    z: &Tensor<T>,
    gamma: &Tensor<T>,
    dh: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    if z.shape() != dh.shape() || gamma.shape() != dh.shape() {
        return Err(Error::Shape("film backward shapes differ".into()));
    }
    let mut dz = dh.clone();
    let mut dgamma = dh.clone();
    for ((dzv, dgv), (&g, &zv)) in dz.data_mut().iter_mut().zip(dgamma.data_mut()).zip(gamma.data().iter().zip(z.data())) {
        *dzv *= g;
        *dgv *= zv;
    }
    Ok((dz, dgamma, dh.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_modulation() {
        let z = Tensor::<f64>::from_rows(&[vec![1.5, -2.0], vec![0.0, 3.0]]);
        let out = film_condition(&z, &Tensor::full(&[2, 2], 1.0), &Tensor::zeros(&[2, 2])).unwrap();
        assert_eq!(out, z);
        assert!(film_condition(&z, &Tensor::full(&[1, 2], 1.0), &Tensor::zeros(&[2, 2])).is_err());
    }
}
