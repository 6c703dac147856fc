//! Central finite differences.

use idcae::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-5;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-4)
}

#[derive(Default, Debug)]
pub struct Report {
    pub max_rel: f64,
    pub checked: usize,
    pub skipped: usize,
}

impl Report {
    pub fn passes(&self) -> bool {
        self.checked > 0 && self.skipped * 20 <= self.checked && self.max_rel <= TOL
    }

    pub fn assert_ok(&self, what: &str) {
        println!("{what}: max rel err {:.3e} over {} coords ({} kink-adjacent skipped)", self.max_rel, self.checked, self.skipped);
        assert!(self.checked > 0, "{what}: nothing checked");
        assert!(self.skipped * 20 <= self.checked, "{what}: too many kink-adjacent coordinates");
        assert!(self.max_rel <= TOL, "{what}: max relative error {:.3e} > {TOL:e}", self.max_rel);
    }
}

/// Compares `analytic[i]` against the central difference of `f` in coordinate `i`
/// of `x`. Coordinates where one-sided slopes disagree sit on a kink and are skipped.
pub fn check(x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64, report: &mut Report) {
    assert_eq!(x.len(), analytic.len());
    let f0 = f(x);
    let mut buf = x.to_vec();
    for i in 0..x.len() {
        buf[i] = x[i] + H;
        let fp = f(&buf);
        buf[i] = x[i] - H;
        let fm = f(&buf);
        buf[i] = x[i];
        let central = (fp - fm) / (2.0 * H);
        let (fwd, bwd) = ((fp - f0) / H, (f0 - fm) / H);
        if (fwd - bwd).abs() > 1e-3 * central.abs().max(1.0) {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        report.max_rel = report.max_rel.max(rel_err(analytic[i], central));
    }
}

pub fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

pub fn weighted_sum(y: &Tensor<f64>, w: &Tensor<f64>) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

pub fn with(t: &Tensor<f64>, v: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(t.shape(), v.to_vec()).unwrap()
}

