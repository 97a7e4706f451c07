// Central finite differences over every parameter of a network or LSTM.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semg_core::dnn::{LabeledMatrix, Network};
use semg_core::linalg::Matrix;
use semg_core::lstm::{sequence_gradient, sequence_loss, LstmParams};

/// Analytic and numeric gradients flattened in the same order.
pub struct Comparison {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl Comparison {
    /// `‖a − n‖₂ / (‖a‖₂ + ‖n‖₂)`.
    pub fn relative_error(&self) -> f64 {
        let mut diff = 0.0;
        let mut na = 0.0;
        let mut nn = 0.0;
        for (a, n) in self.analytic.iter().zip(&self.numeric) {
            diff += (a - n) * (a - n);
            na += a * a;
            nn += n * n;
        }
        diff.sqrt() / (na.sqrt() + nn.sqrt()).max(1e-300)
    }

    /// Worst entry of `|a − n| / max(|a|, |n|, 1e-8)`.
    pub fn max_elementwise_error(&self) -> f64 {
        self.analytic
            .iter()
            .zip(&self.numeric)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self) -> f64 {
        self.analytic
            .iter()
            .zip(&self.numeric)
            .map(|(a, n)| (a - n).abs())
            .fold(0.0, f64::max)
    }
}

/// Seeded inputs and one-hot targets for an `m`-row problem.
pub fn toy_data(m: usize, d: usize, k: usize, seed: u64) -> LabeledMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::from_fn(m, d, |_, _| rng.random_range(-1.0..1.0));
    let classes: Vec<usize> = (0..m).map(|i| i % k).collect();
    LabeledMatrix::from_classes(x, &classes, k).unwrap()
}

pub fn dnn(net: &Network<f64>, data: &LabeledMatrix<f64>, lambda: f64, h: f64) -> Comparison {
    let analytic: Vec<f64> = net
        .gradients(data, lambda)
        .unwrap()
        .iter()
        .flat_map(|g| g.as_slice().to_vec())
        .collect();
    let mut numeric = Vec::with_capacity(analytic.len());
    let mut probe = net.clone();
    for l in 0..net.weights().len() {
        for i in 0..net.weights()[l].as_slice().len() {
            let orig = probe.weights()[l].as_slice()[i];
            probe.weights_mut()[l].as_mut_slice()[i] = orig + h;
            let up = probe.cost(data, lambda).unwrap();
            probe.weights_mut()[l].as_mut_slice()[i] = orig - h;
            let down = probe.cost(data, lambda).unwrap();
            probe.weights_mut()[l].as_mut_slice()[i] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    Comparison { analytic, numeric }
}

pub fn lstm(params: &LstmParams<f64>, levels: &[usize], h: f64) -> Comparison {
    let (_, grad) = sequence_gradient(params, levels).unwrap();
    let analytic: Vec<f64> = grad.tensors().iter().flat_map(|t| t.as_slice().to_vec()).collect();
    let mut numeric = Vec::with_capacity(analytic.len());
    let mut probe = params.clone();
    let count = params.tensors().len();
    for t in 0..count {
        let len = params.tensors()[t].as_slice().len();
        for i in 0..len {
            let orig = params.tensors()[t].as_slice()[i];
            probe.tensors_mut()[t].as_mut_slice()[i] = orig + h;
            let up = sequence_loss(&probe, levels).unwrap();
            probe.tensors_mut()[t].as_mut_slice()[i] = orig - h;
            let down = sequence_loss(&probe, levels).unwrap();
            probe.tensors_mut()[t].as_mut_slice()[i] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    Comparison { analytic, numeric }
}
