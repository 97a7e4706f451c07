//! Dense sigmoid network trained by full-batch gradient descent on a
//! one-vs-all cross-entropy cost.
//!
//! Each weight matrix has shape `out × (in + 1)`; column 0 multiplies the bias
//! unit. Layer activations are stored without the bias unit.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{argmax, Matrix};
use crate::{Error, Result, Scalar};

/// Hidden layers in every classifier.
pub const HIDDEN_LAYERS: usize = 4;
/// Hidden width as a multiple of the input dimension.
pub const HIDDEN_WIDTH_RATIO: f64 = 1.5;
/// Output probabilities are clamped into `[CLAMP, 1 - CLAMP]` before logs.
pub const LOG_CLAMP: f64 = 1e-12;

/// Gain on the uniform Glorot bound for sigmoid units. Without it the signal
/// shrinks roughly fourfold per layer and the four hidden layers stall.
pub const SIGMOID_INIT_GAIN: f64 = 4.0;

/// Rows per partial gradient sum. Partial sums are added in chunk order so the
/// result does not depend on thread scheduling.
const GRAD_CHUNK: usize = 16;

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Hidden width used for input dimension `d`.
pub fn hidden_width(d: usize) -> usize {
    (HIDDEN_WIDTH_RATIO * d as f64).round() as usize
}

/// `[d, h, h, h, h, k]` with `h = round(1.5 d)`.
pub fn topology(d: usize, k: usize) -> Vec<usize> {
    let h = hidden_width(d);
    let mut sizes = vec![d];
    sizes.extend(std::iter::repeat_n(h, HIDDEN_LAYERS));
    sizes.push(k);
    sizes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network<T = f64> {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix<T>>,
    init_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub seed: u64,
    /// Stop early once `|ΔJ|` drops below this value.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 150,
            learning_rate: 0.3,
            l2_lambda: 0.0,
            seed: 0,
            tolerance: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::argument("iterations must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::argument("learning rate must be positive"));
        }
        if !(self.l2_lambda >= 0.0) {
            return Err(Error::argument("l2 lambda must be nonnegative"));
        }
        Ok(())
    }
}

/// `m × d` inputs with `m × K` one-hot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix<T = f64> {
    inputs: Matrix<T>,
    targets: Matrix<T>,
}

impl<T: Scalar> LabeledMatrix<T> {
    pub fn new(inputs: Matrix<T>, targets: Matrix<T>) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::argument("inputs and targets have different row counts"));
        }
        for r in 0..targets.rows() {
            let row = targets.row(r);
            let ones = row.iter().filter(|&&v| v == T::one()).count();
            let zeros = row.iter().filter(|&&v| v == T::zero()).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::argument(format!("target row {r} is not one-hot")));
            }
        }
        Ok(Self { inputs, targets })
    }

    /// Builds the one-hot target matrix from class indices.
    pub fn from_classes(inputs: Matrix<T>, classes: &[usize], k: usize) -> Result<Self> {
        if let Some(&bad) = classes.iter().find(|&&c| c >= k) {
            return Err(Error::argument(format!("class {bad} outside [0, {k})")));
        }
        let targets = Matrix::from_fn(classes.len(), k, |r, c| {
            if classes[r] == c {
                T::one()
            } else {
                T::zero()
            }
        });
        Self::new(inputs, targets)
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inputs(&self) -> &Matrix<T> {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix<T> {
        &self.targets
    }

    pub fn class_of(&self, row: usize) -> usize {
        argmax(self.targets.row(row))
    }
}

/// Per-layer activations of one forward pass, input first.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations<T> {
    pub layers: Vec<Vec<T>>,
}

impl<T: Scalar> Activations<T> {
    pub fn output(&self) -> &[T] {
        self.layers.last().expect("at least one layer")
    }
}

fn with_bias<T: Scalar>(a: &[T]) -> Vec<T> {
    let mut v = Vec::with_capacity(a.len() + 1);
    v.push(T::one());
    v.extend_from_slice(a);
    v
}

impl<T: Scalar> Network<T> {
    /// Uniform initialization in `±4·sqrt(6 / (fan_in + fan_out))` per transition.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::argument(
                "a network needs at least two layers of positive size",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = layer_sizes
            .windows(2)
            .map(|w| {
                let eps = init_bound(w[0], w[1]);
                Matrix::from_fn(w[1], w[0] + 1, |_, _| {
                    T::lit(rng.random_range(-eps..=eps))
                })
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            init_seed: seed,
        })
    }

    /// Assembles a network from explicit weights; shapes are checked.
    pub fn from_weights(layer_sizes: Vec<usize>, weights: Vec<Matrix<T>>) -> Result<Self> {
        if layer_sizes.len() < 2 || weights.len() != layer_sizes.len() - 1 {
            return Err(Error::argument("weight count does not match layer count"));
        }
        for (z, w) in weights.iter().enumerate() {
            if w.shape() != (layer_sizes[z + 1], layer_sizes[z] + 1) {
                return Err(Error::argument(format!(
                    "transition {z}: expected {}x{}, got {}x{}",
                    layer_sizes[z + 1],
                    layer_sizes[z] + 1,
                    w.rows(),
                    w.cols()
                )));
            }
            if !w.is_finite() {
                return Err(Error::argument(format!("transition {z} has non-finite weights")));
            }
        }
        Ok(Self {
            layer_sizes,
            weights,
            init_seed: 0,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn weights(&self) -> &[Matrix<T>] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix<T>] {
        &mut self.weights
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Total layer count including input and output.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn forward(&self, input: &[T]) -> Result<Activations<T>> {
        if input.len() != self.input_dim() {
            return Err(Error::argument(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut layers = Vec::with_capacity(self.depth());
        layers.push(input.to_vec());
        for theta in &self.weights {
            let a = with_bias(layers.last().unwrap());
            layers.push(theta.mul_vec(&a).into_iter().map(sigmoid).collect());
        }
        Ok(Activations { layers })
    }

    /// Argmax class and the raw output vector.
    pub fn predict(&self, input: &[T]) -> Result<(usize, Vec<T>)> {
        let out = self.forward(input)?.layers.pop().unwrap();
        Ok((argmax(&out), out))
    }

    fn check_data(&self, data: &LabeledMatrix<T>) -> Result<()> {
        if data.is_empty() {
            return Err(Error::argument("empty data set"));
        }
        if data.inputs.cols() != self.input_dim() || data.targets.cols() != self.output_dim() {
            return Err(Error::argument(format!(
                "data is {}→{}, network is {}→{}",
                data.inputs.cols(),
                data.targets.cols(),
                self.input_dim(),
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// Sum of squared non-bias weights.
    fn penalty(&self) -> T {
        self.weights
            .iter()
            .map(|w| {
                (0..w.rows())
                    .map(|r| w.row(r)[1..].iter().map(|&v| v * v).sum::<T>())
                    .sum::<T>()
            })
            .sum()
    }

    /// Mean one-vs-all cross-entropy plus `(λ/2)·Σθ²` over non-bias weights.
    pub fn cost(&self, data: &LabeledMatrix<T>, l2_lambda: f64) -> Result<T> {
        self.check_data(data)?;
        let mut total = T::zero();
        for r in 0..data.len() {
            let act = self.forward(data.inputs.row(r))?;
            total += example_loss(act.output(), data.targets.row(r));
        }
        Ok(self.regularize(total / T::count(data.len()), l2_lambda))
    }

    fn regularize(&self, cost: T, l2_lambda: f64) -> T {
        if l2_lambda > 0.0 {
            cost + T::lit(l2_lambda / 2.0) * self.penalty()
        } else {
            cost
        }
    }

    /// Analytic gradient of [`Network::cost`], one matrix per transition.
    pub fn gradients(&self, data: &LabeledMatrix<T>, l2_lambda: f64) -> Result<Vec<Matrix<T>>> {
        Ok(self.cost_and_gradients(data, l2_lambda)?.1)
    }

    /// Cost, gradient and correct-prediction count in one pass over the data.
    pub fn cost_and_gradients(
        &self,
        data: &LabeledMatrix<T>,
        l2_lambda: f64,
    ) -> Result<(T, Vec<Matrix<T>>, usize)> {
        self.check_data(data)?;
        let rows: Vec<usize> = (0..data.len()).collect();
        let partials: Vec<Result<Accumulator<T>>> = rows
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut acc = Accumulator::zeros(self);
                for &r in chunk {
                    acc.add_example(self, data.inputs.row(r), data.targets.row(r))?;
                }
                Ok(acc)
            })
            .collect();
        let mut total = Accumulator::zeros(self);
        for p in partials {
            total.merge(p?);
        }
        let m = T::count(data.len());
        let lambda = T::lit(l2_lambda);
        let mut grads = total.deltas;
        for (g, theta) in grads.iter_mut().zip(&self.weights) {
            g.scale(T::one() / m);
            if l2_lambda > 0.0 {
                for r in 0..g.rows() {
                    for c in 1..g.cols() {
                        g.set(r, c, g.get(r, c) + lambda * theta.get(r, c));
                    }
                }
            }
        }
        let cost = self.regularize(total.loss / m, l2_lambda);
        Ok((cost, grads, total.correct))
    }

    /// Classification accuracy in percent.
    pub fn accuracy(&self, data: &LabeledMatrix<T>) -> Result<f64> {
        self.check_data(data)?;
        let mut correct = 0;
        for r in 0..data.len() {
            if self.predict(data.inputs.row(r))?.0 == data.class_of(r) {
                correct += 1;
            }
        }
        Ok(100.0 * correct as f64 / data.len() as f64)
    }

    /// Full-batch gradient descent for a fixed iteration budget.
    ///
    /// Record `i` holds the cost and accuracies after the `i`-th update.
    pub fn train(
        mut self,
        data: &LabeledMatrix<T>,
        config: &TrainConfig,
        monitor: Option<&LabeledMatrix<T>>,
    ) -> Result<(Self, TrainingReport)> {
        config.validate()?;
        self.check_data(data)?;
        if let Some(m) = monitor {
            self.check_data(m)?;
        }
        let start = Instant::now();
        let alpha = T::lit(config.learning_rate);
        let (mut prev_cost, mut grads, _) = self.cost_and_gradients(data, config.l2_lambda)?;
        if !prev_cost.is_finite() {
            return Err(Error::Divergence {
                iteration: 0,
                cost: prev_cost.as_f64(),
            });
        }
        let mut records = Vec::with_capacity(config.iterations);
        for iteration in 1..=config.iterations {
            for (theta, g) in self.weights.iter_mut().zip(&grads) {
                theta.axpy(-alpha, g);
            }
            let (cost, next, correct) = self.cost_and_gradients(data, config.l2_lambda)?;
            if !cost.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::Divergence {
                    iteration,
                    cost: cost.as_f64(),
                });
            }
            records.push(IterationRecord {
                iteration,
                cost: cost.as_f64(),
                train_ca: 100.0 * correct as f64 / data.len() as f64,
                test_ca: monitor.map(|m| self.accuracy(m)).transpose()?,
            });
            grads = next;
            if let Some(tol) = config.tolerance {
                if (prev_cost - cost).abs().as_f64() < tol {
                    break;
                }
            }
            prev_cost = cost;
        }
        let report = TrainingReport {
            network: String::new(),
            records,
            elapsed: start.elapsed(),
        };
        Ok((self, report))
    }
}

fn init_bound(fan_in: usize, fan_out: usize) -> f64 {
    SIGMOID_INIT_GAIN * (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn example_loss<T: Scalar>(h: &[T], y: &[T]) -> T {
    let lo = T::lit(LOG_CLAMP);
    let hi = T::one() - lo;
    h.iter()
        .zip(y)
        .map(|(&h, &y)| {
            let h = h.max(lo).min(hi);
            -(y * h.ln() + (T::one() - y) * (T::one() - h).ln())
        })
        .sum()
}

struct Accumulator<T> {
    deltas: Vec<Matrix<T>>,
    loss: T,
    correct: usize,
}

impl<T: Scalar> Accumulator<T> {
    fn zeros(net: &Network<T>) -> Self {
        Self {
            deltas: net
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            loss: T::zero(),
            correct: 0,
        }
    }

    fn add_example(&mut self, net: &Network<T>, x: &[T], y: &[T]) -> Result<()> {
        let act = net.forward(x)?;
        self.loss += example_loss(act.output(), y);
        if argmax(act.output()) == argmax(y) {
            self.correct += 1;
        }
        let mut delta = output_delta(act.output(), y)?;
        for z in (0..net.weights.len()).rev() {
            self.deltas[z].add_outer(&delta, &with_bias(&act.layers[z]));
            if z > 0 {
                delta = hidden_delta(&delta, &net.weights[z], &act.layers[z])?;
            }
        }
        Ok(())
    }

    fn merge(&mut self, other: Self) {
        for (a, b) in self.deltas.iter_mut().zip(&other.deltas) {
            a.axpy(T::one(), b);
        }
        self.loss += other.loss;
        self.correct += other.correct;
    }
}

/// Output-layer error `a - y`.
pub fn output_delta<T: Scalar>(a_out: &[T], y: &[T]) -> Result<Vec<T>> {
    if a_out.len() != y.len() {
        return Err(Error::argument("output and target lengths differ"));
    }
    Ok(a_out.iter().zip(y).map(|(&a, &y)| a - y).collect())
}

/// Back-propagated error of a hidden layer: `(Θ without bias)ᵀ δ ⊙ a ⊙ (1 - a)`.
pub fn hidden_delta<T: Scalar>(delta_next: &[T], theta: &Matrix<T>, a: &[T]) -> Result<Vec<T>> {
    if theta.rows() != delta_next.len() || theta.cols() != a.len() + 1 {
        return Err(Error::argument(format!(
            "theta is {}x{}, delta has {} and activation {} entries",
            theta.rows(),
            theta.cols(),
            delta_next.len(),
            a.len()
        )));
    }
    let back = theta.mul_vec_transposed(delta_next);
    Ok(back[1..]
        .iter()
        .zip(a)
        .map(|(&b, &a)| b * a * (T::one() - a))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub train_ca: f64,
    pub test_ca: Option<f64>,
}

/// Per-iteration learning and cost curves of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub network: String,
    pub records: Vec<IterationRecord>,
    /// Wall-clock training time; not persisted.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl TrainingReport {
    pub fn named(mut self, network: impl Into<String>) -> Self {
        self.network = network.into();
        self
    }

    pub fn final_record(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.cost)
    }
}
