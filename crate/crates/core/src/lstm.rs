//! Per-feature LSTM next-level predictors used to synthesize new subjects.
//!
//! Every feature column gets its own single-layer LSTM. Inputs are one-hot
//! quantization levels, outputs are logits over the same levels, and training
//! minimizes the summed softmax cross-entropy of next-level prediction by
//! backpropagation through time over whole sequences.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dnn::sigmoid;
use crate::features::FeatureVector;
use crate::linalg::{argmax, Matrix};
use crate::quantizer::{one_hot, QuantizedSeries, QuantizerModel};
use crate::signal::Gesture;
use crate::{Error, Result, Scalar};

/// Input, recurrent and bias parameters of one gate (or the candidate block).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams<T> {
    /// `hidden × input`
    pub input_weights: Matrix<T>,
    /// `hidden × hidden`
    pub recurrent_weights: Matrix<T>,
    /// `hidden × 1`
    pub bias: Matrix<T>,
}

impl<T: Scalar> GateParams<T> {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_weights: Matrix::zeros(hidden, input_dim),
            recurrent_weights: Matrix::zeros(hidden, hidden),
            bias: Matrix::zeros(hidden, 1),
        }
    }

    fn preactivation(&self, x: &[T], h: &[T]) -> Vec<T> {
        let wx = self.input_weights.mul_vec(x);
        let wh = self.recurrent_weights.mul_vec(h);
        wx.iter()
            .zip(&wh)
            .zip(self.bias.as_slice())
            .map(|((&a, &b), &c)| a + b + c)
            .collect()
    }

    fn tensors(&self) -> [&Matrix<T>; 3] {
        [&self.input_weights, &self.recurrent_weights, &self.bias]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix<T>; 3] {
        [
            &mut self.input_weights,
            &mut self.recurrent_weights,
            &mut self.bias,
        ]
    }
}

/// Parameters of one LSTM cell plus its output projection to level logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams<T = f64> {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub input_gate: GateParams<T>,
    pub forget_gate: GateParams<T>,
    pub output_gate: GateParams<T>,
    pub candidate: GateParams<T>,
    /// `input_dim × hidden`
    pub output_weights: Matrix<T>,
    /// `input_dim × 1`
    pub output_bias: Matrix<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            input_gate: GateParams::zeros(input_dim, hidden_dim),
            forget_gate: GateParams::zeros(input_dim, hidden_dim),
            output_gate: GateParams::zeros(input_dim, hidden_dim),
            candidate: GateParams::zeros(input_dim, hidden_dim),
            output_weights: Matrix::zeros(input_dim, hidden_dim),
            output_bias: Matrix::zeros(input_dim, 1),
        }
    }

    /// Every entry drawn uniformly from `[-range, range]`.
    pub fn random(input_dim: usize, hidden_dim: usize, range: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        for t in p.tensors_mut() {
            for v in t.as_mut_slice() {
                *v = T::lit(rng.random_range(-range..=range));
            }
        }
        p
    }

    /// All parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<&Matrix<T>> {
        let mut out = Vec::with_capacity(14);
        for g in [&self.input_gate, &self.forget_gate, &self.output_gate, &self.candidate] {
            out.extend(g.tensors());
        }
        out.push(&self.output_weights);
        out.push(&self.output_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut out = Vec::with_capacity(14);
        for g in [
            &mut self.input_gate,
            &mut self.forget_gate,
            &mut self.output_gate,
            &mut self.candidate,
        ] {
            out.extend(g.tensors_mut());
        }
        out.push(&mut self.output_weights);
        out.push(&mut self.output_bias);
        out
    }

    fn axpy(&mut self, alpha: T, other: &LstmParams<T>) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.axpy(alpha, b);
        }
    }
}

/// Hidden and cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> LstmState<T> {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: vec![T::zero(); hidden_dim],
            c: vec![T::zero(); hidden_dim],
        }
    }
}

/// Intermediate values of one step, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace<T> {
    pub input: Vec<T>,
    pub prev: LstmState<T>,
    pub input_gate: Vec<T>,
    pub forget_gate: Vec<T>,
    pub output_gate: Vec<T>,
    pub candidate: Vec<T>,
    pub cell_tanh: Vec<T>,
    pub next: LstmState<T>,
    pub logits: Vec<T>,
}

/// One gated update: returns the new state and the output logits.
pub fn lstm_step<T: Scalar>(
    params: &LstmParams<T>,
    state: &LstmState<T>,
    input: &[T],
) -> Result<StepTrace<T>> {
    if input.len() != params.input_dim {
        return Err(Error::argument(format!(
            "input has length {}, cell expects {}",
            input.len(),
            params.input_dim
        )));
    }
    if state.h.len() != params.hidden_dim || state.c.len() != params.hidden_dim {
        return Err(Error::argument("state size does not match hidden dimension"));
    }
    let gate = |g: &GateParams<T>| -> Vec<T> {
        g.preactivation(input, &state.h).into_iter().map(sigmoid).collect()
    };
    let i = gate(&params.input_gate);
    let f = gate(&params.forget_gate);
    let o = gate(&params.output_gate);
    let g: Vec<T> = params
        .candidate
        .preactivation(input, &state.h)
        .into_iter()
        .map(|v| v.tanh())
        .collect();
    let c: Vec<T> = (0..params.hidden_dim)
        .map(|k| f[k] * state.c[k] + i[k] * g[k])
        .collect();
    let cell_tanh: Vec<T> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<T> = o.iter().zip(&cell_tanh).map(|(&o, &t)| o * t).collect();
    let logits: Vec<T> = params
        .output_weights
        .mul_vec(&h)
        .into_iter()
        .zip(params.output_bias.as_slice())
        .map(|(a, &b)| a + b)
        .collect();
    Ok(StepTrace {
        input: input.to_vec(),
        prev: state.clone(),
        input_gate: i,
        forget_gate: f,
        output_gate: o,
        candidate: g,
        cell_tanh,
        next: LstmState { h, c },
        logits,
    })
}

/// An LSTM cell with its running state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell<T = f64> {
    pub params: LstmParams<T>,
    pub state: LstmState<T>,
}

impl<T: Scalar> LstmCell<T> {
    pub fn new(params: LstmParams<T>) -> Self {
        let state = LstmState::zeros(params.hidden_dim);
        Self { params, state }
    }

    /// Advances the state and returns the logits.
    pub fn step(&mut self, input: &[T]) -> Result<Vec<T>> {
        let trace = lstm_step(&self.params, &self.state, input)?;
        self.state = trace.next;
        Ok(trace.logits)
    }

    /// Clears `h` and `c`; parameters are untouched.
    pub fn reset_state(&mut self) {
        self.state = LstmState::zeros(self.params.hidden_dim);
    }
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exp: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exp.iter().copied().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

fn cross_entropy<T: Scalar>(probs: &[T], target: usize) -> T {
    -probs[target].max(T::min_positive_value()).ln()
}

/// Summed next-level cross-entropy of `levels` from a zero state.
pub fn sequence_loss<T: Scalar>(params: &LstmParams<T>, levels: &[usize]) -> Result<T> {
    let mut state = LstmState::zeros(params.hidden_dim);
    let mut loss = T::zero();
    for w in levels.windows(2) {
        let trace = lstm_step(params, &state, &one_hot(w[0], params.input_dim)?)?;
        loss += cross_entropy(&softmax(&trace.logits), w[1]);
        state = trace.next;
    }
    Ok(loss)
}

/// Loss and full BPTT gradient over one sequence, starting from a zero state.
pub fn sequence_gradient<T: Scalar>(
    params: &LstmParams<T>,
    levels: &[usize],
) -> Result<(T, LstmParams<T>)> {
    if levels.len() < 2 {
        return Err(Error::data("a training sequence needs at least 2 levels"));
    }
    let hd = params.hidden_dim;
    let mut state = LstmState::zeros(hd);
    let mut traces = Vec::with_capacity(levels.len() - 1);
    let mut probs = Vec::with_capacity(levels.len() - 1);
    let mut loss = T::zero();
    for w in levels.windows(2) {
        let trace = lstm_step(params, &state, &one_hot(w[0], params.input_dim)?)?;
        let p = softmax(&trace.logits);
        loss += cross_entropy(&p, w[1]);
        state = trace.next.clone();
        traces.push(trace);
        probs.push(p);
    }

    let mut grad = LstmParams::zeros(params.input_dim, hd);
    let mut dh_next = vec![T::zero(); hd];
    let mut dc_next = vec![T::zero(); hd];
    for (t, trace) in traces.iter().enumerate().rev() {
        let mut dlogits = probs[t].clone();
        dlogits[levels[t + 1]] -= T::one();
        grad.output_weights.add_outer(&dlogits, &trace.next.h);
        grad.output_bias.axpy(T::one(), &column(&dlogits));

        let back = params.output_weights.mul_vec_transposed(&dlogits);
        let dh: Vec<T> = back.iter().zip(&dh_next).map(|(&a, &b)| a + b).collect();

        let one = T::one();
        let mut dz_i = vec![T::zero(); hd];
        let mut dz_f = vec![T::zero(); hd];
        let mut dz_o = vec![T::zero(); hd];
        let mut dz_g = vec![T::zero(); hd];
        for k in 0..hd {
            let (i, f, o, g) = (
                trace.input_gate[k],
                trace.forget_gate[k],
                trace.output_gate[k],
                trace.candidate[k],
            );
            let tc = trace.cell_tanh[k];
            let dc = dh[k] * o * (one - tc * tc) + dc_next[k];
            dz_o[k] = dh[k] * tc * o * (one - o);
            dz_i[k] = dc * g * i * (one - i);
            dz_f[k] = dc * trace.prev.c[k] * f * (one - f);
            dz_g[k] = dc * i * (one - g * g);
            dc_next[k] = dc * f;
        }

        let mut dh_prev = vec![T::zero(); hd];
        for (gp, gg, dz) in [
            (&params.input_gate, &mut grad.input_gate, &dz_i),
            (&params.forget_gate, &mut grad.forget_gate, &dz_f),
            (&params.output_gate, &mut grad.output_gate, &dz_o),
            (&params.candidate, &mut grad.candidate, &dz_g),
        ] {
            gg.input_weights.add_outer(dz, &trace.input);
            gg.recurrent_weights.add_outer(dz, &trace.prev.h);
            gg.bias.axpy(T::one(), &column(dz));
            for (acc, v) in dh_prev.iter_mut().zip(gp.recurrent_weights.mul_vec_transposed(dz)) {
                *acc += v;
            }
        }
        dh_next = dh_prev;
    }
    Ok((loss, grad))
}

fn column<T: Scalar>(v: &[T]) -> Matrix<T> {
    Matrix::from_vec(v.len(), 1, v.to_vec()).expect("column shape")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Draw each level from the softmax distribution.
    Softmax,
    /// Always take the most probable level.
    Argmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub init_range: f64,
    pub sampling: Sampling,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            epochs: 200,
            learning_rate: 0.05,
            seed: 0,
            init_range: 0.08,
            sampling: Sampling::Softmax,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::argument("LSTM hidden dimension must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::argument("LSTM epochs must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::argument("LSTM learning rate must be positive"));
        }
        Ok(())
    }
}

/// Trained predictor for one feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGenerator<T = f64> {
    pub feature_index: usize,
    pub params: LstmParams<T>,
    /// Mean per-step training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

impl<T: Scalar> FeatureGenerator<T> {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(f64::NAN)
    }

    /// Next-level distribution after feeding `history` from a reset state.
    pub fn next_distribution(&self, history: &[usize]) -> Result<Vec<T>> {
        let mut cell = LstmCell::new(self.params.clone());
        let mut logits = Vec::new();
        for &level in history {
            logits = cell.step(&one_hot(level, self.params.input_dim)?)?;
        }
        if logits.is_empty() {
            return Err(Error::argument("history must contain at least one level"));
        }
        Ok(softmax(&logits))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel<T = f64> {
    pub levels: usize,
    pub hidden_dim: usize,
    pub config: LstmConfig,
    /// Gestures whose series were seen during training.
    pub gestures: Vec<Gesture>,
    pub generators: Vec<FeatureGenerator<T>>,
}

impl<T: Scalar> GeneratorModel<T> {
    pub fn final_losses(&self) -> Vec<f64> {
        self.generators.iter().map(|g| g.final_loss()).collect()
    }
}

fn train_feature<T: Scalar>(
    feature_index: usize,
    series: &[&QuantizedSeries],
    levels: usize,
    config: &LstmConfig,
) -> Result<FeatureGenerator<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(feature_index as u64));
    let mut params = LstmParams::random(levels, config.hidden_dim, config.init_range, &mut rng);
    let steps: usize = series.iter().map(|s| s.levels.len() - 1).sum();
    let lr = T::lit(config.learning_rate);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let mut total = T::zero();
        for s in series {
            let (loss, grad) = sequence_gradient(&params, &s.levels)?;
            total += loss;
            params.axpy(-lr, &grad);
        }
        let mean = total.as_f64() / steps as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence {
                iteration: epoch_losses.len() + 1,
                cost: mean,
            });
        }
        epoch_losses.push(mean);
    }
    Ok(FeatureGenerator {
        feature_index,
        params,
        epoch_losses,
    })
}

/// Trains one generator per feature index present in `series`.
///
/// Each feature uses its own random stream (`seed + feature_index`), so the
/// parallel result equals sequential training. The state is reset at the
/// start of every sequence.
pub fn train_generator<T: Scalar>(
    series: &[QuantizedSeries],
    levels: usize,
    config: &LstmConfig,
) -> Result<GeneratorModel<T>> {
    config.validate()?;
    if levels < 2 {
        return Err(Error::argument("need at least 2 levels"));
    }
    if series.is_empty() {
        return Err(Error::data("no series to train on"));
    }
    let mut by_feature: BTreeMap<usize, Vec<&QuantizedSeries>> = BTreeMap::new();
    let mut gestures = BTreeSet::new();
    for s in series {
        if s.levels.len() < 2 {
            return Err(Error::data(format!(
                "series for subject {} {} feature {} has fewer than 2 levels",
                s.subject_id, s.gesture, s.feature_index
            )));
        }
        if let Some(&bad) = s.levels.iter().find(|&&l| l >= levels) {
            return Err(Error::data(format!("level {bad} outside [0, {levels})")));
        }
        by_feature.entry(s.feature_index).or_default().push(s);
        gestures.insert(s.gesture);
    }
    let work: Vec<(usize, Vec<&QuantizedSeries>)> = by_feature.into_iter().collect();
    let generators = work
        .par_iter()
        .map(|(j, s)| train_feature(*j, s, levels, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneratorModel {
        levels,
        hidden_dim: config.hidden_dim,
        config: config.clone(),
        gestures: gestures.into_iter().collect(),
        generators,
    })
}

fn sample_level<T: Scalar>(probs: &[T], sampling: Sampling, rng: &mut ChaCha8Rng) -> usize {
    match sampling {
        Sampling::Argmax => argmax(probs),
        Sampling::Softmax => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, p) in probs.iter().enumerate() {
                acc += p.as_f64();
                if u < acc {
                    return k;
                }
            }
            probs.len() - 1
        }
    }
}

/// Synthesizes `length` repetitions of every trained gesture for a new subject.
///
/// For each gesture one real subject of `template` is drawn; its first level
/// of each feature primes the reset cell, and the following `length` levels
/// are sampled autoregressively and mapped back to bin centers.
pub fn generate_subject<T: Scalar>(
    model: &GeneratorModel<T>,
    quantizer: &QuantizerModel<T>,
    template: &[FeatureVector<T>],
    new_subject_id: u32,
    length: usize,
    seed: u64,
) -> Result<Vec<FeatureVector<T>>> {
    if length == 0 {
        return Err(Error::argument("synthetic length must be at least 1"));
    }
    if quantizer.levels != model.levels {
        return Err(Error::argument("generator and quantizer use different level counts"));
    }
    let d = quantizer.dimension();
    if model.generators.len() != d
        || model.generators.iter().enumerate().any(|(j, g)| g.feature_index != j)
    {
        return Err(Error::argument("generator does not cover every feature column"));
    }

    // first repetition of every real (gesture, subject) pair
    let mut firsts: BTreeMap<Gesture, BTreeMap<u32, &FeatureVector<T>>> = BTreeMap::new();
    for fv in template.iter().filter(|f| !f.synthetic) {
        if !model.gestures.contains(&fv.label.gesture()) {
            return Err(Error::argument(format!(
                "gesture {} was not seen by the generator",
                fv.label.gesture()
            )));
        }
        let slot = firsts.entry(fv.label.gesture()).or_default();
        match slot.get(&fv.subject_id) {
            Some(prev) if prev.repetition_index <= fv.repetition_index => {}
            _ => {
                slot.insert(fv.subject_id, fv);
            }
        }
    }

    let mut choice_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(model.gestures.len() * length);
    for (gi, &gesture) in model.gestures.iter().enumerate() {
        let subjects = firsts.get(&gesture).ok_or_else(|| {
            Error::argument(format!("template has no real rows for gesture {gesture}"))
        })?;
        let pick = choice_rng.random_range(0..subjects.len());
        let primer = subjects.values().nth(pick).expect("index in range");

        let columns: Vec<Vec<T>> = (0..d)
            .into_par_iter()
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1 + (gi * d + j) as u64);
                let mut cell = LstmCell::new(model.generators[j].params.clone());
                let mut level = quantizer.quantize(primer.values[j], j);
                let mut values = Vec::with_capacity(length);
                for _ in 0..length {
                    let logits = cell.step(&one_hot(level, model.levels)?)?;
                    level = sample_level(&softmax(&logits), model.config.sampling, &mut rng);
                    values.push(quantizer.dequantize(level, j)?);
                }
                Ok(values)
            })
            .collect::<Result<_>>()?;

        for rep in 0..length {
            out.push(FeatureVector {
                values: columns.iter().map(|c| c[rep]).collect(),
                label: gesture.into(),
                subject_id: new_subject_id,
                repetition_index: rep as u32,
                synthetic: true,
            });
        }
    }
    Ok(out)
}
