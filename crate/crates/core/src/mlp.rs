//! Single-hidden-layer perceptron trained by back-propagation with momentum.
//!
//! Weight matrices are stored row-major with the bias in column 0, so the
//! hidden pre-activation is `O_j = sum_{i=0..N} w_ji * x_i` with `x_0 = 1`.
//! The objective is the mean squared error over instances and output units.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("input has {found} values, network expects {expected}")]
    Arity { expected: usize, found: usize },
    #[error("predictions and targets differ in length")]
    LengthMismatch,
    #[error("cannot train on an empty training set")]
    EmptyTrainingSet,
    #[error("training diverged (non-finite error) in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Transfer functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Linear,
    Sigmoid,
    /// Standard `tanh`.
    Hyperbolic,
    /// 1 for `x >= 0`, else 0.
    HardLimit,
    /// 1 for `x >= 0`, else -1.
    SymmetricHardLimit,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Sigmoid => sigmoid(x),
            Activation::Hyperbolic => x.tanh(),
            Activation::HardLimit => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::SymmetricHardLimit => {
                if x >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

pub fn activation(kind: Activation, x: f64) -> f64 {
    kind.apply(x)
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpTopology {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// Sigmoid or linear; the hidden layer is always sigmoid.
    pub output_activation: Activation,
}

impl MlpTopology {
    /// Hidden size `floor((inputs + outputs) / 2)`, at least 1.
    pub fn for_data(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            hidden: ((inputs + outputs) / 2).max(1),
            outputs,
            output_activation: Activation::Sigmoid,
        }
    }

    fn validate(&self) -> Result<(), MlpError> {
        if self.inputs == 0 || self.hidden == 0 || self.outputs == 0 {
            return Err(MlpError::Config(format!("layer sizes must be positive: {self:?}")));
        }
        if !matches!(self.output_activation, Activation::Sigmoid | Activation::Linear) {
            return Err(MlpError::Config("output activation must be sigmoid or linear".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub topology: MlpTopology,
    /// `hidden x (inputs + 1)`, bias in column 0.
    pub w_hidden: Vec<f64>,
    /// `outputs x (hidden + 1)`, bias in column 0.
    pub w_output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub hidden: Vec<f64>,
    pub scores: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// Gradient of the mean squared error, same layout as the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

impl MlpModel {
    pub fn zeros(topology: MlpTopology) -> Self {
        Self {
            topology,
            w_hidden: vec![0.0; topology.hidden * (topology.inputs + 1)],
            w_output: vec![0.0; topology.outputs * (topology.hidden + 1)],
        }
    }

    /// Weights uniform in `[-0.5, 0.5]`.
    pub fn random(topology: MlpTopology, rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(topology);
        for w in m.w_hidden.iter_mut().chain(m.w_output.iter_mut()) {
            *w = rng.random_range(-0.5..=0.5);
        }
        m
    }

    fn check(&self, input: &[f64]) -> Result<(), MlpError> {
        if input.len() != self.topology.inputs {
            return Err(MlpError::Arity { expected: self.topology.inputs, found: input.len() });
        }
        Ok(())
    }

    fn forward_into(&self, input: &[f64], hidden: &mut [f64], scores: &mut [f64]) {
        let t = &self.topology;
        let stride = t.inputs + 1;
        for (j, h) in hidden.iter_mut().enumerate() {
            let row = &self.w_hidden[j * stride..(j + 1) * stride];
            let mut o = row[0];
            for (w, x) in row[1..].iter().zip(input) {
                o += w * x;
            }
            *h = sigmoid(o);
        }
        let stride = t.hidden + 1;
        for (c, s) in scores.iter_mut().enumerate() {
            let row = &self.w_output[c * stride..(c + 1) * stride];
            let mut a = row[0];
            for (w, h) in row[1..].iter().zip(hidden.iter()) {
                a += w * h;
            }
            *s = t.output_activation.apply(a);
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Forward, MlpError> {
        self.check(input)?;
        let mut hidden = vec![0.0; self.topology.hidden];
        let mut scores = vec![0.0; self.topology.outputs];
        self.forward_into(input, &mut hidden, &mut scores);
        let probabilities = normalize_scores(&scores);
        Ok(Forward { hidden, scores, probabilities })
    }

    pub fn predict_distribution(&self, input: &[f64]) -> Result<Vec<f64>, MlpError> {
        Ok(self.forward(input)?.probabilities)
    }

    /// Mean squared error of the network over a batch.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64, MlpError> {
        let outputs: Vec<Vec<f64>> =
            inputs.iter().map(|x| self.forward(x).map(|f| f.scores)).collect::<Result<_, _>>()?;
        mse(&outputs, targets)
    }

    /// Analytic gradient of [`MlpModel::loss`].
    pub fn gradient(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Gradient, MlpError> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(MlpError::LengthMismatch);
        }
        let mut grad = Gradient {
            hidden: vec![0.0; self.w_hidden.len()],
            output: vec![0.0; self.w_output.len()],
        };
        let mut ws = Workspace::new(&self.topology);
        for (x, y) in inputs.iter().zip(targets) {
            self.check(x)?;
            if y.len() != self.topology.outputs {
                return Err(MlpError::LengthMismatch);
            }
            self.backprop(x, y, &mut ws);
            for (g, d) in grad.hidden.iter_mut().zip(&ws.grad_hidden) {
                *g += d;
            }
            for (g, d) in grad.output.iter_mut().zip(&ws.grad_output) {
                *g += d;
            }
        }
        let n = inputs.len() as f64;
        grad.hidden.iter_mut().chain(grad.output.iter_mut()).for_each(|g| *g /= n);
        Ok(grad)
    }

    /// Per-instance gradient of `sum_c (y_c - yhat_c)^2` into `ws`; returns
    /// that squared error.
    fn backprop(&self, x: &[f64], y: &[f64], ws: &mut Workspace) -> f64 {
        let t = &self.topology;
        self.forward_into(x, &mut ws.hidden, &mut ws.scores);
        let mut sq = 0.0;
        for c in 0..t.outputs {
            let out = ws.scores[c];
            let err = y[c] - out;
            sq += err * err;
            let slope = match t.output_activation {
                Activation::Sigmoid => out * (1.0 - out),
                _ => 1.0,
            };
            ws.delta_out[c] = -2.0 * err * slope;
        }
        let hs = t.hidden + 1;
        for c in 0..t.outputs {
            let d = ws.delta_out[c];
            let g = &mut ws.grad_output[c * hs..(c + 1) * hs];
            g[0] = d;
            for (gj, h) in g[1..].iter_mut().zip(&ws.hidden) {
                *gj = d * h;
            }
        }
        let is = t.inputs + 1;
        for j in 0..t.hidden {
            let mut back = 0.0;
            for c in 0..t.outputs {
                back += ws.delta_out[c] * self.w_output[c * hs + j + 1];
            }
            let h = ws.hidden[j];
            let d = back * h * (1.0 - h);
            let g = &mut ws.grad_hidden[j * is..(j + 1) * is];
            g[0] = d;
            for (gi, xi) in g[1..].iter_mut().zip(x) {
                *gi = d * xi;
            }
        }
        sq
    }
}

/// Scores clipped at zero and divided by their sum; uniform when the sum
/// is zero.
fn normalize_scores(scores: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = scores.iter().map(|s| s.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        clipped.iter().map(|s| s / sum).collect()
    } else {
        vec![1.0 / scores.len() as f64; scores.len()]
    }
}

struct Workspace {
    hidden: Vec<f64>,
    scores: Vec<f64>,
    delta_out: Vec<f64>,
    grad_hidden: Vec<f64>,
    grad_output: Vec<f64>,
}

impl Workspace {
    fn new(t: &MlpTopology) -> Self {
        Self {
            hidden: vec![0.0; t.hidden],
            scores: vec![0.0; t.outputs],
            delta_out: vec![0.0; t.outputs],
            grad_hidden: vec![0.0; t.hidden * (t.inputs + 1)],
            grad_output: vec![0.0; t.outputs * (t.hidden + 1)],
        }
    }
}

/// `(1/N) sum_i sum_c (Y_ic - Yhat_ic)^2`.
pub fn mse(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64, MlpError> {
    if predictions.len() != targets.len() || predictions.is_empty() {
        return Err(MlpError::LengthMismatch);
    }
    let mut total = 0.0;
    for (p, y) in predictions.iter().zip(targets) {
        if p.len() != y.len() {
            return Err(MlpError::LengthMismatch);
        }
        total += p.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum::<f64>();
    }
    Ok(total / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Consecutive epochs without validation improvement before stopping.
    pub validation_threshold: usize,
    /// Share of the (shuffled) training set held out for early stopping.
    pub validation_fraction: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.3,
            momentum: 0.2,
            validation_threshold: 20,
            validation_fraction: 0.0,
            max_epochs: 500,
            seed: 1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), MlpError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(MlpError::Config(format!("learning rate {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(MlpError::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.validation_threshold == 0 {
            return Err(MlpError::Config("validation threshold must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(MlpError::Config("validation fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainingLog {
    /// `epoch,train_mse,validation_mse`; the last column is empty without a
    /// validation split.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,validation_mse\n");
        for e in &self.epochs {
            let v = e.validation_mse.map(|v| format!("{v:.15e}")).unwrap_or_default();
            out.push_str(&format!("{},{:.15e},{}\n", e.epoch, e.train_mse, v));
        }
        out
    }
}

/// One-hot target rows.
pub fn one_hot_targets(classes: &[usize], n_classes: usize) -> Vec<Vec<f64>> {
    classes
        .iter()
        .map(|&c| {
            let mut t = vec![0.0; n_classes];
            t[c] = 1.0;
            t
        })
        .collect()
}

/// Stochastic gradient descent with momentum:
/// `dw(t) = -lr * grad + momentum * dw(t-1)`, one update per instance, with
/// the instance order reshuffled every epoch.
pub fn train_mlp(
    inputs: &[Vec<f64>],
    classes: &[usize],
    topology: MlpTopology,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainingLog), MlpError> {
    if inputs.is_empty() {
        return Err(MlpError::EmptyTrainingSet);
    }
    if inputs.len() != classes.len() {
        return Err(MlpError::LengthMismatch);
    }
    topology.validate()?;
    config.validate()?;
    if let Some(bad) = classes.iter().find(|&&c| c >= topology.outputs) {
        return Err(MlpError::Config(format!("class {bad} has no output unit")));
    }
    let targets = one_hot_targets(classes, topology.outputs);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = MlpModel::random(topology, &mut rng);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let n_val = (inputs.len() as f64 * config.validation_fraction).floor() as usize;
    let validation: Vec<usize> = if n_val > 0 {
        order.shuffle(&mut rng);
        order.split_off(inputs.len() - n_val)
    } else {
        Vec::new()
    };
    if order.is_empty() {
        return Err(MlpError::EmptyTrainingSet);
    }

    let mut ws = Workspace::new(&topology);
    let mut step_hidden = vec![0.0; model.w_hidden.len()];
    let mut step_output = vec![0.0; model.w_output.len()];
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, MlpModel)> = None;
    let mut stale = 0usize;
    let (lr, mom) = (config.learning_rate, config.momentum);

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut sq = 0.0;
        for &i in &order {
            sq += model.backprop(&inputs[i], &targets[i], &mut ws);
            for ((w, s), g) in model.w_output.iter_mut().zip(&mut step_output).zip(&ws.grad_output) {
                *s = -lr * g + mom * *s;
                *w += *s;
            }
            for ((w, s), g) in model.w_hidden.iter_mut().zip(&mut step_hidden).zip(&ws.grad_hidden) {
                *s = -lr * g + mom * *s;
                *w += *s;
            }
        }
        let train_mse = sq / order.len() as f64;
        if !train_mse.is_finite() {
            return Err(MlpError::Divergence { epoch });
        }
        let validation_mse = if validation.is_empty() {
            None
        } else {
            let mut vsq = 0.0;
            for &i in &validation {
                model.forward_into(&inputs[i], &mut ws.hidden, &mut ws.scores);
                vsq += ws.scores.iter().zip(&targets[i]).map(|(a, b)| (b - a) * (b - a)).sum::<f64>();
            }
            let v = vsq / validation.len() as f64;
            if !v.is_finite() {
                return Err(MlpError::Divergence { epoch });
            }
            Some(v)
        };
        log.epochs.push(EpochStats { epoch, train_mse, validation_mse });
        if let Some(v) = validation_mse {
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.validation_threshold {
                    break;
                }
            }
        }
    }
    if let Some((_, best_model)) = best {
        model = best_model;
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn transfer_functions() {
        assert_eq!(activation(Activation::Sigmoid, 0.0), 0.5);
        assert!((activation(Activation::Sigmoid, 2.0) - 0.880797).abs() < 1e-6);
        assert_eq!(activation(Activation::HardLimit, -0.1), 0.0);
        assert_eq!(activation(Activation::HardLimit, 0.0), 1.0);
        assert_eq!(activation(Activation::SymmetricHardLimit, -0.1), -1.0);
        assert_eq!(activation(Activation::SymmetricHardLimit, 0.3), 1.0);
        assert_eq!(activation(Activation::Linear, -2.5), -2.5);
        assert!((activation(Activation::Hyperbolic, 0.5) - 0.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_are_symmetric() {
        let m = MlpModel::zeros(MlpTopology::for_data(4, 3));
        let f = m.forward(&[0.3, 0.1, 0.9, 0.0]).unwrap();
        assert!(f.hidden.iter().all(|&h| h == 0.5));
        assert!(f.scores.iter().all(|&s| s == f.scores[0]));
        assert!(f.probabilities.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn one_by_one_by_one_hand_evaluation() {
        let t = MlpTopology { inputs: 1, hidden: 1, outputs: 1, output_activation: Activation::Sigmoid };
        let m = MlpModel { topology: t, w_hidden: vec![0.0, 1.0], w_output: vec![0.0, 1.0] };
        let f = m.forward(&[0.0]).unwrap();
        assert_eq!(f.hidden, vec![0.5]);
        // sigmoid(1 * 0.5)
        assert!((f.scores[0] - 0.622459).abs() < 1e-6);
        assert_eq!(f.probabilities, vec![1.0]);
    }

    #[test]
    fn saturation_with_huge_weights() {
        let t = MlpTopology { inputs: 1, hidden: 1, outputs: 1, output_activation: Activation::Sigmoid };
        let m = MlpModel { topology: t, w_hidden: vec![0.0, 1e6], w_output: vec![0.0, 1.0] };
        assert_eq!(m.forward(&[1.0]).unwrap().hidden[0], 1.0);
        assert!(matches!(m.forward(&[1.0, 2.0]), Err(MlpError::Arity { expected: 1, found: 2 })));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[vec![0.3, 0.7]], &[vec![0.3, 0.7]]).unwrap(), 0.0);
        assert_eq!(mse(&[vec![0.0]], &[vec![1.0]]).unwrap(), 1.0);
        assert!((mse(&[vec![0.8, 0.3]], &[vec![1.0, 0.0]]).unwrap() - 0.13).abs() < 1e-15);
        assert_eq!(mse(&[vec![0.8]], &[vec![1.0, 0.0]]), Err(MlpError::LengthMismatch));
        assert_eq!(mse(&[vec![0.8]], &[]), Err(MlpError::LengthMismatch));
    }

    fn gate(f: impl Fn(usize, usize) -> usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for a in 0..2 {
            for b in 0..2 {
                x.push(vec![a as f64, b as f64]);
                y.push(f(a, b));
            }
        }
        (x, y)
    }

    fn train_accuracy(m: &MlpModel, x: &[Vec<f64>], y: &[usize]) -> f64 {
        let hits = x
            .iter()
            .zip(y)
            .filter(|(xi, yi)| crate::trees::argmax(&m.predict_distribution(xi).unwrap()) == **yi)
            .count();
        hits as f64 / y.len() as f64
    }

    #[test]
    fn learns_and_gate() {
        let (x, y) = gate(|a, b| a & b);
        let t = MlpTopology { inputs: 2, hidden: 2, outputs: 2, output_activation: Activation::Sigmoid };
        let (m, log) = train_mlp(&x, &y, t, &TrainConfig::default()).unwrap();
        assert_eq!(train_accuracy(&m, &x, &y), 1.0);
        assert_eq!(log.epochs.len(), 500);
    }

    #[test]
    fn zero_learning_rate_keeps_initial_weights() {
        let (x, y) = gate(|a, b| a | b);
        let t = MlpTopology::for_data(2, 2);
        let cfg = TrainConfig { learning_rate: 0.0, max_epochs: 20, ..Default::default() };
        let (m, _) = train_mlp(&x, &y, t, &cfg).unwrap();
        let init = MlpModel::random(t, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
        assert_eq!(m, init);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = gate(|a, b| a ^ b);
        let t = MlpTopology::for_data(2, 2);
        let cfg = TrainConfig { max_epochs: 50, validation_fraction: 0.25, ..Default::default() };
        assert_eq!(train_mlp(&x, &y, t, &cfg).unwrap(), train_mlp(&x, &y, t, &cfg).unwrap());
    }

    #[test]
    fn early_stopping_stops_before_the_cap() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 7) as f64 / 7.0, (i % 3) as f64]).collect();
        let y: Vec<usize> = (0..40).map(|i| (i * 7919 % 11) % 2).collect();
        let cfg = TrainConfig { validation_fraction: 0.5, validation_threshold: 3, max_epochs: 2000, ..Default::default() };
        let (_, log) = train_mlp(&x, &y, MlpTopology::for_data(2, 2), &cfg).unwrap();
        assert!(log.epochs.len() < 2000);
        assert!(log.epochs.iter().all(|e| e.validation_mse.is_some()));
        assert!(log.to_csv().starts_with("epoch,train_mse,validation_mse\n1,"));
    }

    #[test]
    fn divergence_names_the_epoch() {
        let x = vec![vec![1e300, -1e300]];
        let y = vec![0];
        let t = MlpTopology { inputs: 2, hidden: 2, outputs: 2, output_activation: Activation::Linear };
        let cfg = TrainConfig { learning_rate: 1e10, ..Default::default() };
        assert!(matches!(train_mlp(&x, &y, t, &cfg), Err(MlpError::Divergence { epoch }) if epoch > 1 && epoch < 500));
    }

    #[test]
    fn bad_inputs() {
        let t = MlpTopology::for_data(2, 2);
        assert_eq!(train_mlp(&[], &[], t, &TrainConfig::default()), Err(MlpError::EmptyTrainingSet));
        let cfg = TrainConfig { momentum: 1.0, ..Default::default() };
        assert!(matches!(train_mlp(&[vec![0.0, 0.0]], &[0], t, &cfg), Err(MlpError::Config(_))));
    }

    #[test]
    fn xor_two_hidden_units_seed_sweep() {
        // seeds 1..=10 at 2000 epochs; 2 and 9 settle in a local minimum
        let (x, y) = gate(|a, b| a ^ b);
        let t = MlpTopology { inputs: 2, hidden: 2, outputs: 2, output_activation: Activation::Sigmoid };
        let solved = (1..=10u64)
            .filter(|&seed| {
                let cfg = TrainConfig { seed, max_epochs: 2000, ..Default::default() };
                let (m, _) = train_mlp(&x, &y, t, &cfg).unwrap();
                train_accuracy(&m, &x, &y) == 1.0
            })
            .count();
        assert!(solved >= 8, "only {solved} of 10 seeds solved XOR");
    }

    // central differences of the batch loss
    pub(crate) fn numeric_gradient(m: &MlpModel, x: &[Vec<f64>], y: &[Vec<f64>], h: f64) -> Gradient {
        let mut probe = m.clone();
        let mut hidden = vec![0.0; m.w_hidden.len()];
        for k in 0..hidden.len() {
            let w = probe.w_hidden[k];
            probe.w_hidden[k] = w + h;
            let up = probe.loss(x, y).unwrap();
            probe.w_hidden[k] = w - h;
            let down = probe.loss(x, y).unwrap();
            probe.w_hidden[k] = w;
            hidden[k] = (up - down) / (2.0 * h);
        }
        let mut output = vec![0.0; m.w_output.len()];
        for k in 0..output.len() {
            let w = probe.w_output[k];
            probe.w_output[k] = w + h;
            let up = probe.loss(x, y).unwrap();
            probe.w_output[k] = w - h;
            let down = probe.loss(x, y).unwrap();
            probe.w_output[k] = w;
            output[k] = (up - down) / (2.0 * h);
        }
        Gradient { hidden, output }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn backprop_matches_finite_differences(
            n in 1usize..=6, m in 1usize..=6, c in 1usize..=6, seed in any::<u64>(), linear in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let act = if linear { Activation::Linear } else { Activation::Sigmoid };
            let t = MlpTopology { inputs: n, hidden: m, outputs: c, output_activation: act };
            let model = MlpModel::random(t, &mut rng);
            let x: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let y: Vec<Vec<f64>> = (0..3).map(|_| (0..c).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
            let analytic = model.gradient(&x, &y).unwrap();
            let numeric = numeric_gradient(&model, &x, &y, 1e-5);
            for (a, b) in analytic.hidden.iter().chain(&analytic.output).zip(numeric.hidden.iter().chain(&numeric.output)) {
                let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-3);
                prop_assert!(rel < 1e-4, "analytic {} numeric {}", a, b);
            }
        }
    }
}
