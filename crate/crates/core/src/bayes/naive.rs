use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{normalize_log, symbol, BayesError, FeatureKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesConfig {
    /// Add-alpha smoothing of nominal likelihood tables.
    pub alpha: f64,
    pub variance_floor: f64,
    /// Add-alpha smoothing of the priors of observed classes; 0 keeps raw
    /// frequencies. Absent classes always get prior 0.
    pub prior_alpha: f64,
}

impl Default for NaiveBayesConfig {
    fn default() -> Self {
        Self { alpha: 1.0, variance_floor: 1e-9, prior_alpha: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Likelihood {
    /// `log p(x = s | y)` indexed `[class][symbol]`.
    Nominal { log_probs: Vec<Vec<f64>> },
    Gaussian { mean: Vec<f64>, variance: Vec<f64> },
}

impl Likelihood {
    fn log_likelihood(&self, class: usize, x: f64) -> f64 {
        match self {
            Likelihood::Nominal { log_probs } => {
                let row = &log_probs[class];
                row[symbol(x, row.len())]
            }
            Likelihood::Gaussian { mean, variance } => {
                let v = variance[class];
                let d = x - mean[class];
                -0.5 * (2.0 * PI * v).ln() - d * d / (2.0 * v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub priors: Vec<f64>,
    pub features: Vec<Likelihood>,
    pub config: NaiveBayesConfig,
}

pub fn train_naive_bayes(
    rows: &[Vec<f64>],
    classes: &[usize],
    kinds: &[FeatureKind],
    n_classes: usize,
    config: NaiveBayesConfig,
) -> Result<NaiveBayesModel, BayesError> {
    if rows.is_empty() {
        return Err(BayesError::EmptyTrainingSet);
    }
    if rows.len() != classes.len() {
        return Err(BayesError::LengthMismatch);
    }
    if !(config.alpha > 0.0) || !(config.variance_floor > 0.0) || config.prior_alpha < 0.0 {
        return Err(BayesError::Config(format!("{config:?}")));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != kinds.len()) {
        return Err(BayesError::Arity { expected: kinds.len(), found: r.len() });
    }
    if classes.iter().any(|&c| c >= n_classes) {
        return Err(BayesError::Config("class index out of range".into()));
    }

    let mut class_n = vec![0.0; n_classes];
    for &c in classes {
        class_n[c] += 1.0;
    }
    let total = rows.len() as f64;
    let present = class_n.iter().filter(|&&n| n > 0.0).count() as f64;
    let denom = total + config.prior_alpha * present;
    let priors = class_n.iter().map(|&n| if n > 0.0 { (n + config.prior_alpha) / denom } else { 0.0 }).collect();

    let features = kinds
        .iter()
        .enumerate()
        .map(|(f, kind)| match *kind {
            FeatureKind::Nominal(arity) => {
                let mut counts = vec![vec![0.0; arity]; n_classes];
                for (r, &c) in rows.iter().zip(classes) {
                    counts[c][symbol(r[f], arity)] += 1.0;
                }
                let log_probs = counts
                    .iter()
                    .zip(&class_n)
                    .map(|(row, n)| {
                        let d = n + config.alpha * arity as f64;
                        row.iter().map(|k| ((k + config.alpha) / d).ln()).collect()
                    })
                    .collect();
                Likelihood::Nominal { log_probs }
            }
            FeatureKind::Numeric => {
                let mut sum = vec![0.0; n_classes];
                for (r, &c) in rows.iter().zip(classes) {
                    sum[c] += r[f];
                }
                let mean: Vec<f64> =
                    sum.iter().zip(&class_n).map(|(s, n)| if *n > 0.0 { s / n } else { 0.0 }).collect();
                let mut ss = vec![0.0; n_classes];
                for (r, &c) in rows.iter().zip(classes) {
                    let d = r[f] - mean[c];
                    ss[c] += d * d;
                }
                let variance = ss
                    .iter()
                    .zip(&class_n)
                    .map(|(s, n)| if *n > 0.0 { (s / n).max(config.variance_floor) } else { 1.0 })
                    .collect();
                Likelihood::Gaussian { mean, variance }
            }
        })
        .collect();
    Ok(NaiveBayesModel { priors, features, config })
}

impl NaiveBayesModel {
    pub fn n_classes(&self) -> usize {
        self.priors.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    fn check(&self, x: &[f64]) -> Result<(), BayesError> {
        if x.len() != self.features.len() {
            return Err(BayesError::Arity { expected: self.features.len(), found: x.len() });
        }
        Ok(())
    }

    /// `log p(x_g | y)` summed over the features in `group`.
    pub fn group_log_likelihood(&self, x: &[f64], group: &[usize]) -> Result<Vec<f64>, BayesError> {
        self.check(x)?;
        let mut out = vec![0.0; self.n_classes()];
        for (c, o) in out.iter_mut().enumerate() {
            for &f in group {
                *o += self.features[f].log_likelihood(c, x[f]);
            }
        }
        Ok(out)
    }

    /// `log p(y) + sum_d log p(x_d | y)`.
    pub fn log_joint(&self, x: &[f64]) -> Result<Vec<f64>, BayesError> {
        let all: Vec<usize> = (0..self.features.len()).collect();
        let mut out = self.group_log_likelihood(x, &all)?;
        for (o, p) in out.iter_mut().zip(&self.priors) {
            *o += p.ln();
        }
        Ok(out)
    }

    /// `p(y|x) = p(x|y) p(y) / sum_y' p(x|y') p(y')`.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>, BayesError> {
        normalize_log(&self.log_joint(x)?)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize, BayesError> {
        Ok(crate::trees::argmax(&self.posterior(x)?))
    }
}

/// Prior correction for a model trained on re-balanced data:
/// `p'(y|x) ∝ p_bal(y|x) / P_bal(y) * P_true(y)`.
pub fn rebalance_posterior(
    posterior: &[f64],
    balanced_priors: &[f64],
    true_priors: &[f64],
) -> Result<Vec<f64>, BayesError> {
    if posterior.len() != balanced_priors.len() || posterior.len() != true_priors.len() {
        return Err(BayesError::LengthMismatch);
    }
    let mut out = Vec::with_capacity(posterior.len());
    for (c, ((&p, &bal), &tru)) in posterior.iter().zip(balanced_priors).zip(true_priors).enumerate() {
        if p == 0.0 {
            out.push(0.0);
            continue;
        }
        if !(bal > 0.0) || !(tru > 0.0) {
            return Err(BayesError::ZeroPrior { class: c });
        }
        out.push(p / bal * tru);
    }
    let sum: f64 = out.iter().sum();
    if !(sum > 0.0) {
        return Err(BayesError::Degenerate);
    }
    Ok(out.into_iter().map(|v| v / sum).collect())
}

/// Combines conditionally independent sources: each group contributes
/// `log P(x_g | y)`, and the posterior is `P(y) prod_g P(x_g | y)`
/// renormalised.
pub fn combine_sources(group_log_likelihoods: &[Vec<f64>], priors: &[f64]) -> Result<Vec<f64>, BayesError> {
    if group_log_likelihoods.len() < 2 {
        return Err(BayesError::Config("need at least two sources".into()));
    }
    if group_log_likelihoods.iter().any(|g| g.len() != priors.len()) {
        return Err(BayesError::LengthMismatch);
    }
    let mut joint: Vec<f64> = priors.iter().map(|p| p.ln()).collect();
    for g in group_log_likelihoods {
        for (j, l) in joint.iter_mut().zip(g) {
            *j += l;
        }
    }
    normalize_log(&joint)
}
