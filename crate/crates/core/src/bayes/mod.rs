//! Naive Bayes with Gaussian numeric likelihoods, prior correction, combining
//! conditionally independent sources, and a discrete Bayes network grown by
//! K2 search.
//!
//! Instances are `f64` slices: nominal columns carry the symbol index, numeric
//! columns the (encoded) value. All probability arithmetic stays in log space
//! until the final normalisation.

mod discretize;
mod naive;
mod network;

use thiserror::Error;

pub use crate::trees::FeatureKind;
pub use discretize::Discretizer;
pub use naive::{
    combine_sources, rebalance_posterior, train_naive_bayes, Likelihood, NaiveBayesConfig,
    NaiveBayesModel,
};
pub use network::{
    family_score, train_bayes_net, BayesNetConfig, BayesNetModel, Cpt, ParentAdded,
};

#[derive(Debug, Error, PartialEq)]
pub enum BayesError {
    #[error("cannot train on an empty training set")]
    EmptyTrainingSet,
    #[error("inputs differ in length")]
    LengthMismatch,
    #[error("instance has {found} features, model expects {expected}")]
    Arity { expected: usize, found: usize },
    #[error("every class has zero likelihood")]
    Degenerate,
    #[error("class {class} has posterior mass but a zero prior")]
    ZeroPrior { class: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// `exp(v - logsumexp(v))`; errors when every entry is `-inf`.
pub(crate) fn normalize_log(v: &[f64]) -> Result<Vec<f64>, BayesError> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(BayesError::Degenerate);
    }
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Nominal value as an index, out-of-range values folded into the last
/// (UNSEEN) slot.
#[inline]
pub(crate) fn symbol(x: f64, arity: usize) -> usize {
    if x >= 0.0 && (x as usize) < arity {
        x as usize
    } else {
        arity - 1
    }
}
