use serde::{Deserialize, Serialize};

use super::{BayesError, FeatureKind};

/// Equal-frequency binning of numeric columns; nominal columns pass through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    /// Ascending upper bin edges per numeric column; a value equal to an edge
    /// falls in the lower bin.
    cuts: Vec<Option<Vec<f64>>>,
    arities: Vec<usize>,
}

impl Discretizer {
    pub fn fit(rows: &[Vec<f64>], kinds: &[FeatureKind], bins: usize) -> Result<Self, BayesError> {
        if rows.is_empty() {
            return Err(BayesError::EmptyTrainingSet);
        }
        if bins == 0 {
            return Err(BayesError::Config("bin count must be positive".into()));
        }
        let mut cuts = Vec::with_capacity(kinds.len());
        let mut arities = Vec::with_capacity(kinds.len());
        for (f, kind) in kinds.iter().enumerate() {
            match *kind {
                FeatureKind::Nominal(arity) => {
                    cuts.push(None);
                    arities.push(arity);
                }
                FeatureKind::Numeric => {
                    let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
                    values.sort_by(f64::total_cmp);
                    let c = equal_frequency_cuts(&values, bins);
                    arities.push(c.len() + 1);
                    cuts.push(Some(c));
                }
            }
        }
        Ok(Self { cuts, arities })
    }

    /// Number of discrete values per column.
    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn n_features(&self) -> usize {
        self.arities.len()
    }

    pub fn bin(&self, feature: usize, x: f64) -> usize {
        match &self.cuts[feature] {
            None => super::symbol(x, self.arities[feature]),
            Some(c) => c.partition_point(|&edge| edge < x),
        }
    }

    pub fn transform(&self, instance: &[f64]) -> Result<Vec<usize>, BayesError> {
        if instance.len() != self.arities.len() {
            return Err(BayesError::Arity { expected: self.arities.len(), found: instance.len() });
        }
        Ok(instance.iter().enumerate().map(|(f, &x)| self.bin(f, x)).collect())
    }
}

/// Upper edges at the `k/bins` quantiles of sorted `values`, duplicates
/// dropped, the maximum never used as an edge.
fn equal_frequency_cuts(values: &[f64], bins: usize) -> Vec<f64> {
    let n = values.len();
    let max = values[n - 1];
    let mut cuts: Vec<f64> = Vec::new();
    for k in 1..bins {
        let idx = (k * n).div_ceil(bins);
        if idx == 0 {
            continue;
        }
        let edge = values[idx - 1];
        if edge < max && cuts.last().is_none_or(|&last| edge > last) {
            cuts.push(edge);
        }
    }
    cuts
}
