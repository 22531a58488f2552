//! Tree learners: a pruned C4.5-style decision tree, a single random tree and
//! a bagged random forest, all built on the entropy and information-gain
//! machinery in this module.

mod c45;
mod forest;
mod node;
mod split;

use thiserror::Error;

pub use c45::{train_decision_tree, DecisionTreeConfig, DecisionTreeModel};
pub use forest::{
    oob_error, train_random_forest, train_random_tree, ForestConfig, RandomForestModel,
    RandomTreeConfig, RandomTreeModel,
};
pub use node::{Split, TreeNode};
pub use split::SplitCriterion;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("entropy of an empty class distribution is undefined")]
    EmptyDistribution,
    #[error("child class counts do not add up to the parent's")]
    CountMismatch,
    #[error("cannot train on an empty training set")]
    EmptyTrainingSet,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no training record is out of bag for any tree")]
    UndefinedOob,
    #[error("instance has {found} features, model expects {expected}")]
    Arity { expected: usize, found: usize },
}

/// Class counts at a node.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    counts: Vec<f64>,
}

impl ClassDistribution {
    pub fn new(counts: Vec<f64>) -> Self {
        Self { counts }
    }

    pub fn from_classes(classes: impl IntoIterator<Item = usize>, n_classes: usize) -> Self {
        let mut counts = vec![0.0; n_classes];
        for c in classes {
            counts[c] += 1.0;
        }
        Self { counts }
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let t = self.total();
        self.counts.iter().map(|c| c / t).collect()
    }
}

/// `-sum p_i log2 p_i` with `0 log 0 = 0`.
pub fn entropy(dist: &ClassDistribution) -> Result<f64, TreeError> {
    let total = dist.total();
    if total <= 0.0 {
        return Err(TreeError::EmptyDistribution);
    }
    Ok(entropy_of_counts(&dist.counts, total))
}

pub(crate) fn entropy_of_counts(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &c in counts {
        if c > 0.0 {
            let p = c / total;
            h -= p * p.log2();
        }
    }
    h.max(0.0)
}

/// `entropy(parent) - sum (n_child / n_parent) entropy(child)`.
pub fn information_gain(
    parent: &ClassDistribution,
    children: &[ClassDistribution],
) -> Result<f64, TreeError> {
    let k = parent.counts.len();
    for c in 0..k {
        let sum: f64 = children.iter().map(|ch| ch.counts.get(c).copied().unwrap_or(0.0)).sum();
        if (sum - parent.counts[c]).abs() > 1e-9 {
            return Err(TreeError::CountMismatch);
        }
    }
    if children.iter().any(|ch| ch.counts.len() != k) {
        return Err(TreeError::CountMismatch);
    }
    let n = parent.total();
    let h = entropy(parent)?;
    let weighted: f64 = children
        .iter()
        .map(|ch| {
            let t = ch.total();
            t / n * entropy_of_counts(&ch.counts, t)
        })
        .sum();
    Ok(h - weighted)
}

/// How a tree reads a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FeatureKind {
    Numeric,
    /// Number of branches, including the UNSEEN branch.
    Nominal(usize),
}

/// Column-major training view for tree learners. Nominal values are symbol
/// indices stored as exact floats.
#[derive(Debug, Clone)]
pub struct TreeData {
    pub columns: Vec<Vec<f64>>,
    pub classes: Vec<usize>,
    pub kinds: Vec<FeatureKind>,
    pub n_classes: usize,
}

impl TreeData {
    pub fn from_rows(rows: &[Vec<f64>], classes: &[usize], kinds: Vec<FeatureKind>, n_classes: usize) -> Self {
        let columns = (0..kinds.len()).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
        Self { columns, classes: classes.to_vec(), kinds, n_classes }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.kinds.len()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(c: &[f64]) -> ClassDistribution {
        ClassDistribution::new(c.to_vec())
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&d(&[1.0, 1.0])).unwrap(), 1.0);
        assert_eq!(entropy(&d(&[3.0])).unwrap(), 0.0);
        assert_eq!(entropy(&d(&[5.0, 0.0])).unwrap(), 0.0);
        // -(2/3) log2(2/3) - (1/3) log2(1/3)
        let oracle = -(2.0f64 / 3.0) * (2.0f64 / 3.0).log2() - (1.0f64 / 3.0) * (1.0f64 / 3.0).log2();
        assert!((oracle - 0.918296).abs() < 1e-6);
        assert!((entropy(&d(&[2.0, 1.0])).unwrap() - oracle).abs() < 1e-12);
        assert_eq!(entropy(&d(&[0.0, 0.0])), Err(TreeError::EmptyDistribution));
    }

    #[test]
    fn gain_examples() {
        let g = information_gain(&d(&[4.0, 4.0]), &[d(&[4.0, 0.0]), d(&[0.0, 4.0])]).unwrap();
        assert_eq!(g, 1.0);
        let g = information_gain(&d(&[4.0, 2.0]), &[d(&[2.0, 1.0]), d(&[2.0, 1.0])]).unwrap();
        assert!(g.abs() < 1e-12);
        // H(9,5) = 0.940286; children 7/14 * H(3,4) + 7/14 * H(6,1)
        let h = |a: f64, b: f64| {
            let n = a + b;
            -(a / n) * (a / n).log2() - (b / n) * (b / n).log2()
        };
        let oracle = h(9.0, 5.0) - 0.5 * h(3.0, 4.0) - 0.5 * h(6.0, 1.0);
        assert!((oracle - 0.151836).abs() < 1e-6);
        let g = information_gain(&d(&[9.0, 5.0]), &[d(&[3.0, 4.0]), d(&[6.0, 1.0])]).unwrap();
        assert!((g - oracle).abs() < 1e-12);
        assert_eq!(
            information_gain(&d(&[9.0, 5.0]), &[d(&[3.0, 4.0]), d(&[6.0, 2.0])]),
            Err(TreeError::CountMismatch)
        );
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.1, 0.7, 0.1, 0.05, 0.05]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.0, 0.2, 0.2]), 1);
    }

    proptest! {
        #[test]
        fn entropy_bounded_by_log_k(counts in proptest::collection::vec(0u32..50, 2..7)) {
            prop_assume!(counts.iter().any(|&c| c > 0));
            let k = counts.len() as f64;
            let dist = d(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
            let h = entropy(&dist).unwrap();
            prop_assert!(h <= k.log2() + 1e-12);
            let uniform = counts.iter().all(|&c| c == counts[0]);
            if uniform {
                prop_assert!((h - k.log2()).abs() < 1e-12);
            } else {
                prop_assert!(h < k.log2() - 1e-12);
            }
        }

        #[test]
        fn gain_is_non_negative(
            rows in proptest::collection::vec((0usize..3, 0usize..4), 1..80),
            scale in 1u32..4,
        ) {
            let mut parent = vec![0.0; 3];
            let mut children = vec![vec![0.0; 3]; 4];
            for &(class, branch) in &rows {
                parent[class] += 1.0;
                children[branch][class] += 1.0;
            }
            let kids: Vec<_> = children.into_iter().map(ClassDistribution::new).collect();
            let g = information_gain(&d(&parent), &kids).unwrap();
            prop_assert!(g >= -1e-12);

            // proportion-preserving split: each child is the parent scaled
            let s = scale as f64;
            let scaled: Vec<f64> = parent.iter().map(|c| c * s).collect();
            let prop_kids = vec![d(&parent), d(&scaled.iter().zip(&parent).map(|(a, b)| a - b).collect::<Vec<_>>())];
            let g = information_gain(&d(&scaled), &prop_kids).unwrap();
            prop_assert!(g.abs() < 1e-12 || scale == 1);
        }
    }
}
