//! C4.5-style decision tree.
//!
//! Growth picks the best split by information gain (or gain ratio), with
//! binary numeric thresholds and multiway nominal splits. Pruning follows
//! C4.5: the estimated error of a node is the upper limit of the binomial
//! confidence interval at level `confidence_factor`, subtrees that do not
//! reduce training error are collapsed, and a node may be replaced by its
//! most populated branch (subtree raising).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::split::{best_split, class_counts, partition, GrowParams, Scratch};
use super::{argmax, SplitCriterion, TreeData, TreeError, TreeNode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeConfig {
    pub confidence_factor: f64,
    pub min_leaf: usize,
    pub subtree_raising: bool,
    pub collapse: bool,
    pub pruned: bool,
    pub criterion: SplitCriterion,
    /// Reduced-error pruning on a held-out fold instead of pessimistic pruning.
    pub reduced_error_pruning: bool,
    /// Only read by reduced-error pruning: one fold of this many is held out.
    pub num_folds: usize,
    pub seed: u64,
}

impl Default for DecisionTreeConfig {
    fn default() -> Self {
        Self {
            confidence_factor: 0.25,
            min_leaf: 2,
            subtree_raising: true,
            collapse: true,
            pruned: true,
            criterion: SplitCriterion::InformationGain,
            reduced_error_pruning: false,
            num_folds: 3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub root: TreeNode,
    pub config: DecisionTreeConfig,
    pub n_features: usize,
}

impl DecisionTreeModel {
    pub fn predict_distribution(&self, row: &[f64]) -> Result<Vec<f64>, TreeError> {
        check_arity(self.n_features, row)?;
        Ok(self.root.distribution(row).to_vec())
    }

    pub fn predict(&self, row: &[f64]) -> Result<usize, TreeError> {
        check_arity(self.n_features, row)?;
        Ok(self.root.predict(row))
    }
}

pub(crate) fn check_arity(expected: usize, row: &[f64]) -> Result<(), TreeError> {
    if row.len() != expected {
        return Err(TreeError::Arity { expected, found: row.len() });
    }
    Ok(())
}

pub fn train_decision_tree(
    data: &TreeData,
    config: &DecisionTreeConfig,
) -> Result<DecisionTreeModel, TreeError> {
    if data.is_empty() {
        return Err(TreeError::EmptyTrainingSet);
    }
    if !(config.confidence_factor > 0.0 && config.confidence_factor < 1.0) {
        return Err(TreeError::Config(format!(
            "confidence factor must lie in (0, 1), got {}",
            config.confidence_factor
        )));
    }
    if config.reduced_error_pruning && config.num_folds < 2 {
        return Err(TreeError::Config("reduced-error pruning needs at least 2 folds".into()));
    }
    let params = GrowParams { min_leaf: config.min_leaf, min_gain: 0.0, criterion: config.criterion };
    let features: Vec<usize> = (0..data.n_features()).collect();
    let all: Vec<u32> = (0..data.len() as u32).collect();

    let root = if config.pruned && config.reduced_error_pruning {
        let mut shuffled = all;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
        let cut = shuffled.len() - shuffled.len() / config.num_folds;
        let (grow_idx, prune_idx) = shuffled.split_at(cut);
        let mut grow_idx = grow_idx.to_vec();
        grow_idx.sort_unstable();
        let mut root = grow(data, grow_idx, &features, &params, None, &mut Scratch::default());
        reduced_error_prune(&mut root, data, prune_idx);
        root
    } else {
        let mut root = grow(data, all.clone(), &features, &params, None, &mut Scratch::default());
        if config.pruned {
            if config.collapse {
                collapse(&mut root);
            }
            let pruner = Pruner::new(config.confidence_factor, config.subtree_raising);
            pruner.prune(&mut root, data, &all, None);
        }
        root
    };
    Ok(DecisionTreeModel { root, config: config.clone(), n_features: data.n_features() })
}

/// Unpruned growth shared with random trees.
pub(crate) fn grow(
    data: &TreeData,
    idx: Vec<u32>,
    features: &[usize],
    params: &GrowParams,
    fallback: Option<&[f64]>,
    scratch: &mut Scratch,
) -> TreeNode {
    grow_with(data, idx, params, fallback, scratch, &mut |_| features.to_vec())
}

/// Growth where `pick_features` chooses the candidate features at each node.
pub(crate) fn grow_with(
    data: &TreeData,
    idx: Vec<u32>,
    params: &GrowParams,
    fallback: Option<&[f64]>,
    scratch: &mut Scratch,
    pick_features: &mut dyn FnMut(usize) -> Vec<usize>,
) -> TreeNode {
    let counts = class_counts(data, &idx);
    let nonzero = counts.iter().filter(|&&c| c > 0.0).count();
    if idx.is_empty() || nonzero <= 1 || idx.len() < 2 * params.min_leaf.max(1) {
        return TreeNode::leaf(counts, fallback);
    }
    let features = pick_features(data.n_features());
    let Some(cand) = best_split(data, &idx, &features, &counts, params, scratch) else {
        return TreeNode::leaf(counts, fallback);
    };
    let parts = partition(data, &idx, &cand.split);
    drop(idx);
    let total: f64 = counts.iter().sum();
    let dist: Vec<f64> = counts.iter().map(|c| c / total).collect();
    let children = parts
        .into_iter()
        .map(|part| grow_with(data, part, params, Some(&dist), scratch, pick_features))
        .collect();
    TreeNode::Internal { split: cand.split, counts, children }
}

fn misclassified(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    total - counts.iter().copied().fold(0.0, f64::max)
}

fn training_errors(node: &TreeNode) -> f64 {
    match node {
        TreeNode::Leaf { counts, .. } => misclassified(counts),
        TreeNode::Internal { children, .. } => children.iter().map(training_errors).sum(),
    }
}

fn collapse(node: &mut TreeNode) {
    if let TreeNode::Internal { counts, children, .. } = node {
        if training_errors_of(children) >= misclassified(counts) - 1e-3 {
            *node = TreeNode::leaf(counts.clone(), None);
        } else {
            children.iter_mut().for_each(collapse);
        }
    }
}

fn training_errors_of(children: &[TreeNode]) -> f64 {
    children.iter().map(training_errors).sum()
}

struct Pruner {
    cf: f64,
    z: f64,
    raising: bool,
}

impl Pruner {
    fn new(cf: f64, raising: bool) -> Self {
        let z = Normal::standard().inverse_cdf(1.0 - cf);
        Self { cf, z, raising }
    }

    /// Extra errors to add to `e` observed errors out of `n`, from the upper
    /// confidence limit of the binomial.
    fn add_errors(&self, n: f64, e: f64) -> f64 {
        if e < 1.0 {
            let base = n * (1.0 - self.cf.powf(1.0 / n));
            if e == 0.0 {
                return base;
            }
            return base + e * (self.add_errors(n, 1.0) - base);
        }
        if e + 0.5 >= n {
            return (n - e).max(0.0);
        }
        let z = self.z;
        let f = (e + 0.5) / n;
        let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt())
            / (1.0 + z * z / n);
        r * n - e
    }

    fn errors_for_counts(&self, counts: &[f64]) -> f64 {
        let n: f64 = counts.iter().sum();
        if n <= 0.0 {
            return 0.0;
        }
        let e = misclassified(counts);
        e + self.add_errors(n, e)
    }

    fn estimated_errors(&self, node: &TreeNode) -> f64 {
        match node {
            TreeNode::Leaf { counts, .. } => self.errors_for_counts(counts),
            TreeNode::Internal { children, .. } => {
                children.iter().map(|c| self.estimated_errors(c)).sum()
            }
        }
    }

    /// Estimated errors if `idx` were classified by the subtree `node`.
    fn errors_for_branch(&self, node: &TreeNode, data: &TreeData, idx: &[u32]) -> f64 {
        match node {
            TreeNode::Leaf { .. } => self.errors_for_counts(&class_counts(data, idx)),
            TreeNode::Internal { split, children, .. } => partition(data, idx, split)
                .iter()
                .zip(children)
                .map(|(part, child)| self.errors_for_branch(child, data, part))
                .sum(),
        }
    }

    fn prune(&self, node: &mut TreeNode, data: &TreeData, idx: &[u32], fallback: Option<&[f64]>) {
        let TreeNode::Internal { split, counts, children } = node else {
            return;
        };
        let parts = partition(data, idx, split);
        let total: f64 = counts.iter().sum();
        let dist: Vec<f64> = counts.iter().map(|c| c / total.max(1.0)).collect();
        for (child, part) in children.iter_mut().zip(&parts) {
            self.prune(child, data, part, Some(&dist));
        }
        let largest = argmax(&parts.iter().map(|p| p.len() as f64).collect::<Vec<_>>());
        let errors_largest = if self.raising {
            self.errors_for_branch(&children[largest], data, idx)
        } else {
            f64::INFINITY
        };
        let errors_leaf = self.errors_for_counts(counts);
        let errors_tree: f64 = children.iter().map(|c| self.estimated_errors(c)).sum();

        if errors_leaf <= errors_tree + 0.1 && errors_leaf <= errors_largest + 0.1 {
            *node = TreeNode::leaf(counts.clone(), fallback);
        } else if errors_largest <= errors_tree + 0.1 {
            let mut raised = children.swap_remove(largest);
            reset_distribution(&mut raised, data, idx, fallback);
            *node = raised;
            self.prune(node, data, idx, fallback);
        }
    }
}

/// Recompute every node's class counts from `idx`.
fn reset_distribution(node: &mut TreeNode, data: &TreeData, idx: &[u32], fallback: Option<&[f64]>) {
    let fresh = class_counts(data, idx);
    match node {
        TreeNode::Leaf { .. } => *node = TreeNode::leaf(fresh, fallback),
        TreeNode::Internal { split, counts, children } => {
            let total: f64 = fresh.iter().sum();
            let dist: Vec<f64> = if total > 0.0 {
                fresh.iter().map(|c| c / total).collect()
            } else {
                fallback.map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0 / fresh.len() as f64; fresh.len()])
            };
            for (child, part) in children.iter_mut().zip(partition(data, idx, split)) {
                reset_distribution(child, data, &part, Some(&dist));
            }
            *counts = fresh;
        }
    }
}

fn reduced_error_prune(node: &mut TreeNode, data: &TreeData, holdout: &[u32]) -> f64 {
    let errors_as_leaf = |n: &TreeNode| {
        let class = argmax(n.counts());
        holdout.iter().filter(|&&i| data.classes[i as usize] != class).count() as f64
    };
    match node {
        TreeNode::Leaf { dist, .. } => {
            let class = argmax(dist);
            holdout.iter().filter(|&&i| data.classes[i as usize] != class).count() as f64
        }
        TreeNode::Internal { split, children, counts } => {
            let parts = partition(data, holdout, split);
            let subtree: f64 = children
                .iter_mut()
                .zip(&parts)
                .map(|(c, p)| reduced_error_prune(c, data, p))
                .sum();
            let counts = counts.clone();
            let leaf = errors_as_leaf(node);
            if leaf <= subtree {
                *node = TreeNode::leaf(counts, None);
                leaf
            } else {
                subtree
            }
        }
    }
}
