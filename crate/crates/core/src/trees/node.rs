use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Split {
    /// Left child takes `value <= threshold`.
    Numeric { feature: usize, threshold: f64 },
    /// One child per symbol index; the last child takes UNSEEN symbols.
    Nominal { feature: usize },
}

impl Split {
    pub fn feature(&self) -> usize {
        match *self {
            Split::Numeric { feature, .. } | Split::Nominal { feature } => feature,
        }
    }

    pub fn branch(&self, row: &[f64], n_children: usize) -> usize {
        match *self {
            Split::Numeric { feature, threshold } => usize::from(row[feature] > threshold),
            Split::Nominal { feature } => (row[feature] as usize).min(n_children - 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        /// Training instances that reached this leaf, per class.
        counts: Vec<f64>,
        /// Prediction distribution: normalized counts, or the parent's
        /// distribution when no training instance reached the leaf.
        dist: Vec<f64>,
    },
    Internal {
        split: Split,
        counts: Vec<f64>,
        children: Vec<TreeNode>,
    },
}

impl TreeNode {
    pub(crate) fn leaf(counts: Vec<f64>, fallback: Option<&[f64]>) -> Self {
        let total: f64 = counts.iter().sum();
        let dist = if total > 0.0 {
            counts.iter().map(|c| c / total).collect()
        } else if let Some(f) = fallback {
            f.to_vec()
        } else {
            let k = counts.len() as f64;
            vec![1.0 / k; counts.len()]
        };
        TreeNode::Leaf { counts, dist }
    }

    pub fn counts(&self) -> &[f64] {
        match self {
            TreeNode::Leaf { counts, .. } | TreeNode::Internal { counts, .. } => counts,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { children, .. } => children.iter().map(TreeNode::leaf_count).sum(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { children, .. } => {
                1 + children.iter().map(TreeNode::node_count).sum::<usize>()
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { children, .. } => {
                1 + children.iter().map(TreeNode::depth).max().unwrap_or(0)
            }
        }
    }

    pub fn distribution(&self, row: &[f64]) -> &[f64] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { dist, .. } => return dist,
                TreeNode::Internal { split, children, .. } => {
                    node = &children[split.branch(row, children.len())];
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(self.distribution(row))
    }

    /// Indented text rendering of splits and leaf distributions.
    pub fn dump(&self, feature_names: Option<&[String]>) -> String {
        let mut out = String::new();
        self.dump_into(&mut out, 0, feature_names);
        out
    }

    fn dump_into(&self, out: &mut String, depth: usize, names: Option<&[String]>) {
        let pad = "|   ".repeat(depth);
        let name = |f: usize| names.and_then(|n| n.get(f).cloned()).unwrap_or_else(|| format!("f{f}"));
        match self {
            TreeNode::Leaf { counts, dist } => {
                let _ = writeln!(out, "{pad}leaf class={} counts={counts:?} dist={dist:?}", argmax(dist));
            }
            TreeNode::Internal { split, children, .. } => {
                for (b, child) in children.iter().enumerate() {
                    match *split {
                        Split::Numeric { feature, threshold } => {
                            let op = if b == 0 { "<=" } else { ">" };
                            let _ = writeln!(out, "{pad}{} {op} {threshold}", name(feature));
                        }
                        Split::Nominal { feature } => {
                            let sym = if b + 1 == children.len() { "UNSEEN".to_string() } else { b.to_string() };
                            let _ = writeln!(out, "{pad}{} = {sym}", name(feature));
                        }
                    }
                    child.dump_into(out, depth + 1, names);
                }
            }
        }
    }
}
