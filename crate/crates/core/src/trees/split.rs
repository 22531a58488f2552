//! Best-split search.
//!
//! Numeric candidates are enumerated with one sort per feature and running
//! class counts, so a feature costs O(n log n) at a node. Child entropies are
//! kept as running sums of `c ln c`, which makes each boundary O(1).

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::{entropy_of_counts, FeatureKind, Split, TreeData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitCriterion {
    InformationGain,
    GainRatio,
}

/// Gains at or below this are treated as zero.
pub(crate) const GAIN_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub min_leaf: usize,
    pub min_gain: f64,
    pub criterion: SplitCriterion,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub split: Split,
    pub gain: f64,
    pub ratio: f64,
}

#[inline]
fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

#[derive(Default)]
pub(crate) struct Scratch {
    pairs: Vec<(f64, u32)>,
    left: Vec<f64>,
    right: Vec<f64>,
    table: Vec<f64>,
}

/// Best admissible split of `idx` over `features`, or `None` when no
/// candidate has positive gain at or above `params.min_gain`.
pub(crate) fn best_split(
    data: &TreeData,
    idx: &[u32],
    features: &[usize],
    parent: &[f64],
    params: &GrowParams,
    scratch: &mut Scratch,
) -> Option<Candidate> {
    let n = idx.len() as f64;
    let parent_h = entropy_of_counts(parent, n);
    let mut candidates: Vec<Candidate> = Vec::with_capacity(features.len());
    for &f in features {
        let cand = match data.kinds[f] {
            FeatureKind::Numeric => numeric_candidate(data, idx, f, parent, parent_h, params, scratch),
            FeatureKind::Nominal(arity) => {
                nominal_candidate(data, idx, f, arity, parent_h, params, scratch)
            }
        };
        if let Some(c) = cand {
            if c.gain > GAIN_EPS && c.gain >= params.min_gain {
                candidates.push(c);
            }
        }
    }
    if candidates.is_empty() {
        return None;
    }
    match params.criterion {
        SplitCriterion::InformationGain => {
            let mut best = candidates[0];
            for c in &candidates[1..] {
                if c.gain > best.gain {
                    best = *c;
                }
            }
            Some(best)
        }
        SplitCriterion::GainRatio => {
            let mean = candidates.iter().map(|c| c.gain).sum::<f64>() / candidates.len() as f64;
            let mut best: Option<Candidate> = None;
            for c in candidates.iter().filter(|c| c.gain >= mean - 1e-3) {
                if best.is_none_or(|b| c.ratio > b.ratio) {
                    best = Some(*c);
                }
            }
            best
        }
    }
}

fn numeric_candidate(
    data: &TreeData,
    idx: &[u32],
    f: usize,
    parent: &[f64],
    parent_h: f64,
    params: &GrowParams,
    s: &mut Scratch,
) -> Option<Candidate> {
    let col = &data.columns[f];
    s.pairs.clear();
    s.pairs.extend(idx.iter().map(|&i| (col[i as usize], data.classes[i as usize] as u32)));
    s.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let n = s.pairs.len();
    if n < 2 || s.pairs[0].0 == s.pairs[n - 1].0 {
        return None;
    }
    let k = parent.len();
    s.left.clear();
    s.left.resize(k, 0.0);
    s.right.clear();
    s.right.extend_from_slice(parent);
    let mut sum_left = 0.0;
    let mut sum_right: f64 = parent.iter().map(|&c| xlnx(c)).sum();
    let nf = n as f64;
    let min_leaf = params.min_leaf.max(1);

    let mut best_gain = f64::NEG_INFINITY;
    let mut best_at = 0usize;
    for pos in 1..n {
        let c = s.pairs[pos - 1].1 as usize;
        let (l, r) = (s.left[c], s.right[c]);
        sum_left += xlnx(l + 1.0) - xlnx(l);
        sum_right += xlnx(r - 1.0) - xlnx(r);
        s.left[c] = l + 1.0;
        s.right[c] = r - 1.0;
        if s.pairs[pos].0 == s.pairs[pos - 1].0 || pos < min_leaf || n - pos < min_leaf {
            continue;
        }
        let nl = pos as f64;
        let nr = nf - nl;
        let children = (xlnx(nl) - sum_left + xlnx(nr) - sum_right) / (nf * LN_2);
        let gain = parent_h - children;
        if gain > best_gain {
            best_gain = gain;
            best_at = pos;
        }
    }
    if best_at == 0 {
        return None;
    }
    let (lo, hi) = (s.pairs[best_at - 1].0, s.pairs[best_at].0);
    let mut threshold = lo + (hi - lo) / 2.0;
    if threshold >= hi {
        threshold = lo;
    }
    let p = best_at as f64 / nf;
    let split_info = -(p * p.log2() + (1.0 - p) * (1.0 - p).log2());
    Some(Candidate {
        split: Split::Numeric { feature: f, threshold },
        gain: best_gain,
        ratio: if split_info > 0.0 { best_gain / split_info } else { 0.0 },
    })
}

fn nominal_candidate(
    data: &TreeData,
    idx: &[u32],
    f: usize,
    arity: usize,
    parent_h: f64,
    params: &GrowParams,
    s: &mut Scratch,
) -> Option<Candidate> {
    let k = data.n_classes;
    let col = &data.columns[f];
    s.table.clear();
    s.table.resize(arity * k, 0.0);
    for &i in idx {
        let b = (col[i as usize] as usize).min(arity - 1);
        s.table[b * k + data.classes[i as usize]] += 1.0;
    }
    let n = idx.len() as f64;
    let mut children = 0.0;
    let mut split_info = 0.0;
    let mut big_branches = 0;
    for b in 0..arity {
        let row = &s.table[b * k..(b + 1) * k];
        let t: f64 = row.iter().sum();
        if t == 0.0 {
            continue;
        }
        if t >= params.min_leaf.max(1) as f64 {
            big_branches += 1;
        }
        children += t / n * entropy_of_counts(row, t);
        split_info -= t / n * (t / n).log2();
    }
    if big_branches < 2 {
        return None;
    }
    let gain = parent_h - children;
    Some(Candidate {
        split: Split::Nominal { feature: f },
        gain,
        ratio: if split_info > 0.0 { gain / split_info } else { 0.0 },
    })
}

/// Route `idx` to the children of `split`.
pub(crate) fn partition(data: &TreeData, idx: &[u32], split: &Split) -> Vec<Vec<u32>> {
    match *split {
        Split::Numeric { feature, threshold } => {
            let col = &data.columns[feature];
            let (left, right): (Vec<u32>, Vec<u32>) =
                idx.iter().partition(|&&i| col[i as usize] <= threshold);
            vec![left, right]
        }
        Split::Nominal { feature } => {
            let FeatureKind::Nominal(arity) = data.kinds[feature] else {
                unreachable!("nominal split on numeric feature")
            };
            let col = &data.columns[feature];
            let mut out = vec![Vec::new(); arity];
            for &i in idx {
                out[(col[i as usize] as usize).min(arity - 1)].push(i);
            }
            out
        }
    }
}

pub(crate) fn class_counts(data: &TreeData, idx: &[u32]) -> Vec<f64> {
    let mut counts = vec![0.0; data.n_classes];
    for &i in idx {
        counts[data.classes[i as usize]] += 1.0;
    }
    counts
}
