use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{normalize_log, BayesError, Discretizer, FeatureKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesNetConfig {
    /// Simple-estimator pseudo-count, also the Dirichlet parameter of the
    /// structure score.
    pub alpha: f64,
    /// Feature parents allowed per node in addition to the class.
    pub max_parents: usize,
    pub bins: usize,
}

impl Default for BayesNetConfig {
    fn default() -> Self {
        Self { alpha: 0.5, max_parents: 1, bins: 10 }
    }
}

/// Conditional table of one feature node given the class and its feature
/// parents. Rows are ordered class-major, then parent values in mixed radix
/// with the first parent most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub parents: Vec<usize>,
    pub radix: Vec<usize>,
    pub arity: usize,
    pub log_probs: Vec<f64>,
}

impl Cpt {
    /// Table from plain probabilities; every row must sum to 1.
    pub fn new(parents: Vec<usize>, radix: Vec<usize>, arity: usize, n_classes: usize, probs: &[f64]) -> Result<Self, BayesError> {
        if parents.len() != radix.len() {
            return Err(BayesError::LengthMismatch);
        }
        let rows = n_classes * radix.iter().product::<usize>();
        if probs.len() != rows * arity {
            return Err(BayesError::LengthMismatch);
        }
        for row in probs.chunks(arity) {
            if row.iter().any(|&p| p < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(BayesError::Config("conditional table row is not a distribution".into()));
            }
        }
        Ok(Self { parents, radix, arity, log_probs: probs.iter().map(|p| p.ln()).collect() })
    }

    pub fn n_rows(&self) -> usize {
        self.log_probs.len() / self.arity
    }

    fn row(&self, class: usize, x: &[usize]) -> usize {
        let mut r = class;
        for (p, radix) in self.parents.iter().zip(&self.radix) {
            r = r * radix + x[*p];
        }
        r
    }

    fn log_prob(&self, class: usize, x: &[usize], value: usize) -> f64 {
        self.log_probs[self.row(class, x) * self.arity + value]
    }
}

/// One accepted K2 step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParentAdded {
    pub node: usize,
    pub parent: usize,
    pub score_before: f64,
    pub score_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesNetModel {
    pub discretizer: Discretizer,
    pub class_log_prior: Vec<f64>,
    pub cpts: Vec<Cpt>,
    pub search: Vec<ParentAdded>,
    pub config: BayesNetConfig,
}

/// Bayesian-Dirichlet marginal likelihood of one family (node given class
/// and `parents`) with uniform pseudo-count `alpha`:
/// `sum_j [lnG(r a) - lnG(r a + N_j) + sum_k (lnG(a + N_jk) - lnG(a))]`.
pub fn family_score(
    columns: &[Vec<usize>],
    arities: &[usize],
    classes: &[usize],
    n_classes: usize,
    node: usize,
    parents: &[usize],
    alpha: f64,
) -> f64 {
    let r = arities[node];
    let configs = n_classes * parents.iter().map(|&p| arities[p]).product::<usize>();
    let mut counts = vec![0u32; configs * r];
    let col = &columns[node];
    for i in 0..classes.len() {
        let mut j = classes[i];
        for &p in parents {
            j = j * arities[p] + columns[p][i];
        }
        counts[j * r + col[i]] += 1;
    }
    let lg_a = ln_gamma(alpha);
    let lg_ra = ln_gamma(r as f64 * alpha);
    let mut score = 0.0;
    for row in counts.chunks(r) {
        let n: u32 = row.iter().sum();
        if n == 0 {
            continue;
        }
        score += lg_ra - ln_gamma(r as f64 * alpha + n as f64);
        for &k in row {
            if k > 0 {
                score += ln_gamma(alpha + k as f64) - lg_a;
            }
        }
    }
    score
}

/// Discretises, runs K2 in column order (candidates are earlier columns,
/// best candidate first, ties to the lowest index) and fits every table with
/// the add-alpha estimator.
pub fn train_bayes_net(
    rows: &[Vec<f64>],
    classes: &[usize],
    kinds: &[FeatureKind],
    n_classes: usize,
    config: BayesNetConfig,
) -> Result<BayesNetModel, BayesError> {
    if rows.is_empty() {
        return Err(BayesError::EmptyTrainingSet);
    }
    if rows.len() != classes.len() {
        return Err(BayesError::LengthMismatch);
    }
    if !(config.alpha > 0.0) {
        return Err(BayesError::Config(format!("alpha {}", config.alpha)));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != kinds.len()) {
        return Err(BayesError::Arity { expected: kinds.len(), found: r.len() });
    }
    if classes.iter().any(|&c| c >= n_classes) {
        return Err(BayesError::Config("class index out of range".into()));
    }
    let discretizer = Discretizer::fit(rows, kinds, config.bins)?;
    let arities = discretizer.arities().to_vec();
    let columns: Vec<Vec<usize>> = (0..kinds.len())
        .map(|f| rows.iter().map(|r| discretizer.bin(f, r[f])).collect())
        .collect();
    Ok(fit_network(discretizer, &columns, &arities, classes, n_classes, config))
}

fn fit_network(
    discretizer: Discretizer,
    columns: &[Vec<usize>],
    arities: &[usize],
    classes: &[usize],
    n_classes: usize,
    config: BayesNetConfig,
) -> BayesNetModel {
    let alpha = config.alpha;
    let mut search = Vec::new();
    let mut cpts = Vec::with_capacity(columns.len());
    for node in 0..columns.len() {
        let mut parents: Vec<usize> = Vec::new();
        let mut score = family_score(columns, arities, classes, n_classes, node, &parents, alpha);
        while parents.len() < config.max_parents {
            let mut best: Option<(usize, f64)> = None;
            let candidates: Vec<usize> = (0..node).filter(|c| !parents.contains(c)).collect();
            for cand in candidates {
                parents.push(cand);
                let s = family_score(columns, arities, classes, n_classes, node, &parents, alpha);
                parents.pop();
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((cand, s));
                }
            }
            match best {
                Some((cand, s)) if s > score => {
                    search.push(ParentAdded { node, parent: cand, score_before: score, score_after: s });
                    parents.push(cand);
                    score = s;
                }
                _ => break,
            }
        }
        cpts.push(estimate_cpt(columns, arities, classes, n_classes, node, parents, alpha));
    }
    let mut class_n = vec![0.0; n_classes];
    for &c in classes {
        class_n[c] += 1.0;
    }
    // smoothing covers the observed classes only; an absent class keeps
    // prior 0 so it can never be predicted
    let present = class_n.iter().filter(|&&n| n > 0.0).count() as f64;
    let denom = classes.len() as f64 + alpha * present;
    let class_log_prior =
        class_n.iter().map(|&n| if n > 0.0 { ((n + alpha) / denom).ln() } else { f64::NEG_INFINITY }).collect();
    BayesNetModel { discretizer, class_log_prior, cpts, search, config }
}

fn estimate_cpt(
    columns: &[Vec<usize>],
    arities: &[usize],
    classes: &[usize],
    n_classes: usize,
    node: usize,
    parents: Vec<usize>,
    alpha: f64,
) -> Cpt {
    let radix: Vec<usize> = parents.iter().map(|&p| arities[p]).collect();
    let arity = arities[node];
    let mut cpt = Cpt { parents, radix, arity, log_probs: Vec::new() };
    let rows = n_classes * cpt.radix.iter().product::<usize>();
    let mut counts = vec![0.0; rows * arity];
    let mut x = vec![0usize; columns.len()];
    for (i, &c) in classes.iter().enumerate() {
        for &p in &cpt.parents {
            x[p] = columns[p][i];
        }
        counts[cpt.row(c, &x) * arity + columns[node][i]] += 1.0;
    }
    for row in counts.chunks_mut(arity) {
        let d = row.iter().sum::<f64>() + alpha * arity as f64;
        for v in row.iter_mut() {
            *v = ((*v + alpha) / d).ln();
        }
    }
    cpt.log_probs = counts;
    cpt
}

impl BayesNetModel {
    /// A network from explicit tables; parents must precede their child.
    pub fn from_parts(discretizer: Discretizer, class_prior: &[f64], cpts: Vec<Cpt>, config: BayesNetConfig) -> Result<Self, BayesError> {
        if cpts.len() != discretizer.n_features() {
            return Err(BayesError::LengthMismatch);
        }
        if (class_prior.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(BayesError::Config("class prior is not a distribution".into()));
        }
        for (node, cpt) in cpts.iter().enumerate() {
            if cpt.parents.iter().any(|&p| p >= node) {
                return Err(BayesError::Config(format!("node {node} has a parent that does not precede it")));
            }
            if cpt.arity != discretizer.arities()[node] || cpt.n_rows() != class_prior.len() * cpt.radix.iter().product::<usize>() {
                return Err(BayesError::LengthMismatch);
            }
        }
        Ok(Self {
            discretizer,
            class_log_prior: class_prior.iter().map(|p| p.ln()).collect(),
            cpts,
            search: Vec::new(),
            config,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.class_log_prior.len()
    }

    pub fn n_features(&self) -> usize {
        self.cpts.len()
    }

    /// `log P(y) + sum_i log P(x_i | y, parents(x_i))` on discretised values.
    pub fn log_joint_discrete(&self, x: &[usize]) -> Vec<f64> {
        (0..self.n_classes())
            .map(|c| {
                self.class_log_prior[c]
                    + self.cpts.iter().enumerate().map(|(i, cpt)| cpt.log_prob(c, x, x[i])).sum::<f64>()
            })
            .collect()
    }

    /// Class posterior by Bayes' rule over the network's joint distribution.
    pub fn posterior(&self, x: &[f64]) -> Result<Vec<f64>, BayesError> {
        let d = self.discretizer.transform(x)?;
        normalize_log(&self.log_joint_discrete(&d))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize, BayesError> {
        Ok(crate::trees::argmax(&self.posterior(x)?))
    }

    /// `node <- parents` lines followed by every conditional table.
    pub fn dump(&self, names: &[String], class_names: &[String]) -> String {
        let name = |i: usize| names.get(i).cloned().unwrap_or_else(|| format!("x{i}"));
        let cname = |c: usize| class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
        let mut out = String::from("class <-\n");
        for (i, cpt) in self.cpts.iter().enumerate() {
            let mut line = format!("{} <- class", name(i));
            for &p in &cpt.parents {
                line.push_str(", ");
                line.push_str(&name(p));
            }
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("\ncpt class\n ");
        for lp in &self.class_log_prior {
            out.push_str(&format!(" {:.6}", lp.exp()));
        }
        out.push('\n');
        for (i, cpt) in self.cpts.iter().enumerate() {
            out.push_str(&format!("cpt {}\n", name(i)));
            let per_class = cpt.radix.iter().product::<usize>();
            for (r, row) in cpt.log_probs.chunks(cpt.arity).enumerate() {
                let mut label = format!("  class={}", cname(r / per_class));
                let mut rest = r % per_class;
                let mut values = vec![0; cpt.parents.len()];
                for k in (0..cpt.parents.len()).rev() {
                    values[k] = rest % cpt.radix[k];
                    rest /= cpt.radix[k];
                }
                for (p, v) in cpt.parents.iter().zip(values) {
                    label.push_str(&format!(" {}={}", name(*p), v));
                }
                out.push_str(&label);
                out.push_str(" :");
                for lp in row {
                    out.push_str(&format!(" {:.6}", lp.exp()));
                }
                out.push('\n');
            }
        }
        out
    }
}
