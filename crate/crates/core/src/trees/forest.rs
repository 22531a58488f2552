use bitvec::prelude::*;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::c45::{check_arity, grow_with};
use super::split::{GrowParams, Scratch};
use super::{argmax, SplitCriterion, TreeData, TreeError, TreeNode};

/// `floor(log2 F) + 1`.
pub fn default_m_tries(n_features: usize) -> usize {
    (n_features.max(1) as f64).log2().floor() as usize + 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomTreeConfig {
    /// Features drawn at each node; `None` means `floor(log2 F) + 1`.
    pub m_tries: Option<usize>,
    /// Splits with a smaller information gain are rejected.
    pub min_gain: f64,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for RandomTreeConfig {
    fn default() -> Self {
        Self { m_tries: None, min_gain: 0.001, min_leaf: 1, seed: 1 }
    }
}

impl RandomTreeConfig {
    fn resolve_m_tries(&self, n_features: usize) -> Result<usize, TreeError> {
        let m = self.m_tries.unwrap_or_else(|| default_m_tries(n_features));
        if m == 0 || m > n_features {
            return Err(TreeError::Config(format!(
                "m_tries must lie in 1..={n_features}, got {m}"
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomTreeModel {
    pub root: TreeNode,
    pub config: RandomTreeConfig,
    pub n_features: usize,
}

impl RandomTreeModel {
    pub fn predict_distribution(&self, row: &[f64]) -> Result<Vec<f64>, TreeError> {
        check_arity(self.n_features, row)?;
        Ok(self.root.distribution(row).to_vec())
    }

    pub fn predict(&self, row: &[f64]) -> Result<usize, TreeError> {
        check_arity(self.n_features, row)?;
        Ok(self.root.predict(row))
    }
}

fn grow_random(
    data: &TreeData,
    idx: Vec<u32>,
    m_tries: usize,
    config: &RandomTreeConfig,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let params = GrowParams {
        min_leaf: config.min_leaf,
        min_gain: config.min_gain,
        criterion: SplitCriterion::InformationGain,
    };
    let mut pick = |n_features: usize| {
        let mut f = index::sample(rng, n_features, m_tries).into_vec();
        f.sort_unstable();
        f
    };
    grow_with(data, idx, &params, None, &mut Scratch::default(), &mut pick)
}

pub fn train_random_tree(
    data: &TreeData,
    config: &RandomTreeConfig,
) -> Result<RandomTreeModel, TreeError> {
    if data.is_empty() {
        return Err(TreeError::EmptyTrainingSet);
    }
    let m = config.resolve_m_tries(data.n_features())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let root = grow_random(data, (0..data.len() as u32).collect(), m, config, &mut rng);
    Ok(RandomTreeModel { root, config: config.clone(), n_features: data.n_features() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub num_trees: usize,
    pub m_tries: Option<usize>,
    pub min_gain: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { num_trees: 100, m_tries: None, min_gain: 0.001, seed: 1, threads: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<TreeNode>,
    /// Per tree, which training records were drawn into its bootstrap.
    pub in_bag: Vec<BitVec<u64, Lsb0>>,
    pub config: ForestConfig,
    pub n_features: usize,
    pub n_classes: usize,
}

impl RandomForestModel {
    pub fn votes(&self, row: &[f64]) -> Result<Vec<u32>, TreeError> {
        check_arity(self.n_features, row)?;
        let mut votes = vec![0u32; self.n_classes];
        for t in &self.trees {
            votes[t.predict(row)] += 1;
        }
        Ok(votes)
    }

    /// Vote shares.
    pub fn predict_distribution(&self, row: &[f64]) -> Result<Vec<f64>, TreeError> {
        let n = self.trees.len() as f64;
        Ok(self.votes(row)?.into_iter().map(|v| v as f64 / n).collect())
    }

    /// Majority vote, ties to the lowest class index.
    pub fn predict(&self, row: &[f64]) -> Result<usize, TreeError> {
        let votes: Vec<f64> = self.votes(row)?.into_iter().map(f64::from).collect();
        Ok(argmax(&votes))
    }
}

/// Generator for tree `tree` of a forest seeded with `seed`.
fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64 + 1);
    rng
}

pub fn train_random_forest(
    data: &TreeData,
    config: &ForestConfig,
) -> Result<RandomForestModel, TreeError> {
    if data.is_empty() {
        return Err(TreeError::EmptyTrainingSet);
    }
    if config.num_trees == 0 {
        return Err(TreeError::Config("a forest needs at least one tree".into()));
    }
    let tree_config = RandomTreeConfig {
        m_tries: config.m_tries,
        min_gain: config.min_gain,
        min_leaf: 1,
        seed: config.seed,
    };
    let m = tree_config.resolve_m_tries(data.n_features())?;
    let n = data.len();

    let build = |t: usize| {
        let mut rng = tree_rng(config.seed, t);
        let mut bag = bitvec![u64, Lsb0; 0; n];
        let mut idx: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
        for &i in &idx {
            bag.set(i as usize, true);
        }
        idx.sort_unstable();
        let root = grow_random(data, idx, m, &tree_config, &mut rng);
        (root, bag)
    };
    let built: Vec<(TreeNode, BitVec<u64, Lsb0>)> = match config.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| TreeError::Config(e.to_string()))?
            .install(|| (0..config.num_trees).into_par_iter().map(build).collect()),
        None => (0..config.num_trees).into_par_iter().map(build).collect(),
    };
    let (trees, in_bag) = built.into_iter().unzip();
    Ok(RandomForestModel {
        trees,
        in_bag,
        config: config.clone(),
        n_features: data.n_features(),
        n_classes: data.n_classes,
    })
}

/// Out-of-bag error over the forest's own training data: each record is
/// voted on only by trees whose bootstrap missed it; records that every
/// bootstrap drew are left out of the denominator.
pub fn oob_error(model: &RandomForestModel, data: &TreeData) -> Result<f64, TreeError> {
    let mut wrong = 0usize;
    let mut counted = 0usize;
    let mut row = vec![0.0; data.n_features()];
    let mut votes = vec![0.0; model.n_classes];
    for i in 0..data.len() {
        votes.iter_mut().for_each(|v| *v = 0.0);
        let mut any = false;
        for (tree, bag) in model.trees.iter().zip(&model.in_bag) {
            if bag.get(i).is_some_and(|b| !*b) {
                if !any {
                    for (f, col) in data.columns.iter().enumerate() {
                        row[f] = col[i];
                    }
                    any = true;
                }
                votes[tree.predict(&row)] += 1.0;
            }
        }
        if any {
            counted += 1;
            if argmax(&votes) != data.classes[i] {
                wrong += 1;
            }
        }
    }
    if counted == 0 {
        return Err(TreeError::UndefinedOob);
    }
    Ok(wrong as f64 / counted as f64)
}
