//! Feature encoding, the shared train/predict contract of the six
//! classifiers, and model files.

mod encoder;
mod persist;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::{self, BayesError, BayesNetConfig, BayesNetModel, NaiveBayesConfig, NaiveBayesModel};
use crate::dataset::FeatureSchema;
use crate::mlp::{self, MlpError, MlpModel, MlpTopology, TrainConfig, TrainingLog};
use crate::preprocess::Category;
use crate::trees::{
    self, DecisionTreeConfig, DecisionTreeModel, ForestConfig, RandomForestModel, RandomTreeConfig,
    RandomTreeModel, TreeData, TreeError,
};

pub use encoder::{fit_encoder, schema_kinds, EncodedColumn, EncodedInstance, Encoder};
pub use persist::{
    load_model, read_model, save_model, write_model, ModelFileError, FORMAT_VERSION, HEADER_LEN, MAGIC,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("instance has {found} features, model expects {expected}")]
    Arity { expected: usize, found: usize },
    #[error("cannot train on an empty training set")]
    EmptyTrainingSet,
    #[error("training rows and classes differ in length")]
    LengthMismatch,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassifierKind {
    DecisionTree,
    RandomForest,
    RandomTree,
    Mlp,
    NaiveBayes,
    BayesNet,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::DecisionTree,
        ClassifierKind::RandomForest,
        ClassifierKind::RandomTree,
        ClassifierKind::Mlp,
        ClassifierKind::NaiveBayes,
        ClassifierKind::BayesNet,
    ];

    /// Command-line name.
    pub fn key(self) -> &'static str {
        match self {
            ClassifierKind::DecisionTree => "j48",
            ClassifierKind::RandomForest => "random-forest",
            ClassifierKind::RandomTree => "random-tree",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::NaiveBayes => "naive-bayes",
            ClassifierKind::BayesNet => "bayes-net",
        }
    }

    /// Name used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            ClassifierKind::DecisionTree => "J48",
            ClassifierKind::RandomForest => "Random Forest",
            ClassifierKind::RandomTree => "Random Tree",
            ClassifierKind::Mlp => "MLP",
            ClassifierKind::NaiveBayes => "Naive Bayes",
            ClassifierKind::BayesNet => "Bayes Network",
        }
    }

    /// Model-file type tag.
    pub fn tag(self) -> u8 {
        match self {
            ClassifierKind::DecisionTree => 1,
            ClassifierKind::RandomForest => 2,
            ClassifierKind::RandomTree => 3,
            ClassifierKind::Mlp => 4,
            ClassifierKind::NaiveBayes => 5,
            ClassifierKind::BayesNet => 6,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.key() == s)
            .ok_or_else(|| format!("unknown classifier `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    DecisionTree(DecisionTreeModel),
    RandomTree(RandomTreeModel),
    RandomForest(RandomForestModel),
    Mlp(MlpModel),
    NaiveBayes(NaiveBayesModel),
    BayesNet(BayesNetModel),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::DecisionTree(_) => ClassifierKind::DecisionTree,
            Classifier::RandomTree(_) => ClassifierKind::RandomTree,
            Classifier::RandomForest(_) => ClassifierKind::RandomForest,
            Classifier::Mlp(_) => ClassifierKind::Mlp,
            Classifier::NaiveBayes(_) => ClassifierKind::NaiveBayes,
            Classifier::BayesNet(_) => ClassifierKind::BayesNet,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub kind: ClassifierKind,
    pub seed: u64,
    pub hyperparameters: Vec<(String, String)>,
    pub schema_digest: [u8; 32],
}

/// A fitted classifier with the encoder it was trained behind. Inputs are raw
/// record values; tree models read them directly, the others through the
/// encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub classifier: Classifier,
    pub encoder: Encoder,
    pub metadata: ModelMetadata,
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        self.classifier.kind()
    }

    pub fn n_classes(&self) -> usize {
        self.encoder.n_classes()
    }

    pub fn predict_distribution(&self, raw: &[f64]) -> Result<Vec<f64>, ModelError> {
        let expected = self.encoder.n_inputs();
        if raw.len() != expected {
            return Err(ModelError::Arity { expected, found: raw.len() });
        }
        Ok(match &self.classifier {
            Classifier::DecisionTree(m) => m.predict_distribution(raw)?,
            Classifier::RandomTree(m) => m.predict_distribution(raw)?,
            Classifier::RandomForest(m) => m.predict_distribution(raw)?,
            Classifier::Mlp(m) => m.predict_distribution(&self.encoder.transform(raw)?)?,
            Classifier::NaiveBayes(m) => m.posterior(&self.encoder.scale(raw)?)?,
            Classifier::BayesNet(m) => m.posterior(&self.encoder.scale(raw)?)?,
        })
    }

    /// Argmax of the distribution, ties to the lowest class index.
    pub fn predict_class(&self, raw: &[f64]) -> Result<usize, ModelError> {
        Ok(trees::argmax(&self.predict_distribution(raw)?))
    }
}

/// Hyperparameters of every classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub decision_tree: DecisionTreeConfig,
    pub random_tree: RandomTreeConfig,
    pub forest: ForestConfig,
    pub mlp: TrainConfig,
    /// Hidden units; `None` uses `(inputs + classes) / 2`.
    pub mlp_hidden: Option<usize>,
    pub naive_bayes: NaiveBayesConfig,
    pub bayes_net: BayesNetConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            decision_tree: DecisionTreeConfig::default(),
            random_tree: RandomTreeConfig::default(),
            forest: ForestConfig::default(),
            mlp: TrainConfig::default(),
            mlp_hidden: None,
            naive_bayes: NaiveBayesConfig::default(),
            bayes_net: BayesNetConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn set_seed(&mut self, seed: u64) {
        self.decision_tree.seed = seed;
        self.random_tree.seed = seed;
        self.forest.seed = seed;
        self.mlp.seed = seed;
    }

    pub fn seed(&self, kind: ClassifierKind) -> u64 {
        match kind {
            ClassifierKind::DecisionTree => self.decision_tree.seed,
            ClassifierKind::RandomTree => self.random_tree.seed,
            ClassifierKind::RandomForest => self.forest.seed,
            ClassifierKind::Mlp => self.mlp.seed,
            ClassifierKind::NaiveBayes | ClassifierKind::BayesNet => 0,
        }
    }

    /// Settings that shape `kind`, as name/value pairs.
    pub fn hyperparameters(&self, kind: ClassifierKind) -> Vec<(String, String)> {
        let kv = |k: &str, v: String| (k.to_string(), v);
        match kind {
            ClassifierKind::DecisionTree => {
                let c = &self.decision_tree;
                vec![
                    kv("confidence_factor", c.confidence_factor.to_string()),
                    kv("min_leaf", c.min_leaf.to_string()),
                    kv("subtree_raising", c.subtree_raising.to_string()),
                    kv("collapse", c.collapse.to_string()),
                    kv("pruned", c.pruned.to_string()),
                    kv("reduced_error_pruning", c.reduced_error_pruning.to_string()),
                    kv("num_folds", c.num_folds.to_string()),
                    kv("seed", c.seed.to_string()),
                ]
            }
            ClassifierKind::RandomTree => {
                let c = &self.random_tree;
                vec![
                    kv("m_tries", c.m_tries.map_or("default".into(), |m| m.to_string())),
                    kv("min_gain", c.min_gain.to_string()),
                    kv("min_leaf", c.min_leaf.to_string()),
                    kv("seed", c.seed.to_string()),
                ]
            }
            ClassifierKind::RandomForest => {
                let c = &self.forest;
                vec![
                    kv("num_trees", c.num_trees.to_string()),
                    kv("m_tries", c.m_tries.map_or("default".into(), |m| m.to_string())),
                    kv("min_gain", c.min_gain.to_string()),
                    kv("seed", c.seed.to_string()),
                ]
            }
            ClassifierKind::Mlp => {
                let c = &self.mlp;
                vec![
                    kv("learning_rate", c.learning_rate.to_string()),
                    kv("momentum", c.momentum.to_string()),
                    kv("validation_threshold", c.validation_threshold.to_string()),
                    kv("validation_fraction", c.validation_fraction.to_string()),
                    kv("max_epochs", c.max_epochs.to_string()),
                    kv("hidden", self.mlp_hidden.map_or("default".into(), |h| h.to_string())),
                    kv("seed", c.seed.to_string()),
                ]
            }
            ClassifierKind::NaiveBayes => {
                let c = &self.naive_bayes;
                vec![
                    kv("alpha", c.alpha.to_string()),
                    kv("variance_floor", c.variance_floor.to_string()),
                    kv("prior_alpha", c.prior_alpha.to_string()),
                ]
            }
            ClassifierKind::BayesNet => {
                let c = &self.bayes_net;
                vec![
                    kv("alpha", c.alpha.to_string()),
                    kv("max_parents", c.max_parents.to_string()),
                    kv("bins", c.bins.to_string()),
                    kv("search", "k2".into()),
                ]
            }
        }
    }
}

/// What training produced besides the model.
#[derive(Debug, Clone, Default)]
pub struct TrainingDiagnostics {
    pub mlp_log: Option<TrainingLog>,
}

/// Fits the encoder on `rows` (raw record values) and trains `kind`.
/// `classes` are category indices.
pub fn train_model(
    kind: ClassifierKind,
    rows: &[Vec<f64>],
    classes: &[usize],
    schema: &FeatureSchema,
    config: &TrainingConfig,
) -> Result<(TrainedModel, TrainingDiagnostics), ModelError> {
    if rows.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if rows.len() != classes.len() {
        return Err(ModelError::LengthMismatch);
    }
    let encoder = fit_encoder(rows.iter().map(|r| r.as_slice()), schema)?;
    let n_classes = Category::COUNT;
    let mut diagnostics = TrainingDiagnostics::default();
    let classifier = match kind {
        ClassifierKind::DecisionTree | ClassifierKind::RandomTree | ClassifierKind::RandomForest => {
            let data = TreeData::from_rows(rows, classes, schema_kinds(schema), n_classes);
            match kind {
                ClassifierKind::DecisionTree => {
                    Classifier::DecisionTree(trees::train_decision_tree(&data, &config.decision_tree)?)
                }
                ClassifierKind::RandomTree => {
                    Classifier::RandomTree(trees::train_random_tree(&data, &config.random_tree)?)
                }
                _ => Classifier::RandomForest(trees::train_random_forest(&data, &config.forest)?),
            }
        }
        ClassifierKind::Mlp => {
            let inputs: Vec<Vec<f64>> = rows.iter().map(|r| encoder.transform(r)).collect::<Result<_, _>>()?;
            let mut topology = MlpTopology::for_data(encoder.width(), n_classes);
            if let Some(h) = config.mlp_hidden {
                topology.hidden = h;
            }
            let (model, log) = mlp::train_mlp(&inputs, classes, topology, &config.mlp)?;
            diagnostics.mlp_log = Some(log);
            Classifier::Mlp(model)
        }
        ClassifierKind::NaiveBayes | ClassifierKind::BayesNet => {
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| encoder.scale(r)).collect::<Result<_, _>>()?;
            let kinds = encoder.kinds();
            if kind == ClassifierKind::NaiveBayes {
                Classifier::NaiveBayes(bayes::train_naive_bayes(&scaled, classes, &kinds, n_classes, config.naive_bayes)?)
            } else {
                Classifier::BayesNet(bayes::train_bayes_net(&scaled, classes, &kinds, n_classes, config.bayes_net)?)
            }
        }
    };
    let metadata = ModelMetadata {
        kind,
        seed: config.seed(kind),
        hyperparameters: config.hyperparameters(kind),
        schema_digest: schema.digest(),
    };
    Ok((TrainedModel { classifier, encoder, metadata }, diagnostics))
}
