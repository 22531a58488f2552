//! Attack taxonomy, stratified extraction of the training set and the
//! disjoint holdout test set.
//!
//! All randomness comes from ChaCha8 (a counter-based generator with a
//! published algorithm). Each label stratum draws from its own stream,
//! selected by the FNV-1a hash of the label, so a stratum's draw does not
//! depend on which other labels are in the plan.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::LabelCensus;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("infeasible plan: label `{label}` requests {requested} instances but only {available} exist")]
    Infeasible { label: String, requested: u64, available: u64 },
    #[error("infeasible holdout: {requested} test instances requested but only {available} records remain")]
    InsufficientRemainder { requested: u64, available: u64 },
    #[error("plan line {line}: {message}")]
    PlanParse { line: usize, message: String },
    #[error("manifest line {line}: {message}")]
    ManifestParse { line: usize, message: String },
    #[error("class proportions are undefined for an empty sample")]
    EmptySample,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The five traffic categories, in the fixed class order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Dos,
    U2r,
    R2l,
    Probe,
    Normal,
}

impl Category {
    pub const ALL: [Category; 5] =
        [Category::Dos, Category::U2r, Category::R2l, Category::Probe, Category::Normal];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Category> {
        Self::ALL.get(idx).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Dos => "DOS",
            Category::U2r => "U2R",
            Category::R2l => "R2L",
            Category::Probe => "PROBE",
            Category::Normal => "NORMAL",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw label → category.
#[derive(Debug, Clone)]
pub struct AttackTaxonomy {
    mapping: HashMap<String, Category>,
}

const KDD99_TAXONOMY: &[(&str, Category)] = &[
    ("smurf", Category::Dos),
    ("neptune", Category::Dos),
    ("back", Category::Dos),
    ("pod", Category::Dos),
    ("teardrop", Category::Dos),
    ("land", Category::Dos),
    ("buffer_overflow", Category::U2r),
    ("loadmodule", Category::U2r),
    ("perl", Category::U2r),
    ("rootkit", Category::U2r),
    ("ftp_write", Category::R2l),
    ("guess_passwd", Category::R2l),
    ("imap", Category::R2l),
    ("multihop", Category::R2l),
    ("phf", Category::R2l),
    ("spy", Category::R2l),
    ("warezclient", Category::R2l),
    ("warezmaster", Category::R2l),
    ("ipsweep", Category::Probe),
    ("nmap", Category::Probe),
    ("portsweep", Category::Probe),
    ("satan", Category::Probe),
    ("normal", Category::Normal),
];

impl Default for AttackTaxonomy {
    fn default() -> Self {
        Self::kdd99()
    }
}

impl AttackTaxonomy {
    /// The KDD Cup 99 attack families. `land` appears in the raw corpus
    /// (21 instances) and is a denial-of-service attack.
    pub fn kdd99() -> Self {
        Self { mapping: KDD99_TAXONOMY.iter().map(|(l, c)| (l.to_string(), *c)).collect() }
    }

    pub fn insert(&mut self, label: &str, category: Category) {
        self.mapping.insert(label.to_owned(), category);
    }

    /// `None` marks a label outside the taxonomy (UNKNOWN).
    pub fn categorize(&self, label: &str) -> Option<Category> {
        self.mapping.get(label).copied()
    }

    pub fn labels(&self) -> impl Iterator<Item = (&str, Category)> {
        self.mapping.iter().map(|(l, c)| (l.as_str(), *c))
    }
}

/// Requested instance count per raw label, plus the sampling seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPlan {
    pub targets: BTreeMap<String, u64>,
    pub seed: u64,
    /// Extract size the plan is meant to produce, when the source states one.
    pub expected_total: Option<u64>,
}

const EXTRACT_PLAN: &str = include_str!("../data/extract.plan");

impl SamplingPlan {
    /// The shipped per-label training extract (seed 1).
    pub fn kdd99_default() -> Self {
        Self::parse(EXTRACT_PLAN).expect("shipped plan is valid")
    }

    /// `floor(count * fraction)` instances of every label in `census`.
    pub fn proportional(census: &LabelCensus, fraction: f64, seed: u64) -> Self {
        let targets = census
            .counts()
            .iter()
            .map(|(l, n)| (l.clone(), (*n as f64 * fraction).floor() as u64))
            .collect();
        Self { targets, seed, expected_total: None }
    }

    pub fn total(&self) -> u64 {
        self.targets.values().sum()
    }

    /// `expected_total - total()` when the plan declares an expected size
    /// that its rows do not add up to.
    pub fn discrepancy(&self) -> Option<i64> {
        self.expected_total
            .filter(|&e| e != self.total())
            .map(|e| e as i64 - self.total() as i64)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PreprocessError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Plan file: a `seed=<u64>` line, an optional `expected_total=<n>` line,
    /// then `label,target_count` rows (a literal `label,target_count` header
    /// row and `#` comments are skipped).
    pub fn parse(text: &str) -> Result<Self, PreprocessError> {
        let mut seed = None;
        let mut expected_total = None;
        let mut targets = BTreeMap::new();
        let err = |line: usize, message: String| PreprocessError::PlanParse { line, message };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') || t == "label,target_count" {
                continue;
            }
            if let Some(v) = t.strip_prefix("seed=") {
                seed = Some(v.trim().parse().map_err(|_| err(line, format!("bad seed `{v}`")))?);
            } else if let Some(v) = t.strip_prefix("expected_total=") {
                expected_total =
                    Some(v.trim().parse().map_err(|_| err(line, format!("bad total `{v}`")))?);
            } else {
                let (label, count) =
                    t.split_once(',').ok_or_else(|| err(line, format!("expected `label,count`, got `{t}`")))?;
                let count: u64 =
                    count.trim().parse().map_err(|_| err(line, format!("bad count `{count}`")))?;
                if targets.insert(label.trim().to_owned(), count).is_some() {
                    return Err(err(line, format!("label `{label}` listed twice")));
                }
            }
        }
        let seed = seed.ok_or_else(|| err(0, "missing `seed=<u64>` line".into()))?;
        Ok(Self { targets, seed, expected_total })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("seed={}\n", self.seed);
        if let Some(t) = self.expected_total {
            out.push_str(&format!("expected_total={t}\n"));
        }
        out.push_str("label,target_count\n");
        for (l, n) in &self.targets {
            out.push_str(&format!("{l},{n}\n"));
        }
        out
    }

    /// Every positive target must fit in its census stratum.
    pub fn validate(&self, census: &LabelCensus) -> Result<(), PreprocessError> {
        for (label, &requested) in &self.targets {
            let available = census.get(label);
            if requested > available {
                return Err(PreprocessError::Infeasible { label: label.clone(), requested, available });
            }
        }
        Ok(())
    }
}

/// Record ordinals grouped by raw label, built in one pass over a corpus.
#[derive(Debug, Clone, Default)]
pub struct LabelIndex {
    strata: BTreeMap<String, Vec<u64>>,
    len: u64,
}

impl LabelIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append the next record's label; its ordinal is the current length.
    pub fn push(&mut self, label: &str) {
        match self.strata.get_mut(label) {
            Some(v) => v.push(self.len),
            None => {
                self.strata.insert(label.to_owned(), vec![self.len]);
            }
        }
        self.len += 1;
    }

    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Self {
        let mut idx = Self::new();
        labels.into_iter().for_each(|l| idx.push(l));
        idx
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stratum(&self, label: &str) -> &[u64] {
        self.strata.get(label).map_or(&[], Vec::as_slice)
    }

    pub fn census(&self) -> LabelCensus {
        let mut c = LabelCensus::new();
        for (l, v) in &self.strata {
            c.add_n(l, v.len() as u64);
        }
        c
    }

    /// Label of an ordinal (linear in the number of strata).
    pub fn label_of(&self, ordinal: u64) -> Option<&str> {
        self.strata
            .iter()
            .find(|(_, v)| v.binary_search(&ordinal).is_ok())
            .map(|(l, _)| l.as_str())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Generator for one labelled substream of `seed`.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label.as_bytes()));
    rng
}

/// Draw `plan.targets[l]` ordinals uniformly without replacement from each
/// label stratum, then shuffle the concatenation.
pub fn stratified_sample(
    corpus: &LabelIndex,
    plan: &SamplingPlan,
) -> Result<Vec<u64>, PreprocessError> {
    plan.validate(&corpus.census())?;
    let mut out = Vec::with_capacity(plan.total() as usize);
    for (label, &target) in &plan.targets {
        if target == 0 {
            continue;
        }
        let stratum = corpus.stratum(label);
        let mut rng = substream(plan.seed, &format!("stratum:{label}"));
        let picks = index::sample(&mut rng, stratum.len(), target as usize);
        out.extend(picks.into_iter().map(|i| stratum[i]));
    }
    out.shuffle(&mut substream(plan.seed, "shuffle"));
    Ok(out)
}

/// Train/test ordinals; disjoint by record position, not by content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<u64>,
    pub test: Vec<u64>,
}

/// Draw `test_size` ordinals uniformly without replacement from the corpus
/// positions not in `train`. Test ordinals are returned in ascending order.
pub fn holdout_sample(
    corpus_len: u64,
    train: &[u64],
    test_size: u64,
    seed: u64,
) -> Result<DatasetSplit, PreprocessError> {
    let mut in_train = vec![false; corpus_len as usize];
    for &o in train {
        if let Some(slot) = in_train.get_mut(o as usize) {
            *slot = true;
        }
    }
    let pool: Vec<u64> = (0..corpus_len).filter(|&o| !in_train[o as usize]).collect();
    if test_size > pool.len() as u64 {
        return Err(PreprocessError::InsufficientRemainder {
            requested: test_size,
            available: pool.len() as u64,
        });
    }
    let mut rng = substream(seed, "holdout");
    let mut test: Vec<u64> =
        index::sample(&mut rng, pool.len(), test_size as usize).into_iter().map(|i| pool[i]).collect();
    test.sort_unstable();
    Ok(DatasetSplit { train: train.to_vec(), test })
}

/// Fraction of each category among labels the taxonomy knows.
pub fn class_proportions<'a>(
    labels: impl IntoIterator<Item = &'a str>,
    taxonomy: &AttackTaxonomy,
) -> Result<BTreeMap<Category, f64>, PreprocessError> {
    let mut counts = [0u64; Category::COUNT];
    for l in labels {
        if let Some(c) = taxonomy.categorize(l) {
            counts[c.index()] += 1;
        }
    }
    proportions_from_counts(&counts)
}

/// Same as [`class_proportions`] but from a census.
pub fn census_proportions(
    census: &LabelCensus,
    taxonomy: &AttackTaxonomy,
) -> Result<BTreeMap<Category, f64>, PreprocessError> {
    let mut counts = [0u64; Category::COUNT];
    for (l, n) in census.counts() {
        if let Some(c) = taxonomy.categorize(l) {
            counts[c.index()] += n;
        }
    }
    proportions_from_counts(&counts)
}

fn proportions_from_counts(
    counts: &[u64; Category::COUNT],
) -> Result<BTreeMap<Category, f64>, PreprocessError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(PreprocessError::EmptySample);
    }
    Ok(Category::ALL
        .iter()
        .filter(|c| counts[c.index()] > 0)
        .map(|c| (*c, counts[c.index()] as f64 / total as f64))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Test => "test",
        })
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Role::Train),
            "test" => Ok(Role::Test),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

/// Ordinal list with a `# role: train|test` header, one ordinal per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub role: Role,
    pub ordinals: Vec<u64>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.ordinals.len() * 8 + 16);
        out.push_str(&format!("# role: {}\n", self.role));
        for o in &self.ordinals {
            out.push_str(&o.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, PreprocessError> {
        let mut role = None;
        let mut ordinals = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let t = raw.trim();
            let bad = |message: String| PreprocessError::ManifestParse { line: i + 1, message };
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('#') {
                if let Some(r) = rest.trim().strip_prefix("role:") {
                    role = Some(r.trim().parse::<Role>().map_err(bad)?);
                }
                continue;
            }
            ordinals.push(t.parse().map_err(|_| bad(format!("bad ordinal `{t}`")))?);
        }
        let role = role.ok_or(PreprocessError::ManifestParse {
            line: 1,
            message: "missing `# role: train|test` header".into(),
        })?;
        Ok(Self { role, ordinals })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PreprocessError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PreprocessError> {
        Ok(fs::write(path, self.to_text())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn categorize_known_and_unknown() {
        let t = AttackTaxonomy::kdd99();
        assert_eq!(t.categorize("smurf"), Some(Category::Dos));
        assert_eq!(t.categorize("normal"), Some(Category::Normal));
        assert_eq!(t.categorize("guess_passwd"), Some(Category::R2l));
        assert_eq!(t.categorize("rootkit"), Some(Category::U2r));
        assert_eq!(t.categorize("satan"), Some(Category::Probe));
        assert_eq!(t.categorize("mailbomb"), None);
    }

    #[test]
    fn taxonomy_covers_every_corpus_label() {
        let t = AttackTaxonomy::kdd99();
        for label in SamplingPlan::kdd99_default().targets.keys() {
            assert!(t.categorize(label).is_some(), "{label}");
        }
    }

    #[test]
    fn default_plan_keeps_its_declared_discrepancy() {
        let plan = SamplingPlan::kdd99_default();
        assert_eq!(plan.targets.len(), 22);
        assert_eq!(plan.total(), 148_753);
        assert_eq!(plan.expected_total, Some(148_758));
        assert_eq!(plan.discrepancy(), Some(5));
        assert_eq!(plan.seed, 1);
        assert_eq!(SamplingPlan::parse(&plan.to_text()).unwrap(), plan);
    }

    fn toy_corpus() -> LabelIndex {
        let mut labels = Vec::new();
        for i in 0..200 {
            labels.push(match i % 10 {
                0..=5 => "smurf",
                6..=8 => "normal",
                _ => "perl",
            });
        }
        LabelIndex::from_labels(labels)
    }

    fn plan(pairs: &[(&str, u64)], seed: u64) -> SamplingPlan {
        SamplingPlan {
            targets: pairs.iter().map(|(l, n)| (l.to_string(), *n)).collect(),
            seed,
            expected_total: None,
        }
    }

    #[test]
    fn zero_plan_is_empty() {
        let out = stratified_sample(&toy_corpus(), &plan(&[("smurf", 0), ("perl", 0)], 3)).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn exhaustive_stratum_draw() {
        let corpus = toy_corpus();
        let out = stratified_sample(&corpus, &plan(&[("perl", 20)], 3)).unwrap();
        let mut sorted = out.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, corpus.stratum("perl"));
    }

    #[test]
    fn infeasible_plan_names_the_label() {
        match stratified_sample(&toy_corpus(), &plan(&[("perl", 100)], 3)) {
            Err(PreprocessError::Infeasible { label, requested: 100, available: 20 }) => {
                assert_eq!(label, "perl")
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            stratified_sample(&toy_corpus(), &plan(&[("spy", 1)], 3)),
            Err(PreprocessError::Infeasible { available: 0, .. })
        ));
    }

    #[test]
    fn strata_draws_do_not_depend_on_other_labels() {
        let corpus = toy_corpus();
        let a = stratified_sample(&corpus, &plan(&[("smurf", 30)], 9)).unwrap();
        let b = stratified_sample(&corpus, &plan(&[("smurf", 30), ("normal", 10)], 9)).unwrap();
        let smurf_a: HashSet<u64> = a.into_iter().collect();
        let smurf_b: HashSet<u64> =
            b.into_iter().filter(|o| corpus.label_of(*o) == Some("smurf")).collect();
        assert_eq!(smurf_a, smurf_b);
    }

    #[test]
    fn holdout_edges() {
        let split = holdout_sample(10, &[1, 3, 5], 0, 4).unwrap();
        assert!(split.test.is_empty());
        let split = holdout_sample(10, &[1, 3, 5], 7, 4).unwrap();
        assert_eq!(split.test, vec![0, 2, 4, 6, 7, 8, 9]);
        assert!(matches!(
            holdout_sample(10, &[1, 3, 5], 8, 4),
            Err(PreprocessError::InsufficientRemainder { requested: 8, available: 7 })
        ));
    }

    #[test]
    fn proportions() {
        let t = AttackTaxonomy::kdd99();
        let p = class_proportions(["smurf"], &t).unwrap();
        assert_eq!(p[&Category::Dos], 1.0);
        let p = class_proportions(["smurf", "normal"], &t).unwrap();
        assert_eq!((p[&Category::Dos], p[&Category::Normal]), (0.5, 0.5));
        assert!(matches!(class_proportions([], &t), Err(PreprocessError::EmptySample)));
    }

    #[test]
    fn extract_category_shares() {
        // per-category sums of the plan rows, divided by the plan total
        let plan = SamplingPlan::kdd99_default();
        let mut census = LabelCensus::new();
        for (l, n) in &plan.targets {
            census.add_n(l, *n);
        }
        let p = census_proportions(&census, &AttackTaxonomy::kdd99()).unwrap();
        assert!((p[&Category::Normal] - 28_500.0 / 148_753.0).abs() < 1e-15);
        assert!((p[&Category::Dos] - 118_920.0 / 148_753.0).abs() < 1e-15);
        assert!((p[&Category::Normal] - 0.1916).abs() < 5e-5);
        assert!((p[&Category::Dos] - 0.7994).abs() < 1e-4);
        assert!((p.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn manifest_round_trip_and_errors() {
        let m = Manifest { role: Role::Test, ordinals: vec![4, 0, 17] };
        assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
        assert!(Manifest::parse("1\n2\n").is_err());
        assert!(matches!(
            Manifest::parse("# role: train\n1\nx\n"),
            Err(PreprocessError::ManifestParse { line: 3, .. })
        ));
    }

    proptest! {
        #[test]
        fn sampling_properties(
            labels in proptest::collection::vec(0usize..4, 1..300),
            frac in 0.0f64..=1.0,
            test_frac in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let names = ["smurf", "neptune", "normal", "spy"];
            let corpus = LabelIndex::from_labels(labels.iter().map(|&i| names[i]));
            let p = SamplingPlan::proportional(&corpus.census(), frac, seed);
            let train = stratified_sample(&corpus, &p).unwrap();

            // determinism
            prop_assert_eq!(&train, &stratified_sample(&corpus, &p).unwrap());
            // no duplicates, purity and exact per-label counts
            let uniq: HashSet<u64> = train.iter().copied().collect();
            prop_assert_eq!(uniq.len(), train.len());
            let mut got = LabelCensus::new();
            for &o in &train {
                got.add(names[labels[o as usize]]);
            }
            for (l, n) in &p.targets {
                prop_assert_eq!(got.get(l), *n);
            }

            let remaining = corpus.len() - train.len() as u64;
            let size = (remaining as f64 * test_frac).floor() as u64;
            let split = holdout_sample(corpus.len(), &train, size, seed).unwrap();
            prop_assert_eq!(split.test.len() as u64, size);
            prop_assert!(split.test.iter().all(|o| !uniq.contains(o)));
            let tu: HashSet<u64> = split.test.iter().copied().collect();
            prop_assert_eq!(tu.len(), split.test.len());
        }
    }
}
