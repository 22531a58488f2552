//! Corpus-level operations shared by the command line and the Python
//! bindings: counting, sampling, extracting records by ordinal, training and
//! scoring.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{open_source, parse_records, ConnectionRecord, FeatureSchema, LabelCensus, RecordError};
use crate::evaluate::{Accumulator, ConfusionMatrix, EvalError, ScoreData};
use crate::model::{ModelError, ModelFileError, TrainedModel};
use crate::preprocess::{
    holdout_sample, stratified_sample, AttackTaxonomy, Category, DatasetSplit, LabelIndex, PreprocessError,
    SamplingPlan,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("input not found: {}", .0.display())]
    MissingInput(PathBuf),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    ModelFile(#[from] ModelFileError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("ordinal {ordinal} is past the end of the corpus ({len} records)")]
    OrdinalOutOfRange { ordinal: u64, len: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn open(path: &Path) -> Result<Box<dyn io::BufRead + Send>, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput(path.to_path_buf()));
    }
    Ok(open_source(path)?)
}

#[derive(Debug, Clone, Default)]
pub struct CountSummary {
    pub census: LabelCensus,
    /// Lines rejected by the parser (only when skipping).
    pub rejected: u64,
    pub unseen_symbols: u64,
}

/// Label census of a corpus file. With `skip_bad`, malformed lines are
/// counted and skipped; otherwise the first one aborts.
pub fn count_corpus(path: &Path, schema: &FeatureSchema, skip_bad: bool) -> Result<CountSummary, PipelineError> {
    let mut reader = parse_records(open(path)?, schema);
    let mut summary = CountSummary::default();
    let mut record = ConnectionRecord::default();
    while let Some(r) = reader.read_into(&mut record) {
        match r {
            Ok(()) => summary.census.add(&record.label),
            Err(RecordError::Io(e)) => return Err(e.into()),
            Err(e) if skip_bad => {
                log::warn!("{e}");
                summary.rejected += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    summary.unseen_symbols = reader.unseen_count();
    Ok(summary)
}

/// Ordinals per label; the ordinal of a record is its position among the
/// parsed records of the file.
pub fn index_corpus(path: &Path, schema: &FeatureSchema) -> Result<LabelIndex, PipelineError> {
    let mut reader = parse_records(open(path)?, schema);
    let mut index = LabelIndex::new();
    let mut record = ConnectionRecord::default();
    while let Some(r) = reader.read_into(&mut record) {
        r?;
        index.push(&record.label);
    }
    Ok(index)
}

/// Result of the sampling stage.
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub split: DatasetSplit,
    pub plan: SamplingPlan,
    pub corpus_census: LabelCensus,
    pub train_census: LabelCensus,
    pub test_census: LabelCensus,
}

/// Stratified training extract by `plan`, then `test_size` records drawn
/// from the rest of the corpus.
pub fn sample_corpus(index: &LabelIndex, plan: &SamplingPlan, test_size: u64) -> Result<SampleOutcome, PipelineError> {
    let train = stratified_sample(index, plan)?;
    let split = holdout_sample(index.len(), &train, test_size, plan.seed)?;
    let census_of = |ords: &[u64]| {
        let mut c = LabelCensus::new();
        for &o in ords {
            c.add(index.label_of(o).expect("sampled ordinal is in the corpus"));
        }
        c
    };
    Ok(SampleOutcome {
        train_census: census_of(&split.train),
        test_census: census_of(&split.test),
        corpus_census: index.census(),
        plan: plan.clone(),
        split,
    })
}

impl SampleOutcome {
    pub fn report(&self) -> String {
        let mut out = String::from("label,corpus,requested,train,test\n");
        let labels: std::collections::BTreeSet<&String> =
            self.corpus_census.counts().keys().chain(self.plan.targets.keys()).collect();
        for l in labels {
            let _ = writeln!(
                out,
                "{l},{},{},{},{}",
                self.corpus_census.get(l),
                self.plan.targets.get(l).copied().unwrap_or(0),
                self.train_census.get(l),
                self.test_census.get(l)
            );
        }
        let _ = writeln!(
            out,
            "total,{},{},{},{}",
            self.corpus_census.total(),
            self.plan.total(),
            self.train_census.total(),
            self.test_census.total()
        );
        out.push('\n');
        if let Some(d) = self.plan.discrepancy() {
            let _ = writeln!(
                out,
                "note: the plan's stated total is {} but its rows add up to {} (difference {d}); the rows are used as given",
                self.plan.expected_total.unwrap_or(0),
                self.plan.total()
            );
        }
        out.push_str(
            "note: per-label counts are reproducible; the particular records drawn are not those of any other \
             extract, since selection depends only on this plan's seed and the corpus order\n",
        );
        out
    }
}

/// Records at `ordinals`, returned in the order given.
pub fn extract_records(path: &Path, schema: &FeatureSchema, ordinals: &[u64]) -> Result<Vec<ConnectionRecord>, PipelineError> {
    let mut wanted: Vec<(u64, usize)> = ordinals.iter().enumerate().map(|(i, &o)| (o, i)).collect();
    wanted.sort_unstable();
    let mut out: Vec<ConnectionRecord> = vec![ConnectionRecord::default(); ordinals.len()];
    let mut reader = parse_records(open(path)?, schema);
    let mut record = ConnectionRecord::default();
    let mut ordinal = 0u64;
    let mut next = 0usize;
    while next < wanted.len() {
        match reader.read_into(&mut record) {
            None => break,
            Some(r) => r?,
        }
        while next < wanted.len() && wanted[next].0 == ordinal {
            out[wanted[next].1] = record.clone();
            next += 1;
        }
        ordinal += 1;
    }
    if next < wanted.len() {
        return Err(PipelineError::OrdinalOutOfRange { ordinal: wanted[next].0, len: ordinal });
    }
    Ok(out)
}

/// Feature rows with category indices.
#[derive(Debug, Clone, Default)]
pub struct LabeledSet {
    pub rows: Vec<Vec<f64>>,
    pub classes: Vec<usize>,
    /// Records whose label has no category, by label.
    pub skipped: BTreeMap<String, u64>,
}

impl LabeledSet {
    pub fn from_records(records: Vec<ConnectionRecord>, taxonomy: &AttackTaxonomy) -> Self {
        let mut set = LabeledSet::default();
        for r in records {
            match taxonomy.categorize(&r.label) {
                Some(c) => {
                    set.rows.push(r.values);
                    set.classes.push(c.index());
                }
                None => *set.skipped.entry(r.label).or_default() += 1,
            }
        }
        for (label, n) in &set.skipped {
            log::warn!("skipped {n} records with uncategorised label `{label}`");
        }
        set
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn class_counts(&self) -> [u64; Category::COUNT] {
        let mut counts = [0u64; Category::COUNT];
        for &c in &self.classes {
            counts[c] += 1;
        }
        counts
    }
}

/// Scores every row; work is split across the rayon pool but results are
/// tallied in row order, so the outcome does not depend on thread count.
pub fn score_model(model: &TrainedModel, set: &LabeledSet) -> Result<(ConfusionMatrix, ScoreData), PipelineError> {
    let dists: Vec<Vec<f64>> =
        set.rows.par_iter().map(|r| model.predict_distribution(r)).collect::<Result<_, _>>()?;
    let mut acc = Accumulator::new(model.n_classes());
    for (d, &c) in dists.iter().zip(&set.classes) {
        acc.push(c, d)?;
    }
    Ok((acc.confusion, acc.scores))
}
