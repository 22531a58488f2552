//! `kddbench` command line.
//!
//! Exit codes: 0 ok, 1 other I/O failure, 2 parse error, 3 infeasible
//! sampling plan, 4 training failure, 5 schema-digest mismatch, 64 usage,
//! 66 missing input.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::dataset::{FeatureSchema, LabelCensus, SchemaError};
use crate::evaluate::{render_report, EvaluationReport};
use crate::model::{load_model, save_model, train_model, ClassifierKind, ModelError, ModelFileError, TrainedModel, TrainingConfig};
use crate::pipeline::{self, LabeledSet, PipelineError};
use crate::preprocess::{AttackTaxonomy, Category, Manifest, PreprocessError, Role, SamplingPlan};
use crate::synth::{write_corpus, Generator};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_TRAINING: i32 = 4;
pub const EXIT_DIGEST: i32 = 5;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_MISSING_INPUT: i32 = 66;

/// Test-extract size of the reference protocol.
pub const DEFAULT_TEST_SIZE: u64 = 60_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}: not implemented")]
    NotImplemented(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        CliError::Pipeline(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::NotImplemented(_) => EXIT_USAGE,
            CliError::Schema(SchemaError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING_INPUT,
            CliError::Schema(SchemaError::Io(_)) => EXIT_FAILURE,
            CliError::Schema(_) => EXIT_PARSE,
            CliError::Io(_) => EXIT_FAILURE,
            CliError::Pipeline(p) => match p {
                PipelineError::MissingInput(_) => EXIT_MISSING_INPUT,
                PipelineError::Record(_) | PipelineError::OrdinalOutOfRange { .. } => EXIT_PARSE,
                PipelineError::Preprocess(e) => match e {
                    PreprocessError::Infeasible { .. }
                    | PreprocessError::InsufficientRemainder { .. }
                    | PreprocessError::EmptySample => EXIT_INFEASIBLE,
                    PreprocessError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING_INPUT,
                    PreprocessError::Io(_) => EXIT_FAILURE,
                    _ => EXIT_PARSE,
                },
                PipelineError::Model(_) => EXIT_TRAINING,
                PipelineError::ModelFile(ModelFileError::DigestMismatch) => EXIT_DIGEST,
                PipelineError::ModelFile(ModelFileError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {
                    EXIT_MISSING_INPUT
                }
                PipelineError::ModelFile(ModelFileError::Io(_)) => EXIT_FAILURE,
                PipelineError::ModelFile(_) => EXIT_PARSE,
                PipelineError::Eval(_) | PipelineError::Io(_) => EXIT_FAILURE,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kddbench", version, about = "KDD Cup 99 preprocessing, training and evaluation")]
struct Cli {
    /// `key = value` file supplying defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for forest training and scoring.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Feature schema file; the built-in KDD Cup 99 layout by default.
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-label instance counts of a corpus.
    Count(CountArgs),
    /// Stratified training extract and held-out test extract.
    Sample(SampleArgs),
    /// Train one classifier on a manifest's records.
    Train(TrainArgs),
    /// Score a model on a manifest's records and write reports.
    Evaluate(EvaluateArgs),
    /// Sample, train every classifier, evaluate and report in one run.
    Bench(BenchArgs),
    /// Write a synthetic corpus in KDD text format.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct CountArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Skip malformed lines instead of aborting.
    #[arg(long)]
    skip_bad: bool,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Sampling plan file; the built-in extract plan by default.
    #[arg(long, conflicts_with = "train_fraction")]
    plan: Option<PathBuf>,
    /// Sample this fraction of every label instead of using a plan.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    test_size: Option<u64>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Default)]
struct HyperArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    confidence_factor: Option<f64>,
    #[arg(long)]
    num_folds: Option<usize>,
    #[arg(long)]
    reduced_error_pruning: Option<bool>,
    #[arg(long)]
    num_trees: Option<usize>,
    #[arg(long)]
    m_tries: Option<usize>,
    #[arg(long)]
    min_gain: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    validation_threshold: Option<usize>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    max_parents: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// j48, random-forest, random-tree, mlp, naive-bayes or bayes-net.
    #[arg(long)]
    classifier: String,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    plan: PlanArgs,
    /// Comma-separated subset of classifiers; all six by default.
    #[arg(long, value_delimiter = ',')]
    classifiers: Vec<String>,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Exact per-label counts from a plan file.
    #[arg(long, conflicts_with = "records")]
    counts: Option<PathBuf>,
    /// Record count, labels mixed in the proportions of the built-in plan.
    #[arg(long)]
    records: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// `key = value` defaults; keys are long flag names without dashes.
#[derive(Debug, Default)]
struct ConfigFile {
    values: HashMap<String, String>,
}

const CONFIG_KEYS: &[&str] = &[
    "threads", "schema", "plan", "train-fraction", "test-size", "seed", "confidence-factor", "num-folds",
    "reduced-error-pruning", "num-trees", "m-tries", "min-gain", "learning-rate", "momentum",
    "validation-threshold", "validation-fraction", "max-epochs", "hidden", "max-parents", "bins",
];

impl ConfigFile {
    fn load(path: &Path) -> Result<Self, CliError> {
        if !path.exists() {
            return Err(PipelineError::MissingInput(path.to_path_buf()).into());
        }
        Self::parse(&fs::read_to_string(path)?)
    }

    fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = k.trim().replace('_', "-");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key `{}`", i + 1, k.trim())));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Flag value if given, else the config value, else `None`.
    fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }
}

struct Context {
    config: ConfigFile,
    schema: FeatureSchema,
    threads: Option<usize>,
}

impl HyperArgs {
    fn training_config(&self, cfg: &ConfigFile, threads: Option<usize>) -> Result<TrainingConfig, CliError> {
        let mut t = TrainingConfig::default();
        if let Some(seed) = cfg.pick(self.seed, "seed")? {
            t.set_seed(seed);
        }
        if let Some(v) = cfg.pick(self.confidence_factor, "confidence-factor")? {
            t.decision_tree.confidence_factor = v;
        }
        if let Some(v) = cfg.pick(self.num_folds, "num-folds")? {
            t.decision_tree.num_folds = v;
        }
        if let Some(v) = cfg.pick(self.reduced_error_pruning, "reduced-error-pruning")? {
            t.decision_tree.reduced_error_pruning = v;
        }
        if let Some(v) = cfg.pick(self.num_trees, "num-trees")? {
            t.forest.num_trees = v;
        }
        if let Some(v) = cfg.pick(self.m_tries, "m-tries")? {
            t.forest.m_tries = Some(v);
            t.random_tree.m_tries = Some(v);
        }
        if let Some(v) = cfg.pick(self.min_gain, "min-gain")? {
            t.forest.min_gain = v;
            t.random_tree.min_gain = v;
        }
        if let Some(v) = cfg.pick(self.learning_rate, "learning-rate")? {
            t.mlp.learning_rate = v;
        }
        if let Some(v) = cfg.pick(self.momentum, "momentum")? {
            t.mlp.momentum = v;
        }
        if let Some(v) = cfg.pick(self.validation_threshold, "validation-threshold")? {
            t.mlp.validation_threshold = v;
        }
        if let Some(v) = cfg.pick(self.validation_fraction, "validation-fraction")? {
            t.mlp.validation_fraction = v;
        }
        if let Some(v) = cfg.pick(self.max_epochs, "max-epochs")? {
            t.mlp.max_epochs = v;
        }
        t.mlp_hidden = cfg.pick(self.hidden, "hidden")?;
        if let Some(v) = cfg.pick(self.max_parents, "max-parents")? {
            t.bayes_net.max_parents = v;
        }
        if let Some(v) = cfg.pick(self.bins, "bins")? {
            t.bayes_net.bins = v;
        }
        t.forest.threads = threads;
        Ok(t)
    }
}

fn parse_classifier(name: &str) -> Result<ClassifierKind, CliError> {
    if name == "decision-table" {
        return Err(CliError::NotImplemented("decision-table classifier".into()));
    }
    name.parse().map_err(CliError::Usage)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let schema = match config.pick(cli.schema.clone(), "schema")? {
        Some(p) => FeatureSchema::load(p)?,
        None => FeatureSchema::kdd99(),
    };
    let threads = config.pick(cli.threads, "threads")?;
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Context { config, schema, threads };
    match cli.command {
        Command::Count(a) => cmd_count(&ctx, a),
        Command::Sample(a) => cmd_sample(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::Bench(a) => cmd_bench(&ctx, a),
        Command::Synth(a) => cmd_synth(&ctx, a),
    }
}

fn cmd_count(ctx: &Context, a: CountArgs) -> Result<(), CliError> {
    let summary = pipeline::count_corpus(&a.corpus, &ctx.schema, a.skip_bad)?;
    if summary.rejected > 0 {
        log::warn!("{} malformed lines skipped", summary.rejected);
    }
    if summary.unseen_symbols > 0 {
        log::warn!("{} nominal values outside the declared domains", summary.unseen_symbols);
    }
    let csv = summary.census.to_csv();
    match a.out {
        Some(p) => fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn resolve_plan(ctx: &Context, a: &PlanArgs, seed: Option<u64>, census: &LabelCensus) -> Result<SamplingPlan, CliError> {
    let cfg = &ctx.config;
    let seed = cfg.pick(seed, "seed")?;
    let fraction = cfg.pick(a.train_fraction, "train-fraction")?;
    let mut plan = match (cfg.pick(a.plan.clone(), "plan")?, fraction) {
        (Some(p), _) if a.train_fraction.is_none() => SamplingPlan::load(p)?,
        (_, Some(f)) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(CliError::Usage(format!("--train-fraction {f} outside [0, 1]")));
            }
            SamplingPlan::proportional(census, f, seed.unwrap_or(1))
        }
        _ => SamplingPlan::kdd99_default(),
    };
    if let Some(s) = seed {
        plan.seed = s;
    }
    Ok(plan)
}

fn write_sample(dir: &Path, outcome: &pipeline::SampleOutcome) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Manifest { role: Role::Train, ordinals: outcome.split.train.clone() }.save(dir.join("train.manifest"))?;
    Manifest { role: Role::Test, ordinals: outcome.split.test.clone() }.save(dir.join("test.manifest"))?;
    fs::write(dir.join("sample_report.txt"), outcome.report())?;
    Ok(())
}

fn sample(ctx: &Context, corpus: &Path, plan_args: &PlanArgs, seed: Option<u64>) -> Result<pipeline::SampleOutcome, CliError> {
    let index = pipeline::index_corpus(corpus, &ctx.schema)?;
    let plan = resolve_plan(ctx, plan_args, seed, &index.census())?;
    if let Some(d) = plan.discrepancy() {
        log::warn!(
            "plan rows add up to {} but its stated total is {} (difference {d}); using the rows as given",
            plan.total(),
            plan.expected_total.unwrap_or(0)
        );
    }
    let test_size = ctx.config.pick(plan_args.test_size, "test-size")?.unwrap_or(DEFAULT_TEST_SIZE);
    Ok(pipeline::sample_corpus(&index, &plan, test_size)?)
}

fn cmd_sample(ctx: &Context, a: SampleArgs) -> Result<(), CliError> {
    let outcome = sample(ctx, &a.corpus, &a.plan, a.seed)?;
    write_sample(&a.out_dir, &outcome)?;
    println!(
        "train {} records, test {} records, written to {}",
        outcome.split.train.len(),
        outcome.split.test.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn load_set(ctx: &Context, corpus: &Path, ordinals: &[u64]) -> Result<LabeledSet, CliError> {
    let records = pipeline::extract_records(corpus, &ctx.schema, ordinals)?;
    Ok(LabeledSet::from_records(records, &AttackTaxonomy::kdd99()))
}

fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    if !path.exists() {
        return Err(PipelineError::MissingInput(path.to_path_buf()).into());
    }
    Ok(Manifest::load(path)?)
}

/// Text written next to a model: what was trained on what.
fn training_log(model: &TrainedModel, set: &LabeledSet, mlp_log: Option<&crate::mlp::TrainingLog>) -> String {
    let mut out = format!("classifier,{}\n", model.kind());
    for (k, v) in &model.metadata.hyperparameters {
        let _ = writeln!(out, "{k},{v}");
    }
    let _ = writeln!(out, "records,{}", set.len());
    for c in Category::ALL {
        let _ = writeln!(out, "class:{},{}", c.name(), set.class_counts()[c.index()]);
    }
    for (label, n) in &set.skipped {
        let _ = writeln!(out, "skipped:{label},{n}");
    }
    if let Some(log) = mlp_log {
        out.push('\n');
        out.push_str(&log.to_csv());
    }
    out
}

fn log_path(model_path: &Path) -> PathBuf {
    let mut p = model_path.as_os_str().to_owned();
    p.push(".log");
    PathBuf::from(p)
}

fn cmd_train(ctx: &Context, a: TrainArgs) -> Result<(), CliError> {
    let kind = parse_classifier(&a.classifier)?;
    let config = a.hyper.training_config(&ctx.config, ctx.threads)?;
    let manifest = load_manifest(&a.manifest)?;
    let set = load_set(ctx, &a.corpus, &manifest.ordinals)?;
    let start = Instant::now();
    let (model, diag) = train_model(kind, &set.rows, &set.classes, &ctx.schema, &config)?;
    log::info!("trained {kind} on {} records in {:.2}s", set.len(), start.elapsed().as_secs_f64());
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    save_model(&a.out, &model)?;
    fs::write(log_path(&a.out), training_log(&model, &set, diag.mlp_log.as_ref()))?;
    println!("{} model written to {}", kind.display_name(), a.out.display());
    Ok(())
}

fn evaluate(model: &TrainedModel, set: &LabeledSet) -> Result<EvaluationReport, CliError> {
    let (cm, scores) = pipeline::score_model(model, set)?;
    let names = Category::ALL.iter().map(|c| c.name().to_string()).collect();
    let report = EvaluationReport::from_scores(
        model.kind().display_name(),
        model.metadata.hyperparameters.clone(),
        names,
        cm,
        &scores,
    )
    .map_err(PipelineError::from)?;
    for w in &report.warnings {
        log::warn!("{}: {w}", report.classifier);
    }
    Ok(report)
}

fn write_reports(dir: &Path, reports: &[EvaluationReport]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let rendered = render_report(reports);
    fs::write(dir.join("report.txt"), &rendered.text)?;
    fs::write(dir.join("report.csv"), &rendered.csv)?;
    print!("{}", rendered.text);
    Ok(())
}

fn cmd_evaluate(ctx: &Context, a: EvaluateArgs) -> Result<(), CliError> {
    let model = load_model(&a.model, &ctx.schema)?;
    let manifest = load_manifest(&a.manifest)?;
    let set = load_set(ctx, &a.corpus, &manifest.ordinals)?;
    let report = evaluate(&model, &set)?;
    write_reports(&a.out_dir, &[report])
}

fn cmd_bench(ctx: &Context, a: BenchArgs) -> Result<(), CliError> {
    let kinds: Vec<ClassifierKind> = if a.classifiers.is_empty() {
        ClassifierKind::ALL.to_vec()
    } else {
        a.classifiers.iter().map(|c| parse_classifier(c.trim())).collect::<Result<_, _>>()?
    };
    let config = a.hyper.training_config(&ctx.config, ctx.threads)?;
    let mut timings = String::from("stage,seconds\n");
    let mut clock = Instant::now();
    let mut lap = |timings: &mut String, stage: &str| {
        let _ = writeln!(timings, "{stage},{:.3}", clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };

    let outcome = sample(ctx, &a.corpus, &a.plan, a.hyper.seed)?;
    write_sample(&a.out_dir, &outcome)?;
    let train = load_set(ctx, &a.corpus, &outcome.split.train)?;
    let test = load_set(ctx, &a.corpus, &outcome.split.test)?;
    lap(&mut timings, "sample");

    let models_dir = a.out_dir.join("models");
    fs::create_dir_all(&models_dir)?;
    let mut reports = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let (model, diag) = train_model(kind, &train.rows, &train.classes, &ctx.schema, &config)?;
        let path = models_dir.join(format!("{}.model", kind.key()));
        save_model(&path, &model)?;
        fs::write(log_path(&path), training_log(&model, &train, diag.mlp_log.as_ref()))?;
        lap(&mut timings, &format!("train:{}", kind.key()));
        let mut report = evaluate(&model, &test)?;
        lap(&mut timings, &format!("evaluate:{}", kind.key()));
        report.runtime_secs = None;
        reports.push(report);
    }
    write_reports(&a.out_dir, &reports)?;
    fs::write(a.out_dir.join("timings.csv"), timings)?;
    Ok(())
}

fn cmd_synth(ctx: &Context, a: SynthArgs) -> Result<(), CliError> {
    let generator = Generator::new(ctx.schema.clone(), crate::synth::DEFAULT_NOISE);
    let records = match (&a.counts, a.records) {
        (Some(p), _) => {
            let plan = SamplingPlan::load(p)?;
            let counts: Vec<(&str, u64)> = plan.targets.iter().map(|(l, n)| (l.as_str(), *n)).collect();
            generator.generate(&counts, a.seed)
        }
        (None, Some(n)) => {
            let plan = SamplingPlan::kdd99_default();
            let counts: Vec<(&str, u64)> = plan.targets.iter().map(|(l, n)| (l.as_str(), *n)).collect();
            generator.generate_n(&counts, n, a.seed)
        }
        (None, None) => return Err(CliError::Usage("synth needs --counts or --records".into())),
    };
    let file = std::io::BufWriter::new(fs::File::create(&a.out)?);
    write_corpus(file, &records, &ctx.schema)?;
    println!("{} records written to {}", records.len(), a.out.display());
    Ok(())
}
