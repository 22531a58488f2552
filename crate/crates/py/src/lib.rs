//! Python bindings. Rows are lists of floats in schema order (nominal columns
//! hold symbol indices), classes are category indices 0..5 in the order
//! DOS, U2R, R2L, PROBE, NORMAL (see `class_names`).

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use kddbench::dataset::FeatureSchema;
use kddbench::evaluate::{render_report, EvaluationReport};
use kddbench::model::{load_model, save_model, train_model, ClassifierKind, TrainedModel, TrainingConfig};
use kddbench::pipeline::{self, LabeledSet, PipelineError};
use kddbench::preprocess::{AttackTaxonomy, Category, SamplingPlan};
use kddbench::synth::{write_corpus, Generator};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pipeline_err(e: PipelineError) -> PyErr {
    match e {
        PipelineError::Io(e) => PyIOError::new_err(e.to_string()),
        PipelineError::MissingInput(p) => PyIOError::new_err(format!("input not found: {}", p.display())),
        other => value_err(other),
    }
}

fn schema_or_default(path: Option<PathBuf>) -> PyResult<FeatureSchema> {
    match path {
        Some(p) => FeatureSchema::load(p).map_err(value_err),
        None => Ok(FeatureSchema::kdd99()),
    }
}

/// Category names in class-index order.
#[pyfunction]
fn class_names() -> Vec<&'static str> {
    Category::ALL.iter().map(|c| c.name()).collect()
}

/// Keys accepted by `Model.train`.
#[pyfunction]
fn classifier_keys() -> Vec<&'static str> {
    ClassifierKind::ALL.iter().map(|k| k.key()).collect()
}

/// Column names of the schema.
#[pyfunction]
#[pyo3(signature = (schema=None))]
fn schema_columns(schema: Option<PathBuf>) -> PyResult<Vec<String>> {
    let schema = schema_or_default(schema)?;
    Ok(schema.columns().iter().map(|c| c.name.clone()).collect())
}

/// Label counts of a corpus file (plain or gzip).
#[pyfunction]
#[pyo3(signature = (path, skip_bad=false, schema=None))]
fn count(py: Python<'_>, path: PathBuf, skip_bad: bool, schema: Option<PathBuf>) -> PyResult<BTreeMap<String, u64>> {
    let schema = schema_or_default(schema)?;
    let summary = py.detach(|| pipeline::count_corpus(&path, &schema, skip_bad)).map_err(pipeline_err)?;
    Ok(summary.census.counts().clone())
}

/// Stratified train draw plus a uniform test draw from the rest. Returns
/// `(train_ordinals, test_ordinals, report_text)`.
#[pyfunction]
#[pyo3(signature = (path, plan=None, test_size=60_000, seed=None, schema=None))]
fn sample(
    py: Python<'_>,
    path: PathBuf,
    plan: Option<PathBuf>,
    test_size: u64,
    seed: Option<u64>,
    schema: Option<PathBuf>,
) -> PyResult<(Vec<u64>, Vec<u64>, String)> {
    let schema = schema_or_default(schema)?;
    let mut plan = match plan {
        Some(p) => SamplingPlan::load(p).map_err(value_err)?,
        None => SamplingPlan::kdd99_default(),
    };
    if let Some(s) = seed {
        plan.seed = s;
    }
    let outcome = py
        .detach(|| {
            let index = pipeline::index_corpus(&path, &schema)?;
            pipeline::sample_corpus(&index, &plan, test_size)
        })
        .map_err(pipeline_err)?;
    let report = outcome.report();
    Ok((outcome.split.train, outcome.split.test, report))
}

/// Records at `ordinals` as `(rows, classes)`; uncategorised labels are dropped.
#[pyfunction]
#[pyo3(signature = (path, ordinals, schema=None))]
fn load_records(
    py: Python<'_>,
    path: PathBuf,
    ordinals: Vec<u64>,
    schema: Option<PathBuf>,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let schema = schema_or_default(schema)?;
    let records = py.detach(|| pipeline::extract_records(&path, &schema, &ordinals)).map_err(pipeline_err)?;
    let set = LabeledSet::from_records(records, &AttackTaxonomy::kdd99());
    Ok((set.rows, set.classes))
}

/// Write a synthetic corpus with the given label counts.
#[pyfunction]
#[pyo3(signature = (path, counts, seed=1))]
fn synth(path: PathBuf, counts: BTreeMap<String, u64>, seed: u64) -> PyResult<usize> {
    let generator = Generator::kdd99();
    let counts: Vec<(&str, u64)> = counts.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let records = generator.generate(&counts, seed);
    let file = std::fs::File::create(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    write_corpus(std::io::BufWriter::new(file), &records, generator.schema())
        .map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(records.len())
}

fn labeled(rows: Vec<Vec<f64>>, classes: Vec<usize>) -> PyResult<LabeledSet> {
    if rows.len() != classes.len() {
        return Err(PyValueError::new_err("rows and classes differ in length"));
    }
    if let Some(c) = classes.iter().find(|&&c| c >= Category::COUNT) {
        return Err(PyValueError::new_err(format!("class index {c} out of range")));
    }
    Ok(LabeledSet { rows, classes, skipped: BTreeMap::new() })
}

/// A trained classifier.
#[pyclass(module = "kddbench_py")]
struct Model {
    inner: TrainedModel,
}

#[pymethods]
impl Model {
    /// Train `kind` (see `classifier_keys`) on rows and class indices.
    #[staticmethod]
    #[pyo3(signature = (kind, rows, classes, seed=1, schema=None))]
    fn train(
        py: Python<'_>,
        kind: &str,
        rows: Vec<Vec<f64>>,
        classes: Vec<usize>,
        seed: u64,
        schema: Option<PathBuf>,
    ) -> PyResult<Self> {
        let kind: ClassifierKind = kind.parse().map_err(value_err)?;
        let schema = schema_or_default(schema)?;
        let set = labeled(rows, classes)?;
        let mut config = TrainingConfig::default();
        config.set_seed(seed);
        let (inner, _) =
            py.detach(|| train_model(kind, &set.rows, &set.classes, &schema, &config)).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, schema=None))]
    fn load(path: PathBuf, schema: Option<PathBuf>) -> PyResult<Self> {
        let schema = schema_or_default(schema)?;
        let inner = load_model(path, &schema).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model(path, &self.inner).map_err(value_err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().key()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.metadata.seed
    }

    #[getter]
    fn hyperparameters(&self) -> Vec<(String, String)> {
        self.inner.metadata.hyperparameters.clone()
    }

    fn predict_proba(&self, row: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict_distribution(&row).map_err(value_err)
    }

    fn predict(&self, row: Vec<f64>) -> PyResult<usize> {
        self.inner.predict_class(&row).map_err(value_err)
    }

    /// Score on rows and classes.
    fn evaluate(&self, py: Python<'_>, rows: Vec<Vec<f64>>, classes: Vec<usize>) -> PyResult<Report> {
        let set = labeled(rows, classes)?;
        let (cm, scores) = py.detach(|| pipeline::score_model(&self.inner, &set)).map_err(pipeline_err)?;
        let names = class_names().into_iter().map(String::from).collect();
        let inner = EvaluationReport::from_scores(
            self.inner.kind().display_name(),
            self.inner.metadata.hyperparameters.clone(),
            names,
            cm,
            &scores,
        )
        .map_err(value_err)?;
        Ok(Report { inner })
    }

    fn __repr__(&self) -> String {
        format!("Model(kind='{}', seed={})", self.kind(), self.seed())
    }
}

/// Evaluation results for one classifier.
#[pyclass(module = "kddbench_py")]
struct Report {
    inner: EvaluationReport,
}

#[pymethods]
impl Report {
    #[getter]
    fn accuracy(&self) -> f64 {
        self.inner.accuracy
    }

    #[getter]
    fn kappa(&self) -> Option<f64> {
        self.inner.kappa
    }

    #[getter]
    fn mae(&self) -> f64 {
        self.inner.mae
    }

    #[getter]
    fn rmse(&self) -> f64 {
        self.inner.rmse
    }

    #[getter]
    fn confusion(&self) -> Vec<Vec<u64>> {
        self.inner.confusion.rows()
    }

    #[getter]
    fn roc_area(&self) -> Vec<Option<f64>> {
        self.inner.roc_area.clone()
    }

    #[getter]
    fn weighted_roc_area(&self) -> Option<f64> {
        self.inner.weighted_roc_area
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// Text tables.
    fn text(&self) -> String {
        render_report(std::slice::from_ref(&self.inner)).text
    }

    fn csv(&self) -> String {
        render_report(std::slice::from_ref(&self.inner)).csv
    }

    fn __repr__(&self) -> String {
        format!("Report(classifier='{}', accuracy={:.6})", self.inner.classifier, self.inner.accuracy)
    }
}

#[pymodule]
fn kddbench_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(class_names, m)?)?;
    m.add_function(wrap_pyfunction!(classifier_keys, m)?)?;
    m.add_function(wrap_pyfunction!(schema_columns, m)?)?;
    m.add_function(wrap_pyfunction!(count, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(load_records, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_class::<Model>()?;
    m.add_class::<Report>()?;
    Ok(())
}
