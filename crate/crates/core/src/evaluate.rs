//! Confusion matrices, the usual classification statistics and report
//! rendering.

use std::fmt::Write as _;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no instances to evaluate")]
    Empty,
    #[error("prediction has {found} classes, expected {expected}")]
    ArityDrift { expected: usize, found: usize },
    #[error("true class {class} outside 0..{n_classes}")]
    ClassOutOfRange { class: usize, n_classes: usize },
    #[error("kappa is undefined when chance agreement is 1")]
    UndefinedKappa,
    #[error("ROC area for class {class} is undefined without both positives and negatives")]
    UndefinedAuc { class: usize },
    #[error("every class has zero support")]
    NoSupport,
    #[error("value count {found} does not match {expected} classes")]
    LengthMismatch { expected: usize, found: usize },
}

/// `cells[i * n + j]` counts instances of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n: usize,
    cells: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self { n: n_classes, cells: vec![0; n_classes * n_classes] }
    }

    /// From a square table of rows.
    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "confusion matrix must be square");
        Self { n, cells: rows.concat() }
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.cells[truth * self.n + predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.cells[truth * self.n + predicted] += 1;
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.cells[c * self.n..(c + 1) * self.n].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.n).map(|r| self.get(r, c)).sum()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|c| self.get(c, c)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.cells.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }
}

impl AddAssign<&ConfusionMatrix> for ConfusionMatrix {
    fn add_assign(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.n, other.n, "confusion matrices of different sizes");
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPrediction {
    pub truth: usize,
    pub probabilities: Vec<f64>,
}

/// Retained probability vectors, flat and row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreData {
    n_classes: usize,
    truths: Vec<usize>,
    probs: Vec<f64>,
}

impl ScoreData {
    pub fn new(n_classes: usize) -> Self {
        Self { n_classes, truths: Vec::new(), probs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.truths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truths.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn truth(&self, i: usize) -> usize {
        self.truths[i]
    }

    pub fn probabilities(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn merge(&mut self, other: &ScoreData) {
        assert_eq!(self.n_classes, other.n_classes, "score sets of different arity");
        self.truths.extend_from_slice(&other.truths);
        self.probs.extend_from_slice(&other.probs);
    }
}

/// Streaming tally of predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    pub confusion: ConfusionMatrix,
    pub scores: ScoreData,
}

impl Accumulator {
    pub fn new(n_classes: usize) -> Self {
        Self { confusion: ConfusionMatrix::new(n_classes), scores: ScoreData::new(n_classes) }
    }

    pub fn push(&mut self, truth: usize, probabilities: &[f64]) -> Result<(), EvalError> {
        let n = self.confusion.n;
        if probabilities.len() != n {
            return Err(EvalError::ArityDrift { expected: n, found: probabilities.len() });
        }
        if truth >= n {
            return Err(EvalError::ClassOutOfRange { class: truth, n_classes: n });
        }
        self.confusion.add(truth, crate::trees::argmax(probabilities));
        self.scores.truths.push(truth);
        self.scores.probs.extend_from_slice(probabilities);
        Ok(())
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.confusion += &other.confusion;
        self.scores.merge(&other.scores);
    }
}

/// One pass over the predictions; the arity is fixed by the first one.
pub fn accumulate(
    predictions: impl IntoIterator<Item = ScoredPrediction>,
    n_classes: usize,
) -> Result<(ConfusionMatrix, ScoreData), EvalError> {
    let mut acc = Accumulator::new(n_classes);
    for p in predictions {
        acc.push(p.truth, &p.probabilities)?;
    }
    Ok((acc.confusion, acc.scores))
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// `(p_o - p_e) / (1 - p_e)` with `p_e = sum_c row_c col_c / total^2`.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let t = total as f64;
    let po = cm.trace() as f64 / t;
    let pe = (0..cm.n).map(|c| cm.row_sum(c) as f64 * cm.col_sum(c) as f64).sum::<f64>() / (t * t);
    if pe >= 1.0 {
        return Err(EvalError::UndefinedKappa);
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Mean absolute and root mean squared error of probability vectors against
/// one-hot truth, averaged over classes and then instances.
pub fn mae_rmse(scores: &ScoreData) -> Result<(f64, f64), EvalError> {
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    let c = scores.n_classes as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for i in 0..scores.len() {
        let truth = scores.truths[i];
        for (k, p) in scores.probabilities(i).iter().enumerate() {
            let y = if k == truth { 1.0 } else { 0.0 };
            abs += (p - y).abs();
            sq += (p - y) * (p - y);
        }
    }
    let n = scores.len() as f64 * c;
    Ok((abs / n, (sq / n).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRates {
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub precision: f64,
}

/// Per-class rates; empty denominators give 0 and a warning.
pub fn per_class_rates(cm: &ConfusionMatrix) -> (Vec<ClassRates>, Vec<String>) {
    let total = cm.total();
    let mut warnings = Vec::new();
    let mut ratio = |num: u64, den: u64, what: &str, c: usize| {
        if den == 0 {
            warnings.push(format!("class {c}: {what} has an empty denominator, reported as 0"));
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let rates = (0..cm.n)
        .map(|c| {
            let tp = cm.get(c, c);
            let row = cm.row_sum(c);
            let col = cm.col_sum(c);
            ClassRates {
                tp_rate: ratio(tp, row, "TP rate", c),
                fp_rate: ratio(col - tp, total - row, "FP rate", c),
                precision: ratio(tp, col, "precision", c),
            }
        })
        .collect();
    for w in &warnings {
        log::debug!("{w}");
    }
    (rates, warnings)
}

/// One-vs-rest area under the ROC curve as the Mann-Whitney statistic with
/// ties counted half, computed from mid-ranks.
pub fn roc_auc(scores: &ScoreData, class: usize) -> Result<f64, EvalError> {
    let n = scores.len();
    let mut order: Vec<(f64, bool)> =
        (0..n).map(|i| (scores.probabilities(i)[class], scores.truths[i] == class)).collect();
    let positives = order.iter().filter(|o| o.1).count();
    let negatives = n - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::UndefinedAuc { class });
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && order[j].0 == order[i].0 {
            j += 1;
        }
        // ranks i+1..=j share their mean
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * order[i..j].iter().filter(|o| o.1).count() as f64;
        i = j;
    }
    let p = positives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// `sum_c support_c value_c / sum_c support_c` with row sums as supports.
pub fn weighted_average(values: &[f64], cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let defined: Vec<Option<f64>> = values.iter().map(|&v| Some(v)).collect();
    weighted_average_defined(&defined, cm)
}

/// As [`weighted_average`], skipping classes whose value is undefined.
pub fn weighted_average_defined(values: &[Option<f64>], cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    if values.len() != cm.n {
        return Err(EvalError::LengthMismatch { expected: cm.n, found: values.len() });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (c, v) in values.iter().enumerate() {
        let s = cm.row_sum(c) as f64;
        if let (Some(v), true) = (v, s > 0.0) {
            num += s * v;
            den += s;
        }
    }
    if den == 0.0 {
        return Err(EvalError::NoSupport);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub classifier: String,
    pub hyperparameters: Vec<(String, String)>,
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub correct: u64,
    pub incorrect: u64,
    pub accuracy: f64,
    /// `None` when chance agreement is 1.
    pub kappa: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub per_class: Vec<ClassRates>,
    /// `None` for classes without positives or without negatives.
    pub roc_area: Vec<Option<f64>>,
    pub weighted_tp_rate: f64,
    pub weighted_fp_rate: f64,
    pub weighted_precision: f64,
    pub weighted_roc_area: Option<f64>,
    /// Wall-clock seconds; never written to report files.
    pub runtime_secs: Option<f64>,
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    pub fn from_scores(
        classifier: impl Into<String>,
        hyperparameters: Vec<(String, String)>,
        class_names: Vec<String>,
        confusion: ConfusionMatrix,
        scores: &ScoreData,
    ) -> Result<Self, EvalError> {
        let accuracy = accuracy(&confusion)?;
        let kappa = match kappa(&confusion) {
            Ok(k) => Some(k),
            Err(EvalError::UndefinedKappa) => None,
            Err(e) => return Err(e),
        };
        let (mae, rmse) = mae_rmse(scores)?;
        let (per_class, mut warnings) = per_class_rates(&confusion);
        let roc_area: Vec<Option<f64>> = (0..confusion.n).map(|c| roc_auc(scores, c).ok()).collect();
        for (c, r) in roc_area.iter().enumerate() {
            if r.is_none() && confusion.row_sum(c) > 0 {
                warnings.push(format!("class {c}: ROC area undefined, excluded from the weighted mean"));
            }
        }
        let tp: Vec<f64> = per_class.iter().map(|r| r.tp_rate).collect();
        let fp: Vec<f64> = per_class.iter().map(|r| r.fp_rate).collect();
        let pr: Vec<f64> = per_class.iter().map(|r| r.precision).collect();
        let weighted_roc_area = weighted_average_defined(&roc_area, &confusion).ok();
        Ok(Self {
            classifier: classifier.into(),
            hyperparameters,
            class_names,
            correct: confusion.trace(),
            incorrect: confusion.total() - confusion.trace(),
            accuracy,
            kappa,
            mae,
            rmse,
            weighted_tp_rate: weighted_average(&tp, &confusion)?,
            weighted_fp_rate: weighted_average(&fp, &confusion)?,
            weighted_precision: weighted_average(&pr, &confusion)?,
            weighted_roc_area,
            per_class,
            roc_area,
            confusion,
            runtime_secs: None,
            warnings,
        })
    }
}

/// Text tables and their CSV twin.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedReport {
    pub text: String,
    pub csv: String,
}

/// Percentage with up to four decimals, trailing zeros dropped.
pub fn format_percent(fraction: f64) -> String {
    let s = format!("{:.4}", fraction * 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s} %")
}

fn table(title: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{cell:<w$}");
            } else {
                let _ = write!(s, "  {cell:>w$}");
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = format!("{title}\n");
    out.push_str(&line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>()));
    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|v| format!("{v:.digits$}")).unwrap_or_else(|| "undefined".into())
}

/// Three tables (error statistics; weighted rates; correct and incorrect
/// counts with accuracy) plus a long-format CSV. Rows keep the given order.
pub fn render_report(reports: &[EvaluationReport]) -> RenderedReport {
    let stats: Vec<Vec<String>> = reports
        .iter()
        .map(|r| vec![r.classifier.clone(), opt(r.kappa, 4), format!("{:.4}", r.mae), format!("{:.4}", r.rmse)])
        .collect();
    let rates: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.classifier.clone(),
                format!("{:.3}", r.weighted_tp_rate),
                format!("{:.3}", r.weighted_fp_rate),
                format!("{:.3}", r.weighted_precision),
                opt(r.weighted_roc_area, 3),
            ]
        })
        .collect();
    let counts: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![r.classifier.clone(), r.correct.to_string(), r.incorrect.to_string(), format_percent(r.accuracy)]
        })
        .collect();
    let mut text = table(
        "Statistics",
        &["Classifier", "Kappa statistic", "Mean absolute error", "Root mean squared error"],
        &stats,
    );
    text.push('\n');
    text.push_str(&table("Weighted averages", &["Classifier", "TP Rate", "FP Rate", "Precision", "ROC Area"], &rates));
    text.push('\n');
    text.push_str(&table(
        "Classification",
        &["Classifier", "Correctly classified", "Incorrectly classified", "Accuracy"],
        &counts,
    ));

    let mut csv = String::from("classifier,metric,value\n");
    for r in reports {
        let mut put = |metric: &str, value: String| {
            let _ = writeln!(csv, "{},{},{}", r.classifier, metric, value);
        };
        let num = |v: f64| format!("{v:.16e}");
        let optn = |v: Option<f64>| v.map(num).unwrap_or_else(|| "nan".into());
        put("correct", r.correct.to_string());
        put("incorrect", r.incorrect.to_string());
        put("accuracy", num(r.accuracy));
        put("kappa", optn(r.kappa));
        put("mean_absolute_error", num(r.mae));
        put("root_mean_squared_error", num(r.rmse));
        put("weighted_tp_rate", num(r.weighted_tp_rate));
        put("weighted_fp_rate", num(r.weighted_fp_rate));
        put("weighted_precision", num(r.weighted_precision));
        put("weighted_roc_area", optn(r.weighted_roc_area));
        for (c, name) in r.class_names.iter().enumerate() {
            let pc = &r.per_class[c];
            put(&format!("tp_rate:{name}"), num(pc.tp_rate));
            put(&format!("fp_rate:{name}"), num(pc.fp_rate));
            put(&format!("precision:{name}"), num(pc.precision));
            put(&format!("roc_area:{name}"), optn(r.roc_area[c]));
        }
        for (i, a) in r.class_names.iter().enumerate() {
            for (j, b) in r.class_names.iter().enumerate() {
                put(&format!("confusion:{a}:{b}"), r.confusion.get(i, j).to_string());
            }
        }
    }
    RenderedReport { text, csv }
}
