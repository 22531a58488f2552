//! Brute-force metric oracle shared by the evaluate tests and the
//! acceptance harness.
#![allow(dead_code)]

use kddbench::evaluate::{accumulate, EvaluationReport, ScoredPrediction};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub n_classes: usize,
    pub preds: Vec<ScoredPrediction>,
}

/// Random probability vectors. With `coarse`, entries are drawn from a small
/// grid so ties (both in argmax and in ranking) are common.
pub fn fixture(rng: &mut ChaCha8Rng, coarse: bool) -> Fixture {
    let n_classes = rng.random_range(2..=5);
    let n = rng.random_range(1..80);
    let preds = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n_classes)
                .map(|_| if coarse { rng.random_range(0..4) as f64 } else { rng.random_range(0.0..1.0) })
                .collect();
            let sum: f64 = raw.iter().sum();
            let probabilities =
                if sum == 0.0 { vec![1.0 / n_classes as f64; n_classes] } else { raw.iter().map(|r| r / sum).collect() };
            ScoredPrediction { truth: rng.random_range(0..n_classes), probabilities }
        })
        .collect();
    Fixture { n_classes, preds }
}

/// Everything recomputed from the raw predictions, without the library's
/// matrix or rank machinery.
pub struct Oracle {
    pub cells: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub kappa: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub tp: Vec<f64>,
    pub fp: Vec<f64>,
    pub precision: Vec<f64>,
    pub auc: Vec<Option<f64>>,
    pub w_tp: f64,
    pub w_fp: f64,
    pub w_precision: f64,
    pub w_auc: Option<f64>,
}

fn first_max(p: &[f64]) -> usize {
    let mut best = 0;
    for k in 0..p.len() {
        if p[k] > p[best] {
            best = k;
        }
    }
    best
}

pub fn oracle(f: &Fixture) -> Oracle {
    let c = f.n_classes;
    let n = f.preds.len() as f64;
    let predicted: Vec<usize> = f.preds.iter().map(|p| first_max(&p.probabilities)).collect();
    let mut cells = vec![vec![0u64; c]; c];
    for (p, &j) in f.preds.iter().zip(&predicted) {
        cells[p.truth][j] += 1;
    }
    let hits = f.preds.iter().zip(&predicted).filter(|(p, &j)| p.truth == j).count() as f64;
    let accuracy = hits / n;

    // chance agreement from marginal frequencies
    let truth_freq: Vec<f64> = (0..c).map(|k| f.preds.iter().filter(|p| p.truth == k).count() as f64 / n).collect();
    let pred_freq: Vec<f64> = (0..c).map(|k| predicted.iter().filter(|&&j| j == k).count() as f64 / n).collect();
    let pe: f64 = (0..c).map(|k| truth_freq[k] * pred_freq[k]).sum();
    let kappa = if (pe - 1.0).abs() < 1e-15 { None } else { Some((accuracy - pe) / (1.0 - pe)) };

    let mut abs = 0.0;
    let mut sq = 0.0;
    for p in &f.preds {
        let inst_abs: f64 =
            p.probabilities.iter().enumerate().map(|(k, v)| (v - if k == p.truth { 1.0 } else { 0.0 }).abs()).sum();
        let inst_sq: f64 =
            p.probabilities.iter().enumerate().map(|(k, v)| (v - if k == p.truth { 1.0 } else { 0.0 }).powi(2)).sum();
        abs += inst_abs / c as f64;
        sq += inst_sq / c as f64;
    }
    let mae = abs / n;
    let rmse = (sq / n).sqrt();

    let count = |pred: &dyn Fn(usize, usize) -> bool| {
        f.preds.iter().zip(&predicted).filter(|(p, &j)| pred(p.truth, j)).count() as f64
    };
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let mut tp = Vec::new();
    let mut fp = Vec::new();
    let mut precision = Vec::new();
    let mut auc = Vec::new();
    for k in 0..c {
        let true_pos = count(&|t, j| t == k && j == k);
        let false_pos = count(&|t, j| t != k && j == k);
        let pos = count(&|t, _| t == k);
        let neg = count(&|t, _| t != k);
        tp.push(div(true_pos, pos));
        fp.push(div(false_pos, neg));
        precision.push(div(true_pos, true_pos + false_pos));

        let mut won = 0.0;
        let mut pairs = 0.0;
        for a in f.preds.iter().filter(|p| p.truth == k) {
            for b in f.preds.iter().filter(|p| p.truth != k) {
                pairs += 1.0;
                let (sa, sb) = (a.probabilities[k], b.probabilities[k]);
                if sa > sb {
                    won += 1.0;
                } else if sa == sb {
                    won += 0.5;
                }
            }
        }
        auc.push(if pairs == 0.0 { None } else { Some(won / pairs) });
    }
    let support: Vec<f64> = (0..c).map(|k| count(&|t, _| t == k)).collect();
    let wmean = |v: &[f64]| (0..c).map(|k| support[k] * v[k]).sum::<f64>() / n;
    let auc_den: f64 = (0..c).filter(|&k| auc[k].is_some()).map(|k| support[k]).sum();
    let w_auc = if auc_den == 0.0 {
        None
    } else {
        Some((0..c).filter_map(|k| auc[k].map(|a| a * support[k])).sum::<f64>() / auc_den)
    };
    Oracle {
        accuracy,
        kappa,
        mae,
        rmse,
        w_tp: wmean(&tp),
        w_fp: wmean(&fp),
        w_precision: wmean(&precision),
        w_auc,
        tp,
        fp,
        precision,
        auc,
        cells,
    }
}

pub fn report(f: &Fixture) -> EvaluationReport {
    let (cm, scores) = accumulate(f.preds.iter().cloned(), f.n_classes).unwrap();
    let names = (0..f.n_classes).map(|k| format!("c{k}")).collect();
    EvaluationReport::from_scores("fixture", Vec::new(), names, cm, &scores).unwrap()
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

pub fn close_opt(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => close(a, b),
        (None, None) => true,
        _ => false,
    }
}


/// Compares a report with the oracle; returns the first disagreement.
pub fn check(f: &Fixture) -> Result<(), String> {
    let o = oracle(f);
    let r = report(f);
    let fail = |what: &str| Err(format!("{what} disagrees"));
    if r.confusion.rows() != o.cells {
        return fail("confusion matrix");
    }
    if !close(r.accuracy, o.accuracy) {
        return fail("accuracy");
    }
    if !close_opt(r.kappa, o.kappa) {
        return fail("kappa");
    }
    if !close(r.mae, o.mae) || !close(r.rmse, o.rmse) {
        return fail("MAE/RMSE");
    }
    for k in 0..f.n_classes {
        let pc = &r.per_class[k];
        if !close(pc.tp_rate, o.tp[k]) || !close(pc.fp_rate, o.fp[k]) || !close(pc.precision, o.precision[k]) {
            return fail(&format!("class {k} rates"));
        }
        if !close_opt(r.roc_area[k], o.auc[k]) {
            return fail(&format!("class {k} ROC area"));
        }
    }
    if !close(r.weighted_tp_rate, o.w_tp) || !close(r.weighted_fp_rate, o.w_fp) || !close(r.weighted_precision, o.w_precision) {
        return fail("weighted rates");
    }
    if !close_opt(r.weighted_roc_area, o.w_auc) {
        return fail("weighted ROC area");
    }
    Ok(())
}
