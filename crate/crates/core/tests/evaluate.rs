mod common;

use common::{close, close_opt, fixture, oracle, report, Fixture};
use kddbench::evaluate::{
    accumulate, kappa, render_report, roc_auc, ConfusionMatrix, EvalError, EvaluationReport, ScoreData,
    ScoredPrediction,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn metrics_match_brute_force_oracle_on_fuzzed_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for i in 0..1000 {
        let f = fixture(&mut rng, i % 2 == 0);
        let o = oracle(&f);
        let r = report(&f);
        assert_eq!(r.confusion.rows(), o.cells, "fixture {i}");
        assert_eq!(r.correct + r.incorrect, f.preds.len() as u64);
        assert!(close(r.accuracy, o.accuracy), "fixture {i}");
        assert!(close_opt(r.kappa, o.kappa), "fixture {i}: {:?} vs {:?}", r.kappa, o.kappa);
        assert!(close(r.mae, o.mae) && close(r.rmse, o.rmse), "fixture {i}");
        for k in 0..f.n_classes {
            let pc = &r.per_class[k];
            assert!(close(pc.tp_rate, o.tp[k]), "fixture {i} class {k}");
            assert!(close(pc.fp_rate, o.fp[k]), "fixture {i} class {k}");
            assert!(close(pc.precision, o.precision[k]), "fixture {i} class {k}");
            assert!(close_opt(r.roc_area[k], o.auc[k]), "fixture {i} class {k}");
            for rate in [pc.tp_rate, pc.fp_rate, pc.precision] {
                assert!((0.0..=1.0).contains(&rate));
            }
        }
        assert!(close(r.weighted_tp_rate, o.w_tp), "fixture {i}");
        assert!(close(r.weighted_fp_rate, o.w_fp), "fixture {i}");
        assert!(close(r.weighted_precision, o.w_precision), "fixture {i}");
        assert!(close_opt(r.weighted_roc_area, o.w_auc), "fixture {i}");
    }
}

#[test]
fn permuting_classes_leaves_summary_metrics_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..300 {
        let f = fixture(&mut rng, false);
        let mut perm: Vec<usize> = (0..f.n_classes).collect();
        for k in (1..perm.len()).rev() {
            perm.swap(k, rng.random_range(0..=k));
        }
        // class k moves to position perm[k]
        let permuted = Fixture {
            n_classes: f.n_classes,
            preds: f
                .preds
                .iter()
                .map(|p| {
                    let mut q = vec![0.0; f.n_classes];
                    for (k, &v) in p.probabilities.iter().enumerate() {
                        q[perm[k]] = v;
                    }
                    ScoredPrediction { truth: perm[p.truth], probabilities: q }
                })
                .collect(),
        };
        let (a, b) = (report(&f), report(&permuted));
        assert!(close(a.accuracy, b.accuracy), "fixture {i}");
        assert!(close_opt(a.kappa, b.kappa), "fixture {i}");
        assert!(close(a.mae, b.mae) && close(a.rmse, b.rmse), "fixture {i}");
        assert!(close(a.weighted_tp_rate, b.weighted_tp_rate), "fixture {i}");
        assert!(close(a.weighted_fp_rate, b.weighted_fp_rate), "fixture {i}");
        assert!(close(a.weighted_precision, b.weighted_precision), "fixture {i}");
        assert!(close_opt(a.weighted_roc_area, b.weighted_roc_area), "fixture {i}");
    }
}

fn score_data(preds: &[ScoredPrediction], n_classes: usize) -> ScoreData {
    accumulate(preds.iter().cloned(), n_classes).unwrap().1
}

proptest! {
    #[test]
    fn auc_of_negated_scores_is_the_complement(
        scores in proptest::collection::vec((0.0f64..1.0, any::<bool>()), 2..60),
    ) {
        let mut sorted: Vec<f64> = scores.iter().map(|s| s.0).collect();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[0] < w[1]));
        prop_assume!(scores.iter().any(|s| s.1) && scores.iter().any(|s| !s.1));
        let make = |sign: f64| -> Vec<ScoredPrediction> {
            scores
                .iter()
                .map(|&(s, pos)| ScoredPrediction { truth: usize::from(!pos), probabilities: vec![sign * s, 0.0] })
                .collect()
        };
        let a = roc_auc(&score_data(&make(1.0), 2), 0).unwrap();
        let b = roc_auc(&score_data(&make(-1.0), 2), 0).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn per_instance_mae_never_exceeds_rmse(
        raw in proptest::collection::vec(0.0f64..1.0, 2..6),
        truth_seed in 0usize..100,
    ) {
        let sum: f64 = raw.iter().sum();
        prop_assume!(sum > 0.0);
        let p: Vec<f64> = raw.iter().map(|r| r / sum).collect();
        let truth = truth_seed % p.len();
        let data = score_data(&[ScoredPrediction { truth, probabilities: p.clone() }], p.len());
        let (mae, rmse) = kddbench::evaluate::mae_rmse(&data).unwrap();
        prop_assert!(mae <= rmse + 1e-15);
    }

    #[test]
    fn kappa_is_one_exactly_for_clean_diagonals(
        cells in proptest::collection::vec(0u64..6, 9),
    ) {
        let rows: Vec<Vec<u64>> = cells.chunks(3).map(|c| c.to_vec()).collect();
        let cm = ConfusionMatrix::from_rows(&rows);
        prop_assume!(cm.total() > 0);
        let off_diagonal = cm.total() - cm.trace();
        let populated = (0..3).filter(|&c| cm.row_sum(c) > 0).count();
        match kappa(&cm) {
            Ok(k) => {
                let perfect = (k - 1.0).abs() < 1e-12;
                prop_assert_eq!(perfect, off_diagonal == 0 && populated >= 2);
            }
            Err(e) => {
                prop_assert_eq!(e, EvalError::UndefinedKappa);
                prop_assert!(off_diagonal == 0 && populated == 1);
            }
        }
    }

    #[test]
    fn kappa_is_zero_for_rank_one_matrices(
        rows in proptest::collection::vec(1u64..20, 2..5),
        cols in proptest::collection::vec(1u64..20, 2..5),
    ) {
        let n = rows.len().min(cols.len());
        let outer: Vec<Vec<u64>> = (0..n).map(|i| (0..n).map(|j| rows[i] * cols[j]).collect()).collect();
        let k = kappa(&ConfusionMatrix::from_rows(&outer)).unwrap();
        prop_assert!(k.abs() < 1e-12, "{}", k);
    }
}

#[test]
fn csv_values_round_trip_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let reports: Vec<EvaluationReport> = (0..20).map(|_| report(&fixture(&mut rng, false))).collect();
    let csv = render_report(&reports).csv;
    let lookup = |i: usize, metric: &str| -> String {
        // every fixture report shares the name, so rows are found by position
        let per_report = csv.lines().skip(1).filter(|l| l.split(',').nth(1) == Some("correct")).count();
        assert_eq!(per_report, reports.len());
        let starts: Vec<usize> = csv
            .lines()
            .enumerate()
            .filter(|(_, l)| l.split(',').nth(1) == Some("correct"))
            .map(|(n, _)| n)
            .collect();
        let end = starts.get(i + 1).copied().unwrap_or(usize::MAX);
        csv.lines()
            .enumerate()
            .filter(|(n, _)| *n >= starts[i] && *n < end)
            .find(|(_, l)| l.split(',').nth(1) == Some(metric))
            .map(|(_, l)| l.rsplit(',').next().unwrap().to_string())
            .unwrap()
    };
    for (i, r) in reports.iter().enumerate() {
        assert_eq!(lookup(i, "accuracy").parse::<f64>().unwrap(), r.accuracy);
        assert_eq!(lookup(i, "mean_absolute_error").parse::<f64>().unwrap(), r.mae);
        assert_eq!(lookup(i, "root_mean_squared_error").parse::<f64>().unwrap(), r.rmse);
        assert_eq!(lookup(i, "weighted_precision").parse::<f64>().unwrap(), r.weighted_precision);
        match r.kappa {
            Some(k) => assert_eq!(lookup(i, "kappa").parse::<f64>().unwrap(), k),
            None => assert_eq!(lookup(i, "kappa"), "nan"),
        }
    }
}

fn named(name: &str, correct: u64, wrong: u64) -> EvaluationReport {
    let mut preds = Vec::new();
    for i in 0..correct + wrong {
        let truth = (i % 2) as usize;
        let hit = i < correct;
        let p = if (truth == 0) == hit { vec![0.9, 0.1] } else { vec![0.1, 0.9] };
        preds.push(ScoredPrediction { truth, probabilities: p });
    }
    let (cm, scores) = accumulate(preds, 2).unwrap();
    EvaluationReport::from_scores(name, Vec::new(), vec!["a".into(), "b".into()], cm, &scores).unwrap()
}

#[test]
fn rendered_tables_keep_order_and_show_percentages() {
    let single = render_report(&[named("Random Forest", 56265, 3735)]);
    let sections: Vec<&str> = single.text.split("\n\n").collect();
    assert_eq!(sections.len(), 3);
    for s in &sections {
        // title, header, rule, one data row
        assert_eq!(s.trim_end().lines().count(), 4, "{s}");
    }
    assert!(single.text.contains("93.775 %"));
    assert!(single.text.contains("56265") && single.text.contains("3735"));

    let two = render_report(&[named("Zeta", 8, 2), named("Alpha", 5, 5)]);
    for s in two.text.split("\n\n") {
        let z = s.find("Zeta").unwrap();
        let a = s.find("Alpha").unwrap();
        assert!(z < a);
    }
    let first_rows: Vec<&str> = two.csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let switch = first_rows.iter().position(|&n| n == "Alpha").unwrap();
    assert!(first_rows[..switch].iter().all(|&n| n == "Zeta"));
    assert!(first_rows[switch..].iter().all(|&n| n == "Alpha"));
}

#[test]
fn sharded_accumulation_equals_single_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let f = fixture(&mut rng, true);
    let mid = f.preds.len() / 2;
    let mut left = kddbench::evaluate::Accumulator::new(f.n_classes);
    let mut right = kddbench::evaluate::Accumulator::new(f.n_classes);
    for p in &f.preds[..mid] {
        left.push(p.truth, &p.probabilities).unwrap();
    }
    for p in &f.preds[mid..] {
        right.push(p.truth, &p.probabilities).unwrap();
    }
    left.merge(&right);
    let (cm, scores) = accumulate(f.preds.iter().cloned(), f.n_classes).unwrap();
    assert_eq!(left.confusion, cm);
    assert_eq!(left.scores, scores);
}
