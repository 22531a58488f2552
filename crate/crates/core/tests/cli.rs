use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kddbench::dataset::{FeatureSchema, LabelCensus};
use kddbench::model::load_model;
use kddbench::synth::{write_corpus, Generator};

fn kddbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kddbench")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

const SMALL_MIX: &[(&str, u64)] = &[
    ("smurf", 400),
    ("neptune", 250),
    ("normal", 300),
    ("back", 10),
    ("satan", 15),
    ("ipsweep", 10),
    ("portsweep", 8),
    ("warezclient", 8),
    ("guess_passwd", 5),
    ("buffer_overflow", 4),
    ("perl", 3),
];

/// Noise-free synthetic corpus: every label follows its profile exactly.
fn clean_corpus(dir: &Path) -> PathBuf {
    let gen = Generator::new(FeatureSchema::kdd99(), 0.0);
    let records = gen.generate(SMALL_MIX, 4);
    let path = dir.join("clean.txt");
    write_corpus(fs::File::create(&path).unwrap(), &records, gen.schema()).unwrap();
    path
}

fn write_plan(dir: &Path, name: &str, rows: &[(&str, u64)]) -> PathBuf {
    let mut text = String::from("seed=1\n");
    for (l, n) in rows {
        text.push_str(&format!("{l},{n}\n"));
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn count_reproduces_the_fixture_census() {
    let out = kddbench(&["count", "--corpus", p(&fixture("kdd_fixture_50k.txt.gz"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let got = LabelCensus::from_csv(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let want = LabelCensus::from_csv(&fs::read_to_string(fixture("kdd_fixture_50k.census.csv")).unwrap()).unwrap();
    assert_eq!(got, want);
    assert_eq!(got.total(), 50_000);
}

#[test]
fn count_of_an_empty_file_is_just_the_total() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let out = kddbench(&["count", "--corpus", p(&empty)]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "label,count\ntotal,0\n");
}

#[test]
fn count_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    assert_eq!(code(&kddbench(&["count", "--corpus", p(&missing)])), 66);

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0,tcp,http,SF,1,2\n").unwrap();
    assert_eq!(code(&kddbench(&["count", "--corpus", p(&bad)])), 2);
    let skipped = kddbench(&["count", "--skip-bad", "--corpus", p(&bad)]);
    assert_eq!(code(&skipped), 0);
    assert!(String::from_utf8(skipped.stdout).unwrap().ends_with("total,0\n"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&kddbench(&["frobnicate"])), 64);
    assert_eq!(code(&kddbench(&["count"])), 64);
    assert_eq!(code(&kddbench(&["--help"])), 0);
}

#[test]
fn sampling_plan_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = clean_corpus(dir.path());

    let greedy = write_plan(dir.path(), "perl.plan", &[("smurf", 10), ("perl", 100)]);
    let out = kddbench(&[
        "sample", "--corpus", p(&corpus), "--plan", p(&greedy), "--test-size", "10", "--out-dir",
        p(&dir.path().join("a")),
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("perl"), "{}", stderr(&out));

    let zero = write_plan(dir.path(), "zero.plan", &[("smurf", 0), ("normal", 0)]);
    let out_dir = dir.path().join("z");
    let out = kddbench(&[
        "sample", "--corpus", p(&corpus), "--plan", p(&zero), "--test-size", "0", "--out-dir", p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let manifest = fs::read_to_string(out_dir.join("train.manifest")).unwrap();
    assert!(manifest.lines().all(|l| l.starts_with('#')), "{manifest}");

    let too_big = kddbench(&[
        "sample", "--corpus", p(&corpus), "--plan", p(&zero), "--test-size", "99999", "--out-dir", p(&out_dir),
    ]);
    assert_eq!(code(&too_big), 3);
}

struct Split {
    _dir: tempfile::TempDir,
    root: PathBuf,
    corpus: PathBuf,
}

impl Split {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let corpus = clean_corpus(&root);
        let out = kddbench(&[
            "sample", "--corpus", p(&corpus), "--train-fraction", "0.5", "--test-size", "200", "--seed", "1",
            "--out-dir", p(&root),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        Split { _dir: dir, root, corpus }
    }

    fn manifest(&self, role: &str) -> PathBuf {
        self.root.join(format!("{role}.manifest"))
    }

    fn train(&self, classifier: &str, extra: &[&str]) -> (Output, PathBuf) {
        let model = self.root.join(format!("{classifier}.model"));
        let manifest = self.manifest("train");
        let mut args = vec![
            "train", "--corpus", p(&self.corpus), "--manifest", p(&manifest), "--classifier",
            classifier, "--out", p(&model),
        ];
        args.extend_from_slice(extra);
        (kddbench(&args), model)
    }
}

fn hyper(model: &Path) -> Vec<(String, String)> {
    load_model(model, &FeatureSchema::kdd99()).unwrap().metadata.hyperparameters
}

fn has(h: &[(String, String)], k: &str, v: &str) -> bool {
    h.iter().any(|(a, b)| a == k && b == v)
}

#[test]
fn train_records_reference_hyperparameters() {
    let s = Split::new();
    let (out, model) = s.train("random-forest", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let h = hyper(&model);
    assert!(has(&h, "num_trees", "100") && has(&h, "seed", "1"), "{h:?}");
    let log = fs::read_to_string(format!("{}.log", model.display())).unwrap();
    assert!(log.starts_with("classifier,random-forest\n"), "{log}");

    let (out, model) = s.train("j48", &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let h = hyper(&model);
    assert!(has(&h, "confidence_factor", "0.25") && has(&h, "num_folds", "3"), "{h:?}");

    let (out, _) = s.train("svm", &[]);
    assert_eq!(code(&out), 64);
    let (out, _) = s.train("decision-table", &[]);
    assert_eq!(code(&out), 64);
    assert!(stderr(&out).contains("not implemented"));
}

#[test]
fn config_file_defaults_and_flag_precedence() {
    let s = Split::new();
    let cfg = s.root.join("run.cfg");
    fs::write(&cfg, "num_trees = 7\nseed = 3\n").unwrap();
    let (out, model) = s.train("random-forest", &["--config", p(&cfg)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let h = hyper(&model);
    assert!(has(&h, "num_trees", "7") && has(&h, "seed", "3"), "{h:?}");

    let (out, model) = s.train("random-forest", &["--config", p(&cfg), "--num-trees", "5"]);
    assert_eq!(code(&out), 0);
    assert!(has(&hyper(&model), "num_trees", "5"));

    fs::write(&cfg, "trees = 7\n").unwrap();
    assert_eq!(code(&s.train("random-forest", &["--config", p(&cfg)]).0), 64);
}

#[test]
fn training_failure_exits_4() {
    let s = Split::new();
    let (out, model) = s.train("mlp", &["--learning-rate", "inf"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(!model.exists());

    // a manifest selecting nothing leaves nothing to train on
    let empty = s.root.join("empty.manifest");
    fs::write(&empty, "# role: train\n").unwrap();
    let out = kddbench(&[
        "train", "--corpus", p(&s.corpus), "--manifest", p(&empty), "--classifier", "naive-bayes", "--out",
        p(&model),
    ]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn evaluate_writes_reports_and_checks_the_schema() {
    let s = Split::new();
    let (out, model) = s.train("random-tree", &["--min-gain", "0"]);
    assert_eq!(code(&out), 0);

    // an unpruned tree on noise-free data memorises its own training extract
    let own = s.root.join("own");
    let out = kddbench(&[
        "evaluate", "--model", p(&model), "--corpus", p(&s.corpus), "--manifest", p(&s.manifest("train")),
        "--out-dir", p(&own),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(own.join("report.csv")).unwrap();
    assert!(csv.contains("Random Tree,accuracy,1.0000000000000000e0"), "{csv}");
    for metric in [
        "kappa", "mean_absolute_error", "root_mean_squared_error", "weighted_tp_rate", "weighted_fp_rate",
        "weighted_precision", "weighted_roc_area", "correct", "incorrect", "accuracy",
    ] {
        assert!(csv.contains(&format!("Random Tree,{metric},")), "{metric}");
    }
    let text = fs::read_to_string(own.join("report.txt")).unwrap();
    assert!(text.contains("Kappa statistic") && text.contains("ROC Area") && text.contains("100 %"));

    let held = s.root.join("held");
    let out = kddbench(&[
        "evaluate", "--model", p(&model), "--corpus", p(&s.corpus), "--manifest", p(&s.manifest("test")),
        "--out-dir", p(&held),
    ]);
    assert_eq!(code(&out), 0);

    let other = s.root.join("other.schema");
    fs::write(&other, FeatureSchema::kdd99().to_text().replacen("duration", "length", 1)).unwrap();
    let out = kddbench(&[
        "--schema", p(&other), "evaluate", "--model", p(&model), "--corpus", p(&s.corpus), "--manifest",
        p(&s.manifest("test")), "--out-dir", p(&held),
    ]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));

    let out = kddbench(&[
        "evaluate", "--model", p(&s.root.join("missing.model")), "--corpus", p(&s.corpus), "--manifest",
        p(&s.manifest("test")), "--out-dir", p(&held),
    ]);
    assert_eq!(code(&out), 66);
}

#[test]
fn bench_missing_corpus_exits_66() {
    let dir = tempfile::tempdir().unwrap();
    let out = kddbench(&["bench", "--corpus", p(&dir.path().join("none.txt")), "--out-dir", p(dir.path())]);
    assert_eq!(code(&out), 66);
}

fn tree_of(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let name = path.strip_prefix(dir).unwrap().display().to_string();
                files.push((name, fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn bench_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = clean_corpus(dir.path());
    let run = |name: &str, threads: &str| {
        let out_dir = dir.path().join(name);
        let out = kddbench(&[
            "--threads", threads, "bench", "--corpus", p(&corpus), "--train-fraction", "0.3", "--test-size",
            "300", "--classifiers", "j48,random-forest,naive-bayes", "--num-trees", "20", "--seed", "1",
            "--out-dir", p(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        out_dir
    };
    let a = run("a", "1");
    let b = run("b", "2");
    let strip = |files: Vec<(String, Vec<u8>)>| -> Vec<(String, Vec<u8>)> {
        files.into_iter().filter(|(n, _)| n != "timings.csv").collect()
    };
    let (fa, fb) = (strip(tree_of(&a)), strip(tree_of(&b)));
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    assert!(names.contains(&"report.csv") && names.contains(&"models/random-forest.model"), "{names:?}");
    assert_eq!(fa, fb);
    let report = String::from_utf8(fa.iter().find(|f| f.0 == "report.txt").unwrap().1.clone()).unwrap();
    let classification = report.split("\n\n").nth(2).unwrap();
    assert_eq!(classification.trim_end().lines().count(), 3 + 3);
}
