use std::path::Path;
use std::process::{Command, Output};

use pairank::cli::{self, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use pairank::{ArchitectureDataset, TrainedPredictor};

fn pairank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairank"))
        .args(args)
        .output()
        .unwrap()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(args.iter().copied(), &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn cost_prints_batches_and_steps() {
    let out = pairank(&[
        "cost",
        "--samples",
        "50000",
        "--batch",
        "128",
        "--epochs",
        "500",
    ]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("batches_per_epoch=391\n"));
    assert!(text.contains("train_steps_per_individual=195500\n"));
    assert!(text.contains("hours_per_individual=16.67\n"));
    assert!(text.contains("manifest.command=cost\n"));
}

#[test]
fn gen_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = pairank(&[
            "gen",
            "--n",
            "100",
            "--features",
            "31",
            "--seed",
            "7",
            "--noise",
            "0",
            "--out",
            path(p),
        ]);
        assert_eq!(out.status.code(), Some(EXIT_OK));
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    let ds = ArchitectureDataset::load(&a).unwrap();
    assert_eq!((ds.len(), ds.feature_len()), (100, 31));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(
        pairank(&["cost", "--bogus"]).status.code(),
        Some(EXIT_USAGE)
    );
    assert_eq!(pairank(&["frobnicate"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(pairank(&[]).status.code(), Some(EXIT_USAGE));
    let (code, _, err) = run(&["cost", "--gpus", "0"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.starts_with("error:"));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = pairank(&["hist", "--data", path(&missing)]);
    assert_eq!(out.status.code(), Some(EXIT_DATA));
    assert!(!out.stderr.is_empty());

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2,0.5\n1,x,0.7\n").unwrap();
    let (code, out, err) = run(&["hist", "--data", path(&bad)]);
    assert_eq!(code, EXIT_DATA);
    assert!(out.is_empty());
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, EXIT_OK);
    for sub in [
        "split", "hist", "gen", "tune", "train", "evaluate", "ablate", "simulate", "cost",
    ] {
        assert!(out.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn split_train_simulate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let (code, ..) = run(&[
        "gen",
        "--n",
        "40",
        "--features",
        "6",
        "--seed",
        "2",
        "--out",
        path(&data),
    ]);
    assert_eq!(code, EXIT_OK);

    let parts = dir.path().join("parts");
    let (code, out, _) = run(&["split", "--data", path(&data), "--out", path(&parts)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("train=28\n") && out.contains("test=12\n"));
    assert!(out.contains("manifest.data_sha256="));
    let train = ArchitectureDataset::load(parts.join("train.csv")).unwrap();
    let test = ArchitectureDataset::load(parts.join("test.csv")).unwrap();
    let top = train.performances().into_iter().fold(f64::MIN, f64::max);
    assert!(test.performances().iter().all(|&p| p >= top));

    let model = dir.path().join("model.json");
    let config = "bootstrap=true criterion=gini max_depth=8 max_features=sqrt min_samples_leaf=1 min_samples_split=2 n_estimators=10";
    let (code, out, err) = run(&[
        "train",
        "--data",
        path(&parts.join("train.csv")),
        "--out",
        path(&model),
        "--model",
        "rforest",
        "--config",
        config,
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("mode=classifier protocol=proposed"));
    assert_eq!(TrainedPredictor::load(&model).unwrap().feature_len(), 6);

    let args = [
        "simulate",
        "--features",
        "6",
        "--space-seed",
        "2",
        "--generations",
        "5",
        "--predictor",
        path(&model),
    ];
    let (code, first, err) = run(&args);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(first.contains("generation=5 "));
    assert!(first.contains("final best="));
    assert_eq!(run(&args).1, first);

    let (code, _, err) = run(&["simulate", "--features", "5", "--predictor", path(&model)]);
    assert_eq!(code, EXIT_DATA, "{err}");
    let (code, _, _) = run(&[
        "simulate",
        "--predictor",
        path(&model),
        "--features",
        "6",
        "--protocol",
        "g1",
    ]);
    assert_ne!(code, EXIT_OK);
}

#[test]
fn evaluate_and_ablate_embed_manifest_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("small.csv");
    run(&[
        "gen",
        "--n",
        "30",
        "--features",
        "5",
        "--seed",
        "4",
        "--out",
        path(&data),
    ]);
    let args = [
        "evaluate",
        "--data",
        path(&data),
        "--models",
        "dtree,gbdt",
        "--trials",
        "2",
        "--folds",
        "3",
        "--seed",
        "1",
    ];
    let (code, out, err) = run(&args);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("manifest.command=evaluate\n"));
    assert!(out.contains("manifest.seed=1\n"));
    assert!(out.contains("Baseline") && out.contains("Proposed") && out.contains("Avg"));
    assert!(out.contains("cell.gbdt.baseline.accuracy="));
    assert_eq!(run(&args).1, out);

    let (code, out, err) = run(&[
        "ablate",
        "--data",
        path(&data),
        "--models",
        "dtree",
        "--trials",
        "1",
        "--folds",
        "3",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("cell.dtree.g1.accuracy=") && out.contains("cell.dtree.g2.accuracy="));
}

#[test]
fn tune_and_hist_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    run(&[
        "gen",
        "--n",
        "25",
        "--features",
        "4",
        "--seed",
        "5",
        "--out",
        path(&data),
    ]);
    let (code, out, err) = run(&[
        "tune",
        "--data",
        path(&data),
        "--models",
        "svm",
        "--trials",
        "3",
        "--folds",
        "3",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("model=svm protocol=proposed"));
    assert!(out.contains("best trial="));

    let (code, out, _) = run(&["hist", "--data", path(&data), "--width", "0.1"]);
    assert_eq!(code, EXIT_OK);
    let total: usize = out
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 25);
}
