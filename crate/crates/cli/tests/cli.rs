//! End-to-end checks of the `moce` binary: artifact shapes, error paths, and
//! exit codes. Determinism across reruns is covered by the acceptance suite.

use std::path::Path;
use std::process::{Command, Output};

fn moce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moce"))
        .args(args)
        .output()
        .expect("spawn moce")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn train_writes_expected_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_ok(&moce(&[
        "train",
        "--synthetic",
        "--synthetic-n",
        "120",
        "--epochs",
        "25",
        "--bootstrap",
        "30",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]));

    for name in ["config.txt", "model.txt", "history.csv", "metrics.json"] {
        assert!(out.join(name).is_file(), "missing artifact {name}");
    }

    let history = read(&out.join("history.csv"));
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines[0], "epoch,objective,val_cindex");
    assert_eq!(lines.len(), 26, "header plus one row per epoch");
    assert!(lines[1].starts_with("1,"));
    assert!(lines[25].starts_with("25,"));

    let metrics = read(&out.join("metrics.json"));
    for key in [
        "test_hard_c_index",
        "test_soft_c_index",
        "test_hard_ci_lower",
        "test_soft_ci_upper",
        "val_c_index_best",
        "epochs_run",
    ] {
        assert!(metrics.contains(key), "metrics.json lacks {key}:\n{metrics}");
    }

    let model = read(&out.join("model.txt"));
    assert!(model.starts_with("moce-model v1"), "unexpected model header");
    assert!(model.contains("standardizer"), "model should embed scaling");
}

#[test]
fn train_same_seed_reproduces_different_seed_diverges() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path, seed: &str| {
        assert_ok(&moce(&[
            "train",
            "--synthetic",
            "--synthetic-n",
            "100",
            "--epochs",
            "15",
            "--bootstrap",
            "20",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]));
        std::fs::read(out.join("model.txt")).unwrap()
    };
    let a = run(&dir.path().join("a"), "11");
    let b = run(&dir.path().join("b"), "11");
    let c = run(&dir.path().join("c"), "12");
    assert_eq!(a, b, "same seed must reproduce the model byte for byte");
    assert_ne!(a, c, "different seeds should reach different models");
}

#[test]
fn rerun_from_emitted_config_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    assert_ok(&moce(&[
        "train",
        "--synthetic",
        "--synthetic-n",
        "90",
        "--epochs",
        "10",
        "--bootstrap",
        "20",
        "--seed",
        "3",
        "--out",
        first.to_str().unwrap(),
    ]));
    assert_ok(&moce(&[
        "train",
        "--config",
        first.join("config.txt").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]));
    for name in ["config.txt", "model.txt", "history.csv", "metrics.json"] {
        assert_eq!(
            std::fs::read(first.join(name)).unwrap(),
            std::fs::read(second.join(name)).unwrap(),
            "{name} differs when re-run from the emitted config"
        );
    }
}

#[test]
fn gen_data_then_train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    let scored = dir.path().join("scored");

    assert_ok(&moce(&[
        "gen-data",
        "--n",
        "150",
        "--features",
        "4",
        "--seed",
        "21",
        "--out",
        data.to_str().unwrap(),
    ]));
    let csv = read(&data.join("data.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x0,x1,x2,x3,time,event");
    assert_eq!(csv.lines().count(), 151, "header plus one row per subject");
    for line in csv.lines().skip(1) {
        let last = line.rsplit(',').next().unwrap();
        assert!(last == "0" || last == "1", "event column must be 0/1: {line}");
    }
    let truth = read(&data.join("truth.txt"));
    assert!(truth.starts_with("synthetic-truth v1"));
    assert!(truth.contains("experts"));
    assert!(truth.contains("assignments"));

    assert_ok(&moce(&[
        "train",
        "--data",
        data.join("data.csv").to_str().unwrap(),
        "--epochs",
        "20",
        "--bootstrap",
        "20",
        "--seed",
        "22",
        "--out",
        run.to_str().unwrap(),
    ]));
    assert_ok(&moce(&[
        "eval",
        "--model",
        run.join("model.txt").to_str().unwrap(),
        "--data",
        data.join("data.csv").to_str().unwrap(),
        "--bootstrap",
        "20",
        "--seed",
        "23",
        "--out",
        scored.to_str().unwrap(),
    ]));
    let metrics = read(&scored.join("metrics.json"));
    assert!(metrics.contains("hard_c_index"));
    assert!(metrics.contains("soft_c_index"));
}

#[test]
fn compare_objectives_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    assert_ok(&moce(&[
        "compare-objectives",
        "--synthetic",
        "--synthetic-n",
        "80",
        "--epochs",
        "12",
        "--restarts",
        "2",
        "--seed",
        "6",
        "--out",
        out.to_str().unwrap(),
    ]));
    let curves = read(&out.join("curves.csv"));
    let lines: Vec<&str> = curves.lines().collect();
    assert_eq!(lines[0], "epoch,elbo_train,elbo_test,rt_train,rt_test");
    assert_eq!(lines.len(), 13, "header plus one row per epoch");
    let metrics = read(&out.join("metrics.json"));
    for key in ["final_elbo_test", "final_rt_test", "restarts"] {
        assert!(metrics.contains(key), "metrics.json lacks {key}");
    }
}

#[test]
fn props_and_gradcheck_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let props_out = dir.path().join("props");
    let grad_out = dir.path().join("grad");

    let out = moce(&[
        "props",
        "--trials",
        "40",
        "--seed",
        "8",
        "--out",
        props_out.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let report = read(&props_out.join("props.txt"));
    assert!(report.contains("40 trials"));
    assert!(report.contains("result: PASS"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    let out = moce(&[
        "gradcheck",
        "--seed",
        "9",
        "--out",
        grad_out.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let report = read(&grad_out.join("gradcheck.txt"));
    assert!(report.contains("PASS"));
}

#[test]
fn gradcheck_corrupted_gradient_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = moce(&[
        "gradcheck",
        "--seed",
        "10",
        "--corrupt-gradient",
        "--out",
        dir.path().join("g").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "corrupted gradient must fail");
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        stderr_of(&out)
    );
    assert!(text.contains("FAIL"), "no failure report in: {text}");
}

#[test]
fn missing_csv_fails_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = moce(&[
        "train",
        "--data",
        "/nonexistent/cohort.csv",
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(
        stderr_of(&out).contains("/nonexistent/cohort.csv"),
        "error should name the missing file: {}",
        stderr_of(&out)
    );
}

#[test]
fn config_errors_are_rejected_with_context() {
    let dir = tempfile::tempdir().unwrap();

    // unknown key names file and line
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "epochs = 10\nlearning_rat = 0.1\n").unwrap();
    let out = moce(&[
        "train",
        "--synthetic",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("a").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = stderr_of(&out);
    assert!(err.contains("learning_rat"), "unknown key not named: {err}");
    assert!(err.contains("bad.conf"), "config file not named: {err}");

    // no data source at all
    let out = moce(&[
        "train",
        "--out",
        dir.path().join("b").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(
        stderr_of(&out).contains("synthetic") || stderr_of(&out).contains("data"),
        "missing data source should be explained: {}",
        stderr_of(&out)
    );

    // nonsensical restart count
    let out = moce(&[
        "compare-objectives",
        "--synthetic",
        "--restarts",
        "0",
        "--out",
        dir.path().join("c").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(
        stderr_of(&out).contains("restarts"),
        "restart validation not surfaced: {}",
        stderr_of(&out)
    );

    // unknown preset lists the valid names
    let out = moce(&[
        "train",
        "--synthetic",
        "--preset",
        "no-such-preset",
        "--out",
        dir.path().join("d").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(
        stderr_of(&out).contains("gbsg-hard"),
        "preset error should list valid names: {}",
        stderr_of(&out)
    );
}

#[test]
fn eval_rejects_feature_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let data3 = dir.path().join("d3");
    let data5 = dir.path().join("d5");
    let run = dir.path().join("run");
    for (out, d) in [(&data3, "3"), (&data5, "5")] {
        assert_ok(&moce(&[
            "gen-data",
            "--n",
            "80",
            "--features",
            d,
            "--seed",
            "44",
            "--out",
            out.to_str().unwrap(),
        ]));
    }
    assert_ok(&moce(&[
        "train",
        "--data",
        data3.join("data.csv").to_str().unwrap(),
        "--epochs",
        "10",
        "--bootstrap",
        "20",
        "--seed",
        "45",
        "--out",
        run.to_str().unwrap(),
    ]));
    let out = moce(&[
        "eval",
        "--model",
        run.join("model.txt").to_str().unwrap(),
        "--data",
        data5.join("data.csv").to_str().unwrap(),
        "--out",
        dir.path().join("scored").to_str().unwrap(),
    ]);
    assert!(!out.status.success(), "feature mismatch must be an error");
}
