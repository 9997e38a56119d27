//! End-to-end tests of the `disco` binary on the small synthetic preset.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn disco(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disco"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// A config that makes every stage fast on the 120-node preset.
const SMALL_RUN: &str = "\
synth=small
clf_epochs=120
condense_epochs=60
condense_lr=0.01
anchors_m=3
reduction_rate=0.5
lp_steps=60
lp_batch_positives=64
delta=0.9
gnn_epochs=80
gnn_eval_every=10
";

fn parse_report(path: &Path) -> Vec<(String, String)> {
    fs::read_to_string(path)
        .expect("report exists")
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').expect("key=value line");
            (k.to_string(), v.to_string())
        })
        .collect()
}

#[test]
fn pipeline_runs_resumes_and_obeys_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), SMALL_RUN).unwrap();

    // --delta on the command line must beat delta=0.9 from the file.
    let args = [
        "pipeline",
        "--config",
        "run.conf",
        "--out",
        "run",
        "--seed",
        "3",
        "--delta",
        "0.8",
    ];
    let out = disco(&args, dir.path());
    assert_ok(&out);

    let run = dir.path().join("run");
    for f in [
        "dataset/features.bin",
        "classifier.dcmp",
        "condensed/features.bin",
        "condensed/anchors.txt",
        "condensed/graph.edges",
        "condensed/meta.txt",
        "condense_log.tsv",
        "predictor.dcmp",
        "lp_metrics.txt",
        "report.txt",
        "eval_log.tsv",
        "baseline-random/selected.txt",
        "baseline-kcenter/graph.edges",
        "baseline-herding/meta.txt",
        "metrics.txt",
    ] {
        assert!(run.join(f).exists(), "missing {f}");
    }

    let meta = fs::read_to_string(run.join("condensed/meta.txt")).unwrap();
    assert!(meta.contains("delta=0.8"), "flag did not override file: {meta}");
    assert!(meta.contains("seed=3"));

    // The report is key=value with each key exactly once, test_acc in range.
    let report = parse_report(&run.join("report.txt"));
    let mut keys: Vec<&str> = report.iter().map(|(k, _)| k.as_str()).collect();
    keys.sort_unstable();
    let n = keys.len();
    keys.dedup();
    assert_eq!(n, keys.len(), "duplicate report keys");
    let acc: f64 = report
        .iter()
        .find(|(k, _)| k == "test_acc")
        .expect("test_acc present")
        .1
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&acc));

    // The LP metrics line has the documented shape.
    let lp = fs::read_to_string(run.join("lp_metrics.txt")).unwrap();
    assert!(
        lp.starts_with("acc=") && lp.contains(" prec=") && lp.contains(" rec="),
        "{lp}"
    );

    // Rerun without --force: every stage skips, the report is unchanged.
    let before = fs::read(run.join("report.txt")).unwrap();
    let out = disco(&args, dir.path());
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(
        stdout.matches("up to date, skipping").count(),
        10,
        "expected all ten stages to skip:\n{stdout}"
    );
    assert_eq!(fs::read(run.join("report.txt")).unwrap(), before);

    // Derived outputs from the same run directory.
    let out = disco(&["export-embeddings", "--out", "run"], dir.path());
    assert_ok(&out);
    let tsv = fs::read_to_string(run.join("embeddings.tsv")).unwrap();
    let labels = fs::read_to_string(run.join("condensed/labels.txt")).unwrap();
    assert_eq!(tsv.lines().count(), labels.lines().count());

    let out = disco(
        &["metrics", "--out", "run", "--target", "run/baseline-kcenter"],
        dir.path(),
    );
    assert_ok(&out);
    let metrics = fs::read_to_string(run.join("metrics.txt")).unwrap();
    for key in ["nodes=", "edges=", "homophily=", "silhouette="] {
        assert!(metrics.contains(key), "metrics missing {key}: {metrics}");
    }

    // selected.txt lists as many ids as the condensed dir has labels.
    let selected = fs::read_to_string(run.join("baseline-kcenter/selected.txt")).unwrap();
    let base_labels = fs::read_to_string(run.join("baseline-kcenter/labels.txt")).unwrap();
    assert_eq!(selected.lines().count(), base_labels.lines().count());
}

#[test]
fn strict_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), SMALL_RUN).unwrap();
    for out_dir in ["a", "b"] {
        let out = disco(
            &[
                "pipeline",
                "--config",
                "run.conf",
                "--out",
                out_dir,
                "--seed",
                "7",
                "--strict",
            ],
            dir.path(),
        );
        assert_ok(&out);
    }
    for f in [
        "dataset/features.bin",
        "condensed/features.bin",
        "condensed/graph.edges",
        "condensed/labels.txt",
        "condensed/anchors.txt",
        "condensed/meta.txt",
        "classifier.dcmp",
        "predictor.dcmp",
        "report.txt",
        "eval_log.tsv",
        "metrics.txt",
    ] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical strict runs");
    }
}

#[test]
fn errors_use_exit_code_2_and_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();

    // Missing dataset path fails in prepare.
    let out = disco(
        &["prepare", "--dataset", "does/not/exist", "--out", "run"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("stage prepare"), "{stderr}");

    // Unknown config keys are rejected with their line number.
    fs::write(dir.path().join("bad.conf"), "alpha=50\nwibble=1\n").unwrap();
    let out = disco(
        &["pipeline", "--config", "bad.conf", "--out", "run"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("line 2") && stderr.contains("unknown key 'wibble'"),
        "{stderr}"
    );

    // Out-of-range delta is rejected wherever it comes from.
    fs::write(dir.path().join("delta.conf"), "delta=1.5\n").unwrap();
    let out = disco(
        &["pipeline", "--config", "delta.conf", "--out", "run"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta out of (0,1)"));

    let out = disco(&["translate", "--delta", "1.5", "--out", "run"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta out of (0,1)"));

    // Stages refuse to run before their inputs exist.
    let out = disco(&["condense", "--out", "run"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("stage condense"), "{stderr}");
}
