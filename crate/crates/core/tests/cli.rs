use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qgraph::export::read_csv_body;

fn graphs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("graphs")
}

fn qgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgraph")).args(args).output().unwrap()
}

fn run_in(out: &Path, command: &str, graph: &str, extra: &[&str]) -> Output {
    let g = graphs().join(graph);
    let mut args = vec![command, "--graph", g.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    qgraph(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn interval_spectrum_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "spectrum", "interval_pi.toml", &["--lambda-max", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let body = read_csv_body(&dir.path().join("spectrum.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 50);
    for (n, row) in rows.iter().enumerate() {
        assert_eq!(row[0].parse::<usize>().unwrap(), n + 1);
        assert!((row[1].parse::<f64>().unwrap() - (n + 1) as f64).abs() < 1e-10);
        assert_eq!(&row[2], "1");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("spectrum.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "spectrum");
    assert_eq!(meta["version"], qgraph::VERSION);
    assert_eq!(meta["config"]["lambda_max"], 50.0);
}

#[test]
fn every_csv_carries_seed_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "spectrum", "star3.toml", &["--lambda-max", "60", "--seed", "17"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "csv") {
            let first = std::fs::read_to_string(&p).unwrap().lines().next().unwrap().to_string();
            assert!(first.starts_with(&format!("# qgraph {}", qgraph::VERSION)), "{}", p.display());
            assert!(first.contains("seed=17"));
        }
    }
}

#[test]
fn check_warns_on_single_bond() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "check", "interval_pi.toml", &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("unitary OK"));
    assert!(stderr(&o).contains("B=1: all statistics degenerate"));
}

#[test]
fn check_flags_rational_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "check", "star3.toml", &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("[2, -1, -1]"));
    let o = run_in(dir.path(), "check", "star3_generic.toml", &[]);
    assert!(!stderr(&o).contains("rationally dependent"));
}

#[test]
fn non_unitary_conditions_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.toml");
    std::fs::write(
        &spec,
        "vertices = [\"a\", \"b\"]\nbonds = [{ from = \"a\", to = \"b\", length = 1.0 }]\n\
         [conditions]\nunitary = [[0.0, 0.0], [0.9, 0.0], [1.0, 0.0], [0.0, 0.0]]\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    let o = qgraph(&["check", "--graph", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn usage_errors() {
    assert_eq!(qgraph(&["spectrum"]).status.code(), Some(1));
    assert_eq!(qgraph(&["spectrum", "--graph", "x", "--bogus"]).status.code(), Some(1));
    assert_eq!(qgraph(&["spectrum", "--graph", "x", "--lambda-max", "ten"]).status.code(), Some(1));
    assert_eq!(qgraph(&["spectrum", "--graph", "x", "--epsilons", "0.1"]).status.code(), Some(1));
    assert_eq!(qgraph(&["--version"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let missing = run_in(dir.path(), "spectrum", "no_such_graph.toml", &[]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn failed_run_leaves_no_partial_outputs() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    let o = run_in(&out, "equivalence", "star3.toml", &["--deltas", "0.1,0.0", "--eigenvalues", "200"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn stochastic_reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--capital-lambda", "80", "--samples", "3000", "--seed", "9"];
    let oa = run_in(a.path(), "moments", "star3.toml", &[&args[..], &["--workers", "1"]].concat());
    let ob = run_in(b.path(), "moments", "star3.toml", &[&args[..], &["--workers", "3"]].concat());
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert_eq!(ob.status.code(), Some(0));
    assert_eq!(
        read_csv_body(&a.path().join("moments.csv")).unwrap(),
        read_csv_body(&b.path().join("moments.csv")).unwrap()
    );
}

#[test]
fn remaining_commands_produce_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str], &[&str]); 4] = [
        ("phases", &["--lambda-max", "5"], &["phases.csv"]),
        (
            "spacings",
            &["--lambda-max", "150", "--capital-lambda", "60", "--h", "indicator:a=0.5,b=1.5"],
            &["spacings.csv", "lambda_spacings_hist.csv", "theta_spacings_hist.csv"],
        ),
        ("equivalence", &["--eigenvalues", "300", "--deltas", "0.2,0.1"], &["equivalence.csv"]),
        (
            "proposition",
            &["--crossings", "100", "--samples", "2000", "--starts", "2", "--epsilons", "0.1"],
            &["proposition.csv", "residuals.csv"],
        ),
    ];
    for (command, extra, files) in cases {
        let o = run_in(dir.path(), command, "star3_generic.toml", extra);
        assert_eq!(o.status.code(), Some(0), "{command}: {}", stderr(&o));
        for f in files {
            let body = read_csv_body(&dir.path().join(f)).unwrap();
            assert!(body.lines().count() >= 2, "{command}/{f}");
        }
        assert!(dir.path().join(format!("{command}.meta.json")).exists());
    }
}
