//! End-to-end runs of the `swagg` binary.

use std::path::Path;
use std::process::{Command, Output};

fn swagg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swagg")).args(args).output().expect("binary runs")
}

fn synthetic(dir: &Path, n: &str) {
    let out = swagg(&["--make-synthetic", n, "2", "3", "--output-dir", dir.to_str().unwrap(), "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn data_args(dir: &Path, out: &str) -> Vec<String> {
    vec![
        "--entity-csv".into(),
        dir.join("entities.csv").display().to_string(),
        "--action-csv".into(),
        dir.join("actions.csv").display().to_string(),
        "--output-dir".into(),
        dir.join(out).display().to_string(),
    ]
}

fn run(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    args.extend(data_args(dir, out));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    swagg(&refs)
}

#[test]
fn estimate_is_reproducible_and_normalized() {
    let dir = tempfile::tempdir().unwrap();
    synthetic(dir.path(), "40");
    let flags = ["estimate", "--periods", "14,7", "--trees", "10", "--ensembles", "2", "--seed", "9"];
    for out in ["a", "b"] {
        let o = run(dir.path(), out, &flags);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert!(stdout.contains("fit ") && stdout.contains("select "), "{stdout}");
    }
    for f in ["bounds.csv", "importance.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }
    let report = std::fs::read_to_string(dir.path().join("a/importance.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("rank,feature_column,mean_importance,std_importance"));
    let total: f64 = lines.map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    // 5 features x 2 windows x 3 aggregators x 2 periods.
    assert_eq!(report.lines().count(), 61);
}

#[test]
fn generate_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    synthetic(dir.path(), "15");
    for (out, method) in [("t", "timecut"), ("s", "sparse")] {
        let o = run(dir.path(), out, &["generate", "--method", method, "--periods", "3,7"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(dir.path().join("t/feature_table.csv")).unwrap();
    let b = std::fs::read(dir.path().join("s/feature_table.csv")).unwrap();
    assert_eq!(a, b);
    let header = String::from_utf8(a).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header.split(',').count(), 1 + 5 * 12);
    assert!(header.starts_with("entity_id,inf_0__sum__avg__3,inf_0__sum__avg__7,inf_0__sum__max__3"));
}

#[test]
fn empty_action_table_gives_null_table() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("entities.csv"), "entity_id,label\na,1\nb,0\n").unwrap();
    std::fs::write(dir.path().join("actions.csv"), "entity_id,timestamp,x,y,z\n").unwrap();
    let o = run(dir.path(), "o", &["generate", "--periods", "1,2"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("o/feature_table.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0].split(',').count(), 37);
    assert_eq!(lines[1], format!("a{}", ",".repeat(36)));
}

#[test]
fn compare_self_check_recovers_everything() {
    let dir = tempfile::tempdir().unwrap();
    synthetic(dir.path(), "30");
    let o = run(dir.path(), "c", &["compare", "--debug-real-tf", "--trees", "10", "--ensembles", "2", "--periods", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let recall = std::fs::read_to_string(dir.path().join("c/recall.csv")).unwrap();
    let rows: Vec<&str> = recall.lines().collect();
    assert_eq!(rows[0], "fraction,recall");
    assert_eq!(rows.len(), 21);
    assert_eq!(rows[1], "0.05,1");
    assert!(rows[1..].iter().all(|r| r.ends_with(",1")), "{recall}");
    let q = std::fs::read_to_string(dir.path().join("c/relative_error.csv")).unwrap();
    assert_eq!(q, "q1,median,q3\n0,0,0\n");
}

#[test]
fn simulate_matches_mixture_density() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = swagg(&[
        "simulate", "--mu", "10", "--sigma", "1", "--p", "0.3", "--period", "10", "--steps", "500000",
        "--coverage-trials", "0", "--output-dir", out, "--seed", "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("mixture_density.csv")).unwrap();
    let gap = text
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[2] - v[3]).abs()
        })
        .fold(0.0, f64::max);
    assert!(gap < 0.01, "max density gap {gap}");
    let hist = std::fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    assert!(hist.starts_with("bin_lo,bin_hi,density,component_count\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    synthetic(dir.path(), "5");
    // Config validation.
    let o = run(dir.path(), "x", &["estimate", "--rho", "1.5"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(dir.path(), "x", &["estimate", "--rho-l", "0.99"]);
    assert_eq!(o.status.code(), Some(3));
    let o = swagg(&["estimate"]);
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_swagg"))
        .args(["estimate"])
        .args(data_args(dir.path(), "x"))
        .env("SWAGG_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    // Schema: unknown entity in the action table.
    std::fs::write(dir.path().join("bad.csv"), "entity_id,timestamp,x\nnobody,0,1\n").unwrap();
    let o = swagg(&[
        "estimate",
        "--entity-csv",
        dir.path().join("entities.csv").to_str().unwrap(),
        "--action-csv",
        dir.path().join("bad.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nobody"));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    synthetic(dir.path(), "12");
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        format!(
            "entity_csv = {}\naction_csv = {}\noutput_dir = {}\nperiods = 7,15,30,60\nassumption = poisson\nm_cap = 10\n\
             windows = sum\naggregators = max\ntrees = 5\nensembles = 1\n",
            dir.path().join("entities.csv").display(),
            dir.path().join("actions.csv").display(),
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_swagg"))
        .args(["estimate", "--config", cfg.to_str().unwrap(), "--periods", "7,15"])
        .env("SWAGG_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(dir.path().join("out/importance.csv")).unwrap();
    // 5 features x 1 window x 1 aggregator x 2 periods.
    assert_eq!(report.lines().count(), 11);
    assert!(report.contains("inf_0__sum__max__15"));
}
