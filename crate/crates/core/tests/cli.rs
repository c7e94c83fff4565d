mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use common::*;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

fn manifest(p: &Path) -> serde_json::Value {
    serde_json::from_str(&read(p)).unwrap()
}

fn simulate_small(dir: &Path, seed: u64) {
    bnr_ok(&[
        "--seed",
        &seed.to_string(),
        "--out",
        s(dir),
        "simulate",
        "--nodes",
        "5",
        "--n",
        "12",
        "--n-pred",
        "4",
    ]);
}

fn fit_small(sim: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    let edges = sim.join("train_edges.csv");
    let responses = sim.join("train_responses.csv");
    let mut args = vec![
        "--seed",
        "3",
        "--out",
        s(out),
        "fit",
        "--edges",
        s(&edges),
        "--responses",
        s(&responses),
        "--rank",
        "2",
    ];
    args.extend_from_slice(extra);
    bnr(&args)
}

#[test]
fn sim1_case1_files_have_70_subjects_with_190_edges() {
    let dir = tempfile::tempdir().unwrap();
    bnr_ok(&[
        "--seed",
        "5",
        "--out",
        s(dir.path()),
        "simulate",
        "--scheme",
        "sim1",
        "--case",
        "1",
    ]);
    let text = read(&dir.path().join("train_edges.csv"));
    let mut per_subject: BTreeMap<String, usize> = BTreeMap::new();
    for line in text.lines().skip(1) {
        *per_subject
            .entry(line.split(',').next().unwrap().to_string())
            .or_default() += 1;
    }
    assert_eq!(per_subject.len(), 70);
    assert!(per_subject.values().all(|&c| c == 190));
    assert_eq!(read(&dir.path().join("train_responses.csv")).lines().count(), 71);
    assert_eq!(read(&dir.path().join("test_responses.csv")).lines().count(), 31);
}

#[test]
fn simulate_rejects_zero_subjects_with_an_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = bnr(&["--out", s(dir.path()), "simulate", "--n", "0"]);
    assert!(!out.status.success());
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["status"], "error");
    assert!(record["kind"].is_string());
}

#[test]
fn simulate_is_reproducible_from_flags_and_from_its_run_config() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    simulate_small(&a, 9);
    simulate_small(&b, 9);
    bnr_ok(&["--config", s(&a.join("run.conf")), "--out", s(&c), "simulate"]);
    for f in [
        "train_edges.csv",
        "train_responses.csv",
        "test_edges.csv",
        "test_responses.csv",
        "truth.csv",
    ] {
        let reference = fs::read(a.join(f)).unwrap();
        assert_eq!(reference, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(reference, fs::read(c.join(f)).unwrap(), "{f} from run.conf");
    }
}

#[test]
fn thinning_flags_give_ten_records_per_chain() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let fit = dir.path().join("fit");
    simulate_small(&sim, 1);
    let out = fit_small(
        &sim,
        &fit,
        &["--iterations", "100", "--burn-in", "50", "--thin", "5", "--chains", "2"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in CHAIN_FILES {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for line in read(&fit.join(f)).lines().skip(1) {
            *counts.entry(line.split(',').next().unwrap().to_string()).or_default() += 1;
        }
        assert_eq!(counts.len(), 2, "{f}");
        assert!(counts.values().all(|&c| c == 10), "{f}: {counts:?}");
    }
    let iters: BTreeSet<usize> = read(&fit.join("scalars.csv"))
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(iters, (55..=100).step_by(5).collect());
}

#[test]
fn failed_sweep_is_recorded_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    simulate_small(&sim, 2);
    // Weights near the top of the f64 range overflow the cross products.
    let text = read(&sim.join("train_edges.csv"));
    let mut huge = String::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            huge.push_str(line);
        } else {
            let (head, w) = line.rsplit_once(',').unwrap();
            huge.push_str(&format!("{head},{:e}", w.parse::<f64>().unwrap() * 1e200));
        }
        huge.push('\n');
    }
    fs::write(sim.join("train_edges.csv"), huge).unwrap();
    let fit = dir.path().join("fit");
    let out = fit_small(&sim, &fit, &["--iterations", "20", "--burn-in", "5", "--thin", "1"]);
    assert!(!out.status.success());
    let m = manifest(&fit.join("manifest.json"));
    assert_eq!(m["status"], "failed");
    assert_eq!(m["failure"]["kind"], "sweep_failure");
    assert_eq!(m["failure"]["chain"], 0);
    assert_eq!(m["failure"]["sweep"], 1);
    for f in CHAIN_FILES {
        assert!(read(&fit.join(f)).starts_with("chain,iter"), "{f}");
    }
}

#[test]
fn consumers_name_a_missing_chain_block() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let fit = dir.path().join("fit");
    simulate_small(&sim, 4);
    let out = fit_small(&sim, &fit, &["--iterations", "60", "--burn-in", "20", "--thin", "2"]);
    assert!(out.status.success());
    fs::remove_file(fit.join("xi.csv")).unwrap();
    for cmd in ["summarize", "diagnose"] {
        let out = bnr(&[cmd, s(&fit)]);
        assert!(!out.status.success(), "{cmd}");
        let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
        assert!(record["message"].as_str().unwrap().contains("xi"), "{cmd}: {record}");
    }
}

#[test]
fn summarize_predict_and_diagnose_write_their_reports() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let fit = dir.path().join("fit");
    simulate_small(&sim, 6);
    let out = fit_small(&sim, &fit, &["--iterations", "200", "--burn-in", "100", "--thin", "2"]);
    assert!(out.status.success());

    let (a, b) = (dir.path().join("sum_a"), dir.path().join("sum_b"));
    for d in [&a, &b] {
        bnr_ok(&[
            "--out",
            s(d),
            "summarize",
            s(&fit),
            "--truth",
            s(&sim.join("truth.csv")),
        ]);
    }
    for f in ["summary.csv", "edges.csv", "reff.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(read(&a.join("summary.csv")).starts_with("node,label,prob,active"));
    assert!(manifest(&a.join("summarize_manifest.json"))["details"]["truth"]["mse"].is_number());
    assert_eq!(manifest(&fit.join("manifest.json"))["command"], "fit");

    let pred = dir.path().join("pred");
    bnr_ok(&[
        "--out",
        s(&pred),
        "predict",
        s(&fit),
        "--edges",
        s(&sim.join("test_edges.csv")),
        "--responses",
        s(&sim.join("test_responses.csv")),
    ]);
    let metrics = read(&pred.join("prediction_metrics.csv"));
    let mut lines = metrics.lines();
    assert_eq!(lines.next().unwrap(), "scale,mspe,coverage,mean_interval_length");
    assert_eq!(lines.count(), 2);
    assert_eq!(read(&pred.join("predictions.csv")).lines().count(), 5);

    // Constant γ traces must be flagged.
    let gamma = read(&fit.join("gamma.csv"));
    let mut constant = String::new();
    for (i, line) in gamma.lines().enumerate() {
        if i == 0 {
            constant.push_str(line);
        } else {
            let cols: Vec<&str> = line.split(',').collect();
            constant.push_str(&cols[..2].join(","));
            for _ in 2..cols.len() {
                constant.push_str(",0.25");
            }
        }
        constant.push('\n');
    }
    fs::write(fit.join("gamma.csv"), constant).unwrap();
    let diag = dir.path().join("diag");
    bnr_ok(&["--out", s(&diag), "diagnose", s(&fit)]);
    let text = read(&diag.join("diagnostics.csv"));
    let flagged: Vec<(&str, &str)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[1], c[4])
        })
        .collect();
    assert!(flagged
        .iter()
        .filter(|(n, _)| n.starts_with("gamma_"))
        .all(|(_, z)| *z == "1"));
    assert!(flagged.iter().any(|(n, z)| *n == "tau2" && *z == "0"));
}

#[test]
fn gir_test_reports_a_detected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let out = bnr(&[
        "--seed",
        "1",
        "--out",
        s(dir.path()),
        "gir-test",
        "--fault",
        "tau2-shape",
        "--sweeps",
        "20000",
        "--prior-draws",
        "5000",
    ]);
    assert!(!out.status.success());
    let rows = read(&dir.path().join("gir.csv"));
    assert!(rows.lines().count() > 10);
    assert_eq!(manifest(&dir.path().join("manifest.json"))["status"], "failed");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    fs::write(&conf, "[chain]\nspeed = 3\n").unwrap();
    let out = bnr(&["--config", s(&conf), "--out", s(&dir.path().join("o")), "simulate"]);
    assert!(!out.status.success());
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(record["kind"], "config");
}
