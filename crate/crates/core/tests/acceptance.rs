//! One pass/fail line per acceptance criterion. Runs the full-length
//! simulation fits, so expect a few minutes on one core.

mod common;

use std::thread;

use bnr::gibbs::{run_getting_it_right, Fault, GirConfig};
use common::*;

const SEEDS: [u64; 3] = [1, 2, 3];

struct Line {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn report(lines: &[Line]) -> bool {
    for l in lines {
        println!(
            "ACCEPTANCE {} {:<34} {}  {}",
            l.id,
            l.name,
            if l.passed { "PASS" } else { "FAIL" },
            l.detail
        );
    }
    lines.iter().all(|l| l.passed)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() {
    let (sim1, sim2) = thread::scope(|s| {
        let h1: Vec<_> = SEEDS.iter().map(|&seed| s.spawn(move || sim1_case1(seed))).collect();
        let h2: Vec<_> = SEEDS.iter().map(|&seed| s.spawn(move || sim2_case1(seed))).collect();
        (
            h1.into_iter().map(|h| h.join().unwrap()).collect::<Vec<_>>(),
            h2.into_iter().map(|h| h.join().unwrap()).collect::<Vec<_>>(),
        )
    });
    let mut lines = Vec::new();

    let mse = mean(sim1.iter().map(|o| o.mse));
    lines.push(Line {
        id: 1,
        name: "sim1 case 1 MSE <= 0.05",
        passed: mse <= 0.05,
        detail: format!(
            "mean {mse:.4} (per seed {:?})",
            sim1.iter().map(|o| format!("{:.4}", o.mse)).collect::<Vec<_>>()
        ),
    });

    let selection_ok = sim1.iter().all(|o| o.missed_active == 0 && o.false_positives <= 2);
    lines.push(Line {
        id: 2,
        name: "node selection",
        passed: selection_ok,
        detail: sim1
            .iter()
            .map(|o| {
                format!(
                    "seed {}: missed {} false+ {}",
                    o.seed, o.missed_active, o.false_positives
                )
            })
            .collect::<Vec<_>>()
            .join("; "),
    });

    let reff_hits = sim1.iter().filter(|o| o.p_reff2 >= 0.4).count();
    lines.push(Line {
        id: 3,
        name: "P(R_eff = 2) >= 0.4 in 2 of 3",
        passed: reff_hits >= 2,
        detail: format!(
            "{reff_hits}/3 (per seed {:?})",
            sim1.iter().map(|o| format!("{:.3}", o.p_reff2)).collect::<Vec<_>>()
        ),
    });

    let mspe = mean(sim2.iter().map(|(m, _)| m.mspe));
    let coverage = mean(sim2.iter().map(|(m, _)| m.coverage));
    let length = mean(sim2.iter().map(|(_, m)| m.mean_interval_length));
    lines.push(Line {
        id: 4,
        name: "sim2 case 1 prediction",
        passed: (0.02..=0.30).contains(&mspe) && coverage >= 0.90,
        detail: format!("MSPE {mspe:.4} coverage {coverage:.3} (original-scale length {length:.2})"),
    });

    let gir = run_getting_it_right(&GirConfig::default()).unwrap();
    let faulty = run_getting_it_right(&GirConfig {
        fault: Fault::Tau2ShapeOffByOne,
        ..GirConfig::default()
    })
    .unwrap();
    lines.push(Line {
        id: 5,
        name: "getting it right",
        passed: gir.statistics.len() >= 10 && gir.passed() && faulty.max_abs_z() > 6.0,
        detail: format!(
            "{} stats, max |z| {:.2}; with tau2 fault max |z| {:.2}",
            gir.statistics.len(),
            gir.max_abs_z(),
            faulty.max_abs_z()
        ),
    });

    let mut worst = 0.0f64;
    let mut bad = 0;
    for kind in 0..BLOCK_KINDS.len() {
        for seed in 0..100 {
            let err = consistency_error(seed, kind);
            worst = worst.max(err);
            if err >= 1e-8 || err.is_nan() {
                bad += 1;
            }
        }
    }
    lines.push(Line {
        id: 6,
        name: "conditional consistency",
        passed: bad == 0,
        detail: format!("10 blocks x 100 states, {bad} over 1e-8, max error {worst:.2e}"),
    });

    let gig = gig_mean(1_000_000, 11);
    let iw = iw_mean(100_000, 12);
    let target = 1.0 / 7.0;
    let iw_rel = iw.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        if i == 0 || i == 3 {
            acc.max((x - target).abs() / target)
        } else {
            acc.max(x.abs() / target)
        }
    });
    let gig_rel = (gig - 2.0).abs() / 2.0;
    lines.push(Line {
        id: 7,
        name: "GIG and inverse-Wishart means",
        passed: gig_rel <= 0.01 && iw_rel <= 0.02,
        detail: format!("GIG mean {gig:.5} (rel {gig_rel:.2e}); IW max rel dev {iw_rel:.2e}"),
    });

    let dir = tempfile::tempdir().unwrap();
    let same = chain_files_identical(&dir.path().join("a"), &dir.path().join("b"), 42);
    lines.push(Line {
        id: 8,
        name: "determinism",
        passed: same,
        detail: "two CLI runs, seed 42, chain CSVs compared byte for byte".into(),
    });

    if !report(&lines) {
        eprintln!("some acceptance criteria failed");
        std::process::exit(1);
    }
}
