#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use nalgebra::{DMatrix, DVector};

use bnr::distributions::{sample_gig, sample_inverse_wishart, standard_normal};
use bnr::fit::{fit, FitOptions};
use bnr::gibbs::{log_conditional, update_block, Block, ChainConfig, Fault, ModelData};
use bnr::graph::{edge_count, edge_pairs, DesignMatrix};
use bnr::model::{init_state, log_joint, Hyperparameters, LatentState};
use bnr::posterior::{mse_against_truth, predict, summarize, PredictionMetrics};
use bnr::rng::RngStream;
use bnr::simgen::{simulate, Scheme, SimCase};

pub const BLOCK_KINDS: [&str; 10] = [
    "mu", "gamma", "tau2", "s", "theta2", "node", "delta", "m", "lambda", "pi",
];

pub fn block_for(kind: usize, v: usize, r: usize, rng: &mut RngStream) -> Block {
    let pick = |n: usize, rng: &mut RngStream| (rand::Rng::random::<u64>(rng) % n as u64) as usize;
    match kind {
        0 => Block::Mu,
        1 => Block::Gamma,
        2 => Block::Tau2,
        3 => Block::Scales,
        4 => Block::Theta2,
        5 => Block::Node(pick(v, rng)),
        6 => Block::Delta,
        7 => Block::M,
        8 => Block::Lambda(pick(r, rng)),
        _ => Block::Pi(pick(r, rng)),
    }
}

/// A tiny random model: 3 to 5 nodes, rank 1 to 3, 2 to 8 subjects, with
/// the state taken a few sweeps away from a prior draw.
pub fn tiny_problem(seed: u64) -> (ModelData, Hyperparameters, LatentState) {
    let mut rng = RngStream::new(seed, 7);
    let v = 3 + (rand::Rng::random::<u64>(&mut rng) % 3) as usize;
    let r = 1 + (rand::Rng::random::<u64>(&mut rng) % 3) as usize;
    let n = 2 + (rand::Rng::random::<u64>(&mut rng) % 7) as usize;
    let q = edge_count(v);
    let design = DesignMatrix {
        x: DMatrix::from_fn(n, q, |_, _| standard_normal(&mut rng)),
        y: DVector::from_fn(n, |_, _| 2.0 * standard_normal(&mut rng)),
        v,
        edges: edge_pairs(v),
    };
    let data = ModelData::new(design);
    let hyper = Hyperparameters::with_rank(r);
    let mut state = init_state(&hyper, data.design(), &mut rng).unwrap();
    for _ in 0..3 {
        bnr::gibbs::sweep(&mut state, &data, &hyper, &mut rng).unwrap();
    }
    (data, hyper, state)
}

/// Difference between the change in log full conditional and the change in
/// log joint for one update of block kind `kind`.
pub fn consistency_error(seed: u64, kind: usize) -> f64 {
    let (data, hyper, state) = tiny_problem(seed);
    let mut rng = RngStream::new(seed, 8 + kind as u64);
    let block = block_for(kind, state.node_count(), state.rank(), &mut rng);
    let mut next = state.clone();
    update_block(block, &mut next, &data, &hyper, Fault::None, &mut rng).unwrap();
    let lhs = log_conditional(block, &state, &next, &data, &hyper).unwrap()
        - log_conditional(block, &state, &state, &data, &hyper).unwrap();
    let rhs = log_joint(&next, data.design(), &hyper).unwrap() - log_joint(&state, data.design(), &hyper).unwrap();
    (lhs - rhs).abs()
}

pub fn gig_mean(draws: usize, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed, 0);
    (0..draws)
        .map(|_| sample_gig(0.5, 1.0, 1.0, &mut rng).unwrap())
        .sum::<f64>()
        / draws as f64
}

pub fn iw_mean(draws: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = RngStream::new(seed, 0);
    let scale = DMatrix::identity(2, 2);
    let mut acc = DMatrix::zeros(2, 2);
    for _ in 0..draws {
        acc += sample_inverse_wishart(&scale, 10.0, &mut rng).unwrap();
    }
    acc / draws as f64
}

#[derive(Debug)]
pub struct Sim1Outcome {
    pub seed: u64,
    pub mse: f64,
    pub missed_active: usize,
    pub false_positives: usize,
    pub p_reff2: f64,
}

/// Simulation 1 Case 1 at full chain length, fitted with R = 2.
pub fn sim1_case1(seed: u64) -> Sim1Outcome {
    let case = SimCase::lookup(Scheme::Sim1, 1).unwrap();
    let sim = simulate(&case.config(seed)).unwrap();
    let opts = FitOptions {
        hyper: Hyperparameters::with_rank(case.fit_rank),
        chain: ChainConfig {
            seed,
            ..ChainConfig::default()
        },
        standardize: false,
    };
    let result = fit(&sim.train, &opts).unwrap();
    let summary = summarize(&result.pooled().unwrap()).unwrap();
    let pairs = summary.active_nodes.iter().zip(&sim.truth.active_nodes0);
    Sim1Outcome {
        seed,
        mse: mse_against_truth(&summary.gamma_mean, &sim.truth.gamma0).unwrap(),
        missed_active: sim
            .truth
            .active_nodes0
            .iter()
            .zip(&summary.node_prob)
            .filter(|(&t, &p)| t && p <= 0.5)
            .count(),
        false_positives: pairs.filter(|(&p, &t)| p && !t).count(),
        p_reff2: summary.reff_pmf.get(2).copied().unwrap_or(0.0),
    }
}

/// Simulation 2 Case 1: standardized fit with the case's rank, metrics on
/// the held-out subjects (standardized scale, then original scale).
pub fn sim2_case1(seed: u64) -> (PredictionMetrics, PredictionMetrics) {
    let case = SimCase::lookup(Scheme::Sim2, 1).unwrap();
    let sim = simulate(&case.config(seed)).unwrap();
    let opts = FitOptions {
        hyper: Hyperparameters::with_rank(case.fit_rank),
        chain: ChainConfig {
            seed,
            ..ChainConfig::default()
        },
        standardize: true,
    };
    let result = fit(&sim.train, &opts).unwrap();
    let pooled = result.pooled().unwrap();
    let pred = predict(
        &pooled,
        &sim.test.networks,
        &result.stats,
        Some(&sim.test.responses),
        &mut RngStream::new(seed, 1 << 32),
    )
    .unwrap();
    (pred.metrics_std.unwrap(), pred.metrics.unwrap())
}

pub fn bnr(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bnr")).args(args).output().unwrap()
}

pub fn bnr_ok(args: &[&str]) {
    let out = bnr(args);
    assert!(
        out.status.success(),
        "bnr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

pub const CHAIN_FILES: [&str; 4] = ["gamma.csv", "xi.csv", "lambda.csv", "scalars.csv"];

/// Simulates and fits a short two-chain run under `root`.
pub fn short_cli_run(root: &Path, seed: u64) {
    let s = seed.to_string();
    let sim = root.join("sim");
    let fit = root.join("fit");
    bnr_ok(&[
        "--seed",
        &s,
        "--out",
        sim.to_str().unwrap(),
        "simulate",
        "--nodes",
        "6",
        "--n",
        "20",
    ]);
    bnr_ok(&[
        "--seed",
        &s,
        "--out",
        fit.to_str().unwrap(),
        "fit",
        "--edges",
        sim.join("train_edges.csv").to_str().unwrap(),
        "--responses",
        sim.join("train_responses.csv").to_str().unwrap(),
        "--rank",
        "2",
        "--iterations",
        "400",
        "--burn-in",
        "100",
        "--thin",
        "3",
        "--chains",
        "2",
    ]);
}

/// True when two short CLI runs with one seed give byte-identical chain files.
pub fn chain_files_identical(a: &Path, b: &Path, seed: u64) -> bool {
    short_cli_run(a, seed);
    short_cli_run(b, seed);
    CHAIN_FILES.iter().all(|f| {
        let x = std::fs::read(a.join("fit").join(f)).unwrap();
        let y = std::fs::read(b.join("fit").join(f)).unwrap();
        !x.is_empty() && x == y
    })
}
