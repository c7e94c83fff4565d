//! Joint-distribution ("getting it right") check of the sampler: moments
//! of prior draws are compared with moments along a chain that alternates
//! a sweep with a fresh response draw. Needs proper priors on `μ` and `τ²`.

use nalgebra::{DMatrix, DVector};

use super::{sweep_with_fault, Fault, ModelData};
use crate::distributions as dist;
use crate::error::{Error, Result};
use crate::graph::{edge_count, edge_pairs, DesignMatrix};
use crate::model::{sample_prior, Hyperparameters, LatentState};
use crate::rng::RngStream;

#[derive(Clone, Debug)]
pub struct GirConfig {
    pub v: usize,
    pub n: usize,
    pub hyper: Hyperparameters,
    pub prior_draws: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub batches: usize,
    pub seed: u64,
    pub fault: Fault,
    /// Largest acceptable |z|.
    pub threshold: f64,
}

impl Default for GirConfig {
    fn default() -> Self {
        let r = 2;
        let nu = 30.0;
        let mut hyper = Hyperparameters::with_rank(r);
        // Mean-identity M with enough degrees of freedom for finite
        // higher moments of γ.
        hyper.nu = nu;
        hyper.scale = DMatrix::identity(r, r) * (nu - r as f64 - 1.0);
        hyper.zeta = 6.0;
        hyper.iota = 6.0;
        hyper.tau2_prior = Some((8.0, 7.0));
        hyper.mu_prior = Some((0.0, 1.0));
        Self {
            v: 5,
            n: 3,
            hyper,
            prior_draws: 20_000,
            sweeps: 100_000,
            burn_in: 1_000,
            batches: 50,
            seed: 1,
            fault: Fault::None,
            threshold: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GirStatistic {
    pub name: String,
    pub prior_mean: f64,
    pub prior_se: f64,
    pub chain_mean: f64,
    pub chain_se: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GirReport {
    pub statistics: Vec<GirStatistic>,
    pub threshold: f64,
}

impl GirReport {
    pub fn max_abs_z(&self) -> f64 {
        self.statistics.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.statistics.iter().all(|s| s.z.abs() < self.threshold)
    }
}

const BASE_NAMES: [&str; 6] = ["tau2", "theta2", "delta", "r_eff", "gamma_norm2", "active_nodes"];

fn test_functions(state: &LatentState) -> [f64; 12] {
    let base = [
        state.tau2,
        state.theta2,
        state.delta,
        state.r_eff() as f64,
        state.gamma.norm_squared(),
        state.active_nodes() as f64,
    ];
    let mut out = [0.0; 12];
    for (i, b) in base.iter().enumerate() {
        out[2 * i] = *b;
        out[2 * i + 1] = b * b;
    }
    out
}

fn stat_names() -> Vec<String> {
    BASE_NAMES
        .iter()
        .flat_map(|n| [n.to_string(), format!("{n}^2")])
        .collect()
}

fn draw_response(design: &DesignMatrix, state: &LatentState, rng: &mut RngStream) -> DVector<f64> {
    let mean = &design.x * &state.gamma;
    let sd = state.tau2.sqrt();
    DVector::from_iterator(
        design.n(),
        mean.iter().map(|m| state.mu + m + sd * dist::standard_normal(rng)),
    )
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Standard error of the mean of an autocorrelated series by batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let (_, var) = mean_and_var(&means);
    (var / batches as f64).sqrt()
}

pub fn run_getting_it_right(config: &GirConfig) -> Result<GirReport> {
    let hyper = &config.hyper;
    hyper.validate()?;
    if hyper.tau2_prior.is_none() || hyper.mu_prior.is_none() {
        return Err(Error::InvalidParameter(
            "joint-distribution test needs proper mu and tau2 priors".into(),
        ));
    }
    if config.batches < 2 || config.sweeps < config.batches * 2 || config.prior_draws < 2 {
        return Err(Error::InvalidParameter(
            "too few draws for the requested batches".into(),
        ));
    }
    let q = edge_count(config.v);
    let mut rng = RngStream::new(config.seed, 0);
    let x = DMatrix::from_fn(config.n, q, |_, _| dist::standard_normal(&mut rng));
    let mut design = DesignMatrix {
        x,
        y: DVector::zeros(config.n),
        v: config.v,
        edges: edge_pairs(config.v),
    };

    // marginal-conditional
    let mut prior_rng = RngStream::new(config.seed, 1);
    let mut prior_stats: Vec<Vec<f64>> = (0..12).map(|_| Vec::with_capacity(config.prior_draws)).collect();
    for _ in 0..config.prior_draws {
        let state = sample_prior(hyper, config.v, &mut prior_rng)?;
        for (j, f) in test_functions(&state).into_iter().enumerate() {
            prior_stats[j].push(f);
        }
    }

    // successive-conditional
    let mut chain_rng = RngStream::new(config.seed, 2);
    let mut state = sample_prior(hyper, config.v, &mut chain_rng)?;
    design.y = draw_response(&design, &state, &mut chain_rng);
    let mut data = ModelData::new(design.clone());
    let mut chain_stats: Vec<Vec<f64>> = (0..12).map(|_| Vec::with_capacity(config.sweeps)).collect();
    for t in 0..config.burn_in + config.sweeps {
        sweep_with_fault(&mut state, &data, hyper, config.fault, &mut chain_rng).map_err(|e| Error::Sweep {
            sweep: t + 1,
            source: Box::new(e),
        })?;
        let y = draw_response(data.design(), &state, &mut chain_rng);
        data.set_response(y);
        if t >= config.burn_in {
            for (j, f) in test_functions(&state).into_iter().enumerate() {
                chain_stats[j].push(f);
            }
        }
    }

    let statistics = stat_names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let (prior_mean, prior_var) = mean_and_var(&prior_stats[j]);
            let prior_se = (prior_var / config.prior_draws as f64).sqrt();
            let (chain_mean, _) = mean_and_var(&chain_stats[j]);
            let chain_se = batch_means_se(&chain_stats[j], config.batches);
            let denom = (prior_se.powi(2) + chain_se.powi(2)).sqrt();
            let z = if denom > 0.0 {
                (chain_mean - prior_mean) / denom
            } else if chain_mean == prior_mean {
                0.0
            } else {
                f64::INFINITY
            };
            GirStatistic {
                name,
                prior_mean,
                prior_se,
                chain_mean,
                chain_se,
                z,
            }
        })
        .collect();
    Ok(GirReport {
        statistics,
        threshold: config.threshold,
    })
}
