//! End-to-end fitting: optional standardization, design construction,
//! chains, and k-fold cross-validated prediction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::{run_chains_each, ChainConfig, ChainSamples, ModelData};
use crate::graph::{build_design, edge_count, standardize, Dataset, StandardizationStats};
use crate::model::Hyperparameters;
use crate::posterior::{kfold_assignments, predict, prediction_metrics, PredictionMetrics};
use crate::rng::RngStream;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitOptions {
    pub hyper: Hyperparameters,
    pub chain: ChainConfig,
    /// Center and scale edges and response before fitting.
    pub standardize: bool,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub chains: Vec<ChainSamples>,
    /// Identity when the fit was not standardized.
    pub stats: StandardizationStats,
    pub standardized: bool,
}

impl FitResult {
    pub fn pooled(&self) -> Result<ChainSamples> {
        ChainSamples::pool(&self.chains)
    }
}

/// A fit that stopped early. `partial` keeps every chain's retained draws,
/// including the failing chain's draws up to its last good sweep.
#[derive(Debug)]
pub struct FitError {
    pub error: Error,
    pub failed_chain: Option<usize>,
    pub partial: Option<FitResult>,
}

impl std::fmt::Display for FitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.failed_chain {
            Some(c) => write!(f, "chain {c}: {}", self.error),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for FitError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for FitError {
    fn from(error: Error) -> Self {
        Self {
            error,
            failed_chain: None,
            partial: None,
        }
    }
}

impl From<FitError> for Error {
    fn from(e: FitError) -> Self {
        e.error
    }
}

/// Standardizes when asked and builds the design.
pub fn prepare(data: &Dataset, standardize_data: bool) -> Result<(ModelData, StandardizationStats)> {
    let (data, stats) = if standardize_data {
        standardize(data)?
    } else {
        let v = data
            .node_count()
            .ok_or_else(|| Error::Validation("dataset has no subjects".into()))?;
        (data.clone(), StandardizationStats::identity(edge_count(v)))
    };
    Ok((ModelData::new(build_design(&data)?), stats))
}

pub fn fit(data: &Dataset, opts: &FitOptions) -> std::result::Result<FitResult, FitError> {
    opts.hyper.validate()?;
    opts.chain.validate()?;
    let (model_data, stats) = prepare(data, opts.standardize)?;
    let mut chains = Vec::with_capacity(opts.chain.n_chains);
    let mut failure = None;
    for outcome in run_chains_each(&model_data, &opts.hyper, &opts.chain) {
        match outcome {
            Ok(c) => chains.push(c),
            Err(e) => {
                chains.push(e.partial);
                if failure.is_none() {
                    failure = Some((e.chain_id, e.source));
                }
            }
        }
    }
    let result = FitResult {
        chains,
        stats,
        standardized: opts.standardize,
    };
    match failure {
        None => Ok(result),
        Some((chain, error)) => Err(FitError {
            error,
            failed_chain: Some(chain),
            partial: Some(result),
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_size: usize,
    pub metrics: PredictionMetrics,
    pub metrics_std: PredictionMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
    pub assignments: Vec<usize>,
    /// Fold averages, original scale.
    pub mean: PredictionMetrics,
    pub mean_std: PredictionMetrics,
}

fn average(ms: impl Iterator<Item = PredictionMetrics> + Clone) -> PredictionMetrics {
    let n = ms.clone().count() as f64;
    PredictionMetrics {
        mspe: ms.clone().map(|m| m.mspe).sum::<f64>() / n,
        coverage: ms.clone().map(|m| m.coverage).sum::<f64>() / n,
        mean_interval_length: ms.map(|m| m.mean_interval_length).sum::<f64>() / n,
    }
}

/// Seeded random `k`-fold cross-validation. Standardization, when on, is
/// estimated on each training split only.
pub fn cross_validate(data: &Dataset, opts: &FitOptions, k: usize, seed: u64) -> Result<CrossValidation> {
    let n = data.len();
    let mut fold_rng = RngStream::new(seed, u64::MAX);
    let assignments = kfold_assignments(n, k, &mut fold_rng)?;
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let train_idx: Vec<usize> = (0..n).filter(|&i| assignments[i] != f).collect();
        let test_idx: Vec<usize> = (0..n).filter(|&i| assignments[i] == f).collect();
        let train = data.subset(&train_idx);
        let test = data.subset(&test_idx);
        let mut fold_opts = opts.clone();
        fold_opts.chain.seed = opts.chain.seed.wrapping_add(f as u64);
        let fitted = fit(&train, &fold_opts)?;
        let pooled = fitted.pooled()?;
        let mut pred_rng = RngStream::new(seed, f as u64);
        let pred = predict(
            &pooled,
            &test.networks,
            &fitted.stats,
            Some(&test.responses),
            &mut pred_rng,
        )?;
        let y_std: Vec<f64> = test.responses.iter().map(|&y| fitted.stats.apply_response(y)).collect();
        folds.push(FoldResult {
            fold: f,
            test_size: test_idx.len(),
            metrics: pred.metrics.clone().expect("truth supplied"),
            metrics_std: prediction_metrics(&pred.point_std, &pred.interval_low_std, &pred.interval_high_std, &y_std)?,
        });
    }
    let mean = average(folds.iter().map(|f| f.metrics.clone()));
    let mean_std = average(folds.iter().map(|f| f.metrics_std.clone()));
    Ok(CrossValidation {
        folds,
        assignments,
        mean,
        mean_std,
    })
}
