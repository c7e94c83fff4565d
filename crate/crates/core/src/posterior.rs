//! Posterior summaries, prediction and MCMC diagnostics from retained draws.

use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::distributions as dist;
use crate::error::{Error, Result};
use crate::gibbs::ChainSamples;
use crate::graph::{edge_pairs, NetworkObservation, StandardizationStats};
use crate::rng::RngStream;

/// Largest autocorrelation lag reported by [`diagnostics`].
pub const MAX_ACF_LAG: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub v: usize,
    pub r: usize,
    pub draws: usize,
    pub node_prob: Vec<f64>,
    pub active_nodes: Vec<bool>,
    /// `P(R_eff = r)` for `r = 0..=R`.
    pub reff_pmf: Vec<f64>,
    pub reff_mode: usize,
    pub reff_mean: f64,
    pub gamma_mean: Vec<f64>,
    pub gamma_ci: Vec<(f64, f64)>,
    pub significant_edges: Vec<bool>,
    pub mu_mean: f64,
    pub tau2_mean: f64,
}

/// Type-7 sample quantile (linear interpolation between order statistics)
/// of already-sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

fn interval(xs: &[f64]) -> (f64, f64) {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    (quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn summarize(chain: &ChainSamples) -> Result<PosteriorSummary> {
    if chain.is_empty() {
        return Err(Error::Validation("cannot summarize an empty chain".into()));
    }
    let n = chain.len() as f64;
    let (v, r, q) = (chain.v, chain.r, chain.edge_count());

    let node_prob: Vec<f64> = (0..v)
        .map(|k| chain.xi.iter().filter(|x| x[k]).count() as f64 / n)
        .collect();
    let active_nodes = node_prob.iter().map(|&p| p > 0.5).collect();

    let mut counts = vec![0usize; r + 1];
    for &re in &chain.reff {
        if re > r {
            return Err(Error::Validation(format!("R_eff draw {re} exceeds R = {r}")));
        }
        counts[re] += 1;
    }
    let reff_pmf: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    // ties go to the smaller dimension
    let reff_mode = (0..=r).fold(0, |best, i| if counts[i] > counts[best] { i } else { best });
    let reff_mean = chain.reff.iter().sum::<usize>() as f64 / n;

    let mut gamma_mean = Vec::with_capacity(q);
    let mut gamma_ci = Vec::with_capacity(q);
    for e in 0..q {
        let trace = chain.gamma_trace(e);
        gamma_mean.push(mean(&trace));
        gamma_ci.push(interval(&trace));
    }
    let significant_edges = gamma_ci.iter().map(|&(lo, hi)| lo > 0.0 || hi < 0.0).collect();

    Ok(PosteriorSummary {
        v,
        r,
        draws: chain.len(),
        node_prob,
        active_nodes,
        reff_pmf,
        reff_mode,
        reff_mean,
        gamma_mean,
        gamma_ci,
        significant_edges,
        mu_mean: mean(&chain.mu),
        tau2_mean: mean(&chain.tau2),
    })
}

/// Maps draws of a standardized fit back to the original scale:
/// `γ_e ↦ γ_e s_y / s_e`, `μ ↦ ȳ + s_y μ − Σ_e γ_e' m_e`, `τ² ↦ s_y² τ²`.
pub fn to_original_scale(chain: &ChainSamples, stats: &StandardizationStats) -> Result<ChainSamples> {
    let q = chain.edge_count();
    if stats.edge_mean.len() != q {
        return Err(Error::Validation(format!(
            "standardization covers {} edges, the chain has {q}",
            stats.edge_mean.len()
        )));
    }
    let factors: Vec<f64> = (0..q).map(|e| stats.coefficient_scale(e)).collect();
    let sy = stats.response_scale();
    let mut out = chain.clone();
    for t in 0..chain.len() {
        let mut shift = 0.0;
        for e in 0..q {
            out.gamma[t][e] = chain.gamma[t][e] * factors[e];
            shift += out.gamma[t][e] * stats.edge_mean[e];
        }
        out.mu[t] = stats.response_mean + sy * chain.mu[t] - shift;
        out.tau2[t] = sy * sy * chain.tau2[t];
    }
    Ok(out)
}

/// Mean squared error over the upper-triangular coefficients.
pub fn mse_against_truth(gamma_mean: &[f64], gamma_true: &[f64]) -> Result<f64> {
    if gamma_mean.len() != gamma_true.len() || gamma_mean.is_empty() {
        return Err(Error::Validation(format!(
            "coefficient lengths differ or are empty: {} vs {}",
            gamma_mean.len(),
            gamma_true.len()
        )));
    }
    Ok(gamma_mean
        .iter()
        .zip(gamma_true)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / gamma_mean.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionMetrics {
    pub mspe: f64,
    pub coverage: f64,
    pub mean_interval_length: f64,
}

/// Posterior-predictive means and 95% intervals, on the original response
/// scale and on the standardized scale the model was fitted on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionResult {
    pub point: Vec<f64>,
    pub interval_low: Vec<f64>,
    pub interval_high: Vec<f64>,
    pub point_std: Vec<f64>,
    pub interval_low_std: Vec<f64>,
    pub interval_high_std: Vec<f64>,
    /// Against the supplied truth, original scale.
    pub metrics: Option<PredictionMetrics>,
    /// Against the supplied truth, standardized scale.
    pub metrics_std: Option<PredictionMetrics>,
}

pub fn prediction_metrics(point: &[f64], low: &[f64], high: &[f64], truth: &[f64]) -> Result<PredictionMetrics> {
    let m = point.len();
    if truth.len() != m || low.len() != m || high.len() != m || m == 0 {
        return Err(Error::Validation(format!(
            "{} predictions but {} true responses",
            m,
            truth.len()
        )));
    }
    let mspe = point.iter().zip(truth).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / m as f64;
    let covered = (0..m).filter(|&i| low[i] <= truth[i] && truth[i] <= high[i]).count();
    let length = (0..m).map(|i| high[i] - low[i]).sum::<f64>() / m as f64;
    Ok(PredictionMetrics {
        mspe,
        coverage: covered as f64 / m as f64,
        mean_interval_length: length,
    })
}

/// Predicts responses for `networks` (raw scale). For each retained draw
/// `t` the predictive draw is `μ⁽ᵗ⁾ + x'γ⁽ᵗ⁾ + N(0, τ²⁽ᵗ⁾)` with `x` the
/// standardized upper triangle; the point is the mean of those draws and
/// the interval their 2.5% and 97.5% quantiles. `truth` is on the raw scale.
pub fn predict(
    chain: &ChainSamples,
    networks: &[NetworkObservation],
    stats: &StandardizationStats,
    truth: Option<&[f64]>,
    rng: &mut RngStream,
) -> Result<PredictionResult> {
    if chain.is_empty() {
        return Err(Error::Validation("cannot predict from an empty chain".into()));
    }
    let q = chain.edge_count();
    let mut point_std = Vec::with_capacity(networks.len());
    let mut low_std = Vec::with_capacity(networks.len());
    let mut high_std = Vec::with_capacity(networks.len());
    let gammas: Vec<DVector<f64>> = chain.gamma.iter().map(|g| DVector::from_column_slice(g)).collect();
    for net in networks {
        if net.node_count() != chain.v {
            return Err(Error::Validation(format!(
                "network has {} nodes, the fit has {}",
                net.node_count(),
                chain.v
            )));
        }
        let x = stats.apply_network(net)?.vectorize_upper();
        debug_assert_eq!(x.len(), q);
        let draws: Vec<f64> = (0..chain.len())
            .map(|t| chain.mu[t] + x.dot(&gammas[t]) + chain.tau2[t].sqrt() * dist::standard_normal(rng))
            .collect();
        let (lo, hi) = interval(&draws);
        point_std.push(mean(&draws).clamp(lo, hi));
        low_std.push(lo);
        high_std.push(hi);
    }
    let restore = |v: &[f64]| -> Vec<f64> { v.iter().map(|&y| stats.restore_response(y)).collect() };
    let point = restore(&point_std);
    let interval_low = restore(&low_std);
    let interval_high = restore(&high_std);
    let (metrics, metrics_std) = match truth {
        Some(y) => {
            let y_std: Vec<f64> = y.iter().map(|&v| stats.apply_response(v)).collect();
            (
                Some(prediction_metrics(&point, &interval_low, &interval_high, y)?),
                Some(prediction_metrics(&point_std, &low_std, &high_std, &y_std)?),
            )
        }
        None => (None, None),
    };
    Ok(PredictionResult {
        point,
        interval_low,
        interval_high,
        point_std,
        interval_low_std: low_std,
        interval_high_std: high_std,
        metrics,
        metrics_std,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceDiagnostics {
    pub name: String,
    pub n: usize,
    pub ess: f64,
    /// The trace never moves; `ess` is then reported as `n`.
    pub zero_variance: bool,
    /// Autocorrelations at lags `1..=min(50, n-1)`.
    pub acf: Vec<f64>,
}

fn centered(xs: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = xs.len() as f64;
    let m = mean(xs);
    let d: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let c0 = d.iter().map(|x| x * x).sum::<f64>() / n;
    (c0 > 0.0).then_some((d, c0))
}

fn lag_correlation(d: &[f64], c0: f64, k: usize) -> f64 {
    let n = d.len();
    d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 / c0
}

fn autocorrelations(xs: &[f64], max_lag: usize) -> Option<Vec<f64>> {
    let (d, c0) = centered(xs)?;
    Some(
        (1..=max_lag.min(xs.len().saturating_sub(1)))
            .map(|k| lag_correlation(&d, c0, k))
            .collect(),
    )
}

/// Effective sample size by Geyer's initial positive sequence.
pub fn effective_sample_size(xs: &[f64]) -> (f64, bool) {
    let n = xs.len();
    if n < 2 {
        return (n as f64, true);
    }
    let Some((d, c0)) = centered(xs) else {
        return (n as f64, true);
    };
    let rho_at = |k: usize| if k == 0 { 1.0 } else { lag_correlation(&d, c0, k) };
    let mut sum = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = rho_at(2 * m) + rho_at(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        m += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / n as f64);
    (n as f64 / tau, false)
}

pub fn trace_diagnostics(name: &str, xs: &[f64]) -> TraceDiagnostics {
    let (ess, zero_variance) = effective_sample_size(xs);
    let acf = autocorrelations(xs, MAX_ACF_LAG)
        .unwrap_or_else(|| vec![f64::NAN; MAX_ACF_LAG.min(xs.len().saturating_sub(1))]);
    TraceDiagnostics {
        name: name.to_string(),
        n: xs.len(),
        ess,
        zero_variance,
        acf,
    }
}

/// ESS and autocorrelations for the scalar parameters and every edge
/// coefficient of one chain.
pub fn diagnostics(chain: &ChainSamples) -> Vec<TraceDiagnostics> {
    let reff: Vec<f64> = chain.reff.iter().map(|&r| r as f64).collect();
    let mut out = vec![
        trace_diagnostics("mu", &chain.mu),
        trace_diagnostics("tau2", &chain.tau2),
        trace_diagnostics("delta", &chain.delta),
        trace_diagnostics("theta2", &chain.theta2),
        trace_diagnostics("r_eff", &reff),
    ];
    for (e, (k, l)) in edge_pairs(chain.v).into_iter().enumerate() {
        out.push(trace_diagnostics(
            &format!("gamma_{}_{}", k + 1, l + 1),
            &chain.gamma_trace(e),
        ));
    }
    out
}

/// Seeded random fold labels `0..k` of near-equal size.
pub fn kfold_assignments(n: usize, k: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!(
            "cannot split {n} subjects into {k} folds"
        )));
    }
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

// ---------------------------------------------------------------------------
// CSV output

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `node,label,prob,active` with 1-based node numbers.
pub fn write_summary_csv(path: &Path, summary: &PosteriorSummary, labels: Option<&[String]>) -> Result<()> {
    write_rows(
        path,
        &["node", "label", "prob", "active"],
        (0..summary.v).map(|k| {
            vec![
                (k + 1).to_string(),
                labels
                    .and_then(|l| l.get(k))
                    .cloned()
                    .unwrap_or_else(|| (k + 1).to_string()),
                summary.node_prob[k].to_string(),
                (summary.active_nodes[k] as u8).to_string(),
            ]
        }),
    )
}

/// `row,col,mean,ci_low,ci_high,significant` with 1-based `row < col`.
pub fn write_edges_csv(path: &Path, summary: &PosteriorSummary) -> Result<()> {
    write_rows(
        path,
        &["row", "col", "mean", "ci_low", "ci_high", "significant"],
        edge_pairs(summary.v).into_iter().enumerate().map(|(e, (k, l))| {
            vec![
                (k + 1).to_string(),
                (l + 1).to_string(),
                summary.gamma_mean[e].to_string(),
                summary.gamma_ci[e].0.to_string(),
                summary.gamma_ci[e].1.to_string(),
                (summary.significant_edges[e] as u8).to_string(),
            ]
        }),
    )
}

/// `r_eff,prob`
pub fn write_reff_csv(path: &Path, summary: &PosteriorSummary) -> Result<()> {
    write_rows(
        path,
        &["r_eff", "prob"],
        summary
            .reff_pmf
            .iter()
            .enumerate()
            .map(|(r, p)| vec![r.to_string(), p.to_string()]),
    )
}

/// One row per subject on both scales; `truth` is left blank when unknown.
pub fn write_predictions_csv(
    path: &Path,
    subject_ids: &[String],
    pred: &PredictionResult,
    truth: Option<&[f64]>,
) -> Result<()> {
    write_rows(
        path,
        &[
            "subject",
            "point",
            "low",
            "high",
            "point_std",
            "low_std",
            "high_std",
            "truth",
        ],
        (0..pred.point.len()).map(|i| {
            vec![
                subject_ids.get(i).cloned().unwrap_or_else(|| (i + 1).to_string()),
                pred.point[i].to_string(),
                pred.interval_low[i].to_string(),
                pred.interval_high[i].to_string(),
                pred.point_std[i].to_string(),
                pred.interval_low_std[i].to_string(),
                pred.interval_high_std[i].to_string(),
                truth.map(|t| t[i].to_string()).unwrap_or_default(),
            ]
        }),
    )
}

/// `chain,name,n,ess,zero_variance,acf_1..acf_50`, one row per trace.
pub fn write_diagnostics_csv(path: &Path, per_chain: &[(usize, Vec<TraceDiagnostics>)]) -> Result<()> {
    let mut header: Vec<String> = vec![
        "chain".into(),
        "name".into(),
        "n".into(),
        "ess".into(),
        "zero_variance".into(),
    ];
    header.extend((1..=MAX_ACF_LAG).map(|k| format!("acf_{k}")));
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        path,
        &header_ref,
        per_chain.iter().flat_map(|(chain_id, diags)| {
            diags.iter().map(move |d| {
                let mut row = vec![
                    chain_id.to_string(),
                    d.name.clone(),
                    d.n.to_string(),
                    d.ess.to_string(),
                    (d.zero_variance as u8).to_string(),
                ];
                row.extend((0..MAX_ACF_LAG).map(|k| d.acf.get(k).map(|a| a.to_string()).unwrap_or_default()));
                row
            })
        }),
    )
}
