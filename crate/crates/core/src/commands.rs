//! The command-line operations, callable from code. Each writes its outputs
//! plus `manifest.json` and `run.conf` (the resolved configuration) into
//! the output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fit::{cross_validate, fit, FitOptions, FitResult};
use crate::gibbs::{read_chain_dir, run_getting_it_right, write_chain_dir, ChainSamples, GirReport};
use crate::graph::{
    load_dataset, load_networks, responses_by_subject, write_edge_list, write_responses, StandardizationStats,
};
use crate::posterior::{
    diagnostics, mse_against_truth, predict, summarize, to_original_scale, write_diagnostics_csv, write_edges_csv,
    write_predictions_csv, write_reff_csv, write_summary_csv, PosteriorSummary, PredictionResult, TraceDiagnostics,
};
use crate::rng::RngStream;
use crate::simgen::{read_truth_csv, simulate, write_truth_csv, Scheme};

pub const MANIFEST: &str = "manifest.json";
pub const RUN_CONF: &str = "run.conf";

/// Stream id for predictive noise, kept apart from the chain streams.
const PREDICT_STREAM: u64 = 1 << 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub chain: Option<usize>,
    pub sweep: Option<usize>,
}

impl Failure {
    fn from_error(e: &Error, chain: Option<usize>) -> Self {
        let sweep = match e {
            Error::Sweep { sweep, .. } => Some(*sweep),
            _ => None,
        };
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
            chain,
            sweep,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Resolved configuration in the config-file format.
    pub config: String,
    pub status: String,
    pub failure: Option<Failure>,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub details: serde_json::Value,
}

impl Manifest {
    fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: cfg.seed,
            config: cfg.to_ini_string(),
            status: "ok".into(),
            failure: None,
            outputs: Vec::new(),
            details: json!({}),
        }
    }

    fn detail(&mut self, key: &str, value: serde_json::Value) {
        self.details
            .as_object_mut()
            .expect("details is an object")
            .insert(key.into(), value);
    }

    pub fn read(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Err(Error::MissingBlock("manifest".into()));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path,
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Manifest and resolved-config file names for `command`. Commands that
    /// read a fit directory use prefixed names so they can write into it.
    pub fn file_names(command: &str) -> (String, String) {
        match command {
            "simulate" | "fit" | "gir-test" => (MANIFEST.into(), RUN_CONF.into()),
            other => (format!("{other}_{MANIFEST}"), format!("{other}_{RUN_CONF}")),
        }
    }

    fn write(&self, dir: &Path, cfg: &RunConfig) -> Result<()> {
        let (manifest, run_conf) = Self::file_names(&self.command);
        let path = dir.join(manifest);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let conf = dir.join(run_conf);
        std::fs::write(&conf, cfg.to_ini_string()).map_err(|e| Error::io(&conf, e))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    p.as_ref().ok_or_else(|| Error::Config(format!("missing {what}")))
}

// ---------------------------------------------------------------------------
// simulate

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let sim_cfg = cfg.sim_config();
    let sim = simulate(&sim_cfg)?;
    create_dir(out)?;
    let mut m = Manifest::new("simulate", cfg);
    let mut emit = |name: &str| m.outputs.push(name.to_string());
    write_edge_list(
        &out.join("train_edges.csv"),
        &sim.train.subject_ids,
        &sim.train.networks,
    )?;
    emit("train_edges.csv");
    write_responses(
        &out.join("train_responses.csv"),
        &sim.train.subject_ids,
        &sim.train.responses,
    )?;
    emit("train_responses.csv");
    if !sim.test.is_empty() {
        write_edge_list(&out.join("test_edges.csv"), &sim.test.subject_ids, &sim.test.networks)?;
        emit("test_edges.csv");
        write_responses(
            &out.join("test_responses.csv"),
            &sim.test.subject_ids,
            &sim.test.responses,
        )?;
        emit("test_responses.csv");
    }
    write_truth_csv(&out.join("truth.csv"), &sim.truth)?;
    emit("truth.csv");
    m.detail("case", json!(cfg.case));
    m.detail("fit_rank", json!(cfg.hyper.r));
    m.detail(
        "active_nodes",
        json!(sim.truth.active_nodes0.iter().filter(|&&a| a).count()),
    );
    if sim_cfg.scheme != Scheme::Sim1 {
        m.detail("r_gen_ignored", json!(true));
    }
    m.write(out, cfg)?;
    Ok(m)
}

// ---------------------------------------------------------------------------
// fit

fn chain_details(m: &mut Manifest, result: &FitResult, v: usize, labels: &Option<Vec<String>>) {
    m.detail("nodes", json!(v));
    m.detail("rank", json!(result.chains.first().map(|c| c.r)));
    m.detail("standardized", json!(result.standardized));
    m.detail(
        "standardization",
        serde_json::to_value(&result.stats).expect("stats serialize"),
    );
    m.detail("node_labels", json!(labels));
    m.detail(
        "retained_draws",
        json!(result.chains.iter().map(ChainSamples::len).collect::<Vec<_>>()),
    );
}

pub fn cmd_fit(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let edges = required(&cfg.data.edges, "data.edges (--edges)")?;
    let responses = required(&cfg.data.responses, "data.responses (--responses)")?;
    let data = load_dataset(edges, responses, cfg.data.nodes)?;
    let v = data.node_count().expect("validated dataset");
    let opts = FitOptions {
        hyper: cfg.hyper.clone(),
        chain: cfg.chain_config(),
        standardize: cfg.data.standardize,
    };
    create_dir(out)?;
    let mut m = Manifest::new("fit", cfg);
    m.detail("subjects", json!(data.len()));
    let chain_files = |m: &mut Manifest, result: &FitResult| {
        m.outputs
            .extend(["gamma.csv", "xi.csv", "lambda.csv", "scalars.csv"].map(String::from));
        if result.chains.iter().all(|c| c.full.is_some()) {
            m.outputs
                .extend(["u.csv", "m.csv", "s.csv", "pi.csv"].map(String::from));
        }
    };
    let result = match fit(&data, &opts) {
        Ok(r) => r,
        Err(e) => {
            if let Some(partial) = &e.partial {
                write_chain_dir(out, &partial.chains)?;
                chain_files(&mut m, partial);
                chain_details(&mut m, partial, v, &data.node_labels);
            }
            m.status = "failed".into();
            m.failure = Some(Failure::from_error(&e.error, e.failed_chain));
            m.write(out, cfg)?;
            return Err(e.error);
        }
    };
    write_chain_dir(out, &result.chains)?;
    chain_files(&mut m, &result);
    chain_details(&mut m, &result, v, &data.node_labels);

    let diag_path = out.join("diagnostics.csv");
    write_diagnostics_csv(&diag_path, &chain_diagnostics(&result.chains))?;
    m.outputs.push("diagnostics.csv".into());

    if let Some(k) = cfg.data.cv_folds {
        let cv = cross_validate(&data, &opts, k, cfg.seed)?;
        write_cv_csv(&out.join("cv.csv"), &cv)?;
        m.outputs.push("cv.csv".into());
        m.detail("cv_mean", serde_json::to_value(&cv.mean).expect("metrics serialize"));
        m.detail(
            "cv_mean_standardized",
            serde_json::to_value(&cv.mean_std).expect("metrics serialize"),
        );
    }
    m.write(out, cfg)?;
    Ok(m)
}

fn chain_diagnostics(chains: &[ChainSamples]) -> Vec<(usize, Vec<TraceDiagnostics>)> {
    chains.iter().map(|c| (c.chain_id, diagnostics(c))).collect()
}

fn write_cv_csv(path: &Path, cv: &crate::fit::CrossValidation) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["fold", "test_size", "scale", "mspe", "coverage", "mean_interval_length"])
        .map_err(io)?;
    for f in &cv.folds {
        for (scale, m) in [("original", &f.metrics), ("standardized", &f.metrics_std)] {
            w.write_record([
                f.fold.to_string(),
                f.test_size.to_string(),
                scale.to_string(),
                m.mspe.to_string(),
                m.coverage.to_string(),
                m.mean_interval_length.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// chain-directory consumers

/// Chains, standardization and node labels of a completed fit directory.
pub struct FitDir {
    pub manifest: Manifest,
    pub chains: Vec<ChainSamples>,
    pub stats: StandardizationStats,
    pub node_labels: Option<Vec<String>>,
}

pub fn load_fit_dir(dir: &Path) -> Result<FitDir> {
    let manifest = Manifest::read(dir)?;
    if manifest.command != "fit" {
        return Err(Error::Validation(format!(
            "{} was written by `{}`, not `fit`",
            dir.display(),
            manifest.command
        )));
    }
    let chains = read_chain_dir(dir)?;
    if chains.is_empty() {
        return Err(Error::Validation(format!("{} holds no draws", dir.display())));
    }
    let stats: StandardizationStats = serde_json::from_value(manifest.details["standardization"].clone())
        .map_err(|_| Error::MissingBlock("standardization".into()))?;
    let node_labels = serde_json::from_value(manifest.details["node_labels"].clone()).unwrap_or(None);
    Ok(FitDir {
        manifest,
        chains,
        stats,
        node_labels,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TruthComparison {
    pub mse: f64,
    pub true_active: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

pub fn compare_with_truth(summary: &PosteriorSummary, truth_path: &Path) -> Result<TruthComparison> {
    let truth = read_truth_csv(truth_path)?;
    if truth.node_count() != summary.v {
        return Err(Error::Validation(format!(
            "truth has {} nodes, the fit has {}",
            truth.node_count(),
            summary.v
        )));
    }
    let pairs = summary.active_nodes.iter().zip(&truth.active_nodes0);
    Ok(TruthComparison {
        mse: mse_against_truth(&summary.gamma_mean, &truth.gamma0)?,
        true_active: truth.active_nodes0.iter().filter(|&&a| a).count(),
        true_positives: pairs.clone().filter(|(&p, &t)| p && t).count(),
        false_positives: pairs.clone().filter(|(&p, &t)| p && !t).count(),
        false_negatives: pairs.filter(|(&p, &t)| !p && t).count(),
    })
}

pub fn cmd_summarize(cfg: &RunConfig, chain_dir: &Path, out: &Path, truth: Option<&Path>) -> Result<Manifest> {
    let fd = load_fit_dir(chain_dir)?;
    let pooled = ChainSamples::pool(&fd.chains)?;
    let summary = summarize(&to_original_scale(&pooled, &fd.stats)?)?;
    create_dir(out)?;
    let mut m = Manifest::new("summarize", cfg);
    m.detail("chain_dir", json!(chain_dir));
    write_summary_csv(&out.join("summary.csv"), &summary, fd.node_labels.as_deref())?;
    write_edges_csv(&out.join("edges.csv"), &summary)?;
    write_reff_csv(&out.join("reff.csv"), &summary)?;
    m.outputs
        .extend(["summary.csv", "edges.csv", "reff.csv"].map(String::from));
    if fd.manifest.details.get("standardized") == Some(&json!(true)) {
        write_edges_csv(&out.join("edges_standardized.csv"), &summarize(&pooled)?)?;
        m.outputs.push("edges_standardized.csv".into());
    }
    m.detail("draws", json!(summary.draws));
    m.detail(
        "active_nodes",
        json!(summary.active_nodes.iter().filter(|&&a| a).count()),
    );
    m.detail("reff_mode", json!(summary.reff_mode));
    m.detail("reff_mean", json!(summary.reff_mean));
    m.detail("mu_mean", json!(summary.mu_mean));
    m.detail("tau2_mean", json!(summary.tau2_mean));
    if let Some(t) = truth {
        let cmp = compare_with_truth(&summary, t)?;
        m.detail("truth_file", json!(t));
        m.detail("truth", serde_json::to_value(cmp).expect("comparison serializes"));
    }
    m.write(out, cfg)?;
    Ok(m)
}

pub fn cmd_predict(cfg: &RunConfig, chain_dir: &Path, out: &Path) -> Result<(Manifest, PredictionResult)> {
    let fd = load_fit_dir(chain_dir)?;
    let pooled = ChainSamples::pool(&fd.chains)?;
    let edges = required(&cfg.predict.edges, "predict.edges (--edges)")?;
    let (subjects, nets) = load_networks(edges, Some(pooled.v))?;
    let truth = match &cfg.predict.responses {
        Some(p) => {
            let by_subject = responses_by_subject(p)?;
            let ys = subjects
                .iter()
                .map(|s| {
                    by_subject
                        .get(s)
                        .copied()
                        .ok_or_else(|| Error::Validation(format!("no response for subject {s} in {}", p.display())))
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(ys)
        }
        None => None,
    };
    let mut rng = RngStream::new(cfg.seed, PREDICT_STREAM);
    let pred = predict(&pooled, &nets, &fd.stats, truth.as_deref(), &mut rng)?;
    create_dir(out)?;
    let mut m = Manifest::new("predict", cfg);
    m.detail("chain_dir", json!(chain_dir));
    write_predictions_csv(&out.join("predictions.csv"), &subjects, &pred, truth.as_deref())?;
    m.outputs.push("predictions.csv".into());
    if let (Some(orig), Some(std)) = (&pred.metrics, &pred.metrics_std) {
        let path = out.join("prediction_metrics.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, e.into()))?;
        let io = |e: csv::Error| Error::io(&path, e.into());
        w.write_record(["scale", "mspe", "coverage", "mean_interval_length"])
            .map_err(io)?;
        for (scale, x) in [("original", orig), ("standardized", std)] {
            w.write_record([
                scale.to_string(),
                x.mspe.to_string(),
                x.coverage.to_string(),
                x.mean_interval_length.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        m.outputs.push("prediction_metrics.csv".into());
        m.detail("metrics", serde_json::to_value(orig).expect("metrics serialize"));
        m.detail(
            "metrics_standardized",
            serde_json::to_value(std).expect("metrics serialize"),
        );
    }
    m.write(out, cfg)?;
    Ok((m, pred))
}

pub fn cmd_diagnose(cfg: &RunConfig, chain_dir: &Path, out: &Path) -> Result<Manifest> {
    let chains = read_chain_dir(chain_dir)?;
    create_dir(out)?;
    let mut m = Manifest::new("diagnose", cfg);
    m.detail("chain_dir", json!(chain_dir));
    let per_chain = chain_diagnostics(&chains);
    write_diagnostics_csv(&out.join("diagnostics.csv"), &per_chain)?;
    m.outputs.push("diagnostics.csv".into());
    let flagged: Vec<String> = per_chain
        .iter()
        .flat_map(|(c, diags)| {
            diags
                .iter()
                .filter(|d| d.zero_variance)
                .map(move |d| format!("chain {c}: {}", d.name))
        })
        .collect();
    m.detail("zero_variance", json!(flagged));
    m.write(out, cfg)?;
    Ok(m)
}

pub fn cmd_gir_test(cfg: &RunConfig, out: &Path) -> Result<(Manifest, GirReport)> {
    let gir = cfg.gir_config()?;
    let report = run_getting_it_right(&gir)?;
    create_dir(out)?;
    let mut m = Manifest::new("gir-test", cfg);
    let path = out.join("gir.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::io(&path, e.into()))?;
    let io = |e: csv::Error| Error::io(&path, e.into());
    w.write_record(["statistic", "prior_mean", "prior_se", "chain_mean", "chain_se", "z"])
        .map_err(io)?;
    for s in &report.statistics {
        w.write_record([
            s.name.clone(),
            s.prior_mean.to_string(),
            s.prior_se.to_string(),
            s.chain_mean.to_string(),
            s.chain_se.to_string(),
            s.z.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    m.outputs.push("gir.csv".into());
    m.detail("passed", json!(report.passed()));
    m.detail("max_abs_z", json!(report.max_abs_z()));
    m.detail("threshold", json!(report.threshold));
    if !report.passed() {
        m.status = "failed".into();
    }
    m.write(out, cfg)?;
    Ok((m, report))
}
