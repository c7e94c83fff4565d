use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bnr::commands;
use bnr::config::{RunConfig, PRESET_KEYS};
use bnr::Error;
use clap::{Args, Parser, Subcommand};

/// Bayesian network regression: simulate, fit, summarize, predict.
#[derive(Parser, Debug)]
#[command(name = "bnr", version)]
struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sectioned `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset and its ground truth.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler on a dataset.
    Fit(FitArgs),
    /// Posterior predictions for new networks.
    Predict(PredictArgs),
    /// Node probabilities, edge intervals and the R_eff distribution.
    Summarize(SummarizeArgs),
    /// Effective sample sizes and autocorrelations.
    Diagnose(DiagnoseArgs),
    /// Joint-distribution check of the sampler on a tiny model.
    GirTest(GirArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// sim1, sim2 or sim3.
    #[arg(long)]
    scheme: Option<String>,
    /// Tabulated case of the scheme (1-based); explicit flags override it.
    #[arg(long)]
    case: Option<usize>,
    /// Number of nodes V.
    #[arg(long)]
    nodes: Option<usize>,
    /// Training subjects.
    #[arg(long)]
    n: Option<usize>,
    /// Held-out subjects.
    #[arg(long)]
    n_pred: Option<usize>,
    #[arg(long)]
    r_gen: Option<usize>,
    /// Fraction of inactive nodes.
    #[arg(long)]
    sparsity: Option<f64>,
    /// Fraction of zero edges among active nodes (sim3).
    #[arg(long)]
    edge_sparsity: Option<f64>,
    #[arg(long)]
    mu0: Option<f64>,
    /// Noise variance.
    #[arg(long)]
    tau2: Option<f64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Edge-list CSV (`subject,row,col,weight`).
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Response CSV (`subject,y`).
    #[arg(long)]
    responses: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Maximum latent dimension R.
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    /// Center and scale edges and response first.
    #[arg(long)]
    standardize: bool,
    /// Also store u, M, s and pi traces.
    #[arg(long)]
    full_trace: bool,
    /// Print progress to stderr.
    #[arg(long)]
    progress: bool,
    /// Run k-fold cross-validation after the fit.
    #[arg(long)]
    cv_folds: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    a_delta: Option<f64>,
    #[arg(long)]
    b_delta: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    iota: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Directory written by `fit`.
    chain_dir: PathBuf,
    /// Edge list of the subjects to predict.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// True responses, for MSPE and coverage.
    #[arg(long)]
    responses: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    chain_dir: PathBuf,
    /// truth.csv from `simulate`, to score the fit.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    chain_dir: PathBuf,
}

#[derive(Args, Debug)]
struct GirArgs {
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    prior_draws: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    /// Deliberate sampler fault: none or tau2-shape.
    #[arg(long)]
    fault: Option<String>,
}

type Override = (&'static str, &'static str, String);

fn push<T: ToString>(out: &mut Vec<Override>, section: &'static str, key: &'static str, v: &Option<T>) {
    if let Some(v) = v {
        out.push((section, key, v.to_string()));
    }
}

fn path_str(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

impl Command {
    fn overrides(&self) -> Vec<Override> {
        let mut o = Vec::new();
        match self {
            Command::Simulate(a) => {
                push(&mut o, "simulate", "scheme", &a.scheme);
                push(&mut o, "simulate", "case", &a.case);
                push(&mut o, "simulate", "v", &a.nodes);
                push(&mut o, "simulate", "n", &a.n);
                push(&mut o, "simulate", "n_pred", &a.n_pred);
                push(&mut o, "simulate", "r_gen", &a.r_gen);
                push(&mut o, "simulate", "sparsity", &a.sparsity);
                push(&mut o, "simulate", "edge_sparsity", &a.edge_sparsity);
                push(&mut o, "simulate", "mu0", &a.mu0);
                push(&mut o, "simulate", "tau2_0", &a.tau2);
            }
            Command::Fit(a) => {
                push(&mut o, "data", "edges", &path_str(&a.edges));
                push(&mut o, "data", "responses", &path_str(&a.responses));
                push(&mut o, "data", "nodes", &a.nodes);
                push(&mut o, "data", "cv_folds", &a.cv_folds);
                if a.standardize {
                    o.push(("data", "standardize", "true".into()));
                }
                push(&mut o, "model", "rank", &a.rank);
                push(&mut o, "model", "nu", &a.nu);
                push(&mut o, "model", "a_delta", &a.a_delta);
                push(&mut o, "model", "b_delta", &a.b_delta);
                push(&mut o, "model", "zeta", &a.zeta);
                push(&mut o, "model", "iota", &a.iota);
                push(&mut o, "model", "eta", &a.eta);
                push(&mut o, "chain", "iterations", &a.iterations);
                push(&mut o, "chain", "burn_in", &a.burn_in);
                push(&mut o, "chain", "thin", &a.thin);
                push(&mut o, "chain", "chains", &a.chains);
                if a.full_trace {
                    o.push(("chain", "full_trace", "true".into()));
                }
                if a.progress {
                    o.push(("chain", "progress", "true".into()));
                }
            }
            Command::Predict(a) => {
                push(&mut o, "predict", "edges", &path_str(&a.edges));
                push(&mut o, "predict", "responses", &path_str(&a.responses));
            }
            Command::Summarize(_) | Command::Diagnose(_) => {}
            Command::GirTest(a) => {
                push(&mut o, "gir", "v", &a.nodes);
                push(&mut o, "gir", "n", &a.n);
                push(&mut o, "gir", "rank", &a.rank);
                push(&mut o, "gir", "prior_draws", &a.prior_draws);
                push(&mut o, "gir", "sweeps", &a.sweeps);
                push(&mut o, "gir", "fault", &a.fault);
            }
        }
        o
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut overrides = cli.command.overrides();
    // scheme, then case, then everything else
    overrides.sort_by_key(|(s, k, _)| {
        if *s == "simulate" {
            PRESET_KEYS.iter().position(|p| p == k).unwrap_or(PRESET_KEYS.len())
        } else {
            PRESET_KEYS.len()
        }
    });
    for (section, key, value) in &overrides {
        cfg.set(section, key, value)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = resolve(&cli)?;
    let out_or = |default: &Path| cli.out.clone().unwrap_or_else(|| default.to_path_buf());
    match &cli.command {
        Command::Simulate(_) => {
            let out = out_or(Path::new("bnr_sim"));
            let m = commands::cmd_simulate(&cfg, &out)?;
            println!("wrote {} files to {}", m.outputs.len(), out.display());
        }
        Command::Fit(_) => {
            let out = out_or(Path::new("bnr_fit"));
            let m = commands::cmd_fit(&cfg, &out)?;
            println!(
                "fit complete: {} chain(s), draws per chain {}, outputs in {}",
                cfg.chain.n_chains,
                m.details["retained_draws"],
                out.display()
            );
            if let Some(cv) = m.details.get("cv_mean") {
                println!("cross-validation (original scale): {cv}");
            }
        }
        Command::Summarize(a) => {
            let out = out_or(&a.chain_dir);
            let m = commands::cmd_summarize(&cfg, &a.chain_dir, &out, a.truth.as_deref())?;
            println!(
                "active nodes {}, R_eff mode {}, outputs in {}",
                m.details["active_nodes"],
                m.details["reff_mode"],
                out.display()
            );
            if let Some(t) = m.details.get("truth") {
                println!("against truth: {t}");
            }
        }
        Command::Predict(a) => {
            let out = out_or(&a.chain_dir);
            let (m, pred) = commands::cmd_predict(&cfg, &a.chain_dir, &out)?;
            println!("predicted {} subjects into {}", pred.point.len(), out.display());
            if let Some(x) = m.details.get("metrics") {
                println!("original scale: {x}");
                println!("standardized scale: {}", m.details["metrics_standardized"]);
            }
        }
        Command::Diagnose(a) => {
            let out = out_or(&a.chain_dir);
            let m = commands::cmd_diagnose(&cfg, &a.chain_dir, &out)?;
            println!("diagnostics written to {}", out.join("diagnostics.csv").display());
            if let Some(flags) = m.details["zero_variance"].as_array().filter(|f| !f.is_empty()) {
                println!("zero-variance traces: {}", flags.len());
            }
        }
        Command::GirTest(_) => {
            let out = out_or(Path::new("bnr_gir"));
            let (_, report) = commands::cmd_gir_test(&cfg, &out)?;
            for s in &report.statistics {
                println!("{:<16} z = {:>7.3}", s.name, s.z);
            }
            if !report.passed() {
                return Err(Error::Validation(format!(
                    "getting-it-right check failed: max |z| = {:.3} >= {}",
                    report.max_abs_z(),
                    report.threshold
                )));
            }
            println!("passed: max |z| = {:.3}", report.max_abs_z());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({
                "status": "error",
                "kind": e.kind(),
                "message": e.to_string(),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
