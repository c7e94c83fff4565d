//! C interface to the `bnr` library.
//!
//! Datasets and fits are opaque handles created and freed through this
//! interface. Every fallible call returns a [`BnrStatus`]; on failure
//! [`bnr_last_error`] describes the most recent error on the calling thread.
//! Output arrays are caller-allocated and their length is passed alongside.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use bnr::fit::{fit, FitOptions, FitResult};
use bnr::gibbs::{run_getting_it_right, write_chain_dir, ChainConfig, ChainSamples, Fault, GirConfig};
use bnr::graph::{edge_count, load_dataset, Dataset, NetworkObservation};
use bnr::model::Hyperparameters;
use bnr::posterior::{predict, summarize, to_original_scale, PosteriorSummary};
use bnr::rng::RngStream;
use bnr::simgen::{simulate, Scheme, SimConfig};
use bnr::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Validation = 3,
    NumericalFailure = 4,
    SweepFailure = 5,
    Parse = 6,
    Io = 7,
    MissingBlock = 8,
    Config = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

impl From<&Error> for BnrStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter(_) => BnrStatus::InvalidParameter,
            Error::Validation(_) => BnrStatus::Validation,
            Error::NumericalFailure { .. } => BnrStatus::NumericalFailure,
            Error::Sweep { .. } => BnrStatus::SweepFailure,
            Error::Parse { .. } => BnrStatus::Parse,
            Error::Io { .. } => BnrStatus::Io,
            Error::MissingBlock(_) => BnrStatus::MissingBlock,
            Error::Config(_) => BnrStatus::Config,
        }
    }
}

/// Simulation scheme.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnrScheme {
    Sim1 = 1,
    Sim2 = 2,
    Sim3 = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct BnrSimOptions {
    pub scheme: BnrScheme,
    pub nodes: usize,
    pub n: usize,
    pub n_pred: usize,
    pub r_gen: usize,
    /// Fraction of inactive nodes.
    pub sparsity: f64,
    /// Fraction of zero edges among active nodes (Sim3 only).
    pub edge_sparsity: f64,
    pub mu0: f64,
    pub tau2: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct BnrFitOptions {
    pub rank: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
    /// Nonzero to center and scale edges and response.
    pub standardize: u8,
}

/// Opaque dataset: subjects with a network and a response each.
pub struct BnrDataset(Dataset);

/// Opaque fitted model with its posterior summary on the original scale.
pub struct BnrFit {
    result: FitResult,
    pooled: ChainSamples,
    summary: PosteriorSummary,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn guard(f: impl FnOnce() -> Result<(), BnrStatus>) -> BnrStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BnrStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            BnrStatus::Panic
        }
    }
}

fn fail(e: Error) -> BnrStatus {
    set_error(e.to_string());
    BnrStatus::from(&e)
}

fn null(what: &str) -> BnrStatus {
    set_error(format!("{what} is null"));
    BnrStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, BnrStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path<'a>(p: *const c_char, what: &str) -> Result<&'a Path, BnrStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(Error::InvalidParameter(format!("{what} is not UTF-8"))))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], BnrStatus> {
    if len < need {
        set_error(format!("{what} needs {need} entries, got {len}"));
        return Err(BnrStatus::BufferTooSmall);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn bnr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bnr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn bnr_sim_options_default() -> BnrSimOptions {
    let d = SimConfig::default();
    BnrSimOptions {
        scheme: BnrScheme::Sim1,
        nodes: d.v,
        n: d.n,
        n_pred: d.n_pred,
        r_gen: d.r_gen,
        sparsity: 1.0 - d.pi_node,
        edge_sparsity: 1.0 - d.pi_edge,
        mu0: d.mu0,
        tau2: d.tau2_0,
        seed: d.seed,
    }
}

#[no_mangle]
pub extern "C" fn bnr_fit_options_default() -> BnrFitOptions {
    let c = ChainConfig::default();
    BnrFitOptions {
        rank: Hyperparameters::default().r,
        iterations: c.iterations,
        burn_in: c.burn_in,
        thin: c.thin,
        chains: c.n_chains,
        seed: c.seed,
        standardize: 0,
    }
}

/// Builds a dataset from `n` networks on `nodes` nodes. `upper` holds
/// `n * nodes*(nodes-1)/2` weights, subject by subject, each in row-major
/// upper-triangle order (1,2), (1,3), ..., (V-1,V).
#[no_mangle]
pub unsafe extern "C" fn bnr_dataset_new(
    nodes: usize,
    n: usize,
    upper: *const f64,
    y: *const f64,
    out: *mut *mut BnrDataset,
) -> BnrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if upper.is_null() || y.is_null() {
            return Err(null("input array"));
        }
        let q = edge_count(nodes);
        let upper = std::slice::from_raw_parts(upper, n * q);
        let y = std::slice::from_raw_parts(y, n);
        let networks = upper
            .chunks(q.max(1))
            .take(n)
            .map(|w| NetworkObservation::from_upper(nodes, w))
            .collect::<Result<Vec<_>, _>>()
            .map_err(fail)?;
        let data = Dataset::new(networks, y.to_vec()).map_err(fail)?;
        *out = Box::into_raw(Box::new(BnrDataset(data)));
        Ok(())
    })
}

/// Reads an edge list (`subject,row,col,weight`) and responses (`subject,y`).
/// `nodes` of 0 infers the node count from the edge list.
#[no_mangle]
pub unsafe extern "C" fn bnr_dataset_load(
    edges_path: *const c_char,
    responses_path: *const c_char,
    nodes: usize,
    out: *mut *mut BnrDataset,
) -> BnrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let edges = path(edges_path, "edges_path")?;
        let responses = path(responses_path, "responses_path")?;
        let data = load_dataset(edges, responses, (nodes > 0).then_some(nodes)).map_err(fail)?;
        *out = Box::into_raw(Box::new(BnrDataset(data)));
        Ok(())
    })
}

/// Simulates a training set and a held-out set. Either output may be null
/// when not wanted.
#[no_mangle]
pub unsafe extern "C" fn bnr_dataset_simulate(
    options: *const BnrSimOptions,
    train: *mut *mut BnrDataset,
    test: *mut *mut BnrDataset,
) -> BnrStatus {
    guard(|| {
        let o = deref(options, "options")?;
        let config = SimConfig {
            scheme: match o.scheme {
                BnrScheme::Sim1 => Scheme::Sim1,
                BnrScheme::Sim2 => Scheme::Sim2,
                BnrScheme::Sim3 => Scheme::Sim3,
            },
            v: o.nodes,
            n: o.n,
            n_pred: o.n_pred,
            r_gen: o.r_gen,
            pi_node: 1.0 - o.sparsity,
            pi_edge: 1.0 - o.edge_sparsity,
            mu0: o.mu0,
            tau2_0: o.tau2,
            seed: o.seed,
            ..SimConfig::default()
        };
        let sim = simulate(&config).map_err(fail)?;
        if !train.is_null() {
            *train = Box::into_raw(Box::new(BnrDataset(sim.train)));
        }
        if !test.is_null() {
            *test = Box::into_raw(Box::new(BnrDataset(sim.test)));
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bnr_dataset_free(data: *mut BnrDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Number of subjects; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn bnr_dataset_len(data: *const BnrDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.len())
}

/// Number of nodes; 0 for a null or empty dataset.
#[no_mangle]
pub unsafe extern "C" fn bnr_dataset_nodes(data: *const BnrDataset) -> usize {
    data.as_ref().and_then(|d| d.0.node_count()).unwrap_or(0)
}

/// Copies the responses into `out` (length at least the subject count).
#[no_mangle]
pub unsafe extern "C" fn bnr_dataset_responses(data: *const BnrDataset, out: *mut f64, len: usize) -> BnrStatus {
    guard(|| {
        let d = deref(data, "dataset")?;
        out_slice(out, len, d.0.len(), "out")?.copy_from_slice(&d.0.responses);
        Ok(())
    })
}

/// Runs the sampler. On a failed sweep no handle is returned and the
/// status is `SweepFailure`.
#[no_mangle]
pub unsafe extern "C" fn bnr_fit(
    data: *const BnrDataset,
    options: *const BnrFitOptions,
    out: *mut *mut BnrFit,
) -> BnrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let d = deref(data, "dataset")?;
        let o = deref(options, "options")?;
        let opts = FitOptions {
            hyper: Hyperparameters::with_rank(o.rank),
            chain: ChainConfig {
                iterations: o.iterations,
                burn_in: o.burn_in,
                thin: o.thin,
                seed: o.seed,
                n_chains: o.chains,
                ..ChainConfig::default()
            },
            standardize: o.standardize != 0,
        };
        let result = fit(&d.0, &opts).map_err(|e| fail(e.error))?;
        let pooled = result.pooled().map_err(fail)?;
        let original = to_original_scale(&pooled, &result.stats).map_err(fail)?;
        let summary = summarize(&original).map_err(fail)?;
        *out = Box::into_raw(Box::new(BnrFit {
            result,
            pooled,
            summary,
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bnr_fit_free(f: *mut BnrFit) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Retained draws pooled over chains; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn bnr_fit_draws(f: *const BnrFit) -> usize {
    f.as_ref().map_or(0, |f| f.summary.draws)
}

#[no_mangle]
pub unsafe extern "C" fn bnr_fit_nodes(f: *const BnrFit) -> usize {
    f.as_ref().map_or(0, |f| f.summary.v)
}

/// Posterior probability that each node is active (`nodes` entries).
#[no_mangle]
pub unsafe extern "C" fn bnr_fit_node_probabilities(f: *const BnrFit, out: *mut f64, len: usize) -> BnrStatus {
    guard(|| {
        let f = deref(f, "fit")?;
        out_slice(out, len, f.summary.v, "out")?.copy_from_slice(&f.summary.node_prob);
        Ok(())
    })
}

/// Posterior mean edge coefficients `γ` on the original scale, one per edge
/// in upper-triangle order.
#[no_mangle]
pub unsafe extern "C" fn bnr_fit_gamma_mean(f: *const BnrFit, out: *mut f64, len: usize) -> BnrStatus {
    guard(|| {
        let f = deref(f, "fit")?;
        out_slice(out, len, f.summary.gamma_mean.len(), "out")?.copy_from_slice(&f.summary.gamma_mean);
        Ok(())
    })
}

/// Posterior pmf of the effective dimensionality, entries for 0..=rank.
#[no_mangle]
pub unsafe extern "C" fn bnr_fit_reff_pmf(f: *const BnrFit, out: *mut f64, len: usize) -> BnrStatus {
    guard(|| {
        let f = deref(f, "fit")?;
        out_slice(out, len, f.summary.reff_pmf.len(), "out")?.copy_from_slice(&f.summary.reff_pmf);
        Ok(())
    })
}

/// Posterior predictive mean and 95% interval for every subject of `data`
/// on the original response scale. Each output needs the subject count.
#[no_mangle]
pub unsafe extern "C" fn bnr_fit_predict(
    f: *const BnrFit,
    data: *const BnrDataset,
    seed: u64,
    point: *mut f64,
    low: *mut f64,
    high: *mut f64,
    len: usize,
) -> BnrStatus {
    guard(|| {
        let f = deref(f, "fit")?;
        let d = deref(data, "dataset")?;
        let m = d.0.len();
        let (point, low, high) = (
            out_slice(point, len, m, "point")?,
            out_slice(low, len, m, "low")?,
            out_slice(high, len, m, "high")?,
        );
        let pred = predict(
            &f.pooled,
            &d.0.networks,
            &f.result.stats,
            None,
            &mut RngStream::new(seed, 1 << 32),
        )
        .map_err(fail)?;
        point.copy_from_slice(&pred.point);
        low.copy_from_slice(&pred.interval_low);
        high.copy_from_slice(&pred.interval_high);
        Ok(())
    })
}

/// Writes the chain CSV files into `dir`, creating it if needed.
#[no_mangle]
pub unsafe extern "C" fn bnr_fit_write_chains(f: *const BnrFit, dir: *const c_char) -> BnrStatus {
    guard(|| {
        let f = deref(f, "fit")?;
        let dir = path(dir, "dir")?;
        std::fs::create_dir_all(dir).map_err(|e| {
            fail(Error::Io {
                path: dir.into(),
                source: e,
            })
        })?;
        write_chain_dir(dir, &f.result.chains).map_err(fail)
    })
}

/// Joint-distribution check of the sampler at its default size. A nonzero
/// `inject_fault` corrupts the τ² update. `passed` is set to 1 when every
/// |z| is below the threshold.
#[no_mangle]
pub unsafe extern "C" fn bnr_gir_test(
    seed: u64,
    sweeps: usize,
    inject_fault: u8,
    max_abs_z: *mut f64,
    passed: *mut u8,
) -> BnrStatus {
    guard(|| {
        if max_abs_z.is_null() || passed.is_null() {
            return Err(null("output"));
        }
        let mut config = GirConfig {
            seed,
            fault: if inject_fault != 0 {
                Fault::Tau2ShapeOffByOne
            } else {
                Fault::None
            },
            ..GirConfig::default()
        };
        if sweeps > 0 {
            config.sweeps = sweeps;
        }
        let report = run_getting_it_right(&config).map_err(fail)?;
        *max_abs_z = report.max_abs_z();
        *passed = report.passed() as u8;
        Ok(())
    })
}
