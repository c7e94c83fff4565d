use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{sweep, ModelData};
use crate::error::{Error, Result};
use crate::graph::{csv_reader, parse_err};
use crate::model::{edge_labels, init_state, Hyperparameters, LatentState};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_chains: usize,
    /// Also keep traces of `u`, `M`, `s` and `π`.
    pub record_full: bool,
    /// Print a progress line to stderr every tenth of the run.
    pub progress: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 50_000,
            burn_in: 30_000,
            thin: 10,
            seed: 0,
            n_chains: 1,
            record_full: false,
            progress: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.n_chains == 0 {
            return Err(Error::InvalidParameter("need at least one chain".into()));
        }
        Ok(())
    }

    /// Number of draws a complete chain keeps.
    pub fn retained(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in) / self.thin.max(1)
    }

    /// Sweeps are numbered from 1; sweep `t` is kept when it is past the
    /// burn-in and a multiple of `thin` after it.
    pub fn keeps(&self, t: usize) -> bool {
        t > self.burn_in && (t - self.burn_in).is_multiple_of(self.thin)
    }
}

/// Traces of the remaining state blocks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FullTraces {
    /// `u` flattened column by column (node-major).
    pub u: Vec<Vec<f64>>,
    /// `M` flattened column by column.
    pub m: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
}

/// Retained draws of one chain.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainSamples {
    pub chain_id: usize,
    pub v: usize,
    pub r: usize,
    pub iters: Vec<usize>,
    pub gamma: Vec<Vec<f64>>,
    pub xi: Vec<Vec<bool>>,
    pub lambda: Vec<Vec<bool>>,
    pub mu: Vec<f64>,
    pub tau2: Vec<f64>,
    pub delta: Vec<f64>,
    pub theta2: Vec<f64>,
    pub reff: Vec<usize>,
    pub full: Option<FullTraces>,
}

impl ChainSamples {
    pub fn new(chain_id: usize, v: usize, r: usize, record_full: bool) -> Self {
        Self {
            chain_id,
            v,
            r,
            full: record_full.then(FullTraces::default),
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.iters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iters.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.v * self.v.saturating_sub(1) / 2
    }

    pub fn push(&mut self, iter: usize, state: &LatentState) {
        self.iters.push(iter);
        self.gamma.push(state.gamma.iter().copied().collect());
        self.xi.push(state.xi.clone());
        self.lambda.push(state.lambda.clone());
        self.mu.push(state.mu);
        self.tau2.push(state.tau2);
        self.delta.push(state.delta);
        self.theta2.push(state.theta2);
        self.reff.push(state.r_eff());
        if let Some(full) = &mut self.full {
            full.u.push(state.u.iter().copied().collect());
            full.m.push(state.m.iter().copied().collect());
            full.s.push(state.s.iter().copied().collect());
            full.pi.push(state.pi.clone());
        }
    }

    /// Pools chains into one sample set, in chain order.
    pub fn pool(chains: &[ChainSamples]) -> Result<ChainSamples> {
        let first = chains
            .first()
            .ok_or_else(|| Error::InvalidParameter("no chains to pool".into()))?;
        let mut out = ChainSamples::new(first.chain_id, first.v, first.r, false);
        for c in chains {
            if c.v != first.v || c.r != first.r {
                return Err(Error::InvalidParameter("chains disagree on dimensions".into()));
            }
            out.iters.extend(&c.iters);
            out.gamma.extend(c.gamma.iter().cloned());
            out.xi.extend(c.xi.iter().cloned());
            out.lambda.extend(c.lambda.iter().cloned());
            out.mu.extend(&c.mu);
            out.tau2.extend(&c.tau2);
            out.delta.extend(&c.delta);
            out.theta2.extend(&c.theta2);
            out.reff.extend(&c.reff);
        }
        Ok(out)
    }

    /// Trace of one edge coefficient.
    pub fn gamma_trace(&self, e: usize) -> Vec<f64> {
        self.gamma.iter().map(|g| g[e]).collect()
    }
}

/// A chain that stopped early. `partial` holds the draws retained before
/// the failing sweep.
#[derive(Debug)]
pub struct ChainError {
    pub chain_id: usize,
    pub partial: ChainSamples,
    pub source: Error,
}

impl fmt::Display for ChainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "chain {} failed after {} retained draws: {}",
            self.chain_id,
            self.partial.len(),
            self.source
        )
    }
}

impl std::error::Error for ChainError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl From<ChainError> for Error {
    fn from(e: ChainError) -> Self {
        e.source
    }
}

/// Runs one chain from the default starting state. The chain's random
/// stream is `(config.seed, chain_id)`.
pub fn run_chain(
    data: &ModelData,
    hyper: &Hyperparameters,
    config: &ChainConfig,
    chain_id: usize,
) -> std::result::Result<ChainSamples, ChainError> {
    let mut rng = RngStream::new(config.seed, chain_id as u64);
    let fail = |source| ChainError {
        chain_id,
        partial: ChainSamples::new(chain_id, data.design().v, hyper.r, config.record_full),
        source,
    };
    hyper.validate().map_err(fail)?;
    config.validate().map_err(fail)?;
    let state = init_state(hyper, data.design(), &mut rng).map_err(fail)?;
    run_chain_from(data, hyper, config, chain_id, state, &mut rng)
}

/// Runs one chain from a given state with a caller-supplied stream.
pub fn run_chain_from(
    data: &ModelData,
    hyper: &Hyperparameters,
    config: &ChainConfig,
    chain_id: usize,
    mut state: LatentState,
    rng: &mut RngStream,
) -> std::result::Result<ChainSamples, ChainError> {
    let mut samples = ChainSamples::new(chain_id, state.node_count(), state.rank(), config.record_full);
    if let Err(source) = config.validate() {
        return Err(ChainError {
            chain_id,
            partial: samples,
            source,
        });
    }
    let tick = (config.iterations / 10).max(1);
    for t in 1..=config.iterations {
        if let Err(e) = sweep(&mut state, data, hyper, rng) {
            return Err(ChainError {
                chain_id,
                partial: samples,
                source: Error::Sweep {
                    sweep: t,
                    source: Box::new(e),
                },
            });
        }
        if config.keeps(t) {
            samples.push(t, &state);
        }
        if config.progress && t % tick == 0 {
            eprintln!(
                "chain {chain_id}: sweep {t}/{} tau2={:.4} r_eff={} active={}",
                config.iterations,
                state.tau2,
                state.r_eff(),
                state.active_nodes()
            );
        }
    }
    Ok(samples)
}

/// Runs `config.n_chains` chains on separate threads. Returns the first
/// failure by chain id, if any.
pub fn run_chains(
    data: &ModelData,
    hyper: &Hyperparameters,
    config: &ChainConfig,
) -> std::result::Result<Vec<ChainSamples>, ChainError> {
    run_chains_each(data, hyper, config).into_iter().collect()
}

/// Like [`run_chains`] but reports every chain's outcome.
pub fn run_chains_each(
    data: &ModelData,
    hyper: &Hyperparameters,
    config: &ChainConfig,
) -> Vec<std::result::Result<ChainSamples, ChainError>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.n_chains)
            .map(|c| scope.spawn(move || run_chain(data, hyper, config, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    })
}

// ---------------------------------------------------------------------------
// persistence

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))
}

fn write_table<F>(dir: &Path, name: &str, columns: &[String], chains: &[ChainSamples], row: F) -> Result<()>
where
    F: Fn(&ChainSamples, usize) -> Vec<String>,
{
    let path = dir.join(name);
    let mut w = writer(&path)?;
    let io = |e: csv::Error| Error::io(&path, e.into());
    let mut header = vec!["chain".to_string(), "iter".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for c in chains {
        for i in 0..c.len() {
            let mut rec = vec![c.chain_id.to_string(), c.iters[i].to_string()];
            rec.extend(row(c, i));
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

fn bits(v: &[bool]) -> Vec<String> {
    v.iter().map(|&b| (b as u8).to_string()).collect()
}

fn floats(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

/// Writes `gamma.csv`, `xi.csv`, `lambda.csv` and `scalars.csv` (plus
/// `u.csv`, `m.csv`, `s.csv`, `pi.csv` for full traces), one row per
/// retained draw keyed by `chain,iter`.
pub fn write_chain_dir(dir: &Path, chains: &[ChainSamples]) -> Result<()> {
    let first = chains
        .first()
        .ok_or_else(|| Error::InvalidParameter("no chains to write".into()))?;
    let (v, r) = (first.v, first.r);
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let gamma_cols: Vec<String> = edge_labels(v).into_iter().map(|l| format!("gamma_{l}")).collect();
    write_table(dir, "gamma.csv", &gamma_cols, chains, |c, i| floats(&c.gamma[i]))?;
    let xi_cols: Vec<String> = (1..=v).map(|k| format!("xi_{k}")).collect();
    write_table(dir, "xi.csv", &xi_cols, chains, |c, i| bits(&c.xi[i]))?;
    let lambda_cols: Vec<String> = (1..=r).map(|k| format!("lambda_{k}")).collect();
    write_table(dir, "lambda.csv", &lambda_cols, chains, |c, i| bits(&c.lambda[i]))?;
    let scalar_cols: Vec<String> = ["mu", "tau2", "delta", "theta2", "r_eff"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_table(dir, "scalars.csv", &scalar_cols, chains, |c, i| {
        vec![
            c.mu[i].to_string(),
            c.tau2[i].to_string(),
            c.delta[i].to_string(),
            c.theta2[i].to_string(),
            c.reff[i].to_string(),
        ]
    })?;
    if chains.iter().all(|c| c.full.is_some()) {
        let u_cols: Vec<String> = (1..=v)
            .flat_map(|k| (1..=r).map(move |d| format!("u_{k}_{d}")))
            .collect();
        write_table(dir, "u.csv", &u_cols, chains, |c, i| {
            floats(&c.full.as_ref().unwrap().u[i])
        })?;
        let m_cols: Vec<String> = (1..=r)
            .flat_map(|b| (1..=r).map(move |a| format!("m_{a}_{b}")))
            .collect();
        write_table(dir, "m.csv", &m_cols, chains, |c, i| {
            floats(&c.full.as_ref().unwrap().m[i])
        })?;
        let s_cols: Vec<String> = edge_labels(v).into_iter().map(|l| format!("s_{l}")).collect();
        write_table(dir, "s.csv", &s_cols, chains, |c, i| {
            floats(&c.full.as_ref().unwrap().s[i])
        })?;
        let pi_cols: Vec<String> = (1..=r).map(|k| format!("pi_{k}")).collect();
        write_table(dir, "pi.csv", &pi_cols, chains, |c, i| {
            floats(&c.full.as_ref().unwrap().pi[i])
        })?;
    }
    Ok(())
}

struct Table {
    columns: Vec<String>,
    /// `(chain, iter, values)`
    rows: Vec<(usize, usize, Vec<String>)>,
}

fn read_table(dir: &Path, name: &str) -> Result<Table> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::MissingBlock(name.trim_end_matches(".csv").to_string()));
    }
    let mut rdr = csv_reader(&path)?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(&path, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.len() < 2 || headers[0] != "chain" || headers[1] != "iter" {
        return Err(parse_err(&path, 1, "header must start with `chain,iter`"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(&path, line, e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(parse_err(
                &path,
                line,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        let chain = rec[0].parse().map_err(|_| parse_err(&path, line, "bad chain id"))?;
        let iter = rec[1].parse().map_err(|_| parse_err(&path, line, "bad iteration"))?;
        rows.push((chain, iter, rec.iter().skip(2).map(str::to_string).collect()));
    }
    Ok(Table {
        columns: headers[2..].to_vec(),
        rows,
    })
}

fn parse_floats(dir: &Path, name: &str, line: usize, vals: &[String]) -> Result<Vec<f64>> {
    vals.iter()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| parse_err(&dir.join(name), line, format!("bad number `{s}`")))
        })
        .collect()
}

fn parse_bits(dir: &Path, name: &str, line: usize, vals: &[String]) -> Result<Vec<bool>> {
    vals.iter()
        .map(|s| match s.as_str() {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(parse_err(
                &dir.join(name),
                line,
                format!("expected 0 or 1, found `{s}`"),
            )),
        })
        .collect()
}

/// Reads chains written by [`write_chain_dir`]. Optional full-trace files
/// are loaded when all four are present.
pub fn read_chain_dir(dir: &Path) -> Result<Vec<ChainSamples>> {
    let gamma = read_table(dir, "gamma.csv")?;
    let xi = read_table(dir, "xi.csv")?;
    let lambda = read_table(dir, "lambda.csv")?;
    let scalars = read_table(dir, "scalars.csv")?;
    let v = xi.columns.len();
    let r = lambda.columns.len();
    if gamma.columns.len() != v * v.saturating_sub(1) / 2 {
        return Err(Error::Validation(format!(
            "gamma.csv has {} columns but xi.csv implies {v} nodes",
            gamma.columns.len()
        )));
    }
    if scalars.columns != ["mu", "tau2", "delta", "theta2", "r_eff"] {
        return Err(Error::Validation("scalars.csv has unexpected columns".into()));
    }
    let n = gamma.rows.len();
    for (name, t) in [("xi.csv", &xi), ("lambda.csv", &lambda), ("scalars.csv", &scalars)] {
        if t.rows.len() != n {
            return Err(Error::Validation(format!(
                "{name} has {} rows, gamma.csv has {n}",
                t.rows.len()
            )));
        }
    }
    let full_names = ["u.csv", "m.csv", "s.csv", "pi.csv"];
    let full = if full_names.iter().all(|f| dir.join(f).exists()) {
        let tables = full_names
            .iter()
            .map(|f| read_table(dir, f))
            .collect::<Result<Vec<_>>>()?;
        if tables.iter().any(|t| t.rows.len() != n) {
            return Err(Error::Validation("full trace files disagree on row count".into()));
        }
        Some(tables)
    } else {
        None
    };

    let mut chains: Vec<ChainSamples> = Vec::new();
    for i in 0..n {
        let line = i + 2;
        let (chain, iter, g) = &gamma.rows[i];
        for (name, t) in [("xi.csv", &xi), ("lambda.csv", &lambda), ("scalars.csv", &scalars)] {
            if (t.rows[i].0, t.rows[i].1) != (*chain, *iter) {
                return Err(parse_err(
                    &dir.join(name),
                    line,
                    "chain/iter keys do not match gamma.csv",
                ));
            }
        }
        if chains.last().map(|c| c.chain_id) != Some(*chain) {
            chains.push(ChainSamples::new(*chain, v, r, full.is_some()));
        }
        let c = chains.last_mut().unwrap();
        c.iters.push(*iter);
        c.gamma.push(parse_floats(dir, "gamma.csv", line, g)?);
        c.xi.push(parse_bits(dir, "xi.csv", line, &xi.rows[i].2)?);
        c.lambda.push(parse_bits(dir, "lambda.csv", line, &lambda.rows[i].2)?);
        let sc = parse_floats(dir, "scalars.csv", line, &scalars.rows[i].2)?;
        c.mu.push(sc[0]);
        c.tau2.push(sc[1]);
        c.delta.push(sc[2]);
        c.theta2.push(sc[3]);
        c.reff.push(sc[4] as usize);
        if let (Some(tables), Some(f)) = (&full, &mut c.full) {
            f.u.push(parse_floats(dir, "u.csv", line, &tables[0].rows[i].2)?);
            f.m.push(parse_floats(dir, "m.csv", line, &tables[1].rows[i].2)?);
            f.s.push(parse_floats(dir, "s.csv", line, &tables[2].rows[i].2)?);
            f.pi.push(parse_floats(dir, "pi.csv", line, &tables[3].rows[i].2)?);
        }
    }
    Ok(chains)
}
