//! Run configuration: flat sectioned `key = value` files, CLI overrides,
//! and the fully resolved form written next to every run's outputs.
//!
//! ```text
//! [run]
//! seed = 7
//!
//! [simulate]
//! scheme = sim1
//! case = 1
//!
//! [model]
//! rank = 2
//!
//! [chain]
//! iterations = 50000
//! burn_in = 30000
//! thin = 10
//! ```

use std::path::{Path, PathBuf};

use ini::{EscapePolicy, Ini, WriteOption};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::{ChainConfig, Fault, GirConfig};
use crate::model::Hyperparameters;
use crate::simgen::{SimCase, SimConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DataConfig {
    pub edges: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    /// Node count when the edge list does not mention the last node.
    pub nodes: Option<usize>,
    pub standardize: bool,
    /// Also run k-fold cross-validation after the main fit.
    pub cv_folds: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PredictConfig {
    pub edges: Option<PathBuf>,
    pub responses: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GirSettings {
    pub v: usize,
    pub n: usize,
    pub rank: usize,
    pub prior_draws: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub batches: usize,
    pub fault: String,
}

impl Default for GirSettings {
    fn default() -> Self {
        let d = GirConfig::default();
        Self {
            v: d.v,
            n: d.n,
            rank: d.hyper.r,
            prior_draws: d.prior_draws,
            sweeps: d.sweeps,
            burn_in: d.burn_in,
            batches: d.batches,
            fault: "none".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub case: Option<usize>,
    pub sim: SimConfig,
    pub hyper: Hyperparameters,
    pub chain: ChainConfig,
    pub data: DataConfig,
    pub predict: PredictConfig,
    pub gir: GirSettings,
}

fn config_err(section: &str, key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{section}.{key}: {msg}"))
}

fn parse<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| config_err(section, key, format!("cannot parse `{value}`")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(config_err(section, key, format!("expected a boolean, found `{value}`"))),
    }
}

/// `c` for `c·I`, or rows separated by `;` with entries separated by `,`.
fn parse_scale(value: &str, r: usize) -> Result<DMatrix<f64>> {
    let v = value.trim();
    if let Ok(c) = v.parse::<f64>() {
        return Ok(DMatrix::identity(r, r) * c);
    }
    let rows: Vec<Vec<f64>> = v
        .split(';')
        .map(|row| row.split(',').map(|x| parse::<f64>("model", "scale", x)).collect())
        .collect::<Result<_>>()?;
    let n = rows.len();
    if rows.iter().any(|row| row.len() != n) {
        return Err(config_err("model", "scale", "matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn format_scale(m: &DMatrix<f64>) -> String {
    let r = m.nrows();
    let c = m[(0, 0)];
    if *m == DMatrix::identity(r, r) * c {
        return c.to_string();
    }
    (0..r)
        .map(|i| (0..r).map(|j| m[(i, j)].to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_fault(value: &str) -> Result<Fault> {
    match value.trim() {
        "none" => Ok(Fault::None),
        "tau2-shape" => Ok(Fault::Tau2ShapeOffByOne),
        other => Err(config_err(
            "gir",
            "fault",
            format!("unknown fault `{other}` (none, tau2-shape)"),
        )),
    }
}

/// Simulation keys applied ahead of all others, in this order.
pub const PRESET_KEYS: [&str; 2] = ["scheme", "case"];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Applies every key of an ini document. `simulate.scheme` and then a
    /// `simulate.case` preset go first so explicit values win over the preset.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::Config(e.to_string()))?;
        for key in PRESET_KEYS {
            if let Some(value) = ini.get_from(Some("simulate"), key) {
                self.set("simulate", key, value)?;
            }
        }
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("run");
            for (key, value) in props.iter() {
                if section == "simulate" && PRESET_KEYS.contains(&key) {
                    continue;
                }
                self.set(section, key, value)?;
            }
        }
        Ok(())
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let s = section;
        match (section, key) {
            ("run", "seed") => self.seed = parse(s, key, value)?,

            ("simulate", "case") => {
                let case: usize = parse(s, key, value)?;
                let preset = SimCase::lookup(self.sim.scheme, case)?;
                let seed = self.sim.seed;
                self.sim = SimConfig {
                    n: self.sim.n,
                    v: self.sim.v,
                    n_pred: self.sim.n_pred,
                    ..preset.config(seed)
                };
                self.case = Some(case);
                if self.hyper.r != preset.fit_rank {
                    self.hyper = Hyperparameters {
                        r: preset.fit_rank,
                        scale: DMatrix::identity(preset.fit_rank, preset.fit_rank),
                        ..self.hyper.clone()
                    };
                }
            }
            ("simulate", "scheme") => self.sim.scheme = parse(s, key, value)?,
            ("simulate", "v") => self.sim.v = parse(s, key, value)?,
            ("simulate", "n") => self.sim.n = parse(s, key, value)?,
            ("simulate", "n_pred") => self.sim.n_pred = parse(s, key, value)?,
            ("simulate", "r_gen") => self.sim.r_gen = parse(s, key, value)?,
            ("simulate", "pi_node") => self.sim.pi_node = parse(s, key, value)?,
            ("simulate", "pi_edge") => self.sim.pi_edge = parse(s, key, value)?,
            ("simulate", "sparsity") => self.sim.pi_node = 1.0 - parse::<f64>(s, key, value)?,
            ("simulate", "edge_sparsity") => self.sim.pi_edge = 1.0 - parse::<f64>(s, key, value)?,
            ("simulate", "w_mean") => self.sim.w_mean = parse(s, key, value)?,
            ("simulate", "w_sd") => self.sim.w_sd = parse(s, key, value)?,
            ("simulate", "mu0") => self.sim.mu0 = parse(s, key, value)?,
            ("simulate", "tau2_0") => self.sim.tau2_0 = parse(s, key, value)?,

            ("model", "rank") => {
                let r: usize = parse(s, key, value)?;
                if r != self.hyper.r {
                    self.hyper.r = r;
                    self.hyper.scale = DMatrix::identity(r, r);
                }
            }
            ("model", "scale") => self.hyper.scale = parse_scale(value, self.hyper.r)?,
            ("model", "nu") => self.hyper.nu = parse(s, key, value)?,
            ("model", "a_delta") => self.hyper.a_delta = parse(s, key, value)?,
            ("model", "b_delta") => self.hyper.b_delta = parse(s, key, value)?,
            ("model", "zeta") => self.hyper.zeta = parse(s, key, value)?,
            ("model", "iota") => self.hyper.iota = parse(s, key, value)?,
            ("model", "eta") => self.hyper.eta = parse(s, key, value)?,

            ("chain", "iterations") => self.chain.iterations = parse(s, key, value)?,
            ("chain", "burn_in") => self.chain.burn_in = parse(s, key, value)?,
            ("chain", "thin") => self.chain.thin = parse(s, key, value)?,
            ("chain", "chains") => self.chain.n_chains = parse(s, key, value)?,
            ("chain", "full_trace") => self.chain.record_full = parse_bool(s, key, value)?,
            ("chain", "progress") => self.chain.progress = parse_bool(s, key, value)?,

            ("data", "edges") => self.data.edges = Some(PathBuf::from(value.trim())),
            ("data", "responses") => self.data.responses = Some(PathBuf::from(value.trim())),
            ("data", "nodes") => self.data.nodes = Some(parse(s, key, value)?),
            ("data", "standardize") => self.data.standardize = parse_bool(s, key, value)?,
            ("data", "cv_folds") => self.data.cv_folds = Some(parse(s, key, value)?),

            ("predict", "edges") => self.predict.edges = Some(PathBuf::from(value.trim())),
            ("predict", "responses") => self.predict.responses = Some(PathBuf::from(value.trim())),

            ("gir", "v") => self.gir.v = parse(s, key, value)?,
            ("gir", "n") => self.gir.n = parse(s, key, value)?,
            ("gir", "rank") => self.gir.rank = parse(s, key, value)?,
            ("gir", "prior_draws") => self.gir.prior_draws = parse(s, key, value)?,
            ("gir", "sweeps") => self.gir.sweeps = parse(s, key, value)?,
            ("gir", "burn_in") => self.gir.burn_in = parse(s, key, value)?,
            ("gir", "batches") => self.gir.batches = parse(s, key, value)?,
            ("gir", "fault") => {
                parse_fault(value)?;
                self.gir.fault = value.trim().to_string();
            }

            _ => return Err(Error::Config(format!("unknown key `{section}.{key}`"))),
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            ..self.sim.clone()
        }
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            seed: self.seed,
            ..self.chain.clone()
        }
    }

    pub fn gir_config(&self) -> Result<GirConfig> {
        let mut cfg = GirConfig {
            v: self.gir.v,
            n: self.gir.n,
            prior_draws: self.gir.prior_draws,
            sweeps: self.gir.sweeps,
            burn_in: self.gir.burn_in,
            batches: self.gir.batches,
            seed: self.seed,
            fault: parse_fault(&self.gir.fault)?,
            ..GirConfig::default()
        };
        let r = self.gir.rank;
        if r != cfg.hyper.r {
            cfg.hyper.r = r;
            cfg.hyper.scale = DMatrix::identity(r, r) * (cfg.hyper.nu - r as f64 - 1.0);
        }
        Ok(cfg)
    }

    /// Every setting, defaults included, in the file format.
    pub fn to_ini_string(&self) -> String {
        let mut ini = Ini::new();
        ini.with_section(Some("run")).set("seed", self.seed.to_string());
        {
            let s = &self.sim;
            let mut sec = ini.with_section(Some("simulate"));
            sec.set("scheme", s.scheme.to_string())
                .set("v", s.v.to_string())
                .set("n", s.n.to_string())
                .set("n_pred", s.n_pred.to_string())
                .set("r_gen", s.r_gen.to_string())
                .set("pi_node", s.pi_node.to_string())
                .set("pi_edge", s.pi_edge.to_string())
                .set("w_mean", s.w_mean.to_string())
                .set("w_sd", s.w_sd.to_string())
                .set("mu0", s.mu0.to_string())
                .set("tau2_0", s.tau2_0.to_string());
        }
        {
            let h = &self.hyper;
            ini.with_section(Some("model"))
                .set("rank", h.r.to_string())
                .set("scale", format_scale(&h.scale))
                .set("nu", h.nu.to_string())
                .set("a_delta", h.a_delta.to_string())
                .set("b_delta", h.b_delta.to_string())
                .set("zeta", h.zeta.to_string())
                .set("iota", h.iota.to_string())
                .set("eta", h.eta.to_string());
        }
        {
            let c = &self.chain;
            ini.with_section(Some("chain"))
                .set("iterations", c.iterations.to_string())
                .set("burn_in", c.burn_in.to_string())
                .set("thin", c.thin.to_string())
                .set("chains", c.n_chains.to_string())
                .set("full_trace", c.record_full.to_string());
        }
        {
            let d = &self.data;
            let mut sec = ini.with_section(Some("data"));
            if let Some(p) = &d.edges {
                sec.set("edges", p.display().to_string());
            }
            if let Some(p) = &d.responses {
                sec.set("responses", p.display().to_string());
            }
            if let Some(n) = d.nodes {
                sec.set("nodes", n.to_string());
            }
            sec.set("standardize", d.standardize.to_string());
            if let Some(k) = d.cv_folds {
                sec.set("cv_folds", k.to_string());
            }
        }
        if self.predict.edges.is_some() || self.predict.responses.is_some() {
            let mut sec = ini.with_section(Some("predict"));
            if let Some(p) = &self.predict.edges {
                sec.set("edges", p.display().to_string());
            }
            if let Some(p) = &self.predict.responses {
                sec.set("responses", p.display().to_string());
            }
        }
        {
            let g = &self.gir;
            ini.with_section(Some("gir"))
                .set("v", g.v.to_string())
                .set("n", g.n.to_string())
                .set("rank", g.rank.to_string())
                .set("prior_draws", g.prior_draws.to_string())
                .set("sweeps", g.sweeps.to_string())
                .set("burn_in", g.burn_in.to_string())
                .set("batches", g.batches.to_string())
                .set("fault", g.fault.clone());
        }
        let mut buf = Vec::new();
        ini.write_to_opt(
            &mut buf,
            WriteOption {
                escape_policy: EscapePolicy::Nothing,
                ..Default::default()
            },
        )
        .expect("writing to memory");
        String::from_utf8(buf).expect("ini output is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::Scheme;

    #[test]
    fn defaults_match_the_documented_values() {
        let c = RunConfig::default();
        assert_eq!(c.chain.iterations, 50_000);
        assert_eq!(c.chain.burn_in, 30_000);
        assert_eq!(c.chain.thin, 10);
        assert_eq!(c.hyper.nu, 10.0);
        assert_eq!(c.hyper.scale, DMatrix::identity(5, 5));
        assert_eq!((c.sim.v, c.sim.n, c.sim.n_pred), (20, 70, 30));
    }

    #[test]
    fn case_preset_then_explicit_keys() {
        let mut c = RunConfig::default();
        c.apply_str("[simulate]\nn = 40\ncase = 2\nr_gen = 4\n").unwrap();
        assert_eq!(c.sim.r_gen, 4);
        assert_eq!(c.hyper.r, 3);
        assert!((c.sim.pi_node - 0.4).abs() < 1e-15);
        assert_eq!(c.sim.n, 40);
    }

    #[test]
    fn sim2_case_uses_scheme_from_file() {
        let mut c = RunConfig::default();
        c.apply_str("[simulate]\nscheme = sim2\ncase = 1\n").unwrap();
        assert_eq!(c.sim.scheme, Scheme::Sim2);
        assert!((c.sim.pi_node - 0.3).abs() < 1e-12);
        assert_eq!(c.hyper.r, 5);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_errors() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply_str("[chain]\nitertions = 5\n"), Err(Error::Config(_))));
        assert!(matches!(c.apply_str("[chain]\nthin = many\n"), Err(Error::Config(_))));
        assert!(c.apply_str("[gir]\nfault = bogus\n").is_err());
    }

    #[test]
    fn scale_forms() {
        assert_eq!(parse_scale("2", 3).unwrap(), DMatrix::identity(3, 3) * 2.0);
        let m = parse_scale("1,0.5;0.5,2", 2).unwrap();
        assert_eq!(m[(0, 1)], 0.5);
        assert_eq!(format_scale(&m), "1,0.5;0.5,2");
        assert!(parse_scale("1,2;3", 2).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut c = RunConfig::default();
        c.apply_str(
            "[run]\nseed = 9\n[simulate]\nscheme = sim3\ncase = 1\n[model]\nscale = 1,0.1,0,0,0;0.1,1,0,0,0;0,0,1,0,0;0,0,0,1,0;0,0,0,0,1\n\
             [data]\nedges = some dir/e.csv\nstandardize = yes\n[gir]\nfault = tau2-shape\n",
        )
        .unwrap();
        let text = c.to_ini_string();
        let mut back = RunConfig::default();
        back.apply_str(&text).unwrap();
        assert_eq!(back.to_ini_string(), text);
        assert_eq!(back.sim, c.sim);
        assert_eq!(back.hyper, c.hyper);
        assert_eq!(back.data, c.data);
        assert_eq!(back.gir, c.gir);
        assert_eq!(back.seed, 9);
    }
}
