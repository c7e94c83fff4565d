//! Synthetic network-regression data: i.i.d. normal networks, three
//! schemes for the true coefficient matrix, and the response model.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::distributions as dist;
use crate::error::{Error, Result};
use crate::graph::{csv_reader, edge_count, edge_pairs, frobenius_inner, parse_err, Dataset, NetworkObservation};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Bilinear coefficients `w_k'w_l / 2` from spike-and-slab latent vectors.
    Sim1,
    /// Independent normal coefficients among active nodes.
    Sim2,
    /// Like `Sim2` with an extra per-edge spike.
    Sim3,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sim1" | "1" => Ok(Scheme::Sim1),
            "sim2" | "2" => Ok(Scheme::Sim2),
            "sim3" | "3" => Ok(Scheme::Sim3),
            other => Err(Error::InvalidParameter(format!("unknown scheme `{other}`"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Sim1 => "sim1",
            Scheme::Sim2 => "sim2",
            Scheme::Sim3 => "sim3",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub v: usize,
    pub n: usize,
    /// Held-out subjects generated alongside the training set.
    pub n_pred: usize,
    /// Latent dimension of the generating vectors; only `Sim1` uses it.
    pub r_gen: usize,
    /// Probability that a node is active (one minus the node sparsity).
    pub pi_node: f64,
    /// `Sim3`: probability that an edge between active nodes is nonzero.
    pub pi_edge: f64,
    pub w_mean: f64,
    pub w_sd: f64,
    pub mu0: f64,
    pub tau2_0: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Sim1,
            v: 20,
            n: 70,
            n_pred: 30,
            r_gen: 2,
            pi_node: 0.5,
            pi_edge: 1.0,
            w_mean: 0.8,
            w_sd: 1.0,
            mu0: 0.0,
            tau2_0: 1.0,
            seed: 0,
        }
    }
}

/// A tabulated simulation case: generator settings plus the rank used to fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimCase {
    pub scheme: Scheme,
    pub case: usize,
    pub r_gen: usize,
    pub fit_rank: usize,
    pub node_sparsity: f64,
    pub edge_sparsity: f64,
}

const SIM1_CASES: [(usize, usize, f64); 9] = [
    (2, 2, 0.5),
    (2, 3, 0.6),
    (2, 5, 0.3),
    (2, 5, 0.4),
    (3, 5, 0.5),
    (4, 5, 0.4),
    (2, 5, 0.5),
    (2, 4, 0.7),
    (3, 5, 0.7),
];

impl SimCase {
    /// Case `case` (1-based) of the given scheme.
    pub fn lookup(scheme: Scheme, case: usize) -> Result<SimCase> {
        let missing = || Error::InvalidParameter(format!("{scheme} has no case {case}"));
        let idx = case.checked_sub(1).ok_or_else(missing)?;
        match scheme {
            Scheme::Sim1 => {
                let &(r_gen, fit_rank, sparsity) = SIM1_CASES.get(idx).ok_or_else(missing)?;
                Ok(SimCase {
                    scheme,
                    case,
                    r_gen,
                    fit_rank,
                    node_sparsity: sparsity,
                    edge_sparsity: 0.0,
                })
            }
            Scheme::Sim2 | Scheme::Sim3 => {
                let sparsity = *[0.7, 0.2].get(idx).ok_or_else(missing)?;
                Ok(SimCase {
                    scheme,
                    case,
                    r_gen: 3,
                    fit_rank: 5,
                    node_sparsity: sparsity,
                    edge_sparsity: if scheme == Scheme::Sim3 { 0.5 } else { 0.0 },
                })
            }
        }
    }

    /// Generator config for this case with the remaining fields at their
    /// defaults.
    pub fn config(&self, seed: u64) -> SimConfig {
        SimConfig {
            scheme: self.scheme,
            r_gen: self.r_gen,
            pi_node: 1.0 - self.node_sparsity,
            pi_edge: 1.0 - self.edge_sparsity,
            seed,
            ..SimConfig::default()
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.v < 2 {
            return bad(format!("need at least 2 nodes, got {}", self.v));
        }
        if self.n == 0 {
            return bad("need at least one training subject".into());
        }
        if self.scheme == Scheme::Sim1 && self.r_gen == 0 {
            return bad("r_gen must be at least 1".into());
        }
        for (name, p) in [("pi_node", self.pi_node), ("pi_edge", self.pi_edge)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if !(self.w_sd >= 0.0) || !self.w_mean.is_finite() || !self.w_sd.is_finite() {
            return bad(format!(
                "bad coefficient distribution N({}, {}²)",
                self.w_mean, self.w_sd
            ));
        }
        if !(self.tau2_0 >= 0.0 && self.tau2_0.is_finite()) || !self.mu0.is_finite() {
            return bad(format!("bad noise settings mu0={}, tau2_0={}", self.mu0, self.tau2_0));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    /// Symmetric, zero diagonal.
    pub beta0: DMatrix<f64>,
    /// `2 β₀` on the upper triangle in edge order.
    pub gamma0: Vec<f64>,
    pub active_nodes0: Vec<bool>,
    /// `Sim1` latent vectors, `r_gen × V`.
    pub w: Option<DMatrix<f64>>,
}

impl GroundTruth {
    fn from_gamma(v: usize, gamma0: Vec<f64>, active_nodes0: Vec<bool>, w: Option<DMatrix<f64>>) -> Self {
        let mut beta0 = DMatrix::zeros(v, v);
        for (e, (k, l)) in edge_pairs(v).into_iter().enumerate() {
            beta0[(k, l)] = gamma0[e] / 2.0;
            beta0[(l, k)] = gamma0[e] / 2.0;
        }
        Self {
            beta0,
            gamma0,
            active_nodes0,
            w,
        }
    }

    pub fn node_count(&self) -> usize {
        self.active_nodes0.len()
    }
}

/// `n` networks with i.i.d. standard normal upper-triangular weights.
pub fn gen_predictors(v: usize, n: usize, rng: &mut RngStream) -> Vec<NetworkObservation> {
    let q = edge_count(v);
    (0..n)
        .map(|_| {
            let upper: Vec<f64> = (0..q).map(|_| dist::standard_normal(rng)).collect();
            NetworkObservation::from_upper(v, &upper).expect("finite weights")
        })
        .collect()
}

pub fn gen_sim1(config: &SimConfig, rng: &mut RngStream) -> Result<GroundTruth> {
    config.validate()?;
    let (v, r) = (config.v, config.r_gen);
    let mut w = DMatrix::zeros(r, v);
    let mut active = vec![false; v];
    for k in 0..v {
        if dist::bernoulli(config.pi_node, rng)? {
            for d in 0..r {
                w[(d, k)] = dist::normal(config.w_mean, config.w_sd, rng)?;
            }
            active[k] = w.column(k).iter().any(|&x| x != 0.0);
        }
    }
    let gamma0 = edge_pairs(v)
        .into_iter()
        .map(|(k, l)| w.column(k).dot(&w.column(l)))
        .collect();
    Ok(GroundTruth::from_gamma(v, gamma0, active, Some(w)))
}

fn independent_edges(config: &SimConfig, pi_edge: f64, rng: &mut RngStream) -> Result<GroundTruth> {
    config.validate()?;
    let v = config.v;
    let xi = (0..v)
        .map(|_| dist::bernoulli(config.pi_node, rng))
        .collect::<Result<Vec<_>>>()?;
    let mut gamma0 = Vec::with_capacity(edge_count(v));
    for (k, l) in edge_pairs(v) {
        let mut g = 0.0;
        if xi[k] && xi[l] && dist::bernoulli(pi_edge, rng)? {
            g = 2.0 * dist::normal(config.w_mean, config.w_sd, rng)?;
        }
        gamma0.push(g);
    }
    Ok(GroundTruth::from_gamma(v, gamma0, xi, None))
}

pub fn gen_sim2(config: &SimConfig, rng: &mut RngStream) -> Result<GroundTruth> {
    independent_edges(config, 1.0, rng)
}

pub fn gen_sim3(config: &SimConfig, rng: &mut RngStream) -> Result<GroundTruth> {
    independent_edges(config, config.pi_edge, rng)
}

pub fn gen_truth(config: &SimConfig, rng: &mut RngStream) -> Result<GroundTruth> {
    match config.scheme {
        Scheme::Sim1 => gen_sim1(config, rng),
        Scheme::Sim2 => gen_sim2(config, rng),
        Scheme::Sim3 => gen_sim3(config, rng),
    }
}

/// `y_i = μ₀ + ⟨A_i, B₀⟩_F + N(0, τ₀²)`.
pub fn gen_response(
    networks: &[NetworkObservation],
    truth: &GroundTruth,
    mu0: f64,
    tau2_0: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let sd = tau2_0.sqrt();
    networks
        .iter()
        .map(|a| {
            let signal = frobenius_inner(a, &truth.beta0)?;
            Ok(mu0 + signal + sd * dist::standard_normal(rng))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SimulatedData {
    pub train: Dataset,
    pub test: Dataset,
    pub truth: GroundTruth,
}

/// Generates truth, training and held-out data. Truth, predictors and
/// noise use separate streams of `config.seed`, so changing `n` leaves the
/// truth unchanged.
pub fn simulate(config: &SimConfig) -> Result<SimulatedData> {
    config.validate()?;
    let mut truth_rng = RngStream::new(config.seed, 0);
    let mut x_rng = RngStream::new(config.seed, 1);
    let mut noise_rng = RngStream::new(config.seed, 2);
    let truth = gen_truth(config, &mut truth_rng)?;
    let nets = gen_predictors(config.v, config.n + config.n_pred, &mut x_rng);
    let y = gen_response(&nets, &truth, config.mu0, config.tau2_0, &mut noise_rng)?;
    let make = |range: std::ops::Range<usize>, prefix: &str| -> Result<Dataset> {
        let mut d = Dataset::new(nets[range.clone()].to_vec(), y[range.clone()].to_vec())?;
        d.subject_ids = range
            .clone()
            .map(|i| format!("{prefix}{}", i - range.start + 1))
            .collect();
        Ok(d)
    };
    let train = make(0..config.n, "s")?;
    let test = if config.n_pred > 0 {
        make(config.n..config.n + config.n_pred, "p")?
    } else {
        Dataset {
            networks: Vec::new(),
            responses: Vec::new(),
            subject_ids: Vec::new(),
            node_labels: None,
        }
    };
    Ok(SimulatedData { train, test, truth })
}

/// Long format `kind,row,col,value`: one `gamma` row per edge (1-based
/// `row < col`) and one `node` row per node (`col` empty, value 0/1).
pub fn write_truth_csv(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let io = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["kind", "row", "col", "value"]).map_err(io)?;
    for (e, (k, l)) in edge_pairs(truth.node_count()).into_iter().enumerate() {
        w.write_record([
            "gamma".to_string(),
            (k + 1).to_string(),
            (l + 1).to_string(),
            truth.gamma0[e].to_string(),
        ])
        .map_err(io)?;
    }
    for (k, &a) in truth.active_nodes0.iter().enumerate() {
        w.write_record([
            "node".to_string(),
            (k + 1).to_string(),
            String::new(),
            (a as u8).to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_truth_csv(path: &Path) -> Result<GroundTruth> {
    let mut rdr = csv_reader(path)?;
    crate::graph::check_header(path, &mut rdr, &["kind", "row", "col", "value"])?;
    let mut gammas = Vec::new();
    let mut nodes = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(path, line, e.to_string()))?;
        if rec.len() != 4 {
            return Err(parse_err(path, line, "expected 4 fields"));
        }
        let row: usize = rec[1].parse().map_err(|_| parse_err(path, line, "bad row"))?;
        let value: f64 = rec[3].parse().map_err(|_| parse_err(path, line, "bad value"))?;
        match &rec[0] {
            "gamma" => {
                let col: usize = rec[2].parse().map_err(|_| parse_err(path, line, "bad col"))?;
                gammas.push(((row, col), value));
            }
            "node" => nodes.push((row, value != 0.0)),
            other => return Err(parse_err(path, line, format!("unknown kind `{other}`"))),
        }
    }
    nodes.sort_by_key(|&(k, _)| k);
    let v = nodes.len();
    if nodes.iter().enumerate().any(|(i, &(k, _))| k != i + 1) {
        return Err(Error::Validation(format!(
            "{}: node rows must cover 1..{v}",
            path.display()
        )));
    }
    let mut gamma0 = vec![f64::NAN; edge_count(v)];
    for ((k, l), value) in gammas {
        if !(1 <= k && k < l && l <= v) {
            return Err(Error::Validation(format!("{}: bad edge ({k},{l})", path.display())));
        }
        gamma0[crate::graph::edge_position(v, k - 1, l - 1)] = value;
    }
    if gamma0.iter().any(|g| g.is_nan()) {
        return Err(Error::Validation(format!("{}: missing edge rows", path.display())));
    }
    Ok(GroundTruth::from_gamma(
        v,
        gamma0,
        nodes.into_iter().map(|(_, a)| a).collect(),
        None,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(scheme: Scheme, pi_node: f64, pi_edge: f64) -> SimConfig {
        SimConfig {
            scheme,
            pi_node,
            pi_edge,
            ..SimConfig::default()
        }
    }

    fn check_consistency(t: &GroundTruth) {
        let v = t.node_count();
        for k in 0..v {
            assert_eq!(t.beta0[(k, k)], 0.0);
        }
        for (e, (k, l)) in edge_pairs(v).into_iter().enumerate() {
            assert_eq!(t.beta0[(k, l)], t.beta0[(l, k)]);
            assert_eq!(t.gamma0[e], 2.0 * t.beta0[(k, l)]);
        }
    }

    #[test]
    fn predictors_are_standard_normal_and_seeded() {
        let nets = gen_predictors(10, 500, &mut RngStream::new(1, 0));
        let all: Vec<f64> = nets
            .iter()
            .flat_map(|n| n.vectorize_upper().iter().copied().collect::<Vec<_>>())
            .collect();
        let m = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / all.len() as f64;
        assert!(m.abs() < 0.02, "{m}");
        assert!((var - 1.0).abs() < 0.03, "{var}");
        assert_eq!(nets, gen_predictors(10, 500, &mut RngStream::new(1, 0)));
    }

    #[test]
    fn sim1_all_spike_gives_zero_truth() {
        let t = gen_sim1(&cfg(Scheme::Sim1, 0.0, 1.0), &mut RngStream::new(2, 0)).unwrap();
        assert!(t.gamma0.iter().all(|&g| g == 0.0));
        assert!(t.active_nodes0.iter().all(|&a| !a));
    }

    #[test]
    fn sim1_is_bilinear_and_low_rank() {
        for seed in 0..20 {
            let c = SimConfig {
                r_gen: 3,
                ..cfg(Scheme::Sim1, 0.6, 1.0)
            };
            let t = gen_sim1(&c, &mut RngStream::new(seed, 0)).unwrap();
            check_consistency(&t);
            let w = t.w.as_ref().unwrap();
            let full = w.transpose() * w;
            for (e, (k, l)) in edge_pairs(c.v).into_iter().enumerate() {
                assert!((t.gamma0[e] - full[(k, l)]).abs() < 1e-12);
                if !t.active_nodes0[k] || !t.active_nodes0[l] {
                    assert_eq!(t.gamma0[e], 0.0);
                }
            }
            let sv = full.singular_values();
            let rank = sv.iter().filter(|&&s| s > 1e-9 * sv.max().max(1.0)).count();
            assert!(rank <= 3);
        }
    }

    #[test]
    fn sim2_extremes_and_mean() {
        let all = gen_sim2(&cfg(Scheme::Sim2, 1.0, 1.0), &mut RngStream::new(3, 0)).unwrap();
        assert!(all.gamma0.iter().all(|&g| g != 0.0));
        let none = gen_sim2(&cfg(Scheme::Sim2, 0.0, 1.0), &mut RngStream::new(3, 0)).unwrap();
        assert!(none.gamma0.iter().all(|&g| g == 0.0));
        let mut rng = RngStream::new(4, 0);
        let mut betas = Vec::new();
        for _ in 0..200 {
            let t = gen_sim2(&cfg(Scheme::Sim2, 0.5, 1.0), &mut rng).unwrap();
            check_consistency(&t);
            betas.extend(t.gamma0.iter().filter(|&&g| g != 0.0).map(|g| g / 2.0));
        }
        let m = betas.iter().sum::<f64>() / betas.len() as f64;
        let se = 1.0 / (betas.len() as f64).sqrt();
        assert!((m - 0.8).abs() < 4.0 * se, "{m}");
    }

    #[test]
    fn sim3_edge_sparsity() {
        let a = gen_sim3(&cfg(Scheme::Sim3, 0.5, 1.0), &mut RngStream::new(5, 0)).unwrap();
        let b = gen_sim2(&cfg(Scheme::Sim2, 0.5, 1.0), &mut RngStream::new(5, 0)).unwrap();
        assert_eq!(a, b);
        let z = gen_sim3(&cfg(Scheme::Sim3, 1.0, 0.0), &mut RngStream::new(5, 0)).unwrap();
        assert!(z.gamma0.iter().all(|&g| g == 0.0));

        let mut rng = RngStream::new(6, 0);
        let (mut zeros, mut eligible) = (0usize, 0usize);
        for _ in 0..100 {
            let t = gen_sim3(&cfg(Scheme::Sim3, 0.7, 0.5), &mut rng).unwrap();
            check_consistency(&t);
            for (e, (k, l)) in edge_pairs(20).into_iter().enumerate() {
                if t.active_nodes0[k] && t.active_nodes0[l] {
                    eligible += 1;
                    zeros += (t.gamma0[e] == 0.0) as usize;
                }
            }
        }
        let frac = zeros as f64 / eligible as f64;
        let se = (0.25 / eligible as f64).sqrt();
        assert!((frac - 0.5).abs() < 4.0 * se, "{frac}");
    }

    #[test]
    fn inactivity_frequency_matches_sparsity() {
        for scheme in [Scheme::Sim1, Scheme::Sim2, Scheme::Sim3] {
            let c = cfg(scheme, 0.3, 0.5);
            let mut rng = RngStream::new(7, 0);
            let mut inactive = 0usize;
            let reps = 1000;
            for _ in 0..reps {
                let t = gen_truth(&c, &mut rng).unwrap();
                inactive += t.active_nodes0.iter().filter(|&&a| !a).count();
            }
            let total = (reps * c.v) as f64;
            let frac = inactive as f64 / total;
            let se = (0.7 * 0.3 / total).sqrt();
            assert!((frac - 0.7).abs() < 3.0 * se, "{scheme}: {frac}");
        }
    }

    #[test]
    fn noiseless_null_response_is_constant() {
        let t = gen_sim1(&cfg(Scheme::Sim1, 0.0, 1.0), &mut RngStream::new(8, 0)).unwrap();
        let nets = gen_predictors(20, 10, &mut RngStream::new(8, 1));
        let y = gen_response(&nets, &t, 2.5, 0.0, &mut RngStream::new(8, 2)).unwrap();
        assert!(y.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn residual_variance_matches_noise() {
        let c = cfg(Scheme::Sim1, 0.5, 1.0);
        let t = gen_sim1(&c, &mut RngStream::new(9, 0)).unwrap();
        let nets = gen_predictors(20, 5000, &mut RngStream::new(9, 1));
        let y = gen_response(&nets, &t, 1.0, 2.0, &mut RngStream::new(9, 2)).unwrap();
        let again = gen_response(&nets, &t, 1.0, 2.0, &mut RngStream::new(9, 2)).unwrap();
        assert_eq!(y, again);
        let resid: Vec<f64> = nets
            .iter()
            .zip(&y)
            .map(|(a, y)| y - 1.0 - frobenius_inner(a, &t.beta0).unwrap())
            .collect();
        let m = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (resid.len() as f64 - 1.0);
        assert!((var - 2.0).abs() < 0.12, "{var}");
    }

    #[test]
    fn frobenius_signal_is_gamma_dot_upper() {
        let c = cfg(Scheme::Sim2, 0.5, 1.0);
        let t = gen_sim2(&c, &mut RngStream::new(10, 0)).unwrap();
        let net = gen_predictors(20, 1, &mut RngStream::new(10, 1)).remove(0);
        let x = net.vectorize_upper();
        let direct: f64 = x.iter().zip(&t.gamma0).map(|(a, g)| a * g).sum();
        assert!((frobenius_inner(&net, &t.beta0).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn simulate_splits_and_replays() {
        let c = SimCase::lookup(Scheme::Sim1, 1).unwrap().config(11);
        let a = simulate(&c).unwrap();
        assert_eq!(a.train.len(), 70);
        assert_eq!(a.test.len(), 30);
        assert_eq!(a.train.networks[0].vectorize_upper().len(), 190);
        let b = simulate(&c).unwrap();
        assert_eq!(a.train.responses, b.train.responses);
        assert_eq!(a.truth, b.truth);
        let smaller = simulate(&SimConfig { n: 10, ..c.clone() }).unwrap();
        assert_eq!(smaller.truth, a.truth);
        assert!(simulate(&SimConfig { n: 0, ..c }).is_err());
    }

    #[test]
    fn case_table_lookup() {
        let c7 = SimCase::lookup(Scheme::Sim1, 7).unwrap();
        assert_eq!((c7.r_gen, c7.fit_rank, c7.node_sparsity), (2, 5, 0.5));
        let s3 = SimCase::lookup(Scheme::Sim3, 1).unwrap();
        assert_eq!((s3.node_sparsity, s3.edge_sparsity), (0.7, 0.5));
        assert!((s3.config(0).pi_edge - 0.5).abs() < 1e-15);
        assert!(SimCase::lookup(Scheme::Sim2, 3).is_err());
        assert!(SimCase::lookup(Scheme::Sim1, 0).is_err());
    }

    #[test]
    fn truth_csv_round_trip() {
        let t = gen_sim1(&cfg(Scheme::Sim1, 0.5, 1.0), &mut RngStream::new(12, 0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("truth.csv");
        write_truth_csv(&p, &t).unwrap();
        let back = read_truth_csv(&p).unwrap();
        assert_eq!(back.gamma0, t.gamma0);
        assert_eq!(back.active_nodes0, t.active_nodes0);
        assert_eq!(back.beta0, t.beta0);
    }
}
