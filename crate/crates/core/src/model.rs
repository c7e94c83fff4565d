//! Prior hierarchy: hyperparameters, the latent state of one chain, and the
//! algebra shared by the sampler (the latent mean `W` and the log joint).

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::distributions::{
    self as dist, ln_beta_pdf, ln_gamma_pdf, ln_inverse_gamma_pdf, ln_inverse_wishart_pdf, ln_mvn_chol, ln_normal,
};
use crate::error::{Error, Result};
use crate::graph::{edge_count, edge_pairs, DesignMatrix};
use crate::rng::RngStream;

/// Fixed prior constants.
///
/// `tau2_prior` and `mu_prior` default to `None`, which is the improper
/// `p(mu, tau2) ∝ 1/tau2`. Proper priors exist for joint-distribution
/// validation, where the prior must be sampleable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Maximum latent dimension.
    pub r: usize,
    /// Inverse-Wishart scale `S` (R × R, SPD).
    pub scale: DMatrix<f64>,
    pub nu: f64,
    pub a_delta: f64,
    pub b_delta: f64,
    /// Gamma shape for θ².
    pub zeta: f64,
    /// Gamma rate for θ².
    pub iota: f64,
    /// Shrinkage exponent on the latent dimensions, `pi_r ~ Beta(1, r^eta)`.
    pub eta: f64,
    /// Inverse-gamma (shape, scale) for τ².
    pub tau2_prior: Option<(f64, f64)>,
    /// Normal (mean, variance) for μ.
    pub mu_prior: Option<(f64, f64)>,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self::with_rank(5)
    }
}

impl Hyperparameters {
    /// Defaults with `S = I_r`.
    pub fn with_rank(r: usize) -> Self {
        Self {
            r,
            scale: DMatrix::identity(r, r),
            nu: 10.0,
            a_delta: 1.0,
            b_delta: 1.0,
            zeta: 1.0,
            iota: 1.0,
            eta: 2.0,
            tau2_prior: None,
            mu_prior: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.r == 0 {
            return bad("R must be at least 1".into());
        }
        if self.scale.shape() != (self.r, self.r) {
            return bad(format!("S is {:?}, expected {}x{}", self.scale.shape(), self.r, self.r));
        }
        if (&self.scale - self.scale.transpose()).amax() > 1e-12 * self.scale.amax().max(1.0)
            || Cholesky::new(self.scale.clone()).is_none()
        {
            return bad("S must be symmetric positive definite".into());
        }
        if !(self.nu > self.r as f64 - 1.0) {
            return bad(format!("nu = {} must exceed R - 1", self.nu));
        }
        if !(self.eta > 1.0) {
            return bad(format!("eta = {} must exceed 1", self.eta));
        }
        for (name, v) in [
            ("a_delta", self.a_delta),
            ("b_delta", self.b_delta),
            ("zeta", self.zeta),
            ("iota", self.iota),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if let Some((a, b)) = self.tau2_prior {
            if !(a > 0.0 && b > 0.0) {
                return bad(format!("tau2 prior IG({a}, {b}) must have positive parameters"));
            }
        }
        if let Some((_, v)) = self.mu_prior {
            if !(v > 0.0) {
                return bad(format!("mu prior variance {v} must be positive"));
            }
        }
        Ok(())
    }

    /// Second Beta parameter of the prior on `pi_r`, with `r` 0-based.
    pub fn pi_prior_b(&self, r: usize) -> f64 {
        ((r + 1) as f64).powf(self.eta)
    }
}

/// One full MCMC state.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentState {
    pub mu: f64,
    pub tau2: f64,
    /// Edge coefficients `γ_kl = 2 β_kl` in edge order.
    pub gamma: DVector<f64>,
    /// R × V; column k is the latent vector of node k.
    pub u: DMatrix<f64>,
    pub xi: Vec<bool>,
    pub lambda: Vec<bool>,
    pub pi: Vec<f64>,
    pub delta: f64,
    pub theta2: f64,
    /// Local scales `s_kl` in edge order.
    pub s: DVector<f64>,
    pub m: DMatrix<f64>,
}

impl LatentState {
    pub fn node_count(&self) -> usize {
        self.u.ncols()
    }

    pub fn rank(&self) -> usize {
        self.u.nrows()
    }

    pub fn r_eff(&self) -> usize {
        self.lambda.iter().filter(|&&l| l).count()
    }

    pub fn active_nodes(&self) -> usize {
        self.xi.iter().filter(|&&x| x).count()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        let v = self.node_count();
        let r = self.rank();
        let q = edge_count(v);
        if self.gamma.len() != q || self.s.len() != q {
            return bad(format!("gamma/s must have length {q}"));
        }
        if self.xi.len() != v {
            return bad(format!("xi has length {}, expected {v}", self.xi.len()));
        }
        if self.lambda.len() != r || self.pi.len() != r || self.m.shape() != (r, r) {
            return bad(format!("lambda/pi/M must match R = {r}"));
        }
        for k in 0..v {
            let zero = self.u.column(k).iter().all(|&x| x == 0.0);
            if self.xi[k] == zero {
                return bad(format!(
                    "xi[{k}] = {} but u_{k} is {}zero",
                    self.xi[k],
                    if zero { "" } else { "non" }
                ));
            }
        }
        if !(self.tau2 > 0.0 && self.tau2.is_finite()) {
            return bad(format!("tau2 = {} must be positive", self.tau2));
        }
        if !(self.theta2 > 0.0 && self.theta2.is_finite()) {
            return bad(format!("theta2 = {} must be positive", self.theta2));
        }
        if let Some(s) = self.s.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return bad(format!("local scale {s} must be positive"));
        }
        if let Some(p) = self.pi.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return bad(format!("pi entry {p} outside (0, 1)"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} outside (0, 1)", self.delta));
        }
        if !self.mu.is_finite() || self.gamma.iter().any(|g| !g.is_finite()) || self.u.iter().any(|g| !g.is_finite()) {
            return bad("non-finite mu, gamma or U".into());
        }
        if Cholesky::new(self.m.clone()).is_none() {
            return bad("M is not positive definite".into());
        }
        Ok(())
    }
}

/// Latent mean of each edge: `W[(k,l)] = u_k' Λ u_l`, in edge order.
pub fn compute_w(u: &DMatrix<f64>, lambda: &[bool]) -> DVector<f64> {
    let v = u.ncols();
    assert_eq!(u.nrows(), lambda.len(), "U rows must match lambda length");
    let mut w = DVector::zeros(edge_count(v));
    for (r, _) in lambda.iter().enumerate().filter(|(_, &on)| on) {
        let row = u.row(r);
        let mut e = 0;
        for k in 0..v {
            let uk = row[k];
            for l in (k + 1)..v {
                w[e] += uk * row[l];
                e += 1;
            }
        }
    }
    w
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivedQuantities {
    pub w: DVector<f64>,
    /// Diagonal of `D`, the local scales in their matrix role.
    pub d: DVector<f64>,
    pub r_eff: usize,
}

impl DerivedQuantities {
    pub fn from_state(state: &LatentState) -> Self {
        Self {
            w: compute_w(&state.u, &state.lambda),
            d: state.s.clone(),
            r_eff: state.r_eff(),
        }
    }
}

/// Residual sum of squares `‖y − μ1 − Xγ‖²`.
pub fn residual_sum_squares(design: &DesignMatrix, mu: f64, gamma: &DVector<f64>) -> f64 {
    if design.n() == 0 {
        return 0.0;
    }
    let fitted = &design.x * gamma;
    design
        .y
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| (y - mu - f).powi(2))
        .sum()
}

/// `Σ (γ − W)² / s`.
pub fn weighted_deviation(gamma: &DVector<f64>, w: &DVector<f64>, s: &DVector<f64>) -> f64 {
    gamma
        .iter()
        .zip(w.iter())
        .zip(s.iter())
        .map(|((g, w), s)| (g - w).powi(2) / s)
        .sum()
}

/// Log of the unnormalized joint density of data and all parameters.
///
/// Proper factors carry their normalizing constants; the flat prior on
/// `(μ, τ²)` contributes `−log τ²`. A node with `ξ_k = 0` contributes
/// `log(1 − Δ)` (the point mass has unit weight).
pub fn log_joint(state: &LatentState, design: &DesignMatrix, hyper: &Hyperparameters) -> Result<f64> {
    state.validate()?;
    hyper.validate()?;
    let v = state.node_count();
    let r = state.rank();
    if v != design.v || design.q() != state.gamma.len() {
        return Err(Error::Validation(format!(
            "state has V = {v}, design has V = {}",
            design.v
        )));
    }
    if r != hyper.r {
        return Err(Error::Validation(format!(
            "state has R = {r}, hyperparameters R = {}",
            hyper.r
        )));
    }
    let tau2 = state.tau2;
    let n = design.n() as f64;

    let likelihood =
        -0.5 * n * (dist::LN_2PI + tau2.ln()) - residual_sum_squares(design, state.mu, &state.gamma) / (2.0 * tau2);

    let w = compute_w(&state.u, &state.lambda);
    let gamma_prior: f64 = (0..state.gamma.len())
        .map(|e| ln_normal(state.gamma[e], w[e], tau2 * state.s[e]))
        .sum();

    let tau2_prior = match hyper.tau2_prior {
        None => -tau2.ln(),
        Some((a, b)) => ln_inverse_gamma_pdf(tau2, a, b),
    };
    let mu_prior = match hyper.mu_prior {
        None => 0.0,
        Some((m0, v0)) => ln_normal(state.mu, m0, v0),
    };

    let m_chol =
        Cholesky::new(state.m.clone()).ok_or_else(|| Error::Validation("M is not positive definite".into()))?;
    let zero = DVector::zeros(r);
    let mut latent = 0.0;
    for k in 0..v {
        if state.xi[k] {
            latent += state.delta.ln() + ln_mvn_chol(&state.u.column(k).into_owned(), &zero, &m_chol);
        } else {
            latent += (1.0 - state.delta).ln();
        }
    }

    let half_theta = state.theta2 / 2.0;
    let scales: f64 = state.s.iter().map(|s| half_theta.ln() - half_theta * s).sum();
    let theta = ln_gamma_pdf(state.theta2, hyper.zeta, hyper.iota);
    let m_prior = ln_inverse_wishart_pdf(&state.m, &hyper.scale, hyper.nu)?;
    let delta = ln_beta_pdf(state.delta, hyper.a_delta, hyper.b_delta);
    let mut dims = 0.0;
    for rr in 0..r {
        let p = state.pi[rr];
        dims += if state.lambda[rr] { p.ln() } else { (1.0 - p).ln() };
        dims += ln_beta_pdf(p, 1.0, hyper.pi_prior_b(rr));
    }

    Ok(likelihood + gamma_prior + tau2_prior + mu_prior + latent + scales + theta + m_prior + delta + dims)
}

/// Draws every parameter from the prior hierarchy, with `(μ, τ²)` supplied
/// by the caller; γ is drawn last, conditional on `τ²`.
pub fn sample_prior_given(
    hyper: &Hyperparameters,
    v: usize,
    mu: f64,
    tau2: f64,
    rng: &mut RngStream,
) -> Result<LatentState> {
    hyper.validate()?;
    let r = hyper.r;
    let q = edge_count(v);
    let theta2 = dist::gamma(hyper.zeta, hyper.iota, rng)?.max(crate::gibbs::VARIANCE_FLOOR);
    let s = DVector::from_iterator(
        q,
        (0..q)
            .map(|_| dist::gamma(1.0, theta2 / 2.0, rng).map(|x| x.max(crate::gibbs::VARIANCE_FLOOR)))
            .collect::<Result<Vec<_>>>()?,
    );
    let m = dist::sample_inverse_wishart(&hyper.scale, hyper.nu, rng)?;
    let delta = dist::beta(hyper.a_delta, hyper.b_delta, rng)?;
    let mut xi = vec![false; v];
    let mut u = DMatrix::zeros(r, v);
    let zero = DVector::zeros(r);
    for k in 0..v {
        xi[k] = dist::bernoulli(delta, rng)?;
        if xi[k] {
            u.set_column(k, &dist::sample_mvn(&zero, &m, rng)?);
        }
    }
    let mut pi = vec![0.0; r];
    let mut lambda = vec![false; r];
    for rr in 0..r {
        pi[rr] = dist::beta(1.0, hyper.pi_prior_b(rr), rng)?;
        lambda[rr] = dist::bernoulli(pi[rr], rng)?;
    }
    let w = compute_w(&u, &lambda);
    let gamma = DVector::from_iterator(
        q,
        (0..q)
            .map(|e| dist::normal(w[e], (tau2 * s[e]).sqrt(), rng))
            .collect::<Result<Vec<_>>>()?,
    );
    Ok(LatentState {
        mu,
        tau2,
        gamma,
        u,
        xi,
        lambda,
        pi,
        delta,
        theta2,
        s,
        m,
    })
}

/// Full prior draw. Requires proper `(μ, τ²)` priors.
pub fn sample_prior(hyper: &Hyperparameters, v: usize, rng: &mut RngStream) -> Result<LatentState> {
    let (a, b) = hyper
        .tau2_prior
        .ok_or_else(|| Error::InvalidParameter("sampling the prior needs a proper tau2 prior".into()))?;
    let (m0, v0) = hyper
        .mu_prior
        .ok_or_else(|| Error::InvalidParameter("sampling the prior needs a proper mu prior".into()))?;
    let tau2 = dist::inverse_gamma(a, b, rng)?;
    let mu = dist::normal(m0, v0.sqrt(), rng)?;
    sample_prior_given(hyper, v, mu, tau2, rng)
}

/// Starting state: a prior draw with `μ` and `τ²` set from the response's
/// sample mean and variance.
pub fn init_state(hyper: &Hyperparameters, design: &DesignMatrix, rng: &mut RngStream) -> Result<LatentState> {
    let n = design.n();
    let mu = if n > 0 { design.y.mean() } else { 0.0 };
    let tau2 = if n > 1 {
        let var = design.y.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        if var > 0.0 && var.is_finite() {
            var
        } else {
            1.0
        }
    } else {
        1.0
    };
    sample_prior_given(hyper, design.v, mu, tau2, rng)
}

/// Edge-pair labels for reports, 1-based.
pub fn edge_labels(v: usize) -> Vec<String> {
    edge_pairs(v)
        .into_iter()
        .map(|(k, l)| format!("{}_{}", k + 1, l + 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_position;

    fn tiny_design(v: usize, n: usize, rng: &mut RngStream) -> DesignMatrix {
        let q = edge_count(v);
        let x = DMatrix::from_fn(n, q, |_, _| dist::standard_normal(rng));
        let y = DVector::from_fn(n, |_, _| dist::standard_normal(rng));
        DesignMatrix {
            x,
            y,
            v,
            edges: edge_pairs(v),
        }
    }

    #[test]
    fn w_is_zero_without_active_structure() {
        let u = DMatrix::from_fn(2, 4, |i, j| (i + j) as f64 + 0.5);
        assert_eq!(compute_w(&u, &[false, false]), DVector::zeros(6));
        assert_eq!(compute_w(&DMatrix::zeros(2, 4), &[true, true]), DVector::zeros(6));
    }

    #[test]
    fn w_matches_loop_oracle() {
        let u = DMatrix::from_row_slice(2, 3, &[0.3, -1.2, 2.0, 1.5, 0.7, -0.4]);
        let w = compute_w(&u, &[true, true]);
        for k in 0..3 {
            for l in (k + 1)..3 {
                let mut direct = 0.0;
                for r in 0..2 {
                    direct += u[(r, k)] * u[(r, l)];
                }
                assert!((w[edge_position(3, k, l)] - direct).abs() < 1e-15);
            }
        }
        let only_second = compute_w(&u, &[false, true]);
        assert!((only_second[0] - 1.5 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn w_ignores_inactive_row_permutations() {
        let u = DMatrix::from_row_slice(3, 3, &[0.3, -1.2, 2.0, 1.5, 0.7, -0.4, 9.0, 8.0, 7.0]);
        let mut swapped = u.clone();
        swapped.swap_rows(1, 2);
        assert_eq!(
            compute_w(&u, &[true, false, false]),
            compute_w(&swapped, &[true, false, false])
        );
    }

    #[test]
    fn init_is_reproducible_and_valid() {
        let hyper = Hyperparameters::with_rank(2);
        let mut rng = RngStream::new(3, 0);
        let design = tiny_design(4, 6, &mut rng);
        let a = init_state(&hyper, &design, &mut RngStream::new(10, 0)).unwrap();
        let b = init_state(&hyper, &design, &mut RngStream::new(10, 0)).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert!((a.mu - design.y.mean()).abs() < 1e-12);
        assert!(log_joint(&a, &design, &hyper).unwrap().is_finite());
    }

    #[test]
    fn log_joint_prefers_least_squares_gamma() {
        let hyper = Hyperparameters::with_rank(2);
        let mut rng = RngStream::new(4, 0);
        let v = 3;
        let design = tiny_design(v, 12, &mut rng);
        let mut state = init_state(&hyper, &design, &mut rng).unwrap();
        state.s.fill(1e6);
        let target = (design.x.transpose() * &design.x)
            .cholesky()
            .unwrap()
            .solve(&(design.x.transpose() * design.y.map(|y| y - state.mu)));
        let far = log_joint(&state, &design, &hyper).unwrap();
        state.gamma = &state.gamma * 0.5 + &target * 0.5;
        let nearer = log_joint(&state, &design, &hyper).unwrap();
        state.gamma = target;
        let at = log_joint(&state, &design, &hyper).unwrap();
        assert!(nearer > far && at > nearer);
    }

    #[test]
    fn log_joint_likelihood_is_shift_invariant() {
        let hyper = Hyperparameters::with_rank(2);
        let mut rng = RngStream::new(5, 0);
        let mut design = tiny_design(3, 5, &mut rng);
        let mut state = init_state(&hyper, &design, &mut rng).unwrap();
        let before = log_joint(&state, &design, &hyper).unwrap();
        design.y.add_scalar_mut(3.5);
        state.mu += 3.5;
        let after = log_joint(&state, &design, &hyper).unwrap();
        assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn log_joint_rejects_broken_coupling() {
        let hyper = Hyperparameters::with_rank(2);
        let mut rng = RngStream::new(6, 0);
        let design = tiny_design(3, 5, &mut rng);
        let mut state = init_state(&hyper, &design, &mut rng).unwrap();
        state.xi[0] = !state.xi[0];
        assert!(matches!(log_joint(&state, &design, &hyper), Err(Error::Validation(_))));
    }

    #[test]
    fn hyperparameter_validation() {
        let mut h = Hyperparameters::with_rank(2);
        h.validate().unwrap();
        h.eta = 1.0;
        assert!(h.validate().is_err());
        let mut h = Hyperparameters::with_rank(2);
        h.nu = 0.5;
        assert!(h.validate().is_err());
        let mut h = Hyperparameters::with_rank(2);
        h.scale = DMatrix::identity(3, 3);
        assert!(h.validate().is_err());
    }
}
