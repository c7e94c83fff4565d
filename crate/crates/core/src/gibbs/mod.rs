//! Gibbs sampler over the full conditionals of the network-lasso model.
//!
//! Each block's conditional is computed once as a small parameter object;
//! the update draws from it and [`log_conditional`] evaluates its density.
//! The conditional-consistency tests compare the latter against
//! [`log_joint`](crate::model::log_joint) differences.

mod chain;
mod geweke;

pub use chain::{
    read_chain_dir, run_chain, run_chain_from, run_chains, run_chains_each, write_chain_dir, ChainConfig, ChainError,
    ChainSamples, FullTraces,
};
pub use geweke::{batch_means_se, run_getting_it_right, GirConfig, GirReport, GirStatistic};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::distributions::{self as dist, ln_beta_pdf, ln_gamma_pdf, ln_gig_half_pdf, ln_inverse_gamma_pdf, ln_normal};
use crate::error::{Error, Result};
use crate::graph::{edge_position, DesignMatrix};
use crate::model::{compute_w, residual_sum_squares, weighted_deviation, Hyperparameters, LatentState};
use crate::rng::RngStream;

/// Floor applied to conditional scale parameters and to drawn variances.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Design plus the cross-products the sweep reuses.
#[derive(Clone, Debug)]
pub struct ModelData {
    design: DesignMatrix,
    xtx: DMatrix<f64>,
    xt1: DVector<f64>,
    xty: DVector<f64>,
}

impl ModelData {
    pub fn new(design: DesignMatrix) -> Self {
        let xt = design.x.transpose();
        let xtx = &xt * &design.x;
        let xt1 = DVector::from_iterator(design.q(), design.x.column_iter().map(|c| c.sum()));
        let xty = &xt * &design.y;
        Self { design, xtx, xt1, xty }
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    /// Replaces the response, keeping the design.
    pub fn set_response(&mut self, y: DVector<f64>) {
        assert_eq!(y.len(), self.design.n());
        self.xty = self.design.x.transpose() * &y;
        self.design.y = y;
    }
}

/// Deliberate corruption of one update, for validating the
/// joint-distribution test itself.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// τ² conditional shape inflated by one.
    Tau2ShapeOffByOne,
}

/// A block of the sweep. Node and dimension indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Mu,
    Gamma,
    Tau2,
    Scales,
    Theta2,
    Node(usize),
    Delta,
    M,
    Lambda(usize),
    Pi(usize),
}

// ---------------------------------------------------------------------------
// conditional parameters

struct GammaConditional {
    precision: Cholesky<f64, Dyn>,
    b: DVector<f64>,
    tau2: f64,
}

struct NodeConditional {
    /// log P(ξ_k = 1 | −) − log P(ξ_k = 0 | −)
    log_odds: f64,
    precision: Cholesky<f64, Dyn>,
    b: DVector<f64>,
}

fn mu_conditional(state: &LatentState, data: &ModelData, hyper: &Hyperparameters) -> Result<(f64, f64)> {
    let d = &data.design;
    let n = d.n() as f64;
    let resid_sum = d.y.sum() - data.xt1.dot(&state.gamma);
    match hyper.mu_prior {
        None => {
            if d.n() == 0 {
                return Err(Error::InvalidParameter("flat mu prior with no observations".into()));
            }
            Ok((resid_sum / n, state.tau2 / n))
        }
        Some((m0, v0)) => {
            let precision = n / state.tau2 + 1.0 / v0;
            Ok(((resid_sum / state.tau2 + m0 / v0) / precision, 1.0 / precision))
        }
    }
}

fn gamma_conditional(state: &LatentState, data: &ModelData) -> Result<GammaConditional> {
    let w = compute_w(&state.u, &state.lambda);
    let mut p = data.xtx.clone();
    let mut b = &data.xty - &data.xt1 * state.mu;
    for e in 0..state.s.len() {
        let inv = 1.0 / state.s[e];
        p[(e, e)] += inv;
        b[e] += w[e] * inv;
    }
    let precision = dist::cholesky_with_fallback(&p, "gamma conditional precision")?;
    Ok(GammaConditional {
        precision,
        b,
        tau2: state.tau2,
    })
}

fn tau2_conditional(state: &LatentState, data: &ModelData, hyper: &Hyperparameters, fault: Fault) -> (f64, f64) {
    let d = &data.design;
    let q = state.gamma.len() as f64;
    let w = compute_w(&state.u, &state.lambda);
    let (a0, b0) = hyper.tau2_prior.unwrap_or((0.0, 0.0));
    let mut shape = a0 + d.n() as f64 / 2.0 + q / 2.0;
    if fault == Fault::Tau2ShapeOffByOne {
        shape += 1.0;
    }
    let quad = residual_sum_squares(d, state.mu, &state.gamma) + weighted_deviation(&state.gamma, &w, &state.s);
    let scale = (b0 + quad / 2.0).max(VARIANCE_FLOOR);
    (shape, scale)
}

/// `(chi, psi)` of each local-scale GIG(1/2, chi, psi).
fn scales_conditional(state: &LatentState) -> Vec<(f64, f64)> {
    let w = compute_w(&state.u, &state.lambda);
    let psi = state.theta2.max(VARIANCE_FLOOR);
    state
        .gamma
        .iter()
        .zip(w.iter())
        .map(|(g, w)| ((g - w).powi(2) / state.tau2, psi))
        .collect()
}

fn theta2_conditional(state: &LatentState, hyper: &Hyperparameters) -> (f64, f64) {
    (hyper.zeta + state.s.len() as f64, hyper.iota + state.s.sum() / 2.0)
}

fn node_conditional(state: &LatentState, k: usize) -> Result<NodeConditional> {
    let v = state.node_count();
    let r = state.rank();
    let m_chol = dist::cholesky_with_fallback(&state.m, "latent covariance M")?;
    let m_inv = m_chol.inverse();
    let log_det_m: f64 = m_chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>() * 2.0;

    let mut p = m_inv;
    let mut b = DVector::zeros(r);
    let mut a = DVector::zeros(r);
    for l in (0..v).filter(|&l| l != k) {
        let e = if k < l {
            edge_position(v, k, l)
        } else {
            edge_position(v, l, k)
        };
        for rr in 0..r {
            a[rr] = if state.lambda[rr] { state.u[(rr, l)] } else { 0.0 };
        }
        let weight = 1.0 / (state.tau2 * state.s[e]);
        p.ger(weight, &a, &a, 1.0);
        b.axpy(weight * state.gamma[e], &a, 1.0);
    }
    let precision = dist::cholesky_with_fallback(&p, "latent vector precision")?;
    let log_det_p: f64 = precision.l().diagonal().iter().map(|x| x.ln()).sum::<f64>() * 2.0;
    let quad = b.dot(&precision.solve(&b));
    let log_odds = state.delta.ln() - (1.0 - state.delta).ln() + 0.5 * (quad - log_det_m - log_det_p);
    Ok(NodeConditional { log_odds, precision, b })
}

fn delta_conditional(state: &LatentState, hyper: &Hyperparameters) -> (f64, f64) {
    let active = state.active_nodes() as f64;
    let inactive = state.node_count() as f64 - active;
    (hyper.a_delta + active, hyper.b_delta + inactive)
}

fn m_conditional(state: &LatentState, hyper: &Hyperparameters) -> (DMatrix<f64>, f64) {
    let mut scale = hyper.scale.clone();
    let mut count = 0usize;
    for k in 0..state.node_count() {
        if state.xi[k] {
            let u = state.u.column(k);
            scale.ger(1.0, &u, &u, 1.0);
            count += 1;
        }
    }
    (scale, hyper.nu + count as f64)
}

/// Log-odds of `λ_r = 1` given everything else.
fn lambda_conditional(state: &LatentState, r: usize) -> f64 {
    let mut on = state.lambda.clone();
    on[r] = true;
    let mut off = state.lambda.clone();
    off[r] = false;
    let w1 = compute_w(&state.u, &on);
    let w0 = compute_w(&state.u, &off);
    let d1 = weighted_deviation(&state.gamma, &w1, &state.s);
    let d0 = weighted_deviation(&state.gamma, &w0, &state.s);
    let p = state.pi[r];
    p.ln() - (1.0 - p).ln() - (d1 - d0) / (2.0 * state.tau2)
}

fn pi_conditional(state: &LatentState, hyper: &Hyperparameters, r: usize) -> (f64, f64) {
    let l = state.lambda[r] as u8 as f64;
    (l + 1.0, 1.0 - l + hyper.pi_prior_b(r))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn ln_mvn_canonical(x: &DVector<f64>, precision: &Cholesky<f64, Dyn>, b: &DVector<f64>, scale2: f64) -> f64 {
    let mean = precision.solve(b);
    let d = x - mean;
    let lt_d = precision.l().transpose() * &d;
    let log_det_p: f64 = precision.l().diagonal().iter().map(|x| x.ln()).sum::<f64>() * 2.0;
    let dim = x.len() as f64;
    -0.5 * dim * (dist::LN_2PI + scale2.ln()) + 0.5 * log_det_p - lt_d.norm_squared() / (2.0 * scale2)
}

// ---------------------------------------------------------------------------
// updates

pub fn update_mu(
    state: &mut LatentState,
    data: &ModelData,
    hyper: &Hyperparameters,
    rng: &mut RngStream,
) -> Result<()> {
    let (mean, var) = mu_conditional(state, data, hyper)?;
    state.mu = dist::normal(mean, var.sqrt(), rng)?;
    Ok(())
}

pub fn update_gamma(state: &mut LatentState, data: &ModelData, rng: &mut RngStream) -> Result<()> {
    let c = gamma_conditional(state, data)?;
    let (draw, _) = dist::sample_mvn_canonical(&c.precision, &c.b, c.tau2.sqrt(), rng);
    state.gamma = draw;
    Ok(())
}

pub fn update_tau2(
    state: &mut LatentState,
    data: &ModelData,
    hyper: &Hyperparameters,
    fault: Fault,
    rng: &mut RngStream,
) -> Result<()> {
    let (shape, scale) = tau2_conditional(state, data, hyper, fault);
    state.tau2 = dist::inverse_gamma(shape, scale, rng)?.max(VARIANCE_FLOOR);
    Ok(())
}

pub fn update_s(state: &mut LatentState, rng: &mut RngStream) -> Result<()> {
    let params = scales_conditional(state);
    for (e, (chi, psi)) in params.into_iter().enumerate() {
        state.s[e] = dist::sample_gig(0.5, chi, psi, rng)?.max(VARIANCE_FLOOR);
    }
    Ok(())
}

pub fn update_theta2(state: &mut LatentState, hyper: &Hyperparameters, rng: &mut RngStream) -> Result<()> {
    let (shape, rate) = theta2_conditional(state, hyper);
    state.theta2 = dist::gamma(shape, rate, rng)?.max(VARIANCE_FLOOR);
    Ok(())
}

/// Joint spike-and-slab update of `(u_k, ξ_k)`.
pub fn update_u_xi(state: &mut LatentState, k: usize, rng: &mut RngStream) -> Result<()> {
    let c = node_conditional(state, k)?;
    let slab = dist::bernoulli_logit(c.log_odds, rng)?;
    state.xi[k] = slab;
    if slab {
        let (draw, _) = dist::sample_mvn_canonical(&c.precision, &c.b, 1.0, rng);
        state.u.set_column(k, &draw);
    } else {
        state.u.column_mut(k).fill(0.0);
    }
    Ok(())
}

/// Posterior spike weight `w_{u_k}` = P(u_k = 0 | −).
pub fn spike_weight(state: &LatentState, k: usize) -> Result<f64> {
    Ok(1.0 - dist::logistic(node_conditional(state, k)?.log_odds))
}

pub fn update_delta(state: &mut LatentState, hyper: &Hyperparameters, rng: &mut RngStream) -> Result<()> {
    let (a, b) = delta_conditional(state, hyper);
    state.delta = dist::beta(a, b, rng)?;
    Ok(())
}

pub fn update_m(state: &mut LatentState, hyper: &Hyperparameters, rng: &mut RngStream) -> Result<()> {
    let (scale, dof) = m_conditional(state, hyper);
    state.m = dist::sample_inverse_wishart(&scale, dof, rng)?;
    Ok(())
}

pub fn update_lambda(state: &mut LatentState, r: usize, rng: &mut RngStream) -> Result<()> {
    state.lambda[r] = dist::bernoulli_logit(lambda_conditional(state, r), rng)?;
    Ok(())
}

/// Success probability of the `λ_r` conditional.
pub fn lambda_probability(state: &LatentState, r: usize) -> f64 {
    dist::logistic(lambda_conditional(state, r))
}

pub fn update_pi(state: &mut LatentState, hyper: &Hyperparameters, r: usize, rng: &mut RngStream) -> Result<()> {
    let (a, b) = pi_conditional(state, hyper, r);
    state.pi[r] = dist::beta(a, b, rng)?;
    Ok(())
}

/// Draws one block from its full conditional.
pub fn update_block(
    block: Block,
    state: &mut LatentState,
    data: &ModelData,
    hyper: &Hyperparameters,
    fault: Fault,
    rng: &mut RngStream,
) -> Result<()> {
    match block {
        Block::Mu => update_mu(state, data, hyper, rng),
        Block::Gamma => update_gamma(state, data, rng),
        Block::Tau2 => update_tau2(state, data, hyper, fault, rng),
        Block::Scales => update_s(state, rng),
        Block::Theta2 => update_theta2(state, hyper, rng),
        Block::Node(k) => update_u_xi(state, k, rng),
        Block::Delta => update_delta(state, hyper, rng),
        Block::M => update_m(state, hyper, rng),
        Block::Lambda(r) => update_lambda(state, r, rng),
        Block::Pi(r) => update_pi(state, hyper, r, rng),
    }
}

/// Log density of `block`'s full conditional, with the conditioning values
/// taken from `given` and the block's value taken from `at`.
pub fn log_conditional(
    block: Block,
    given: &LatentState,
    at: &LatentState,
    data: &ModelData,
    hyper: &Hyperparameters,
) -> Result<f64> {
    Ok(match block {
        Block::Mu => {
            let (mean, var) = mu_conditional(given, data, hyper)?;
            ln_normal(at.mu, mean, var)
        }
        Block::Gamma => {
            let c = gamma_conditional(given, data)?;
            ln_mvn_canonical(&at.gamma, &c.precision, &c.b, c.tau2)
        }
        Block::Tau2 => {
            let (shape, scale) = tau2_conditional(given, data, hyper, Fault::None);
            ln_inverse_gamma_pdf(at.tau2, shape, scale)
        }
        Block::Scales => scales_conditional(given)
            .into_iter()
            .zip(at.s.iter())
            .map(|((chi, psi), &s)| ln_gig_half_pdf(s, chi, psi))
            .sum(),
        Block::Theta2 => {
            let (shape, rate) = theta2_conditional(given, hyper);
            ln_gamma_pdf(at.theta2, shape, rate)
        }
        Block::Node(k) => {
            let c = node_conditional(given, k)?;
            if at.xi[k] {
                -softplus(-c.log_odds) + ln_mvn_canonical(&at.u.column(k).into_owned(), &c.precision, &c.b, 1.0)
            } else {
                -softplus(c.log_odds)
            }
        }
        Block::Delta => {
            let (a, b) = delta_conditional(given, hyper);
            ln_beta_pdf(at.delta, a, b)
        }
        Block::M => {
            let (scale, dof) = m_conditional(given, hyper);
            dist::ln_inverse_wishart_pdf(&at.m, &scale, dof)?
        }
        Block::Lambda(r) => {
            let logit = lambda_conditional(given, r);
            if at.lambda[r] {
                -softplus(-logit)
            } else {
                -softplus(logit)
            }
        }
        Block::Pi(r) => {
            let (a, b) = pi_conditional(given, hyper, r);
            ln_beta_pdf(at.pi[r], a, b)
        }
    })
}

/// Blocks of one sweep in update order: μ, γ, τ², s, θ², (u_k, ξ_k) for
/// every node, Δ, M, λ_r for every dimension, then π_r.
pub fn sweep_order(v: usize, r: usize) -> Vec<Block> {
    let mut order = vec![Block::Mu, Block::Gamma, Block::Tau2, Block::Scales, Block::Theta2];
    order.extend((0..v).map(Block::Node));
    order.push(Block::Delta);
    order.push(Block::M);
    order.extend((0..r).map(Block::Lambda));
    order.extend((0..r).map(Block::Pi));
    order
}

pub fn sweep(state: &mut LatentState, data: &ModelData, hyper: &Hyperparameters, rng: &mut RngStream) -> Result<()> {
    sweep_with_fault(state, data, hyper, Fault::None, rng)
}

pub fn sweep_with_fault(
    state: &mut LatentState,
    data: &ModelData,
    hyper: &Hyperparameters,
    fault: Fault,
    rng: &mut RngStream,
) -> Result<()> {
    for block in sweep_order(state.node_count(), state.rank()) {
        update_block(block, state, data, hyper, fault, rng)?;
    }
    Ok(())
}
