//! Random variate generators used by the Gibbs sweep.
//!
//! Everything here is a pure function of its parameters and a caller-owned
//! [`RngStream`]. Gamma distributions use the shape/rate convention; the
//! inverse gamma uses shape/scale, so `inverse_gamma(a, b)` has mean
//! `b / (a - 1)`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Below this `chi` the GIG is treated as its gamma limit.
const GIG_CHI_ZERO: f64 = 10.0 * f64::EPSILON;

/// Relative size of the first diagonal jitter.
pub const JITTER_BASE: f64 = 1e-10;
/// Number of ×10 escalations after the first jittered attempt.
pub const JITTER_ESCALATIONS: usize = 3;

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

// ---------------------------------------------------------------------------
// scalar samplers

pub fn normal(mean: f64, sd: f64, rng: &mut RngStream) -> Result<f64> {
    if !(sd >= 0.0) || !mean.is_finite() || !sd.is_finite() {
        return Err(invalid(format!("normal(mean={mean}, sd={sd})")));
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(mean + sd * z)
}

pub fn standard_normal(rng: &mut RngStream) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid(format!("gamma(shape={shape}, rate={rate})")));
    }
    let dist = Gamma::new(shape, 1.0 / rate).map_err(|e| invalid(format!("gamma: {e}")))?;
    Ok(dist.sample(rng))
}

pub fn inverse_gamma(shape: f64, scale: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
        return Err(invalid(format!("inverse_gamma(shape={shape}, scale={scale})")));
    }
    let g = gamma(shape, 1.0, rng)?;
    Ok(scale / g)
}

pub fn beta(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!("beta(a={a}, b={b})")));
    }
    let dist = Beta::new(a, b).map_err(|e| invalid(format!("beta: {e}")))?;
    Ok(dist.sample(rng))
}

pub fn bernoulli(p: f64, rng: &mut RngStream) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("bernoulli(p={p})")));
    }
    // p = 1 must always succeed, p = 0 never
    let u: f64 = rng.random();
    Ok(u < p)
}

/// Bernoulli draw with the success probability given on the logit scale.
pub fn bernoulli_logit(logit: f64, rng: &mut RngStream) -> Result<bool> {
    if logit.is_nan() {
        return Err(invalid("bernoulli_logit: NaN log-odds"));
    }
    bernoulli(logistic(logit), rng)
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// ---------------------------------------------------------------------------
// generalized inverse Gaussian

/// Draws from GIG(p, chi, psi) with density proportional to
/// `x^(p-1) exp(-(chi/x + psi*x)/2)`.
///
/// Ratio-of-uniforms with and without mode shift, plus the three-piece hat
/// for the non-log-concave corner (Hörmann & Leydold, 2014). `chi == 0`
/// is the Gamma(p, rate psi/2) limit.
pub fn sample_gig(p: f64, chi: f64, psi: f64, rng: &mut RngStream) -> Result<f64> {
    if !(p.is_finite() && chi.is_finite() && psi.is_finite()) {
        return Err(invalid(format!("gig(p={p}, chi={chi}, psi={psi})")));
    }
    if !(psi > 0.0) || chi < 0.0 {
        return Err(invalid(format!(
            "gig requires psi > 0 and chi >= 0 (psi={psi}, chi={chi})"
        )));
    }
    if chi < GIG_CHI_ZERO {
        if p <= 0.0 {
            return Err(invalid(format!("gig with chi = 0 requires p > 0 (p={p})")));
        }
        return gamma(p, psi / 2.0, rng);
    }

    let lambda = p.abs();
    let alpha = (chi / psi).sqrt();
    let omega = (chi * psi).sqrt();

    let x = if lambda > 2.0 || omega > 3.0 {
        gig_rou_shift(lambda, omega, rng)
    } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        gig_rou_noshift(lambda, omega, rng)
    } else {
        gig_concave_hat(lambda, omega, rng)
    };
    Ok(if p < 0.0 { alpha / x } else { alpha * x })
}

fn gig_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

fn gig_rou_noshift(lambda: f64, omega: f64, rng: &mut RngStream) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * rng.random::<f64>();
        let v: f64 = rng.random();
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn gig_rou_shift(lambda: f64, omega: f64, rng: &mut RngStream) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);

    // roots of the cubic bounding x*sqrt(f(x + xm))
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
    let fi = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * PI).cos() - a / 3.0;

    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();

    loop {
        let u = uminus + rng.random::<f64>() * (uplus - uminus);
        let v: f64 = rng.random();
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn gig_concave_hat(lambda: f64, omega: f64, rng: &mut RngStream) -> f64 {
    let xm = gig_mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);

    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;

    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;

    loop {
        let mut v = total * rng.random::<f64>();
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                let lo = x0.max(2.0 / omega);
                x = -2.0 / omega * ((-omega / 2.0 * lo).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        let u = rng.random::<f64>() * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}

// ---------------------------------------------------------------------------
// multivariate

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|v| !v.is_finite()) {
        return f64::NAN;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn jitter_scale(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().max(1) as f64;
    let mean_diag = m.diagonal().iter().sum::<f64>() / n;
    if mean_diag > 0.0 && mean_diag.is_finite() {
        mean_diag
    } else {
        1.0
    }
}

/// Cholesky with the covariance jitter policy: `JITTER_BASE * mean(diag)`
/// is always added, then escalated ×10 up to `JITTER_ESCALATIONS` times.
pub fn jittered_cholesky(m: &DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    let base = JITTER_BASE * jitter_scale(m);
    let mut jitter = base;
    for _ in 0..=JITTER_ESCALATIONS {
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(a) {
            return Ok(ch);
        }
        jitter *= 10.0;
    }
    Err(Error::NumericalFailure {
        context: context.to_string(),
        min_eigenvalue: min_eigenvalue(m),
    })
}

/// Cholesky that first tries the matrix as given and only falls back to
/// the jitter schedule when that fails. Used for precision matrices, where
/// an unconditional jitter would bias the conditional.
pub fn cholesky_with_fallback(m: &DMatrix<f64>, context: &str) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure {
            context: context.to_string(),
            min_eigenvalue: f64::NAN,
        });
    }
    match Cholesky::new(m.clone()) {
        Some(ch) => Ok(ch),
        None => jittered_cholesky(m, context),
    }
}

fn standard_normal_vector(len: usize, rng: &mut RngStream) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| standard_normal(rng)))
}

pub fn sample_mvn(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut RngStream) -> Result<DVector<f64>> {
    let m = mean.len();
    if cov.nrows() != m || cov.ncols() != m {
        return Err(invalid(format!(
            "mvn: mean has length {m}, covariance is {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let ch = jittered_cholesky(cov, "mvn covariance")?;
    let z = standard_normal_vector(m, rng);
    Ok(mean + ch.l() * z)
}

/// Draws `x ~ N(P^{-1} b, scale² P^{-1})` given the Cholesky factor of the
/// precision `P`. Returns the draw and the mean.
pub fn sample_mvn_canonical(
    precision_chol: &Cholesky<f64, Dyn>,
    b: &DVector<f64>,
    scale: f64,
    rng: &mut RngStream,
) -> (DVector<f64>, DVector<f64>) {
    let mean = precision_chol.solve(b);
    let z = standard_normal_vector(b.len(), rng);
    let noise = precision_chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("cholesky factor has a positive diagonal");
    let draw = &mean + noise * scale;
    (draw, mean)
}

/// Inverse-Wishart draw via the Bartlett decomposition of the matching
/// Wishart(scale⁻¹, dof). The mean is `scale / (dof - R - 1)`.
pub fn sample_inverse_wishart(scale: &DMatrix<f64>, dof: f64, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    let r = scale.nrows();
    if scale.ncols() != r || r == 0 {
        return Err(invalid("inverse wishart scale must be square and nonempty"));
    }
    if !(dof > r as f64 - 1.0) || !dof.is_finite() {
        return Err(invalid(format!(
            "inverse wishart dof {dof} must exceed R - 1 = {}",
            r as f64 - 1.0
        )));
    }
    if (scale - scale.transpose()).amax() > 1e-10 * scale.amax().max(1.0) {
        return Err(invalid("inverse wishart scale is not symmetric"));
    }
    let scale_chol = Cholesky::new(scale.clone()).ok_or_else(|| {
        invalid(format!(
            "inverse wishart scale not SPD (min eigenvalue {:e})",
            min_eigenvalue(scale)
        ))
    })?;
    let scale_inv = scale_chol.inverse();
    let l = Cholesky::new((&scale_inv + scale_inv.transpose()) * 0.5)
        .ok_or_else(|| invalid("inverse wishart scale inverse not SPD"))?
        .unpack();

    let mut a = DMatrix::<f64>::zeros(r, r);
    for i in 0..r {
        let chi2 = 2.0 * gamma((dof - i as f64) / 2.0, 1.0, rng)?;
        a[(i, i)] = chi2.sqrt();
        for j in 0..i {
            a[(i, j)] = standard_normal(rng);
        }
    }
    // Wishart draw = (L A)(L A)'; its inverse is T^{-T} T^{-1}
    let t = l * a;
    let t_inv = t
        .solve_lower_triangular(&DMatrix::identity(r, r))
        .ok_or_else(|| Error::NumericalFailure {
            context: "inverse wishart bartlett factor".into(),
            min_eigenvalue: 0.0,
        })?;
    let draw = t_inv.transpose() * t_inv;
    Ok((&draw + draw.transpose()) * 0.5)
}

// ---------------------------------------------------------------------------
// log densities shared by the model and the sampler

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Log multivariate gamma function Γ_p(a).
pub fn ln_multigamma(p: usize, a: f64) -> f64 {
    let pf = p as f64;
    pf * (pf - 1.0) / 4.0 * PI.ln() + (0..p).map(|j| ln_gamma(a - j as f64 / 2.0)).sum::<f64>()
}

pub fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

pub fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn ln_inverse_gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
}

/// Log density of GIG(1/2, chi, psi); falls back to Gamma(1/2, psi/2) at chi = 0.
pub fn ln_gig_half_pdf(x: f64, chi: f64, psi: f64) -> f64 {
    if chi < GIG_CHI_ZERO {
        return ln_gamma_pdf(x, 0.5, psi / 2.0);
    }
    // 2 K_{1/2}(w) = sqrt(2 pi / w) e^{-w}
    let omega = (chi * psi).sqrt();
    0.25 * (psi / chi).ln() - 0.5 * (2.0 * PI / omega).ln() + omega - 0.5 * x.ln() - 0.5 * (chi / x + psi * x)
}

/// Log density of a multivariate normal given the Cholesky factor of its
/// covariance.
pub fn ln_mvn_chol(x: &DVector<f64>, mean: &DVector<f64>, cov_chol: &Cholesky<f64, Dyn>) -> f64 {
    let d = x - mean;
    let z = cov_chol
        .l()
        .solve_lower_triangular(&d)
        .expect("cholesky factor has a positive diagonal");
    let log_det: f64 = cov_chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    -0.5 * (d.len() as f64 * LN_2PI + log_det + z.norm_squared())
}

/// Log density of IW(scale, dof) at `x`.
pub fn ln_inverse_wishart_pdf(x: &DMatrix<f64>, scale: &DMatrix<f64>, dof: f64) -> Result<f64> {
    let r = x.nrows();
    let x_chol = Cholesky::new(x.clone()).ok_or_else(|| invalid("inverse wishart argument not SPD"))?;
    let s_chol = Cholesky::new(scale.clone()).ok_or_else(|| invalid("inverse wishart scale not SPD"))?;
    let ld_x: f64 = x_chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let ld_s: f64 = s_chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let tr = (scale * x_chol.inverse()).trace();
    let rf = r as f64;
    Ok(dof / 2.0 * ld_s
        - dof * rf / 2.0 * 2f64.ln()
        - ln_multigamma(r, dof / 2.0)
        - (dof + rf + 1.0) / 2.0 * ld_x
        - tr / 2.0)
}
