//! AR(1)-GARCH(1,1) and AR(1)-GJR-GARCH(1,1) by Gaussian quasi-maximum
//! likelihood.
//!
//! Mean equation: `r_t = c + phi * r_{t-1} + eps_t`. Variance recursion:
//! `sigma2_t = k + gamma * sigma2_{t-1} + (alpha + xi * I[eps_{t-1} < 0]) *
//! eps_{t-1}^2`, with `xi` fixed at zero for the symmetric model. The first
//! usable observation's variance is initialized at the mean squared residual
//! and `eps_0` is treated as zero, so the recursion starts one month after the
//! input series does.
//!
//! The optimizer works on an unconstrained reparameterization (log variance
//! constant, logistic persistence shares), so every iterate satisfies
//! `k > 0`, `gamma, alpha >= 0`, `alpha + xi >= 0`, and persistence
//! `gamma + alpha + xi/2 < 1`. Three fixed starting points guard against bad
//! local optima; everything is deterministic.

use crate::error::{Error, Result};
use crate::optim::bfgs;
use nalgebra::DMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const MIN_INIT_VAR: f64 = 1e-20;
const PERSISTENCE_CAP: f64 = 0.999;
const MAX_ITER: usize = 500;
const REL_TOL: f64 = 1e-8;

pub const PARAM_NAMES: [&str; 6] = ["c", "phi", "k", "gamma", "alpha", "xi"];

/// Model choice: asymmetric enables the GJR leverage term `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GarchSpec {
    pub asymmetric: bool,
}

impl GarchSpec {
    pub fn symmetric() -> Self {
        Self { asymmetric: false }
    }

    pub fn asymmetric() -> Self {
        Self { asymmetric: true }
    }
}

/// Natural model parameters, mean equation first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchParams {
    pub c: f64,
    pub phi: f64,
    pub k: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub xi: f64,
}

impl GarchParams {
    pub fn persistence(&self) -> f64 {
        self.gamma + self.alpha + 0.5 * self.xi
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.c, self.phi, self.k, self.gamma, self.alpha, self.xi]
    }

    pub fn validate(&self) -> Result<()> {
        let vals = self.as_array();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite GARCH parameter".into()));
        }
        if self.k <= 0.0 {
            return Err(Error::InvalidInput(format!("k must be > 0, got {}", self.k)));
        }
        if self.gamma < 0.0 || self.alpha < 0.0 {
            return Err(Error::InvalidInput("gamma and alpha must be >= 0".into()));
        }
        if self.alpha + self.xi < 0.0 {
            return Err(Error::InvalidInput(
                "alpha + xi must be >= 0 so negative shocks keep variance positive".into(),
            ));
        }
        if self.persistence() >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "persistence gamma + alpha + xi/2 = {} must be < 1",
                self.persistence()
            )));
        }
        if self.phi.abs() >= 1.0 {
            return Err(Error::InvalidInput("|phi| must be < 1".into()));
        }
        Ok(())
    }
}

/// A fitted model: parameter estimates, asymptotic standard errors in
/// [`PARAM_NAMES`] order, the Gaussian log likelihood, and the conditional
/// variance path (aligned to the input months starting at the second one).
#[derive(Debug, Clone)]
pub struct GarchFit {
    pub spec: GarchSpec,
    pub params: GarchParams,
    pub std_errors: [f64; 6],
    pub loglik: f64,
    pub cond_variance: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    /// Optimizer coordinates of the solution (see [`transformed_loglik`]);
    /// kept so the gradient can be verified exactly where the fit stopped.
    pub raw_optimum: Vec<f64>,
}

/// The conditional-variance series of a fit, one value per usable month.
pub fn conditional_variance(fit: &GarchFit) -> &[f64] {
    &fit.cond_variance
}

fn residuals(series: &[f64], p: &GarchParams) -> Vec<f64> {
    (0..series.len() - 1)
        .map(|u| series[u + 1] - p.c - p.phi * series[u])
        .collect()
}

fn variance_path(eps: &[f64], p: &GarchParams) -> Vec<f64> {
    let n = eps.len();
    let init = (eps.iter().map(|e| e * e).sum::<f64>() / n as f64).max(MIN_INIT_VAR);
    let mut sigma2 = Vec::with_capacity(n);
    sigma2.push(init);
    for u in 1..n {
        let e = eps[u - 1];
        let coef = p.alpha + if e < 0.0 { p.xi } else { 0.0 };
        sigma2.push(p.k + p.gamma * sigma2[u - 1] + coef * e * e);
    }
    sigma2
}

/// Conditional variances implied by `params` on `series` (no fitting).
pub fn conditional_variance_path(series: &[f64], params: &GarchParams) -> Result<Vec<f64>> {
    params.validate()?;
    if series.len() < 2 {
        return Err(Error::TooFewObservations { required: 2, actual: series.len() });
    }
    Ok(variance_path(&residuals(series, params), params))
}

/// Gaussian log likelihood of `params` on `series`.
pub fn log_likelihood(series: &[f64], params: &GarchParams) -> Result<f64> {
    params.validate()?;
    if series.len() < 2 {
        return Err(Error::TooFewObservations { required: 2, actual: series.len() });
    }
    let eps = residuals(series, params);
    let sigma2 = variance_path(&eps, params);
    Ok(eps
        .iter()
        .zip(&sigma2)
        .map(|(e, s)| -0.5 * (LN_2PI + s.ln() + e * e / s))
        .sum())
}

/// Log likelihood and its gradient in natural-parameter order, computed by
/// forward recursion of `d sigma2_t / d theta` alongside the variance path.
fn loglik_and_grad(series: &[f64], p: &GarchParams) -> (f64, [f64; 6]) {
    let n = series.len() - 1;
    let eps = residuals(series, p);

    let init_raw = eps.iter().map(|e| e * e).sum::<f64>() / n as f64;
    let floored = init_raw < MIN_INIT_VAR;
    let mut sig = init_raw.max(MIN_INIT_VAR);
    let mut dsig = [0.0f64; 6];
    if !floored {
        let two_over_n = 2.0 / n as f64;
        dsig[0] = -two_over_n * eps.iter().sum::<f64>();
        dsig[1] = -two_over_n * eps.iter().zip(series).map(|(e, r)| e * r).sum::<f64>();
    }

    let mut ll = 0.0;
    let mut grad = [0.0f64; 6];
    for u in 0..n {
        if u > 0 {
            let e = eps[u - 1];
            let ind = if e < 0.0 { 1.0 } else { 0.0 };
            let coef = p.alpha + p.xi * ind;
            let new_sig = p.k + p.gamma * sig + coef * e * e;
            dsig = [
                p.gamma * dsig[0] - 2.0 * coef * e,
                p.gamma * dsig[1] - 2.0 * coef * e * series[u - 1],
                1.0 + p.gamma * dsig[2],
                sig + p.gamma * dsig[3],
                e * e + p.gamma * dsig[4],
                ind * e * e + p.gamma * dsig[5],
            ];
            sig = new_sig;
        }
        let e = eps[u];
        let inv = 1.0 / sig;
        ll += -0.5 * (LN_2PI + sig.ln() + e * e * inv);
        let factor = 0.5 * (e * e * inv * inv - inv);
        for i in 0..6 {
            grad[i] += factor * dsig[i];
        }
        grad[0] += e * inv;
        grad[1] += e * inv * series[u];
    }
    (ll, grad)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

/// Unconstrained coordinates: `[c / c_scale, atanh(phi), ln k, persistence
/// logit, share logits...]`: 5 for the symmetric model, 6 for the GJR model.
/// The intercept is scaled by the sample standard deviation of the series so
/// every coordinate carries comparable curvature.
fn to_natural(raw: &[f64], asymmetric: bool, c_scale: f64) -> GarchParams {
    let c = raw[0] * c_scale;
    let phi = raw[1].tanh();
    let k = raw[2].exp();
    let p = PERSISTENCE_CAP * sigmoid(raw[3]);
    let a1 = sigmoid(raw[4]);
    let gamma = p * a1;
    let q = p - gamma;
    let (alpha, xi) = if asymmetric {
        let a2 = sigmoid(raw[5]);
        let alpha = 2.0 * q * a2;
        (alpha, 2.0 * (q - alpha))
    } else {
        (q, 0.0)
    };
    GarchParams { c, phi, k, gamma, alpha, xi }
}

fn from_natural(p: &GarchParams, asymmetric: bool, c_scale: f64) -> Vec<f64> {
    let pers = p.persistence();
    let mut raw = vec![
        p.c / c_scale,
        p.phi.clamp(-0.999_999, 0.999_999).atanh(),
        p.k.ln(),
        logit(pers / PERSISTENCE_CAP),
        logit(p.gamma / pers),
    ];
    if asymmetric {
        let q = pers - p.gamma;
        raw.push(logit(p.alpha / (2.0 * q)));
    }
    raw
}

/// Pull a natural-parameter gradient back through the reparameterization.
fn chain_gradient(raw: &[f64], natural_grad: &[f64; 6], asymmetric: bool, c_scale: f64) -> Vec<f64> {
    let phi = raw[1].tanh();
    let k = raw[2].exp();
    let sp = sigmoid(raw[3]);
    let p = PERSISTENCE_CAP * sp;
    let dp = PERSISTENCE_CAP * sp * (1.0 - sp);
    let a1 = sigmoid(raw[4]);
    let da1 = a1 * (1.0 - a1);
    let [gc, gphi, gk, ggam, galf, gxi] = *natural_grad;

    let mut out = vec![gc * c_scale, gphi * (1.0 - phi * phi), gk * k];
    if asymmetric {
        let a2 = sigmoid(raw[5]);
        let da2 = a2 * (1.0 - a2);
        let q = p * (1.0 - a1);
        // d/d raw3 through p; gamma = p a1, q = p (1 - a1),
        // alpha = 2 q a2, xi = 2 q (1 - 2 a2).
        out.push(dp * (ggam * a1 + (1.0 - a1) * (2.0 * a2 * galf + 2.0 * (1.0 - 2.0 * a2) * gxi)));
        out.push(p * da1 * (ggam - 2.0 * a2 * galf - 2.0 * (1.0 - 2.0 * a2) * gxi));
        out.push(2.0 * q * da2 * (galf - 2.0 * gxi));
    } else {
        out.push(dp * (ggam * a1 + galf * (1.0 - a1)));
        out.push(p * da1 * (ggam - galf));
    }
    out
}

/// Log likelihood and gradient in the optimizer's coordinates.
///
/// Exposed so the fitted gradient can be checked against finite differences
/// exactly at [`GarchFit::raw_optimum`].
pub fn transformed_loglik(series: &[f64], spec: &GarchSpec, raw: &[f64]) -> (f64, Vec<f64>) {
    let c_scale = intercept_scale(series);
    let params = to_natural(raw, spec.asymmetric, c_scale);
    let (ll, grad) = loglik_and_grad(series, &params);
    (ll, chain_gradient(raw, &grad, spec.asymmetric, c_scale))
}

/// Deterministic intercept scale: the population standard deviation.
fn intercept_scale(series: &[f64]) -> f64 {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    (series.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).sqrt().max(1e-12)
}

fn starting_points(series: &[f64], asymmetric: bool) -> Vec<GarchParams> {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = (series.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).max(MIN_INIT_VAR);
    let shapes: [(f64, f64, f64, f64); 3] = if asymmetric {
        [(0.80, 0.10, 0.10, 0.05), (0.50, 0.20, 0.10, 0.20), (0.10, 0.10, 0.05, 0.00)]
    } else {
        [(0.85, 0.10, 0.0, 0.05), (0.50, 0.25, 0.0, 0.20), (0.10, 0.10, 0.0, 0.00)]
    };
    shapes
        .iter()
        .map(|&(gamma, alpha, xi, phi)| {
            let pers = gamma + alpha + 0.5 * xi;
            GarchParams {
                c: mean * (1.0 - phi),
                phi,
                k: var * (1.0 - pers),
                gamma,
                alpha,
                xi,
            }
        })
        .collect()
}

fn fit_impl(series: &[f64], spec: &GarchSpec) -> Result<(GarchFit, Vec<f64>)> {
    let t_len = series.len();
    if t_len < 60 {
        return Err(Error::TooFewObservations { required: 60, actual: t_len });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite values".into()));
    }
    let first = series[0];
    if series.iter().all(|&v| v == first) {
        return Err(Error::ConstantSeries);
    }

    let c_scale = intercept_scale(series);
    let mut best: Option<crate::optim::BfgsOutcome> = None;
    for start in starting_points(series, spec.asymmetric) {
        let raw0 = from_natural(&start, spec.asymmetric, c_scale);
        let outcome = bfgs(
            &raw0,
            |raw| {
                let (ll, grad) = transformed_loglik(series, spec, raw);
                (-ll, grad.iter().map(|g| -g).collect())
            },
            MAX_ITER,
            REL_TOL,
        );
        let better = match &best {
            Some(b) => outcome.f.is_finite() && outcome.f < b.f,
            None => outcome.f.is_finite(),
        };
        if better {
            best = Some(outcome);
        }
    }
    let best = best.ok_or(Error::ConstantSeries)?;

    let params = to_natural(&best.x, spec.asymmetric, c_scale);
    let eps = residuals(series, &params);
    let sigma2 = variance_path(&eps, &params);
    let loglik = eps
        .iter()
        .zip(&sigma2)
        .map(|(e, s)| -0.5 * (LN_2PI + s.ln() + e * e / s))
        .sum();
    let std_errors = asymptotic_std_errors(series, &params, spec.asymmetric);
    let history = best.f_history.iter().map(|f| -f).collect();

    Ok((
        GarchFit {
            spec: *spec,
            params,
            std_errors,
            loglik,
            cond_variance: sigma2,
            converged: best.converged,
            iterations: best.iterations,
            n_obs: t_len - 1,
            raw_optimum: best.x,
        },
        history,
    ))
}

/// Fit the model by QML from three deterministic starting points.
///
/// Non-convergence is not an error: the best point found comes back with
/// `converged = false`.
pub fn fit_garch(series: &[f64], spec: &GarchSpec) -> Result<GarchFit> {
    fit_impl(series, spec).map(|(fit, _)| fit)
}

/// Observed-information standard errors: the Hessian is built from central
/// finite differences of the analytic gradient in natural-parameter space.
fn asymptotic_std_errors(series: &[f64], params: &GarchParams, asymmetric: bool) -> [f64; 6] {
    let active: &[usize] = if asymmetric { &[0, 1, 2, 3, 4, 5] } else { &[0, 1, 2, 3, 4] };
    let theta = params.as_array();
    let scales = [1e-3, 1e-2, theta[2].abs(), 1e-2, 1e-2, 1e-2];
    let m = active.len();
    let mut hess = DMatrix::zeros(m, m);
    for (row, &i) in active.iter().enumerate() {
        let h = theta[i].abs().max(scales[i]) * 1e-4;
        let mut plus = theta;
        plus[i] += h;
        let mut minus = theta;
        minus[i] -= h;
        let gp = loglik_and_grad(series, &params_from(plus)).1;
        let gm = loglik_and_grad(series, &params_from(minus)).1;
        for (col, &j) in active.iter().enumerate() {
            hess[(row, col)] = (gp[j] - gm[j]) / (2.0 * h);
        }
    }
    let info = -(&hess + hess.transpose()) * 0.5;
    let mut out = [0.0f64; 6];
    if let Some(cov) = info.try_inverse() {
        for (row, &i) in active.iter().enumerate() {
            let v = cov[(row, row)];
            out[i] = if v > 0.0 { v.sqrt() } else { f64::NAN };
        }
    } else {
        for &i in active {
            out[i] = f64::NAN;
        }
    }
    out
}

fn params_from(a: [f64; 6]) -> GarchParams {
    GarchParams { c: a[0], phi: a[1], k: a[2], gamma: a[3], alpha: a[4], xi: a[5] }
}
