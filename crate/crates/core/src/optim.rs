//! Minimal BFGS minimizer with Armijo backtracking, used for the GARCH
//! quasi-maximum-likelihood fits. Deterministic: no randomness, fixed
//! iteration order, and every accepted step strictly decreases the objective.

use nalgebra::{DMatrix, DVector};

pub(crate) struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each accepted step, starting value included.
    pub f_history: Vec<f64>,
}

/// Minimize `eval` (returning objective and gradient) from `x0`.
///
/// Stops when the relative objective change drops below `rel_tol`, the
/// gradient vanishes, or `max_iter` accepted steps have been taken.
pub(crate) fn bfgs<F>(x0: &[f64], mut eval: F, max_iter: usize, rel_tol: f64) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut f, g) = eval(x.as_slice());
    let mut g = DVector::from_vec(g);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut history = vec![f];
    let mut converged = false;
    let mut iterations = 0;

    if !f.is_finite() {
        return BfgsOutcome { x: x0.to_vec(), f, iterations: 0, converged: false, f_history: history };
    }

    for iter in 0..max_iter {
        iterations = iter;
        if g.amax() <= 1e-10 * (1.0 + f.abs()) {
            converged = true;
            break;
        }
        let mut dir = -(&h * &g);
        if dir.dot(&g) >= 0.0 {
            // Stale curvature; fall back to steepest descent.
            h = DMatrix::identity(n, n);
            dir = -g.clone();
        }

        // Armijo backtracking.
        let slope = dir.dot(&g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &x + &dir * step;
            let (fc, gc) = eval(cand.as_slice());
            if fc.is_finite() && fc <= f + 1e-4 * step * slope {
                accepted = Some((cand, fc, DVector::from_vec(gc)));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // No acceptable step along this direction; treat as converged if
            // the objective is already flat, otherwise give up.
            converged = (history.len() > 1)
                && (history[history.len() - 2] - f).abs() <= rel_tol * (1.0 + f.abs());
            break;
        };

        debug_assert!(f_new <= f, "accepted step must not increase the objective");
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let id = DMatrix::<f64>::identity(n, n);
            let left = &id - (&s * y.transpose()) * rho;
            let right = &id - (&y * s.transpose()) * rho;
            h = &left * h * &right + (&s * s.transpose()) * rho;
        }

        let f_prev = f;
        x = x_new;
        f = f_new;
        g = g_new;
        history.push(f);

        if (f_prev - f).abs() <= rel_tol * (1.0 + f.abs()) {
            converged = true;
            iterations = iter + 1;
            break;
        }
    }

    BfgsOutcome { x: x.as_slice().to_vec(), f, iterations, converged, f_history: history }
}
