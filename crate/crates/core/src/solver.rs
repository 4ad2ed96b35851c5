//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOpts {
    /// Stop when `‖∇f‖∞ < grad_tol·(1 + |f|)`.
    pub grad_tol: f64,
    /// Stop when `‖Δx‖∞ < step_tol·(1 + ‖x‖∞)`.
    pub step_tol: f64,
    pub max_iters: usize,
    /// Number of stored secant pairs.
    pub memory: usize,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts { grad_tol: 1e-6, step_tol: 1e-12, max_iters: 2000, memory: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradientTolerance,
    StepTolerance,
    MaxIterations,
    LineSearchFailure,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub evaluations: usize,
    pub value: f64,
    /// `‖∇f‖∞` at the returned point.
    pub grad_norm: f64,
    pub converged: bool,
    pub termination: Termination,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Minimize `f`, which returns the value and gradient at a point.
pub fn minimize<F>(mut f: F, x0: DVector<f64>, opts: &SolverOpts) -> (DVector<f64>, Diagnostics)
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut evals = 1;
    let mut pairs: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let finish = |x: DVector<f64>, fx: f64, g: &DVector<f64>, iters, evals, t: Termination| {
        let grad_norm = g.amax();
        let converged = fx.is_finite() && grad_norm < opts.grad_tol * (1.0 + fx.abs());
        (x, Diagnostics { iterations: iters, evaluations: evals, value: fx, grad_norm, converged, termination: t })
    };
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return finish(x, fx, &g, 0, evals, Termination::NonFinite);
    }

    for iter in 0..opts.max_iters {
        if g.amax() < opts.grad_tol * (1.0 + fx.abs()) {
            return finish(x, fx, &g, iter, evals, Termination::GradientTolerance);
        }

        let mut d = two_loop(&g, &pairs);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            pairs.clear();
            d = -&g;
            slope = g.dot(&d);
        }
        let mut alpha = if pairs.is_empty() { (1.0 / g.amax()).min(1.0) } else { 1.0 };

        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let xn = &x + &d * alpha;
            let (fn_, gn) = f(&xn);
            evals += 1;
            let finite = fn_.is_finite() && gn.iter().all(|v| v.is_finite());
            if finite && fn_ <= fx + ARMIJO * alpha * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            let next = if finite {
                // Minimizer of the quadratic through f(0), f'(0), f(alpha).
                let denom = 2.0 * (fn_ - fx - slope * alpha);
                if denom > 0.0 { -slope * alpha * alpha / denom } else { 0.5 * alpha }
            } else {
                0.1 * alpha
            };
            alpha = next.clamp(0.1 * alpha, 0.5 * alpha);
        }
        let Some((xn, fn_, gn)) = accepted else {
            return finish(x, fx, &g, iter, evals, Termination::LineSearchFailure);
        };

        let s = &xn - &x;
        let y = &gn - &g;
        let small_step = s.amax() < opts.step_tol * (1.0 + x.amax());
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if pairs.len() == opts.memory.max(1) {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
        if small_step {
            return finish(x, fx, &g, iter + 1, evals, Termination::StepTolerance);
        }
    }
    finish(x, fx, &g, opts.max_iters, evals, Termination::MaxIterations)
}

fn two_loop(g: &DVector<f64>, pairs: &VecDeque<(DVector<f64>, DVector<f64>, f64)>) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * s.dot(&q);
        q.axpy(-a, y, 1.0);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q.axpy(a - b, s, 1.0);
    }
    -q
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn convex_quadratic() {
        let dim = 6;
        let l = DMatrix::from_fn(dim, dim, |i, j| if i >= j { 1.0 / (1.0 + i as f64 + j as f64) } else { 0.0 });
        let a = &l * l.transpose() + DMatrix::identity(dim, dim);
        let opts = SolverOpts { grad_tol: 1e-14, ..Default::default() };
        let x0 = DVector::from_fn(dim, |i, _| 1.0 - 0.3 * i as f64);
        let (x, diag) = minimize(|x| (x.dot(&(&a * x)), (&a * x) * 2.0), x0, &opts);
        assert!(x.amax() < 1e-10, "{x}");
        assert!(diag.iterations <= dim + 5, "{} iterations", diag.iterations);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &DVector<f64>| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = DVector::from_vec(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]);
            (v, g)
        };
        let opts = SolverOpts { grad_tol: 1e-12, ..Default::default() };
        let (x, diag) = minimize(f, DVector::from_vec(vec![-1.2, 1.0]), &opts);
        assert!(diag.converged);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x}");
    }

    #[test]
    fn nonfinite_start_is_flagged() {
        let (_, diag) = minimize(|_| (f64::NAN, DVector::zeros(1)), DVector::zeros(1), &SolverOpts::default());
        assert_eq!(diag.termination, Termination::NonFinite);
        assert!(!diag.converged);
    }
}
