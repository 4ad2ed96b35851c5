//! Gaussian goal reward and its closed-form expectation under a Gaussian
//! end-effector belief.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::{Error, Result};

/// Gaussian goal region: centre `ḡ` [m] and width covariance `W` [m²].
#[derive(Debug, Clone, PartialEq)]
pub struct GoalSpec {
    pub center: DVector<f64>,
    pub width: DMatrix<f64>,
}

impl GoalSpec {
    pub fn new(center: DVector<f64>, width: DMatrix<f64>) -> Result<Self> {
        let g = GoalSpec { center, width };
        g.validate()?;
        Ok(g)
    }

    /// Axis-aligned goal with per-axis standard widths `radius` [m], so that
    /// `W = diag(radius²)`.
    pub fn with_radii(center: &[f64], radius: &[f64]) -> Result<Self> {
        if center.len() != radius.len() {
            return Err(Error::DimensionMismatch("goal centre and radii differ in length".into()));
        }
        let w = DVector::from_iterator(radius.len(), radius.iter().map(|r| r * r));
        Self::new(DVector::from_column_slice(center), DMatrix::from_diagonal(&w))
    }

    /// Isotropic goal with standard width `radius` on every axis.
    pub fn isotropic(center: &[f64], radius: f64) -> Result<Self> {
        Self::with_radii(center, &vec![radius; center.len()])
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `√diag(W)` [m].
    pub fn radii(&self) -> DVector<f64> {
        self.width.diagonal().map(f64::sqrt)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.center.len();
        if self.width.shape() != (d, d) {
            return Err(Error::InvalidGoal(format!(
                "width is {}x{}, centre has {d} entries",
                self.width.nrows(),
                self.width.ncols()
            )));
        }
        if !self.center.iter().chain(self.width.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidGoal("non-finite entries".into()));
        }
        if (&self.width - self.width.transpose()).amax() > 1e-12 * self.width.amax().max(1.0) {
            return Err(Error::InvalidGoal("width is not symmetric".into()));
        }
        if self.width.clone().cholesky().is_none() {
            return Err(Error::InvalidGoal("width is not positive definite".into()));
        }
        Ok(())
    }

    /// Squared Mahalanobis distance `‖x − ḡ‖²_{W⁻¹}`.
    pub fn mahalanobis_sq(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.center;
        let chol = self.width.clone().cholesky().expect("validated goal width");
        d.dot(&chol.solve(&d))
    }
}

fn factor(s: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    match s.clone().cholesky() {
        Some(c) => Ok(c),
        None => {
            let eig = s.symmetric_eigenvalues();
            let hi = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let lo = eig.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
            Err(Error::IllConditioned { condition: if lo > 0.0 { hi / lo } else { f64::INFINITY } })
        }
    }
}

fn gaussian(d: &DVector<f64>, s: DMatrix<f64>) -> Result<(f64, Cholesky<f64, Dyn>)> {
    let k = d.len() as f64;
    let chol = factor(s)?;
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let quad = d.dot(&chol.solve(d));
    Ok(((-0.5 * (k * (2.0 * PI).ln() + log_det + quad)).exp(), chol))
}

/// Goal density at a deterministic end-effector position.
pub fn reward_density(x: &DVector<f64>, goal: &GoalSpec) -> Result<f64> {
    if x.len() != goal.dim() {
        return Err(Error::DimensionMismatch("position and goal dimension differ".into()));
    }
    goal.validate()?;
    Ok(gaussian(&(x - &goal.center), goal.width.clone())?.0)
}

/// `E[reward_density(x)]` for `x ~ N(mu_x, sigma_x)`:
/// `|2π(Σ+W)|^(−1/2) exp(−½‖μ−ḡ‖²_{(Σ+W)⁻¹})`.
pub fn expected_reward(mu_x: &DVector<f64>, sigma_x: &DMatrix<f64>, goal: &GoalSpec) -> Result<f64> {
    if mu_x.len() != goal.dim() || sigma_x.shape() != (goal.dim(), goal.dim()) {
        return Err(Error::DimensionMismatch("belief and goal dimension differ".into()));
    }
    Ok(gaussian(&(mu_x - &goal.center), sigma_x + &goal.width)?.0)
}

/// Expected reward with its gradients with respect to the mean and the
/// covariance of the end-effector belief.
pub fn expected_reward_grad(
    mu_x: &DVector<f64>,
    sigma_x: &DMatrix<f64>,
    goal: &GoalSpec,
) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    if mu_x.len() != goal.dim() || sigma_x.shape() != (goal.dim(), goal.dim()) {
        return Err(Error::DimensionMismatch("belief and goal dimension differ".into()));
    }
    let d = mu_x - &goal.center;
    let (r, chol) = gaussian(&d, sigma_x + &goal.width)?;
    let s_inv = chol.inverse();
    let sd = &s_inv * &d;
    let g_mu = &sd * -r;
    let g_sigma = (&sd * sd.transpose() - s_inv) * (0.5 * r);
    Ok((r, g_mu, g_sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn goal1(w: f64) -> GoalSpec {
        GoalSpec::isotropic(&[0.0], w).unwrap()
    }

    #[test]
    fn density_peak_and_pdf() {
        let g = goal1(0.04);
        let peak = reward_density(&DVector::from_vec(vec![0.0]), &g).unwrap();
        assert_relative_eq!(peak, 1.0 / (2.0 * PI * 0.04f64.powi(2)).sqrt(), max_relative = 1e-14);
        let at_sigma = reward_density(&DVector::from_vec(vec![0.04]), &g).unwrap();
        let pdf = (-0.5f64).exp() / (0.04 * (2.0 * PI).sqrt());
        assert_relative_eq!(at_sigma, pdf, max_relative = 1e-14);
        let far = reward_density(&DVector::from_vec(vec![10.0]), &g).unwrap();
        assert_eq!(far, 0.0);
    }

    #[test]
    fn expected_reward_reduces_to_density_without_uncertainty() {
        let g = GoalSpec::with_radii(&[0.3, 0.1], &[0.02, 0.03]).unwrap();
        let x = DVector::from_vec(vec![0.31, 0.08]);
        let a = expected_reward(&x, &DMatrix::zeros(2, 2), &g).unwrap();
        assert_relative_eq!(a, reward_density(&x, &g).unwrap(), max_relative = 1e-14);
        let s = DMatrix::from_row_slice(2, 2, &[4e-4, 1e-4, 1e-4, 3e-4]);
        let at_goal = expected_reward(&g.center, &s, &g).unwrap();
        let expected = 1.0 / ((2.0 * PI).powi(2) * (&s + &g.width).determinant()).sqrt();
        assert_relative_eq!(at_goal, expected, max_relative = 1e-12);
    }

    #[test]
    fn invalid_goal_and_singular_sum() {
        let bad = GoalSpec { center: DVector::zeros(1), width: DMatrix::from_element(1, 1, -1.0) };
        assert!(matches!(reward_density(&DVector::zeros(1), &bad), Err(Error::InvalidGoal(_))));
        assert!(GoalSpec::new(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0])).is_err());
        let g = GoalSpec { center: DVector::zeros(2), width: DMatrix::zeros(2, 2) };
        let err = expected_reward(&DVector::zeros(2), &DMatrix::zeros(2, 2), &g).unwrap_err();
        assert!(matches!(err, Error::IllConditioned { .. }));
    }

    #[test]
    fn gradient_vanishes_at_goal_and_trace_is_negative() {
        let g = GoalSpec::with_radii(&[0.3, 0.0], &[0.02, 0.02]).unwrap();
        let s = DMatrix::from_diagonal_element(2, 2, 1e-4);
        let (_, gm, gs) = expected_reward_grad(&g.center, &s, &g).unwrap();
        assert_eq!(gm.amax(), 0.0);
        assert!(gs.trace() < 0.0);
        let eps = 1e-9;
        let up = expected_reward(&g.center, &(&s + DMatrix::identity(2, 2) * eps), &g).unwrap();
        let dn = expected_reward(&g.center, &(&s - DMatrix::identity(2, 2) * eps), &g).unwrap();
        assert!(up < dn);
    }

    fn fd_check(mu: DVector<f64>, sigma: DMatrix<f64>, goal: &GoalSpec) -> f64 {
        let (_, gm, gs) = expected_reward_grad(&mu, &sigma, goal).unwrap();
        let f = |m: &DVector<f64>, s: &DMatrix<f64>| expected_reward(m, s, goal).unwrap();
        let mut worst: f64 = 0.0;
        let scale = gm.amax().max(gs.amax());
        for i in 0..mu.len() {
            let h = 1e-7;
            let mut p = mu.clone();
            let mut m = mu.clone();
            p[i] += h;
            m[i] -= h;
            let fd = (f(&p, &sigma) - f(&m, &sigma)) / (2.0 * h);
            worst = worst.max((fd - gm[i]).abs() / scale);
        }
        // Symmetric perturbations: entries (i, j) and (j, i) move together.
        for i in 0..mu.len() {
            for j in 0..=i {
                let h = 1e-9;
                let mut p = sigma.clone();
                let mut m = sigma.clone();
                p[(i, j)] += h;
                m[(i, j)] -= h;
                if i != j {
                    p[(j, i)] += h;
                    m[(j, i)] -= h;
                }
                let fd = (f(&mu, &p) - f(&mu, &m)) / (2.0 * h);
                let analytic = if i == j { gs[(i, i)] } else { gs[(i, j)] + gs[(j, i)] };
                worst = worst.max((fd - analytic).abs() / scale);
            }
        }
        worst
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(dx in -0.05..0.05f64, dy in -0.05..0.05f64,
                                               s0 in 1e-5..1e-3f64, s1 in 1e-5..1e-3f64, rho in -0.8..0.8f64,
                                               w in 0.01..0.05f64) {
            let g = GoalSpec::with_radii(&[0.3, 0.0], &[w, 1.3 * w]).unwrap();
            let c = rho * (s0 * s1).sqrt();
            let sigma = DMatrix::from_row_slice(2, 2, &[s0, c, c, s1]);
            let err = fd_check(DVector::from_vec(vec![0.3 + dx, dy]), sigma, &g);
            prop_assert!(err < 1e-5, "relative error {err}");
        }

        #[test]
        fn decreases_along_rays(dir in 0.0..std::f64::consts::TAU, r in 0.0..0.1f64, step in 1e-4..0.05f64, s in 0.0..1e-3f64) {
            let g = GoalSpec::isotropic(&[0.0, 0.0], 0.02).unwrap();
            let sigma = DMatrix::from_diagonal_element(2, 2, s);
            let u = DVector::from_vec(vec![dir.cos(), dir.sin()]);
            let near = expected_reward(&(&u * r), &sigma, &g).unwrap();
            let far = expected_reward(&(&u * (r + step)), &sigma, &g).unwrap();
            prop_assert!(far < near);
        }

        #[test]
        fn uncertainty_lowers_peak(a in 0.0..1e-2f64, b in 1e-6..1e-2f64) {
            let g = GoalSpec::isotropic(&[0.1, 0.2], 0.03).unwrap();
            let lo = expected_reward(&g.center, &DMatrix::from_diagonal_element(2, 2, a), &g).unwrap();
            let hi = expected_reward(&g.center, &DMatrix::from_diagonal_element(2, 2, a + b), &g).unwrap();
            prop_assert!(hi < lo);
        }
    }
}
