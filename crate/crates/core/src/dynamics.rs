//! Forward-Euler discretization of `M q̈ + D q̇ + G(q) = τ(1 + ε)` and
//! Gaussian belief propagation under multiplicative torque noise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::kinematics::Kinematics;
use crate::{Error, Result};

/// Standard gravity [m/s²], acting along −y for the planar arm.
pub const GRAVITY: f64 = 9.81;

/// How the torque noise enters the covariance update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseForm {
    /// `B diag(τ) κ diag(τ) Bᵀ`, the second moment of `τ ∘ ε`.
    #[default]
    Corrected,
    /// `B (ττᵀ + diag(τ) κ diag(τ)) Bᵀ`, i.e. `Bτ(1+κ)τᵀBᵀ` read elementwise.
    Literal,
}

/// Diagonal multiplicative torque noise `ε ~ N(0, diag(cov))`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub cov: DVector<f64>,
    pub form: NoiseForm,
}

impl NoiseModel {
    pub fn corrected(cov: DVector<f64>) -> Self {
        NoiseModel { cov, form: NoiseForm::Corrected }
    }

    /// Torque-space covariance injected by commanding `torque`.
    pub fn torque_cov(&self, torque: &DVector<f64>) -> DMatrix<f64> {
        let n = torque.len();
        let mut out = match self.form {
            NoiseForm::Corrected => DMatrix::zeros(n, n),
            NoiseForm::Literal => torque * torque.transpose(),
        };
        for i in 0..n {
            out[(i, i)] += self.cov[i] * torque[i] * torque[i];
        }
        out
    }
}

/// Rigid-body parameters of a planar two-link arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSegments {
    /// Link lengths [m].
    pub l1: f64,
    pub l2: f64,
    /// Link masses [kg].
    pub m1: f64,
    pub m2: f64,
    /// Joint-to-centre-of-mass distances [m].
    pub lc1: f64,
    pub lc2: f64,
    /// Link inertias about their centres of mass [kg·m²].
    pub i1: f64,
    pub i2: f64,
}

impl ArmSegments {
    /// Uniform rods of the given lengths and masses.
    pub fn uniform(l1: f64, l2: f64, m1: f64, m2: f64) -> Self {
        ArmSegments {
            l1,
            l2,
            m1,
            m2,
            lc1: 0.5 * l1,
            lc2: 0.5 * l2,
            i1: m1 * l1 * l1 / 12.0,
            i2: m2 * l2 * l2 / 12.0,
        }
    }
}

/// Joint-space inertia.
#[derive(Debug, Clone, PartialEq)]
pub enum Inertia {
    Constant(DMatrix<f64>),
    TwoLink(ArmSegments),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub n_q: usize,
    pub inertia: Inertia,
    /// Viscous damping `D` [N·m·s/rad].
    pub damping: DMatrix<f64>,
    pub gravity_enabled: bool,
    pub noise: NoiseModel,
    pub kinematics: Kinematics,
}

impl PlantModel {
    /// Point mass in `dim` Cartesian axes: `M = mass·I`, `D = damping·I`,
    /// identity kinematics.
    pub fn cartesian(dim: usize, mass: f64, damping: f64, kappa: f64) -> Self {
        PlantModel {
            n_q: dim,
            inertia: Inertia::Constant(DMatrix::identity(dim, dim) * mass),
            damping: DMatrix::identity(dim, dim) * damping,
            gravity_enabled: false,
            noise: NoiseModel::corrected(DVector::from_element(dim, kappa)),
            kinematics: Kinematics::Identity { dim },
        }
    }

    pub fn two_link(arm: ArmSegments, damping: f64, kappa: f64, gravity_enabled: bool) -> Self {
        PlantModel {
            n_q: 2,
            inertia: Inertia::TwoLink(arm),
            damping: DMatrix::identity(2, 2) * damping,
            gravity_enabled,
            noise: NoiseModel::corrected(DVector::from_element(2, kappa)),
            kinematics: Kinematics::TwoLinkPlanar { l1: arm.l1, l2: arm.l2 },
        }
    }

    /// True when `A`, `B` do not depend on the configuration.
    pub fn is_linear(&self) -> bool {
        matches!(self.inertia, Inertia::Constant(_)) && !self.has_gravity()
    }

    fn has_gravity(&self) -> bool {
        self.gravity_enabled && matches!(self.inertia, Inertia::TwoLink(_))
    }

    pub fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match &self.inertia {
            Inertia::Constant(m) => m.clone(),
            Inertia::TwoLink(a) => {
                let c2 = q[1].cos();
                let m11 = a.i1 + a.i2 + a.m1 * a.lc1 * a.lc1
                    + a.m2 * (a.l1 * a.l1 + a.lc2 * a.lc2 + 2.0 * a.l1 * a.lc2 * c2);
                let m12 = a.i2 + a.m2 * (a.lc2 * a.lc2 + a.l1 * a.lc2 * c2);
                let m22 = a.i2 + a.m2 * a.lc2 * a.lc2;
                DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m22])
            }
        }
    }

    /// `∂M/∂q_k` for every joint `k`.
    pub fn mass_matrix_derivatives(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let n = self.n_q;
        let mut out = vec![DMatrix::zeros(n, n); n];
        if let Inertia::TwoLink(a) = &self.inertia {
            let s2 = q[1].sin();
            let d11 = -2.0 * a.m2 * a.l1 * a.lc2 * s2;
            let d12 = -a.m2 * a.l1 * a.lc2 * s2;
            out[1] = DMatrix::from_row_slice(2, 2, &[d11, d12, d12, 0.0]);
        }
        out
    }

    /// Gravity torque `G(q)`; zero unless the plant is the arm with gravity on.
    pub fn gravity(&self, q: &DVector<f64>) -> DVector<f64> {
        match &self.inertia {
            Inertia::TwoLink(a) if self.gravity_enabled => {
                let c1 = q[0].cos();
                let c12 = (q[0] + q[1]).cos();
                let g2 = a.m2 * a.lc2 * GRAVITY * c12;
                let g1 = (a.m1 * a.lc1 + a.m2 * a.l1) * GRAVITY * c1 + g2;
                DVector::from_vec(vec![g1, g2])
            }
            _ => DVector::zeros(self.n_q),
        }
    }

    /// `∂G/∂q`, shape `n_q × n_q`.
    pub fn gravity_jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match &self.inertia {
            Inertia::TwoLink(a) if self.gravity_enabled => {
                let s1 = q[0].sin();
                let s12 = (q[0] + q[1]).sin();
                let d2 = -a.m2 * a.lc2 * GRAVITY * s12;
                let d11 = -(a.m1 * a.lc1 + a.m2 * a.l1) * GRAVITY * s1 + d2;
                DMatrix::from_row_slice(2, 2, &[d11, d2, d2, d2])
            }
            _ => DMatrix::zeros(self.n_q, self.n_q),
        }
    }

    /// One forward-Euler step of the noiseless nonlinear dynamics under the
    /// applied torque `u`.
    pub fn euler_step(&self, state: &DVector<f64>, u: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
        let n = self.n_q;
        let q = state.rows(0, n).into_owned();
        let v = state.rows(n, n).into_owned();
        let m = self.mass_matrix(&q);
        let rhs = u - &self.damping * &v - self.gravity(&q);
        let acc = m
            .cholesky()
            .ok_or_else(|| Error::SingularInertia { config: q.as_slice().to_vec() })?
            .solve(&rhs);
        let mut next = DVector::zeros(2 * n);
        next.rows_mut(0, n).copy_from(&(&q + &v * h));
        next.rows_mut(n, n).copy_from(&(&v + acc * h));
        Ok(next)
    }
}

/// Gaussian belief over `s = [q; q̇]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl StateGaussian {
    pub fn deterministic(mean: DVector<f64>) -> Self {
        let n = mean.len();
        StateGaussian { mean, cov: DMatrix::zeros(n, n) }
    }

    /// Deterministic state with the given joint positions and velocities.
    pub fn at(q: &[f64], qd: &[f64]) -> Self {
        Self::deterministic(DVector::from_iterator(q.len() + qd.len(), q.iter().chain(qd).copied()))
    }

    pub fn n_q(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn position(&self) -> DVector<f64> {
        self.mean.rows(0, self.n_q()).into_owned()
    }

    pub fn velocity(&self) -> DVector<f64> {
        let n = self.n_q();
        self.mean.rows(n, n).into_owned()
    }

    pub fn position_cov(&self) -> DMatrix<f64> {
        let n = self.n_q();
        self.cov.view((0, 0), (n, n)).into_owned()
    }
}

/// `s⁺ = A s + B τ + offset`, the linearized one-step map.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLti {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Known feedforward term `−B·G(q_lin)`; zero for linear plants.
    pub offset: DVector<f64>,
    /// Step [s].
    pub step: f64,
}

/// Linearize the plant at `q_lin` and discretize with forward Euler.
pub fn discretize(model: &PlantModel, q_lin: &DVector<f64>, h: f64) -> Result<DiscreteLti> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
    }
    let n = model.n_q;
    let m = model.mass_matrix(q_lin);
    let m_inv = m
        .cholesky()
        .ok_or_else(|| Error::SingularInertia { config: q_lin.as_slice().to_vec() })?
        .inverse();
    let mut a = DMatrix::identity(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_diagonal(h);
    let lower = DMatrix::identity(n, n) - &m_inv * &model.damping * h;
    a.view_mut((n, n), (n, n)).copy_from(&lower);
    let mut b = DMatrix::zeros(2 * n, n);
    b.view_mut((n, 0), (n, n)).copy_from(&(&m_inv * h));
    let offset = if model.has_gravity() {
        -(&b * model.gravity(q_lin))
    } else {
        DVector::zeros(2 * n)
    };
    Ok(DiscreteLti { a, b, offset, step: h })
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn propagate(
    state: &StateGaussian,
    lti: &DiscreteLti,
    torque: &DVector<f64>,
    noise: &NoiseModel,
) -> StateGaussian {
    let mean = &lti.a * &state.mean + &lti.b * torque + &lti.offset;
    let mut cov = &lti.a * &state.cov * lti.a.transpose()
        + &lti.b * noise.torque_cov(torque) * lti.b.transpose();
    symmetrize(&mut cov);
    StateGaussian { mean, cov }
}

/// Chain `propagate` over a torque sequence (one row per step).
pub fn propagate_trajectory(
    state0: &StateGaussian,
    lti_seq: &[DiscreteLti],
    torques: &DMatrix<f64>,
    noise: &NoiseModel,
) -> Result<Vec<StateGaussian>> {
    if torques.nrows() != lti_seq.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} torque rows for {} steps",
            torques.nrows(),
            lti_seq.len()
        )));
    }
    let mut out = Vec::with_capacity(lti_seq.len() + 1);
    out.push(state0.clone());
    for (i, lti) in lti_seq.iter().enumerate() {
        let tau = torques.row(i).transpose();
        let next = propagate(out.last().unwrap(), lti, &tau, noise);
        out.push(next);
    }
    Ok(out)
}

/// Propagate through the plant, re-linearizing at the current mean
/// configuration before every step. Returns the states and the
/// linearizations used.
pub fn propagate_plant(
    state0: &StateGaussian,
    plant: &PlantModel,
    torques: &DMatrix<f64>,
    h: f64,
) -> Result<(Vec<StateGaussian>, Vec<DiscreteLti>)> {
    let steps = torques.nrows();
    let mut states = Vec::with_capacity(steps + 1);
    let mut ltis = Vec::with_capacity(steps);
    states.push(state0.clone());
    let fixed = if plant.is_linear() {
        Some(discretize(plant, &state0.position(), h)?)
    } else {
        None
    };
    for i in 0..steps {
        let cur = states.last().unwrap();
        let lti = match &fixed {
            Some(l) => l.clone(),
            None => discretize(plant, &cur.position(), h)?,
        };
        let tau = torques.row(i).transpose();
        states.push(propagate(cur, &lti, &tau, &plant.noise));
        ltis.push(lti);
    }
    Ok((states, ltis))
}
