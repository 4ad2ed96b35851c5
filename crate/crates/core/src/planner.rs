//! Single-shooting trajectory optimization of the discounted expected
//! goal reward minus torque effort, and its goal-inference variant.

use std::ops::AddAssign;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{discretize, propagate_plant, DiscreteLti, PlantModel, StateGaussian};
use crate::reward::{expected_reward, expected_reward_grad, GoalSpec};
use crate::solver::{minimize, SolverOpts, Termination};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CostParams {
    pub goal: GoalSpec,
    /// Per-step discount γ ∈ (0, 1].
    pub discount: f64,
    /// Effort weight ν on `‖τ‖²`.
    pub effort_weight: f64,
    /// Number of control steps H.
    pub horizon: usize,
    /// Step h [s].
    pub step: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        self.goal.validate()?;
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::InvalidInput("discount must lie in (0,1]".into()));
        }
        if !(self.effort_weight >= 0.0) {
            return Err(Error::InvalidInput("effort weight must be nonnegative".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if !(self.step > 0.0) {
            return Err(Error::InvalidInput("step must be positive".into()));
        }
        Ok(())
    }

    pub fn with_goal(&self, goal: GoalSpec) -> Self {
        CostParams { goal, ..self.clone() }
    }
}

/// Norm used for the goal-prior regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerNorm {
    /// `‖ĝ − ḡ‖²_{W⁻¹}`.
    #[default]
    Squared,
    /// `‖ĝ − ḡ‖_{W⁻¹}`, smoothed at the origin.
    Unsquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerOpts {
    #[serde(flatten)]
    pub solver: SolverOpts,
    /// Number of minimum-effort seed trajectories of distinct durations
    /// tried in addition to the all-zero seed.
    pub seeds: usize,
    /// Tolerance on `‖μ_{n_o} − s^o‖∞` for goal inference.
    pub constraint_tol: f64,
    pub penalty_start: f64,
    pub penalty_growth: f64,
    pub penalty_rounds: usize,
    pub regularizer: RegularizerNorm,
}

impl Default for PlannerOpts {
    fn default() -> Self {
        PlannerOpts {
            solver: SolverOpts::default(),
            seeds: 8,
            constraint_tol: 1e-6,
            penalty_start: 1e2,
            penalty_growth: 10.0,
            penalty_rounds: 6,
            regularizer: RegularizerNorm::Squared,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    /// `H × n_q` torques [N·m].
    pub torques: DMatrix<f64>,
    /// Beliefs `s_0 … s_H`.
    pub states: Vec<StateGaussian>,
    pub objective: f64,
    pub iterations: usize,
    /// `‖∇J‖∞` at the returned torques.
    pub grad_norm: f64,
    /// [s]
    pub wall_time: f64,
    /// Control step h [s].
    pub step: f64,
    pub converged: bool,
    pub termination: Termination,
}

/// Observed joint state at time `t_o`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub state: DVector<f64>,
    /// [s]
    pub time: f64,
}

/// `Σ_i −γ^i·E[R_i] + ν Σ_i ‖τ_i‖²` along the propagated belief.
pub fn objective(torques: &DMatrix<f64>, state0: &StateGaussian, plant: &PlantModel, cost: &CostParams) -> Result<f64> {
    let (states, _) = propagate_plant(state0, plant, torques, cost.step)?;
    let mut value = cost.effort_weight * torques.norm_squared();
    let mut weight = 1.0;
    for s in &states {
        let (mu, sigma) = ee_belief(plant, s);
        value -= weight * expected_reward(&mu, &sigma, &cost.goal)?;
        weight *= cost.discount;
    }
    Ok(value)
}

/// Objective and its gradient with respect to the torques.
pub fn objective_grad(
    torques: &DMatrix<f64>,
    state0: &StateGaussian,
    plant: &PlantModel,
    cost: &CostParams,
) -> Result<(f64, DMatrix<f64>)> {
    let e = evaluate(torques, state0, plant, cost, &cost.goal.center, None)?;
    Ok((e.value, e.grad_torques))
}

/// End-effector mean and linearized covariance of a joint-space belief.
pub fn ee_belief(plant: &PlantModel, s: &StateGaussian) -> (DVector<f64>, DMatrix<f64>) {
    let q = s.position();
    let j = plant.kinematics.jacobian(&q);
    (plant.kinematics.forward(&q), &j * s.position_cov() * j.transpose())
}

/// Undiscounted expected reward at every belief.
pub fn stage_rewards(states: &[StateGaussian], plant: &PlantModel, goal: &GoalSpec) -> Result<Vec<f64>> {
    states
        .iter()
        .map(|s| {
            let (mu, sigma) = ee_belief(plant, s);
            expected_reward(&mu, &sigma, goal)
        })
        .collect()
}

struct StatePenalty<'a> {
    step: usize,
    target: &'a DVector<f64>,
    multiplier: &'a DVector<f64>,
    weight: f64,
}

struct Evaluation {
    value: f64,
    grad_torques: DMatrix<f64>,
    grad_goal: DVector<f64>,
}

/// Forward propagation followed by reverse-mode accumulation of the
/// adjoints `λ_i = ∂L/∂μ_i` and `Λ_i = ∂L/∂Σ_i`.
fn evaluate(
    torques: &DMatrix<f64>,
    state0: &StateGaussian,
    plant: &PlantModel,
    cost: &CostParams,
    goal_center: &DVector<f64>,
    penalty: Option<&StatePenalty>,
) -> Result<Evaluation> {
    let n = plant.n_q;
    let h = cost.step;
    let steps = torques.nrows();
    let (states, ltis) = propagate_plant(state0, plant, torques, h)?;
    let goal = GoalSpec { center: goal_center.clone(), width: cost.goal.width.clone() };
    let kin = &plant.kinematics;
    let curved = !matches!(kin, crate::Kinematics::Identity { .. });

    let mut value = cost.effort_weight * torques.norm_squared();
    let mut lam: Vec<DVector<f64>> = vec![DVector::zeros(2 * n); steps + 1];
    let mut big: Vec<DMatrix<f64>> = vec![DMatrix::zeros(2 * n, 2 * n); steps + 1];
    let mut grad_goal = DVector::zeros(goal.dim());

    let mut weight = 1.0;
    for (i, s) in states.iter().enumerate() {
        let q = s.position();
        let j = kin.jacobian(&q);
        let sqq = s.position_cov();
        let sigma_x = &j * &sqq * j.transpose();
        let (r, g_mu, g_sigma) = expected_reward_grad(&kin.forward(&q), &sigma_x, &goal)?;
        let w = -weight;
        value += w * r;
        grad_goal -= &g_mu * w;
        let mut lq = j.transpose() * &g_mu * w;
        if curved {
            let dl_dj = &g_sigma * &j * &sqq * (2.0 * w);
            for (k, dj) in kin.jacobian_derivatives(&q).iter().enumerate() {
                lq[k] += dl_dj.component_mul(dj).sum();
            }
        }
        lam[i].rows_mut(0, n).add_assign(&lq);
        let lqq = j.transpose() * &g_sigma * &j * w;
        big[i].view_mut((0, 0), (n, n)).add_assign(&lqq);
        weight *= cost.discount;
    }

    if let Some(p) = penalty {
        let c = &states[p.step].mean - p.target;
        value += p.multiplier.dot(&c) + 0.5 * p.weight * c.norm_squared();
        lam[p.step] += p.multiplier + &c * p.weight;
    }

    let mut grad = torques * (2.0 * cost.effort_weight);
    let kappa = &plant.noise.cov;
    let literal = plant.noise.form == crate::NoiseForm::Literal;
    for i in (0..steps).rev() {
        let lti: &DiscreteLti = &ltis[i];
        let tau = torques.row(i).transpose();
        let lp = lam[i + 1].clone();
        let bp = big[i + 1].clone();
        let bt_lam = lti.b.transpose() * &lp;
        let p = lti.b.transpose() * &bp * &lti.b;
        let mut g_tau = bt_lam.clone();
        for k in 0..n {
            g_tau[k] += 2.0 * kappa[k] * tau[k] * p[(k, k)];
        }
        if literal {
            g_tau += &p * &tau * 2.0;
        }
        for k in 0..n {
            grad[(i, k)] += g_tau[k];
        }
        lam[i] += lti.a.transpose() * &lp;
        big[i] += lti.a.transpose() * &bp * &lti.a;

        if !plant.is_linear() {
            let s = &states[i];
            let q = s.position();
            let gq = plant.gravity(&q);
            let u = &tau - &gq;
            let noise = plant.noise.torque_cov(&tau);
            let g_a = &lp * s.mean.transpose() + &bp * &lti.a * &s.cov * 2.0;
            let g_b = &lp * u.transpose() + &bp * &lti.b * &noise * 2.0;
            let m_inv = plant
                .mass_matrix(&q)
                .cholesky()
                .ok_or_else(|| Error::SingularInertia { config: q.as_slice().to_vec() })?
                .inverse();
            let d_minv = -(g_a.view((n, n), (n, n)) * plant.damping.transpose()) * h
                + g_b.view((n, 0), (n, n)) * h;
            let d_m = -(m_inv.transpose() * d_minv * m_inv.transpose());
            let gj = plant.gravity_jacobian(&q);
            let through_gravity = -(gj.transpose() * &bt_lam);
            for (k, dm) in plant.mass_matrix_derivatives(&q).iter().enumerate() {
                lam[i][k] += d_m.component_mul(dm).sum() + through_gravity[k];
            }
        }
    }

    if !value.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    Ok(Evaluation { value, grad_torques: grad, grad_goal })
}

fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.len(), m.transpose().iter().copied())
}

fn unflatten(x: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, &x.as_slice()[..rows * cols])
}

/// Minimum-effort torques steering the linearized plant from `state0` to
/// rest at `target` in `duration` steps, then zero torque.
fn min_effort_seed(
    state0: &StateGaussian,
    lti: &DiscreteLti,
    target: &DVector<f64>,
    duration: usize,
    horizon: usize,
) -> Option<DMatrix<f64>> {
    let n = lti.b.ncols();
    let dim = 2 * n;
    // Columns A^{T-1-k} B for k = 0..T, and the free response.
    let mut blocks = vec![DMatrix::zeros(dim, n); duration];
    let mut power = lti.b.clone();
    let mut free = state0.mean.clone();
    for k in (0..duration).rev() {
        blocks[k] = power.clone();
        power = &lti.a * power;
    }
    for _ in 0..duration {
        free = &lti.a * free + &lti.offset;
    }
    let mut goal_state = DVector::zeros(dim);
    goal_state.rows_mut(0, n).copy_from(target);
    let gram = blocks.iter().fold(DMatrix::zeros(dim, dim), |acc, b| acc + b * b.transpose());
    let y = gram.cholesky()?.solve(&(goal_state - free));
    let mut torques = DMatrix::zeros(horizon, n);
    for (k, b) in blocks.iter().enumerate() {
        torques.set_row(k, &(b.transpose() * &y).transpose());
    }
    Some(torques)
}

fn seeds(state0: &StateGaussian, plant: &PlantModel, cost: &CostParams, count: usize) -> Result<Vec<DMatrix<f64>>> {
    let horizon = cost.horizon;
    let mut out = vec![DMatrix::zeros(horizon, plant.n_q)];
    let q0 = state0.position();
    let Some(target) = plant.kinematics.inverse(&cost.goal.center, &q0) else {
        return Ok(out);
    };
    let lti = discretize(plant, &q0, cost.step)?;
    let mut durations: Vec<usize> = (1..=count)
        .map(|j| ((horizon * j) as f64 / count as f64).round() as usize)
        .map(|t| t.clamp(2.min(horizon), horizon))
        .collect();
    durations.dedup();
    for t in durations {
        if let Some(s) = min_effort_seed(state0, &lti, &target, t, horizon) {
            out.push(s);
        }
    }
    Ok(out)
}

fn check_inputs(state0: &StateGaussian, plant: &PlantModel, cost: &CostParams) -> Result<()> {
    cost.validate()?;
    if state0.mean.len() != 2 * plant.n_q {
        return Err(Error::DimensionMismatch(format!(
            "state has {} entries for {} joints",
            state0.mean.len(),
            plant.n_q
        )));
    }
    if plant.kinematics.dim() != cost.goal.dim() {
        return Err(Error::DimensionMismatch("goal and end-effector dimension differ".into()));
    }
    if !state0.mean.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("initial state is not finite".into()));
    }
    Ok(())
}

/// Locally optimal open-loop torques from a deterministic start.
///
/// Every seed (zero torque plus minimum-effort reaches of several
/// durations) is refined with L-BFGS; the lowest objective wins.
pub fn plan(state0: &StateGaussian, plant: &PlantModel, cost: &CostParams, opts: &PlannerOpts) -> Result<PlanResult> {
    let start = Instant::now();
    check_inputs(state0, plant, cost)?;
    let s0 = StateGaussian::deterministic(state0.mean.clone());
    let (h, n) = (cost.horizon, plant.n_q);

    let mut best: Option<(DVector<f64>, crate::solver::Diagnostics)> = None;
    for seed in seeds(&s0, plant, cost, opts.seeds)? {
        let mut failure = None;
        let f = |x: &DVector<f64>| match evaluate(&unflatten(x, h, n), &s0, plant, cost, &cost.goal.center, None) {
            Ok(e) => (e.value, flatten(&e.grad_torques)),
            Err(err) => {
                failure.get_or_insert(err);
                (f64::NAN, DVector::from_element(x.len(), f64::NAN))
            }
        };
        let (x, diag) = minimize(f, flatten(&seed), &opts.solver);
        if !diag.value.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| diag.value < b.value) {
            best = Some((x, diag));
        }
    }
    let (x, diag) = best.ok_or(Error::NonFiniteObjective)?;
    let torques = unflatten(&x, h, n);
    let (states, _) = propagate_plant(&s0, plant, &torques, cost.step)?;
    Ok(PlanResult {
        torques,
        states,
        objective: diag.value,
        iterations: diag.iterations,
        grad_norm: diag.grad_norm,
        wall_time: start.elapsed().as_secs_f64(),
        step: cost.step,
        converged: diag.converged,
        termination: diag.termination,
    })
}

/// Single local solve started from `guess` (`H × n_q` torques), for
/// receding-horizon re-planning where the previous solution is a good
/// starting point.
pub fn plan_warm(
    state0: &StateGaussian,
    plant: &PlantModel,
    cost: &CostParams,
    opts: &PlannerOpts,
    guess: &DMatrix<f64>,
) -> Result<PlanResult> {
    let start = Instant::now();
    check_inputs(state0, plant, cost)?;
    let (h, n) = (cost.horizon, plant.n_q);
    if guess.nrows() != h || guess.ncols() != n {
        return Err(Error::DimensionMismatch(format!("warm start must be {h}×{n}")));
    }
    let s0 = StateGaussian::deterministic(state0.mean.clone());
    let f = |x: &DVector<f64>| match evaluate(&unflatten(x, h, n), &s0, plant, cost, &cost.goal.center, None) {
        Ok(e) => (e.value, flatten(&e.grad_torques)),
        Err(_) => (f64::NAN, DVector::from_element(x.len(), f64::NAN)),
    };
    let (x, diag) = minimize(f, flatten(guess), &opts.solver);
    if !diag.value.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let torques = unflatten(&x, h, n);
    let (states, _) = propagate_plant(&s0, plant, &torques, cost.step)?;
    Ok(PlanResult {
        torques,
        states,
        objective: diag.value,
        iterations: diag.iterations,
        grad_norm: diag.grad_norm,
        wall_time: start.elapsed().as_secs_f64(),
        step: cost.step,
        converged: diag.converged,
        termination: diag.termination,
    })
}

/// Observation step index `⌊t_o/h⌋`.
pub fn observation_step(time: f64, step: f64) -> usize {
    (time / step + 1e-9).floor() as usize
}

/// Warm restarts of the linear-plant estimate after hitting the iteration cap.
const RESTARTS: usize = 2;

fn regularizer(norm: RegularizerNorm, goal: &DVector<f64>, prior: &GoalSpec, w_inv: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let d = goal - &prior.center;
    let wd = w_inv * &d;
    let sq = d.dot(&wd);
    match norm {
        RegularizerNorm::Squared => (sq, wd * 2.0),
        RegularizerNorm::Unsquared => {
            let r = (sq + 1e-12).sqrt();
            (r, wd / r)
        }
    }
}

/// Affine parametrization `x = x_p + T·y` of the stacked (torques, goal)
/// vector under which the mean state at `n_o` equals `target`.
fn constraint_nullspace(
    lti: &DiscreteLti,
    s0: &DVector<f64>,
    target: &DVector<f64>,
    n_o: usize,
    horizon: usize,
    goal_scale: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let dim = goal_scale.nrows();
    let n = lti.b.ncols();
    let sd = 2 * n;
    let pre = n_o * n;
    let total = horizon * n + dim;
    let mut c = DMatrix::zeros(sd, pre);
    let mut power = lti.b.clone();
    for i in (0..n_o).rev() {
        c.view_mut((0, i * n), (sd, n)).copy_from(&power);
        power = &lti.a * power;
    }
    let mut free = s0.clone();
    for _ in 0..n_o {
        free = &lti.a * free + &lti.offset;
    }
    let svd = c.clone().svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-12 * smax.max(f64::MIN_POSITIVE)).count();
    if rank < sd {
        return Err(Error::ConstraintInfeasible { residual: f64::INFINITY });
    }
    let rhs = target - free;
    let mut p = DVector::zeros(pre);
    for k in 0..rank {
        p += v_t.row(k).transpose() * (u.column(k).dot(&rhs) / svd.singular_values[k]);
    }
    // Orthonormal complement of the row space of C.
    let proj = DMatrix::identity(pre, pre) - v_t.rows(0, rank).transpose() * v_t.rows(0, rank);
    let eig = proj.symmetric_eigen();
    let null: Vec<usize> = (0..pre).filter(|&k| eig.eigenvalues[k] > 0.5).collect();
    let free_dims = null.len() + total - pre;
    let mut basis = DMatrix::zeros(total, free_dims);
    for (col, &k) in null.iter().enumerate() {
        basis.view_mut((0, col), (pre, 1)).copy_from(&eig.eigenvectors.column(k));
    }
    for k in 0..total - pre - dim {
        basis[(pre + k, null.len() + k)] = 1.0;
    }
    // Goal coordinates measured in units of the goal width.
    basis.view_mut((total - dim, free_dims - dim), (dim, dim)).copy_from(goal_scale);
    let mut x_p = DVector::zeros(total);
    x_p.rows_mut(0, pre).copy_from(&p);
    Ok((x_p, basis))
}

/// Gauss-Newton projection of the first `pre` entries of `x` onto the
/// observation constraint, with minimum-norm steps and a central-difference
/// Jacobian. Returns the final residual.
fn restore_feasibility(
    x: &mut DVector<f64>,
    pre: usize,
    tol: f64,
    residual_at: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
) -> Result<f64> {
    let eps = 1e-6;
    let mut c = residual_at(x)?;
    for _ in 0..20 {
        if c.amax() < 1e-3 * tol {
            break;
        }
        let mut jac = DMatrix::zeros(c.len(), pre);
        for k in 0..pre {
            let (mut up, mut dn) = (x.clone(), x.clone());
            up[k] += eps;
            dn[k] -= eps;
            jac.set_column(k, &((residual_at(&up)? - residual_at(&dn)?) / (2.0 * eps)));
        }
        let Ok(step) = jac.svd(true, true).solve(&c, 1e-12) else { break };
        let mut trial = x.clone();
        let mut shrink = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            trial.rows_mut(0, pre).copy_from(&(x.rows(0, pre) - &step * shrink));
            let ct = residual_at(&trial)?;
            if ct.amax() < c.amax() {
                *x = trial.clone();
                c = ct;
                accepted = true;
                break;
            }
            shrink *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(c.amax())
}

/// Jointly infer the goal and the torques that explain an observed state.
///
/// For linear plants the equality `μ_{n_o} = s^o` is eliminated by
/// parametrizing the early torques over the constraint null space. Other
/// plants use an augmented Lagrangian whose penalty weight grows
/// geometrically between rounds, followed when needed by a Gauss-Newton
/// projection of the early torques onto the constraint.
pub fn estimate_goal(
    state0: &StateGaussian,
    obs: &Observation,
    goal_prior: &GoalSpec,
    plant: &PlantModel,
    cost: &CostParams,
    opts: &PlannerOpts,
) -> Result<(PlanResult, DVector<f64>)> {
    let start = Instant::now();
    let cost = cost.with_goal(goal_prior.clone());
    check_inputs(state0, plant, &cost)?;
    let n_o = observation_step(obs.time, cost.step);
    if n_o < 1 || n_o > cost.horizon {
        return Err(Error::InvalidInput(format!(
            "observation time {} s lies outside the horizon",
            obs.time
        )));
    }
    if obs.state.len() != 2 * plant.n_q {
        return Err(Error::DimensionMismatch("observed state has the wrong length".into()));
    }
    let s0 = StateGaussian::deterministic(state0.mean.clone());
    let (h, n, dim) = (cost.horizon, plant.n_q, goal_prior.dim());
    let w_inv = goal_prior
        .width
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidGoal("width is not positive definite".into()))?
        .inverse();

    let init = plan(&s0, plant, &cost, opts)?;
    let mut x = DVector::zeros(h * n + dim);
    x.rows_mut(0, h * n).copy_from(&flatten(&init.torques));
    x.rows_mut(h * n, dim).copy_from(&goal_prior.center);

    let value_grad = |v: &DVector<f64>, pen: Option<&StatePenalty>| -> (f64, DVector<f64>) {
        let torques = unflatten(v, h, n);
        let goal = v.rows(h * n, dim).into_owned();
        match evaluate(&torques, &s0, plant, &cost, &goal, pen) {
            Ok(e) => {
                let (rv, rg) = regularizer(opts.regularizer, &goal, goal_prior, &w_inv);
                let mut g = DVector::zeros(v.len());
                g.rows_mut(0, h * n).copy_from(&flatten(&e.grad_torques));
                g.rows_mut(h * n, dim).copy_from(&(e.grad_goal + rg));
                (e.value + rv, g)
            }
            Err(_) => (f64::NAN, DVector::from_element(v.len(), f64::NAN)),
        }
    };
    let residual_at = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let (states, _) = propagate_plant(&s0, plant, &unflatten(v, h, n), cost.step)?;
        Ok(&states[n_o].mean - &obs.state)
    };

    let mut iterations = 0;
    let mut diag = None;
    let residual;
    if plant.is_linear() {
        // The observed mean is affine in the torques before n_o, so the
        // constraint is eliminated exactly: x = x_p + T·y.
        let lti = discretize(plant, &s0.position(), cost.step)?;
        let scale = goal_prior.width.clone().cholesky().expect("checked above").l();
        let (x_p, basis) = constraint_nullspace(&lti, &s0.mean, &obs.state, n_o, h, &scale)?;
        // Columns are orthonormal except the goal block, so solve for y0.
        let y0 = (basis.transpose() * &basis).lu().solve(&(basis.transpose() * (&x - &x_p))).expect("full column rank");
        let f = |y: &DVector<f64>| {
            let (v, g) = value_grad(&(&x_p + &basis * y), None);
            (v, basis.transpose() * g)
        };
        let (mut y, mut d) = minimize(f, y0, &opts.solver);
        iterations += d.iterations;
        // Fresh curvature pairs help when the joint problem is poorly scaled.
        for _ in 0..RESTARTS {
            if d.termination != Termination::MaxIterations || !d.value.is_finite() {
                break;
            }
            let (yn, dn) = minimize(f, y.clone(), &opts.solver);
            iterations += dn.iterations;
            (y, d) = (yn, dn);
        }
        if !d.value.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        x = &x_p + &basis * y;
        residual = residual_at(&x)?.amax();
        diag = Some(d);
    } else {
        let mut multiplier = DVector::zeros(2 * n);
        let mut weight = opts.penalty_start;
        let mut res = f64::INFINITY;
        for _ in 0..opts.penalty_rounds.max(1) {
            let f = |v: &DVector<f64>| {
                let pen = StatePenalty { step: n_o, target: &obs.state, multiplier: &multiplier, weight };
                value_grad(v, Some(&pen))
            };
            let (xn, d) = minimize(f, x.clone(), &opts.solver);
            iterations += d.iterations;
            if !d.value.is_finite() {
                return Err(Error::NonFiniteObjective);
            }
            x = xn;
            let c = residual_at(&x)?;
            res = c.amax();
            diag = Some(d);
            if res < opts.constraint_tol {
                break;
            }
            multiplier += &c * weight;
            weight *= opts.penalty_growth;
        }
        if res >= opts.constraint_tol {
            res = restore_feasibility(&mut x, n_o * n, opts.constraint_tol, &residual_at)?;
        }
        residual = res;
    }
    if residual >= opts.constraint_tol {
        return Err(Error::ConstraintInfeasible { residual });
    }
    let diag = diag.expect("at least one round");
    let torques = unflatten(&x, h, n);
    let goal = x.rows(h * n, dim).into_owned();
    let (states, _) = propagate_plant(&s0, plant, &torques, cost.step)?;
    let result = PlanResult {
        torques,
        states,
        objective: diag.value,
        iterations,
        grad_norm: diag.grad_norm,
        wall_time: start.elapsed().as_secs_f64(),
        step: cost.step,
        converged: diag.converged,
        termination: diag.termination,
    };
    Ok((result, goal))
}
