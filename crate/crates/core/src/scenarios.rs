//! Simulated co-manipulation: a human driven by the motor-control model
//! moves a shared object while the robot renders a spring
//! `F = K (x_rest − x)` toward its own rest trajectory.
//!
//! In the synchronization task the human is a position source along the
//! compliant axes and the robot holds its rest position along the stiff
//! ones; the spring force only enters the interaction work `Σ |Fᵀẋ| h`. In the
//! handover task the object is a point mass driven by both the human's
//! noisy command and the spring.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{velocity_metrics, MovementRule};
use crate::dynamics::{Inertia, PlantModel, StateGaussian};
use crate::kinematics::Kinematics;
use crate::planner::{estimate_goal, observation_step, plan, plan_warm, CostParams, Observation, PlanResult, PlannerOpts};
use crate::reward::GoalSpec;
use crate::rollout::rollout_from;
use crate::transition::{gp_predict, TransitionModel};
use crate::{Error, Result};

/// Per-axis spring stiffness: zero before `engage_at`, then constant until
/// `ramp_start`, then decreasing linearly to zero over `ramp_duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceSchedule {
    /// [N/m]
    pub base: DVector<f64>,
    /// [s]
    pub engage_at: f64,
    /// [s]; `None` keeps the base stiffness forever.
    pub ramp_start: Option<f64>,
    /// [s]
    pub ramp_duration: f64,
}

impl ImpedanceSchedule {
    pub fn constant(base: DVector<f64>) -> Self {
        ImpedanceSchedule { base, engage_at: 0.0, ramp_start: None, ramp_duration: 1.0 }
    }

    pub fn engaged_at(base: DVector<f64>, t: f64) -> Self {
        ImpedanceSchedule { engage_at: t, ..Self::constant(base) }
    }

    pub fn ramp_down(base: DVector<f64>, start: f64, duration: f64) -> Self {
        ImpedanceSchedule { base, engage_at: 0.0, ramp_start: Some(start), ramp_duration: duration }
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        if t < self.engage_at {
            return DVector::zeros(self.base.len());
        }
        match self.ramp_start {
            Some(t0) if t > t0 => &self.base * (1.0 - (t - t0) / self.ramp_duration).clamp(0.0, 1.0),
            _ => self.base.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    /// Sample times [s].
    pub time: Vec<f64>,
    /// Object (human end-effector) positions [m].
    pub human_traj: Vec<DVector<f64>>,
    /// Robot end-effector positions [m].
    pub robot_traj: Vec<DVector<f64>>,
    /// Spring rest positions [m].
    pub rest_traj: Vec<DVector<f64>>,
    /// [N/m]
    pub stiffness: Vec<DVector<f64>>,
    /// Spring force on the object [N].
    pub force: Vec<DVector<f64>>,
    /// Running interaction work [J].
    pub work: Vec<f64>,
    /// `‖rest − robot‖` per sample [m].
    pub sync_error: Vec<f64>,
    /// [s]
    pub finish_time_human: f64,
    /// [s]
    pub finish_time_robot: f64,
    /// [J]
    pub interaction_work: f64,
    /// Start of the stiffness ramp or of the human correction [s].
    pub transition_time: Option<f64>,
    pub estimated_goal: Option<DVector<f64>>,
    /// False when the human path never settles inside the goal; the
    /// finish time is then the end of the simulation.
    pub completed: bool,
}

/// One noisy execution of a motor-control plan.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanMotion {
    pub plan: PlanResult,
    /// Joint states `[q; q̇]`.
    pub states: Vec<DVector<f64>>,
    pub ee: Vec<DVector<f64>>,
    pub ee_velocity: Vec<DVector<f64>>,
}

fn execute(plan: PlanResult, s0: &DVector<f64>, plant: &PlantModel, seed: u64) -> Result<HumanMotion> {
    let ens = rollout_from(s0, &plan.torques, plan.step, plant, 1, seed)?;
    Ok(HumanMotion {
        states: (0..ens.steps).map(|i| DVector::from_column_slice(ens.state(0, i))).collect(),
        ee: ens.ee_path(0),
        ee_velocity: (0..ens.steps).map(|i| DVector::from_column_slice(ens.ee_velocity(0, i))).collect(),
        plan,
    })
}

/// Plan a reach toward `goal` and execute it once with motor noise.
pub fn simulate_human(
    start: &StateGaussian,
    goal: &GoalSpec,
    plant: &PlantModel,
    cost: &CostParams,
    opts: &PlannerOpts,
    seed: u64,
) -> Result<HumanMotion> {
    let p = plan(start, plant, &cost.with_goal(goal.clone()), opts)?;
    execute(p, &start.mean, plant, seed)
}

fn mean_path(p: &PlanResult, plant: &PlantModel) -> Vec<DVector<f64>> {
    p.states.iter().map(|s| plant.kinematics.forward(&s.position())).collect()
}

/// Forces, running work and synchronization error along a coupled path.
fn couple(
    human: &[DVector<f64>],
    velocity: &[DVector<f64>],
    robot: &[DVector<f64>],
    schedule: &ImpedanceSchedule,
    h: f64,
) -> (Vec<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>, Vec<f64>, Vec<f64>) {
    let time: Vec<f64> = (0..human.len()).map(|i| i as f64 * h).collect();
    let stiffness: Vec<_> = time.iter().map(|&t| schedule.at(t)).collect();
    let force: Vec<DVector<f64>> =
        (0..human.len()).map(|i| stiffness[i].component_mul(&(&robot[i] - &human[i]))).collect();
    let mut acc = 0.0;
    let work = force
        .iter()
        .zip(velocity)
        .map(|(f, v)| {
            acc += f.dot(v).abs() * h;
            acc
        })
        .collect();
    let sync = human.iter().zip(robot).map(|(x, r)| (r - x).norm()).collect();
    (time, stiffness, force, work, sync)
}

/// Inputs shared by every synchronization run.
pub struct SyncSetup<'a> {
    pub plant: &'a PlantModel,
    pub start: &'a StateGaussian,
    pub prior: &'a GoalSpec,
    pub cost: &'a CostParams,
    pub opts: &'a PlannerOpts,
    pub rule: &'a MovementRule,
    /// Per-axis robot stiffness [N/m].
    pub stiffness: DVector<f64>,
    /// Observation time [s].
    pub t_obs: f64,
}

/// The human reaches for `true_goal`; at `t_obs` the robot infers the goal
/// from the observed state and engages its spring toward the inferred plan.
/// Before that the robot is compliant.
pub fn scenario_sync(true_goal: &DVector<f64>, setup: &SyncSetup, seed: u64) -> Result<ScenarioReport> {
    let plant = setup.plant;
    let h = setup.cost.step;
    let goal = GoalSpec::new(true_goal.clone(), setup.prior.width.clone())?;
    let human = simulate_human(setup.start, &goal, plant, setup.cost, setup.opts, seed)?;
    let prior_cost = setup.cost.with_goal(setup.prior.clone());
    let n_o = observation_step(setup.t_obs, h);
    let obs = Observation {
        state: human.states.get(n_o).cloned().ok_or_else(|| Error::InvalidInput("observation after horizon".into()))?,
        time: setup.t_obs,
    };
    let (est_plan, g_hat) = estimate_goal(setup.start, &obs, setup.prior, plant, &prior_cost, setup.opts)?;
    // The estimated plan starts at the common start and passes through the
    // observation, so it serves as the rest path over the whole run.
    let rest = mean_path(&est_plan, plant);

    let schedule = ImpedanceSchedule::engaged_at(setup.stiffness.clone(), n_o as f64 * h);
    let (time, stiffness, force, work, _) = couple(&human.ee, &human.ee_velocity, &rest, &schedule, h);
    // A stiff axis holds the rest position; a compliant one follows the
    // shared object.
    let robot: Vec<DVector<f64>> = (0..rest.len())
        .map(|i| DVector::from_fn(rest[i].len(), |k, _| if stiffness[i][k] > 0.0 { rest[i][k] } else { human.ee[i][k] }))
        .collect();
    let sync_error = rest.iter().zip(&robot).map(|(r, x)| (r - x).norm()).collect();
    let (finish_time_human, completed) = match velocity_metrics(&human.ee, h, &goal, setup.rule) {
        Ok(m) => (m.movement_time, true),
        Err(_) => (*time.last().unwrap(), false),
    };
    let est_goal = GoalSpec::new(g_hat.clone(), setup.prior.width.clone())?;
    let finish_time_robot = velocity_metrics(&robot, h, &est_goal, setup.rule).map_or(*time.last().unwrap(), |m| m.movement_time);
    Ok(ScenarioReport {
        interaction_work: *work.last().unwrap(),
        time,
        human_traj: human.ee,
        robot_traj: robot,
        rest_traj: rest,
        stiffness,
        force,
        work,
        sync_error,
        finish_time_human,
        finish_time_robot,
        transition_time: None,
        estimated_goal: Some(g_hat),
        completed,
    })
}

/// When the robot hands authority over to the human.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandoverPolicy {
    /// Stiffness is never reduced; the human corrects against the spring.
    HighStiff,
    /// Hand over once 10% of the initial distance is covered.
    Switch90,
    /// Hand over once 40% of the initial distance is covered.
    Switch60,
    /// Hand over at the transition point predicted by the GP model.
    SwitchOpt,
}

impl HandoverPolicy {
    pub const ALL: [HandoverPolicy; 4] =
        [HandoverPolicy::HighStiff, HandoverPolicy::Switch90, HandoverPolicy::Switch60, HandoverPolicy::SwitchOpt];

    pub fn name(self) -> &'static str {
        match self {
            HandoverPolicy::HighStiff => "high_stiff",
            HandoverPolicy::Switch90 => "switch_90",
            HandoverPolicy::Switch60 => "switch_60",
            HandoverPolicy::SwitchOpt => "switch_opt",
        }
    }
}

impl fmt::Display for HandoverPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HandoverPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        HandoverPolicy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown handover policy '{s}'")))
    }
}

/// Parameters of the human's corrective sub-movement after handover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corrective {
    pub width_factor: f64,
    pub discount_drop: f64,
    /// Planning horizon [steps].
    pub horizon: usize,
    /// Steps executed between re-plans.
    pub replan_interval: usize,
}

/// Inputs shared by every handover run. The ballistic plan toward the
/// robot's believed goal is solved once.
pub struct HandoverSetup<'a> {
    /// Human arm in task space (identity kinematics).
    pub plant: &'a PlantModel,
    pub start: &'a StateGaussian,
    /// Cost with the robot's believed goal.
    pub cost: &'a CostParams,
    pub opts: &'a PlannerOpts,
    pub rule: &'a MovementRule,
    /// [N/m], every axis.
    pub stiffness: f64,
    /// [s]
    pub ramp: f64,
    /// Apparent robot mass the human moves once the robot stops leading [kg].
    pub robot_mass: f64,
    pub corrective: Corrective,
    /// Simulated time [s].
    pub duration: f64,
    /// [m]
    pub arm_length: f64,
    pub ballistic: PlanResult,
}

impl<'a> HandoverSetup<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        plant: &'a PlantModel,
        start: &'a StateGaussian,
        cost: &'a CostParams,
        opts: &'a PlannerOpts,
        rule: &'a MovementRule,
        stiffness: f64,
        ramp: f64,
        robot_mass: f64,
        corrective: Corrective,
        duration: f64,
        arm_length: f64,
    ) -> Result<Self> {
        if !matches!(plant.kinematics, Kinematics::Identity { .. }) || !plant.is_linear() {
            return Err(Error::InvalidInput("handover needs a linear task-space plant".into()));
        }
        if corrective.replan_interval == 0 || corrective.horizon == 0 {
            return Err(Error::InvalidInput("corrective horizon and re-plan interval must be positive".into()));
        }
        let ballistic = plan(start, plant, cost, opts)?;
        Ok(HandoverSetup {
            plant,
            start,
            cost,
            opts,
            rule,
            stiffness,
            ramp,
            robot_mass,
            corrective,
            duration,
            arm_length,
            ballistic,
        })
    }

    /// Distance from the believed goal at which `policy` hands over.
    pub fn trigger_distance(&self, policy: HandoverPolicy, model: Option<&TransitionModel>) -> Result<f64> {
        let x0 = self.plant.kinematics.forward(&self.start.position());
        let d0 = (x0 - &self.cost.goal.center).norm();
        Ok(match policy {
            HandoverPolicy::Switch90 => 0.9 * d0,
            HandoverPolicy::Switch60 => 0.6 * d0,
            HandoverPolicy::HighStiff | HandoverPolicy::SwitchOpt => {
                let m = model.ok_or_else(|| Error::InvalidInput("policy needs a fitted transition model".into()))?;
                let width = self.cost.goal.width[(0, 0)].sqrt();
                gp_predict(m, d0 / self.arm_length, width).0.max(0.0)
            }
        })
    }

    /// The human arm plus the passive robot.
    fn loaded_plant(&self) -> PlantModel {
        let mut p = self.plant.clone();
        if let Inertia::Constant(m) = &mut p.inertia {
            for i in 0..m.nrows() {
                m[(i, i)] += self.robot_mass;
            }
        }
        p
    }
}

/// Robot-led ballistic reach followed by a human-led correction toward
/// `true_goal`.
///
/// The trigger compares the remaining distance along the start-to-goal
/// axis, so an object that overshoots the transition point still triggers.
///
/// The object is a point mass pushed by the human's noisy command and by
/// the robot spring. Until the policy's trigger distance is reached the
/// human applies the shared ballistic torques and the robot carries its
/// own mass. Afterwards the object also carries `robot_mass`, the spring
/// ramps down (except for `HighStiff`), and the human re-plans the
/// corrective sub-movement every `replan_interval` steps without
/// modelling the spring.
pub fn scenario_handover(
    true_goal: &DVector<f64>,
    setup: &HandoverSetup,
    model: Option<&TransitionModel>,
    policy: HandoverPolicy,
    seed: u64,
) -> Result<ScenarioReport> {
    let plant = setup.plant;
    let n = plant.n_q;
    let h = setup.cost.step;
    if true_goal.len() != n {
        return Err(Error::DimensionMismatch("true goal has the wrong length".into()));
    }
    let believed = &setup.cost.goal.center;
    let trigger_d = setup.trigger_distance(policy, model)?;
    let x0 = setup.start.mean.rows(0, n).into_owned();
    let axis = (believed - &x0).try_normalize(1e-12).unwrap_or_else(|| DVector::zeros(n));
    let steps = (setup.duration / h).round() as usize;
    let rest = mean_path(&setup.ballistic, plant);
    let rest_at = |i: usize| rest.get(i).unwrap_or(&rest[rest.len() - 1]).clone();
    let loaded = setup.loaded_plant();

    let c = &setup.corrective;
    let radii: Vec<f64> = (0..n).map(|i| setup.cost.goal.width[(i, i)].sqrt()).collect();
    let narrow: Vec<f64> = radii.iter().map(|r| r * c.width_factor).collect();
    let corr_cost = CostParams {
        goal: GoalSpec::with_radii(true_goal.as_slice(), &narrow)?,
        discount: setup.cost.discount - c.discount_drop,
        effort_weight: setup.cost.effort_weight,
        horizon: c.horizon,
        step: h,
    };

    let std: Vec<f64> = plant.noise.cov.iter().map(|k| k.max(0.0).sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = DVector::from_element(n, setup.stiffness);
    let mut schedule = ImpedanceSchedule::constant(base);
    let mut s = setup.start.mean.clone();
    let mut trigger: Option<usize> = None;
    let mut command: Option<(DMatrix<f64>, usize)> = None;
    let mut human = Vec::with_capacity(steps + 1);
    let mut velocity = Vec::with_capacity(steps + 1);
    let mut rest_path = Vec::with_capacity(steps + 1);

    for i in 0..=steps {
        let x = s.rows(0, n).into_owned();
        human.push(x.clone());
        velocity.push(s.rows(n, n).into_owned());
        rest_path.push(rest_at(i));
        if i == steps {
            break;
        }
        if trigger.is_none() && i >= 1 && (believed - &x).dot(&axis) <= trigger_d {
            trigger = Some(i);
            if policy != HandoverPolicy::HighStiff {
                schedule = ImpedanceSchedule::ramp_down(schedule.base.clone(), i as f64 * h, setup.ramp);
            }
        }
        let spring = schedule.at(i as f64 * h).component_mul(&(rest_at(i) - &x));
        let (u, body) = match trigger {
            None => {
                let u = if i < setup.ballistic.torques.nrows() {
                    setup.ballistic.torques.row(i).transpose()
                } else {
                    DVector::zeros(n)
                };
                (u, plant)
            }
            Some(k) => {
                if (i - k) % c.replan_interval == 0 {
                    let here = StateGaussian::deterministic(s.clone());
                    let next = match &command {
                        None => plan(&here, &loaded, &corr_cost, setup.opts)?,
                        Some((prev, used)) => {
                            let guess = DMatrix::from_fn(c.horizon, n, |r, j| {
                                if r + used < c.horizon { prev[(r + used, j)] } else { 0.0 }
                            });
                            plan_warm(&here, &loaded, &corr_cost, setup.opts, &guess)?
                        }
                    };
                    command = Some((next.torques, 0));
                }
                let (u_plan, used) = command.as_mut().expect("corrective plan exists");
                let u = if *used < c.horizon { u_plan.row(*used).transpose() } else { DVector::zeros(n) };
                *used += 1;
                (u, &loaded)
            }
        };
        let noisy = DVector::from_fn(n, |j, _| {
            let eps: f64 = StandardNormal.sample(&mut rng);
            u[j] * (1.0 + std[j] * eps)
        });
        s = body.euler_step(&s, &(noisy + spring), h)?;
    }

    let (time, stiffness, force, work, sync_error) = couple(&human, &velocity, &rest_path, &schedule, h);
    let true_spec = GoalSpec::with_radii(true_goal.as_slice(), &radii)?;
    let end = *time.last().unwrap();
    let (finish_time_human, completed) = match velocity_metrics(&human, h, &true_spec, setup.rule) {
        Ok(m) => (m.movement_time, true),
        Err(_) => (end, false),
    };
    let finish_time_robot = velocity_metrics(&rest_path, h, &setup.cost.goal, setup.rule).map_or(end, |m| m.movement_time);
    Ok(ScenarioReport {
        interaction_work: *work.last().unwrap(),
        time,
        // The robot grips the object rigidly.
        robot_traj: human.clone(),
        human_traj: human,
        rest_traj: rest_path,
        stiffness,
        force,
        work,
        sync_error,
        finish_time_human,
        finish_time_robot,
        transition_time: trigger.map(|k| k as f64 * h),
        estimated_goal: None,
        completed,
    })
}

/// Seed-averaged outcome of one policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySummary {
    pub policy: HandoverPolicy,
    /// [s]
    pub mean_total_time: f64,
    /// [J]
    pub mean_work: f64,
    pub mean_transition_time: f64,
    pub completed: usize,
    pub runs: usize,
}

/// Run every policy over `seeds` (in parallel, results in policy order).
pub fn compare_handover(
    true_goal: &DVector<f64>,
    setup: &HandoverSetup,
    model: Option<&TransitionModel>,
    seeds: &[u64],
) -> Result<Vec<PolicySummary>> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("need at least one seed".into()));
    }
    HandoverPolicy::ALL
        .iter()
        .map(|&policy| {
            let runs: Vec<ScenarioReport> = seeds
                .par_iter()
                .map(|&s| scenario_handover(true_goal, setup, model, policy, s))
                .collect::<Result<_>>()?;
            let n = runs.len() as f64;
            Ok(PolicySummary {
                policy,
                mean_total_time: runs.iter().map(|r| r.finish_time_human).sum::<f64>() / n,
                mean_work: runs.iter().map(|r| r.interaction_work).sum::<f64>() / n,
                mean_transition_time: runs.iter().map(|r| r.transition_time.unwrap_or(0.0)).sum::<f64>() / n,
                completed: runs.iter().filter(|r| r.completed).count(),
                runs: runs.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::transition::{with_kernel, KernelParams, TransitionSample};

    #[test]
    fn schedule_is_continuous_and_nonnegative() {
        let h = 0.02;
        let k = 400.0;
        let s = ImpedanceSchedule::ramp_down(DVector::from_element(2, k), 0.13, 0.5);
        let values: Vec<f64> = (0..200).map(|i| s.at(i as f64 * h)[0]).collect();
        let bound = k / (0.5 / h) * 1.01;
        assert!(values.windows(2).all(|w| (w[1] - w[0]).abs() < bound));
        assert!(values.iter().all(|&v| v >= 0.0));
        assert_eq!(values[0], k);
        assert_eq!(*values.last().unwrap(), 0.0);
        let e = ImpedanceSchedule::engaged_at(DVector::from_element(1, k), 0.2);
        assert_eq!(e.at(0.1)[0], 0.0);
        assert_eq!(e.at(0.2)[0], k);
        assert_eq!(ImpedanceSchedule::constant(DVector::from_element(1, k)).at(10.0)[0], k);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in HandoverPolicy::ALL {
            assert_eq!(p.to_string().parse::<HandoverPolicy>().unwrap(), p);
        }
        assert!("switch_50".parse::<HandoverPolicy>().is_err());
    }

    #[test]
    fn noiseless_human_follows_the_plan() {
        let cfg = ExperimentConfig::default();
        let mut plant = cfg.plant();
        plant.noise.cov.fill(0.0);
        let start = cfg.start_state(&plant).unwrap();
        let cost = cfg.cost().unwrap();
        let m = simulate_human(&start, &cost.goal, &plant, &cost, &cfg.solver, 5).unwrap();
        for (x, s) in m.ee.iter().zip(&m.plan.states) {
            assert!((x - plant.kinematics.forward(&s.position())).amax() < 1e-12);
        }
    }

    #[test]
    fn noiseless_sync_toward_the_prior() {
        let cfg = ExperimentConfig::default();
        let mut plant = cfg.cartesian_plant();
        plant.noise.cov.fill(0.0);
        let cost = cfg.cartesian_cost().unwrap();
        let start = StateGaussian::at(&cfg.scenario.cartesian.start, &[0.0; 3]);
        let rule = cfg.analysis.rule;
        let setup = SyncSetup {
            plant: &plant,
            start: &start,
            prior: &cost.goal,
            cost: &cost,
            opts: &cfg.solver,
            rule: &rule,
            stiffness: DVector::from_column_slice(&cfg.scenario.sync_stiffness),
            t_obs: cfg.scenario.t_obs,
        };
        let r = scenario_sync(&cost.goal.center, &setup, 0).unwrap();
        let g = r.estimated_goal.as_ref().unwrap();
        assert!((g - &cost.goal.center).norm() < cfg.scenario.cartesian.width);
        let n = r.time.len();
        assert!([r.human_traj.len(), r.robot_traj.len(), r.rest_traj.len(), r.sync_error.len()].iter().all(|&l| l == n));
        // The stiff axis tracks the estimate exactly once engaged.
        for i in 0..n {
            if r.stiffness[i][2] > 0.0 {
                assert_eq!(r.robot_traj[i][2], r.rest_traj[i][2]);
            }
        }
        assert!(r.work.windows(2).all(|w| w[1] >= w[0]) && r.work[0] >= 0.0);
        let mt = r.finish_time_human;
        assert!((r.finish_time_robot - mt).abs() < 0.2 * mt);
    }

    #[test]
    fn switch_opt_hands_over_completely() {
        let cfg = ExperimentConfig::default();
        let plant = cfg.plant();
        let start = cfg.start_state(&plant).unwrap();
        let cost = cfg.cost().unwrap();
        let rule = cfg.analysis.rule;
        let sc = &cfg.scenario;
        let corrective = Corrective {
            width_factor: sc.corrective_width_factor,
            discount_drop: sc.corrective_discount_drop,
            horizon: sc.corrective_horizon,
            replan_interval: sc.replan_interval,
        };
        let setup = HandoverSetup::new(
            &plant, &start, &cost, &cfg.solver, &rule, sc.stiffness, sc.ramp, sc.robot_mass, corrective, sc.duration,
            cfg.plant.arm_length,
        )
        .unwrap();
        let samples = [0.3, 0.5, 0.7].map(|d| TransitionSample { norm_distance: d, width: 0.02, transition_distance: 0.01 * d });
        let model = with_kernel(&samples, KernelParams { signal_var: 1e-5, length_scales: [0.5, 0.05], noise_var: 1e-8 }).unwrap();
        let goal = &cost.goal.center + DVector::from_column_slice(&sc.goal_offset);
        let r = scenario_handover(&goal, &setup, Some(&model), HandoverPolicy::SwitchOpt, 1).unwrap();
        assert!(r.transition_time.unwrap() > 0.0);
        assert_eq!(r.stiffness.last().unwrap().amax(), 0.0);
        assert!(r.work.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.work[0] >= 0.0);
        assert!(scenario_handover(&goal, &setup, None, HandoverPolicy::SwitchOpt, 1).is_err());
        let stiff = scenario_handover(&goal, &setup, Some(&model), HandoverPolicy::HighStiff, 1).unwrap();
        assert!(stiff.stiffness.iter().all(|k| k.amin() == sc.stiffness));
    }
}
