//! Open-loop Monte Carlo execution of planned torques under multiplicative
//! torque noise.
//!
//! Each trial owns a ChaCha8 stream: the generator is seeded with the
//! ensemble seed and trial `k` uses stream `k`, so ensembles do not depend
//! on the number of worker threads. Within a trial the draws are consumed
//! step-major, joint-minor.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::PlantModel;
use crate::planner::PlanResult;
use crate::reward::GoalSpec;
use crate::{Error, Result};

/// Trial-major storage of sampled trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutEnsemble {
    pub trials: usize,
    /// Number of recorded time points (H + 1).
    pub steps: usize,
    pub n_q: usize,
    pub dim: usize,
    pub seed: u64,
    /// [trial][step][2·n_q] flattened.
    pub trajectories: Vec<f64>,
    /// [trial][step][dim] flattened end-effector positions [m].
    pub ee_paths: Vec<f64>,
    /// [trial][step][dim] flattened end-effector velocities `J(q) q̇` [m/s].
    pub ee_velocities: Vec<f64>,
}

impl RolloutEnsemble {
    pub fn state(&self, trial: usize, step: usize) -> &[f64] {
        let w = 2 * self.n_q;
        let o = (trial * self.steps + step) * w;
        &self.trajectories[o..o + w]
    }

    pub fn ee(&self, trial: usize, step: usize) -> &[f64] {
        let o = (trial * self.steps + step) * self.dim;
        &self.ee_paths[o..o + self.dim]
    }

    pub fn ee_velocity(&self, trial: usize, step: usize) -> &[f64] {
        let o = (trial * self.steps + step) * self.dim;
        &self.ee_velocities[o..o + self.dim]
    }

    /// End-effector path of one trial.
    pub fn ee_path(&self, trial: usize) -> Vec<DVector<f64>> {
        (0..self.steps).map(|i| DVector::from_column_slice(self.ee(trial, i))).collect()
    }

    /// Sample mean and covariance (n − 1 normalization) of the joint state
    /// at `step`.
    pub fn state_moments(&self, step: usize) -> (DVector<f64>, DMatrix<f64>) {
        moments((0..self.trials).map(|k| self.state(k, step)), 2 * self.n_q, self.trials)
    }

    pub fn ee_moments(&self, step: usize) -> (DVector<f64>, DMatrix<f64>) {
        moments((0..self.trials).map(|k| self.ee(k, step)), self.dim, self.trials)
    }

    pub fn ee_velocity_moments(&self, step: usize) -> (DVector<f64>, DMatrix<f64>) {
        moments((0..self.trials).map(|k| self.ee_velocity(k, step)), self.dim, self.trials)
    }
}

/// Sample moments computed about the first row, so identical rows give an
/// exactly zero covariance.
fn moments<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, dim: usize, count: usize) -> (DVector<f64>, DMatrix<f64>) {
    let Some(first) = rows.clone().next() else {
        return (DVector::zeros(dim), DMatrix::zeros(dim, dim));
    };
    let shift = DVector::from_column_slice(first);
    let mut offset = DVector::zeros(dim);
    for r in rows.clone() {
        for i in 0..dim {
            offset[i] += r[i] - shift[i];
        }
    }
    offset /= count as f64;
    let mut cov = DMatrix::zeros(dim, dim);
    for r in rows {
        for i in 0..dim {
            let di = r[i] - shift[i] - offset[i];
            for j in 0..dim {
                cov[(i, j)] += di * (r[j] - shift[j] - offset[j]);
            }
        }
    }
    if count > 1 {
        cov /= (count - 1) as f64;
    }
    (shift + offset, cov)
}

/// Execute `plan` open loop: every step applies `τ_i ∘ (1 + ε_i)` with
/// `ε_i ~ N(0, κ)` through the noiseless plant dynamics.
pub fn rollout(plan: &PlanResult, plant: &PlantModel, trials: usize, seed: u64) -> Result<RolloutEnsemble> {
    if trials == 0 {
        return Err(Error::InvalidInput("rollout needs at least one trial".into()));
    }
    let s0 = plan.states[0].mean.clone();
    rollout_from(&s0, &plan.torques, plan.step, plant, trials, seed)
}

/// Same as [`rollout`] for an explicit start state and torque sequence.
pub fn rollout_from(
    s0: &DVector<f64>,
    torques: &DMatrix<f64>,
    h: f64,
    plant: &PlantModel,
    trials: usize,
    seed: u64,
) -> Result<RolloutEnsemble> {
    let n = plant.n_q;
    let dim = plant.kinematics.dim();
    let steps = torques.nrows() + 1;
    let std: Vec<f64> = plant.noise.cov.iter().map(|k| k.max(0.0).sqrt()).collect();
    let per_trial: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>)>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut traj = Vec::with_capacity(steps * 2 * n);
            let mut ee = Vec::with_capacity(steps * dim);
            let mut vel = Vec::with_capacity(steps * dim);
            let mut s = s0.clone();
            let record = |s: &DVector<f64>, traj: &mut Vec<f64>, ee: &mut Vec<f64>, vel: &mut Vec<f64>| {
                let q = s.rows(0, n).into_owned();
                traj.extend_from_slice(s.as_slice());
                ee.extend_from_slice(plant.kinematics.forward(&q).as_slice());
                vel.extend_from_slice((plant.kinematics.jacobian(&q) * s.rows(n, n)).as_slice());
            };
            record(&s, &mut traj, &mut ee, &mut vel);
            for i in 0..steps - 1 {
                let u = DVector::from_fn(n, |j, _| {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    torques[(i, j)] * (1.0 + std[j] * eps)
                });
                s = plant.euler_step(&s, &u, h)?;
                record(&s, &mut traj, &mut ee, &mut vel);
            }
            Ok((traj, ee, vel))
        })
        .collect();
    let mut ens = RolloutEnsemble {
        trials,
        steps,
        n_q: n,
        dim,
        seed,
        trajectories: Vec::with_capacity(trials * steps * 2 * n),
        ee_paths: Vec::with_capacity(trials * steps * dim),
        ee_velocities: Vec::with_capacity(trials * steps * dim),
    };
    for r in per_trial {
        let (t, e, v) = r?;
        ens.trajectories.extend(t);
        ens.ee_paths.extend(e);
        ens.ee_velocities.extend(v);
    }
    Ok(ens)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndpointStats {
    pub hit_rate: f64,
    pub fitted_mean: DVector<f64>,
    pub fitted_cov: DMatrix<f64>,
    /// `trials × dim` final end-effector positions.
    pub samples: DMatrix<f64>,
}

/// Final-position statistics; a trial hits when every axis lies strictly
/// within `hit_radius` of the goal centre.
pub fn endpoint_stats(ens: &RolloutEnsemble, goal: &GoalSpec, hit_radius: &DVector<f64>) -> EndpointStats {
    let last = ens.steps - 1;
    let samples = DMatrix::from_fn(ens.trials, ens.dim, |k, j| ens.ee(k, last)[j]);
    let hits = (0..ens.trials)
        .filter(|&k| {
            ens.ee(k, last)
                .iter()
                .zip(goal.center.iter().zip(hit_radius.iter()))
                .all(|(x, (g, r))| (x - g).abs() < *r)
        })
        .count();
    let (fitted_mean, fitted_cov) = ens.ee_moments(last);
    EndpointStats { hit_rate: hits as f64 / ens.trials as f64, fitted_mean, fitted_cov, samples }
}

/// Per-step `√trace` of the sample covariance of end-effector positions.
pub fn dispersion_profile(ens: &RolloutEnsemble) -> Vec<f64> {
    (0..ens.steps).map(|i| ens.ee_moments(i).1.trace().max(0.0).sqrt()).collect()
}

/// Per-step `√trace` of the sample covariance of end-effector velocities.
pub fn velocity_dispersion_profile(ens: &RolloutEnsemble) -> Vec<f64> {
    (0..ens.steps).map(|i| ens.ee_velocity_moments(i).1.trace().max(0.0).sqrt()).collect()
}

/// Mean over trials of the end-effector distance to `point` at `step`.
pub fn mean_distance(ens: &RolloutEnsemble, step: usize, point: &DVector<f64>) -> f64 {
    (0..ens.trials)
        .map(|k| ens.ee(k, step).iter().zip(point.iter()).map(|(x, g)| (x - g).powi(2)).sum::<f64>().sqrt())
        .sum::<f64>()
        / ens.trials as f64
}
