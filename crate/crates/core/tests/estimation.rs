//! Goal inference from a single observed state.

use nalgebra::DVector;

use reachplan::config::ExperimentConfig;
use reachplan::planner::{estimate_goal, observation_step, plan, Observation};
use reachplan::{Error, GoalSpec, PlantModel};

fn observe(cfg: &ExperimentConfig, plant: &PlantModel, true_goal: &DVector<f64>, t_obs: f64) -> Observation {
    let start = cfg.start_state(plant).unwrap();
    let cost = cfg.cost().unwrap();
    let goal = GoalSpec::new(true_goal.clone(), cost.goal.width.clone()).unwrap();
    let human = plan(&start, plant, &cost.with_goal(goal), &cfg.solver).unwrap();
    Observation { state: human.states[observation_step(t_obs, cost.step)].mean.clone(), time: t_obs }
}

/// Reaches toward goals around the prior are recovered to a fraction of the
/// goal radius, and the inferred torques reproduce the observation.
#[test]
fn estimates_reaches_around_the_prior() {
    let cfg = ExperimentConfig::default();
    let plant = cfg.plant();
    let start = cfg.start_state(&plant).unwrap();
    let cost = cfg.cost().unwrap();
    let radius = cost.goal.width[(0, 0)].sqrt();
    for offset in [[0.0, 0.0], [radius, 0.0], [-radius, radius]] {
        let truth = &cost.goal.center + DVector::from_column_slice(&offset);
        let obs = observe(&cfg, &plant, &truth, 0.2);
        let (p, g) = estimate_goal(&start, &obs, &cost.goal, &plant, &cost, &cfg.solver).unwrap();
        let err = (&g - &truth).norm();
        assert!(err < 0.25 * radius, "offset {offset:?}: error {err:.2e}");
        let n_o = observation_step(0.2, cost.step);
        assert!((&p.states[n_o].mean - &obs.state).amax() < 1e-6);
        assert!(p.converged);
    }
}

#[test]
fn a_tight_prior_pins_the_estimate_to_its_centre() {
    let cfg = ExperimentConfig::default();
    let plant = cfg.plant();
    let start = cfg.start_state(&plant).unwrap();
    let cost = cfg.cost().unwrap();
    let truth = &cost.goal.center + DVector::from_column_slice(&[0.03, -0.02]);
    let obs = observe(&cfg, &plant, &truth, 0.2);
    let mut last = f64::INFINITY;
    for r in [0.02, 0.005, 0.001] {
        let prior = GoalSpec::isotropic(cost.goal.center.as_slice(), r).unwrap();
        let (_, g) = estimate_goal(&start, &obs, &prior, &plant, &cost, &cfg.solver).unwrap();
        let d = (&g - &prior.center).norm();
        assert!(d <= last + 1e-9, "r {r}: distance {d:.2e} grew from {last:.2e}");
        last = d;
    }
    assert!(last < 2e-3, "distance to the prior centre {last:.2e}");
}

#[test]
fn single_step_observations_are_rejected_as_infeasible() {
    let cfg = ExperimentConfig::default();
    let plant = cfg.plant();
    let start = cfg.start_state(&plant).unwrap();
    let cost = cfg.cost().unwrap();
    // One step cannot move both position and velocity arbitrarily.
    let mut state = start.mean.clone();
    state[0] += 0.05;
    state[2] -= 3.0;
    let obs = Observation { state, time: cost.step };
    let r = estimate_goal(&start, &obs, &cost.goal, &plant, &cost, &cfg.solver);
    assert!(matches!(r, Err(Error::ConstraintInfeasible { .. })), "{r:?}");
}

#[test]
fn observation_outside_the_horizon_is_invalid() {
    let cfg = ExperimentConfig::default();
    let plant = cfg.plant();
    let start = cfg.start_state(&plant).unwrap();
    let cost = cfg.cost().unwrap();
    for time in [0.0, cost.step * (cost.horizon as f64 + 2.0)] {
        let obs = Observation { state: start.mean.clone(), time };
        let r = estimate_goal(&start, &obs, &cost.goal, &plant, &cost, &cfg.solver);
        assert!(matches!(r, Err(Error::InvalidInput(_))), "{r:?}");
    }
}

/// The nonlinear arm goes through the augmented Lagrangian path.
#[test]
fn two_link_estimate_meets_the_observation() {
    let mut cfg = ExperimentConfig::default();
    cfg.plant.kinematics = reachplan::config::KinematicsKind::TwoLinkPlanar;
    cfg.start.position = vec![0.1, 0.35];
    cfg.cost.goal = vec![0.35, 0.3];
    let plant = cfg.plant();
    let start = cfg.start_state(&plant).unwrap();
    let cost = cfg.cost().unwrap();
    let truth = cost.goal.center.clone();
    let obs = observe(&cfg, &plant, &truth, 0.2);
    match estimate_goal(&start, &obs, &cost.goal, &plant, &cost, &cfg.solver) {
        Ok((p, g)) => {
            let n_o = observation_step(0.2, cost.step);
            assert!((&p.states[n_o].mean - &obs.state).amax() < cfg.solver.constraint_tol);
            assert!((&g - &truth).norm() < 0.5 * cost.goal.width[(0, 0)].sqrt());
        }
        Err(e) => panic!("{e}"),
    }
}
