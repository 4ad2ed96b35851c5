//! Co-manipulation scenarios and the transition data behind the handover.

use nalgebra::DVector;

use reachplan::analysis::SweepSetup;
use reachplan::config::ExperimentConfig;
use reachplan::scenarios::{
    scenario_handover, scenario_sync, Corrective, HandoverPolicy, HandoverSetup, SyncSetup,
};
use reachplan::transition::{generate_transition_data, with_kernel, CellOutcome, KernelParams, TransitionSample};
use reachplan::StateGaussian;

fn corrective(cfg: &ExperimentConfig) -> Corrective {
    let s = &cfg.scenario;
    Corrective {
        width_factor: s.corrective_width_factor,
        discount_drop: s.corrective_discount_drop,
        horizon: s.corrective_horizon,
        replan_interval: s.replan_interval,
    }
}

/// Without noise and with the robot's belief equal to the truth, no policy
/// has anything to correct: all reach the goal together with negligible work.
#[test]
fn noiseless_handover_policies_agree_when_the_belief_is_right() {
    let cfg = ExperimentConfig::default();
    let mut plant = cfg.plant();
    plant.noise.cov.fill(0.0);
    let start = cfg.start_state(&plant).unwrap();
    let cost = cfg.cost().unwrap();
    let rule = cfg.analysis.rule;
    let s = &cfg.scenario;
    let setup = HandoverSetup::new(
        &plant, &start, &cost, &cfg.solver, &rule, s.stiffness, s.ramp, s.robot_mass, corrective(&cfg), s.duration,
        cfg.plant.arm_length,
    )
    .unwrap();
    let model = with_kernel(
        &[
            TransitionSample { norm_distance: 0.4, width: 0.02, transition_distance: 0.004 },
            TransitionSample { norm_distance: 0.6, width: 0.02, transition_distance: 0.004 },
        ],
        KernelParams { signal_var: 1e-5, length_scales: [1.0, 0.05], noise_var: 1e-7 },
    )
    .unwrap();
    let mut works = vec![];
    let mut finish = vec![];
    for p in HandoverPolicy::ALL {
        let r = scenario_handover(&cost.goal.center, &setup, Some(&model), p, 0).unwrap();
        assert!(r.completed, "{p}");
        assert!((r.human_traj.last().unwrap() - &cost.goal.center).norm() < 1e-3, "{p}");
        works.push(r.interaction_work);
        finish.push(r.finish_time_human);
    }
    let spread = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread(&works) < 1e-3, "work {works:?}");
    assert!(spread(&finish) < 1e-9, "finish {finish:?}");
}

#[test]
fn synchronized_robot_finishes_with_the_human() {
    let cfg = ExperimentConfig::default();
    let plant = cfg.cartesian_plant();
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
    for goal in [[0.3, 0.1, 0.2], [0.4, 0.15, 0.2]] {
        let goal = DVector::from_column_slice(&goal);
        let r = scenario_sync(&goal, &setup, 1).unwrap();
        let mismatch = (r.finish_time_robot - r.finish_time_human).abs() / r.finish_time_human;
        assert!(mismatch < 0.2, "finish mismatch {mismatch:.3}");
        // Compliant axes follow the object exactly, so the error lives on
        // the stiff axis alone and must stay well below the goal radius.
        let stiff = cfg.scenario.sync_stiffness.iter().position(|&k| k > 0.0).unwrap();
        for (i, e) in r.sync_error.iter().enumerate() {
            let d = (r.rest_traj[i][stiff] - r.robot_traj[i][stiff]).abs();
            assert!(*e >= d - 1e-15);
        }
        let ghat = r.estimated_goal.unwrap();
        assert!((&ghat - &goal).norm() < cfg.scenario.cartesian.width, "estimate {ghat}");
        let again = scenario_sync(&goal, &setup, 1).unwrap();
        assert_eq!(again.work, r.work);
    }
}

/// The dispersion peak sits strictly inside the movement, between the start
/// and the goal.
#[test]
fn transition_points_lie_inside_the_reach() {
    let mut cfg = ExperimentConfig::default();
    cfg.plant.kappa = vec![1e-2; 2];
    let plant = cfg.plant();
    let start = cfg.start_state(&plant).unwrap();
    let cost = cfg.cost().unwrap();
    let rule = cfg.analysis.rule;
    let setup = SweepSetup {
        plant: &plant,
        start: &start,
        cost_template: &cost,
        opts: &cfg.solver,
        rule: &rule,
        trials: 200,
        seed: 4,
    };
    let cells = generate_transition_data(&[0.2, 0.3], &[0.01, 0.03], cfg.plant.arm_length, &setup).unwrap();
    assert_eq!(cells.len(), 4);
    for c in cells {
        match c.outcome {
            CellOutcome::Sample { sample, step, steps } => {
                assert!(step > 0 && step < steps - 1, "step {step} of {steps}");
                assert!(sample.transition_distance > 0.0 && sample.transition_distance < c.distance);
                assert!((sample.norm_distance - c.distance / cfg.plant.arm_length).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    let mut quiet = plant.clone();
    quiet.noise.cov.fill(0.0);
    let setup = SweepSetup { plant: &quiet, ..setup };
    let cells = generate_transition_data(&[0.2], &[0.02], cfg.plant.arm_length, &setup).unwrap();
    assert!(matches!(cells[0].outcome, CellOutcome::Degenerate));
}
