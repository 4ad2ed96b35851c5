//! One function per subcommand. Each writes its files and reports whether
//! the numerics converged.

use std::path::Path;

use nalgebra::DVector;
use reachplan::analysis::{fitts_fit, fitts_sweep, spearman, speeds, SweepSetup};
use reachplan::planner::{self, estimate_goal, observation_step, stage_rewards, Observation};
use reachplan::rollout::{dispersion_profile, endpoint_stats, rollout, velocity_dispersion_profile};
use reachplan::scenarios::{
    compare_handover, scenario_handover, scenario_sync, Corrective, HandoverPolicy, HandoverSetup, ScenarioReport,
    SyncSetup,
};
use reachplan::transition::{generate_transition_data, gp_fit, gp_predict, CellOutcome, TransitionModel, TransitionSample};
use reachplan::{CostParams, Error, ExperimentConfig, GoalSpec, PlanResult, PlantModel, StateGaussian};

use crate::output::{axis_columns, indexed_columns, num, Failure, Outputs, Status, Summary};
use crate::svg::{render, Panel, Series};

pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: Outputs,
    pub seed: u64,
}

type Outcome = Result<Status, Failure>;

fn retarget(goal: &GoalSpec, center: &[f64]) -> Result<GoalSpec, Failure> {
    if center.len() != goal.dim() {
        return Err(Failure::Usage(format!("goal needs {} coordinates, got {}", goal.dim(), center.len())));
    }
    Ok(GoalSpec::new(DVector::from_column_slice(center), goal.width.clone())?)
}

fn planar(ctx: &Context) -> Result<(PlantModel, StateGaussian, CostParams), Failure> {
    let plant = ctx.cfg.plant();
    let start = ctx.cfg.start_state(&plant)?;
    let cost = ctx.cfg.cost()?;
    Ok((plant, start, cost))
}

fn ee_path(p: &PlanResult, plant: &PlantModel) -> Vec<DVector<f64>> {
    p.states.iter().map(|s| plant.kinematics.forward(&s.position())).collect()
}

fn xy(path: &[DVector<f64>]) -> Vec<(f64, f64)> {
    path.iter().map(|x| (x[0], if x.len() > 1 { x[1] } else { 0.0 })).collect()
}

fn timed(values: &[f64], h: f64) -> Vec<(f64, f64)> {
    values.iter().enumerate().map(|(i, v)| (i as f64 * h, *v)).collect()
}

fn write_plan(ctx: &Context, name: &str, p: &PlanResult, plant: &PlantModel, cost: &CostParams) -> Result<(), Failure> {
    let n = plant.n_q;
    let dim = plant.kinematics.dim();
    let h = cost.step;
    let ee = ee_path(p, plant);
    let speed = speeds(&ee, h);
    let rewards = stage_rewards(&p.states, plant, &cost.goal)?;
    let mut header = vec!["step".to_string(), "time_s".to_string()];
    header.extend(indexed_columns("q", n));
    header.extend(indexed_columns("qd", n));
    header.extend(axis_columns("ee", dim));
    header.push("speed".into());
    header.extend(indexed_columns("torque", n));
    header.extend(["reward".to_string(), "cum_discounted_reward".to_string()]);
    let mut cum = 0.0;
    let mut weight = 1.0;
    let rows: Vec<Vec<String>> = p
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            cum += weight * rewards[i];
            weight *= cost.discount;
            let mut r = vec![i.to_string(), num(i as f64 * h)];
            r.extend(s.mean.iter().map(|v| num(*v)));
            r.extend(ee[i].iter().map(|v| num(*v)));
            r.push(num(speed[i]));
            // No torque acts after the last step.
            r.extend((0..n).map(|j| if i < p.torques.nrows() { num(p.torques[(i, j)]) } else { String::new() }));
            r.push(num(rewards[i]));
            r.push(num(cum));
            r
        })
        .collect();
    ctx.out.csv(&format!("{name}.csv"), &header, &rows)?;
    let path = Panel::new("end-effector path", "x [m]", "y [m]")
        .with(Series::line("mean", xy(&ee)))
        .with(Series::points("goal", vec![(cost.goal.center[0], cost.goal.center.get(1).copied().unwrap_or(0.0))]));
    let sp = Panel::new("speed", "time [s]", "speed [m/s]").with(Series::line("", timed(&speed, h)));
    ctx.out.svg(&format!("{name}.svg"), &render(&[path, sp]))
}

fn plan_status(p: &PlanResult) -> Status {
    Status::flagged(
        p.converged,
        format!("objective {} after {} iterations, gradient {:.3e}", num(p.objective), p.iterations, p.grad_norm),
    )
}

pub fn plan(ctx: &Context, goal: Option<&[f64]>) -> Outcome {
    let (plant, start, mut cost) = planar(ctx)?;
    if let Some(g) = goal {
        cost = cost.with_goal(retarget(&cost.goal, g)?);
    }
    let p = planner::plan(&start, &plant, &cost, &ctx.cfg.solver)?;
    write_plan(ctx, "plan", &p, &plant, &cost)?;
    Ok(plan_status(&p))
}

pub fn rollout_cmd(ctx: &Context, goal: Option<&[f64]>, trials: Option<usize>) -> Outcome {
    let (plant, start, mut cost) = planar(ctx)?;
    if let Some(g) = goal {
        cost = cost.with_goal(retarget(&cost.goal, g)?);
    }
    let trials = trials.unwrap_or(ctx.cfg.rollout.trials);
    let p = planner::plan(&start, &plant, &cost, &ctx.cfg.solver)?;
    let ens = rollout(&p, &plant, trials, ctx.seed)?;
    let dim = ens.dim;
    let h = cost.step;

    let mut header = vec!["trial".to_string(), "step".to_string(), "time_s".to_string()];
    header.extend(axis_columns("ee", dim));
    header.extend(axis_columns("ee_vel", dim));
    let mut rows = Vec::with_capacity(ens.trials * ens.steps);
    for k in 0..ens.trials {
        for i in 0..ens.steps {
            let mut r = vec![k.to_string(), i.to_string(), num(i as f64 * h)];
            r.extend(ens.ee(k, i).iter().map(|v| num(*v)));
            r.extend(ens.ee_velocity(k, i).iter().map(|v| num(*v)));
            rows.push(r);
        }
    }
    ctx.out.csv("rollout.csv", &header, &rows)?;

    let disp = dispersion_profile(&ens);
    let vdisp = velocity_dispersion_profile(&ens);
    let analytic: Vec<f64> = p
        .states
        .iter()
        .map(|s| planner::ee_belief(&plant, s).1.trace().max(0.0).sqrt())
        .collect();
    let header: Vec<String> =
        ["step", "time_s", "position_dispersion_m", "analytic_dispersion_m", "velocity_dispersion_m_s"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = (0..ens.steps)
        .map(|i| vec![i.to_string(), num(i as f64 * h), num(disp[i]), num(analytic[i]), num(vdisp[i])])
        .collect();
    ctx.out.csv("rollout_dispersion.csv", &header, &rows)?;

    let radius = cost.goal.width.diagonal().map(f64::sqrt);
    let st = endpoint_stats(&ens, &cost.goal, &radius);
    let mut s = Summary::default();
    s.raw("trials", &trials.to_string())
        .raw("seed", &ctx.seed.to_string())
        .num("hit_rate", st.hit_rate)
        .vec("endpoint_mean", st.fitted_mean.as_slice())
        .vec("endpoint_cov", st.fitted_cov.transpose().as_slice())
        .num("endpoint_variance", st.fitted_cov.trace());
    ctx.out.text("rollout_summary.txt", &s.finish())?;

    let mut paths = Panel::new("sampled paths", "x [m]", "y [m]");
    for k in 0..ens.trials.min(30) {
        paths = paths.with(Series::line(if k == 0 { "trials" } else { "" }, xy(&ens.ee_path(k))));
    }
    let d = Panel::new("dispersion", "time [s]", "sqrt trace [m]")
        .with(Series::line("sampled", timed(&disp, h)))
        .with(Series::line("propagated", timed(&analytic, h)));
    ctx.out.svg("rollout.svg", &render(&[paths, d]))?;
    let mut status = plan_status(&p);
    status.note = format!("hit rate {:.4}; {}", st.hit_rate, status.note);
    Ok(status)
}

fn sweep_setup<'a>(
    ctx: &'a Context,
    plant: &'a PlantModel,
    start: &'a StateGaussian,
    cost: &'a CostParams,
    trials: usize,
) -> SweepSetup<'a> {
    SweepSetup {
        plant,
        start,
        cost_template: cost,
        opts: &ctx.cfg.solver,
        rule: &ctx.cfg.analysis.rule,
        trials,
        seed: ctx.seed,
    }
}

pub fn fitts(ctx: &Context, widths: Option<&[f64]>, distances: Option<&[f64]>, trials: Option<usize>) -> Outcome {
    let (plant, start, cost) = planar(ctx)?;
    let widths = widths.unwrap_or(&ctx.cfg.analysis.widths);
    let distances = distances.unwrap_or(&ctx.cfg.analysis.distances);
    let setup = sweep_setup(ctx, &plant, &start, &cost, trials.unwrap_or(ctx.cfg.analysis.trials));
    let sweep = fitts_sweep(widths, distances, &setup)?;
    for f in &sweep.failures {
        eprintln!("cell distance {} width {} failed: {}", f.distance, f.width, f.error);
    }
    let header: Vec<String> = ["distance_m", "width_m", "id_bits", "mt_s"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = sweep
        .data
        .iter()
        .map(|d| vec![num(d.distance), num(d.width), num(d.index_of_difficulty), num(d.movement_time)])
        .collect();
    ctx.out.csv("fitts.csv", &header, &rows)?;

    let ids: Vec<f64> = sweep.data.iter().map(|d| d.index_of_difficulty).collect();
    let mts: Vec<f64> = sweep.data.iter().map(|d| d.movement_time).collect();
    let mut panel = Panel::new("movement time", "ID [bits]", "MT [s]").with(Series::points("cells", ids.iter().copied().zip(mts.iter().copied()).collect()));
    let fit = fitts_fit(&sweep.data);
    let mut s = Summary::default();
    s.raw("cells", &sweep.data.len().to_string()).raw("failed_cells", &sweep.failures.len().to_string());
    let status = match &fit {
        Ok(f) => {
            s.num("a", f.a).num("b", f.b).num("r_squared", f.r_squared).num("spearman", spearman(&ids, &mts));
            let lo = ids.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ids.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            panel = panel.with(Series::line("fit", vec![(lo, f.a + f.b * lo), (hi, f.a + f.b * hi)]));
            Status::flagged(
                sweep.failures.is_empty(),
                format!("MT = {} + {} ID, r^2 {:.4}", num(f.a), num(f.b), f.r_squared),
            )
        }
        Err(e) => {
            s.text("error", &e.to_string());
            Status::flagged(false, e.to_string())
        }
    };
    ctx.out.text("fitts_fit.txt", &s.finish())?;
    ctx.out.svg("fitts.svg", &render(&[panel]))?;
    match fit {
        Err(e @ Error::DegenerateRegression) => Err(Failure::Numerical(e.to_string())),
        _ => Ok(status),
    }
}

pub fn estimate(ctx: &Context, true_goal: Option<&[f64]>, t_obs: Option<f64>) -> Outcome {
    let (plant, start, cost) = planar(ctx)?;
    let prior = cost.goal.clone();
    let truth = match true_goal {
        Some(g) => retarget(&prior, g)?,
        None => prior.clone(),
    };
    let t_obs = t_obs.unwrap_or(ctx.cfg.scenario.t_obs);
    let human = planner::plan(&start, &plant, &cost.with_goal(truth.clone()), &ctx.cfg.solver)?;
    let n_o = observation_step(t_obs, cost.step);
    let state = human
        .states
        .get(n_o)
        .ok_or_else(|| Failure::Usage(format!("observation time {t_obs} s lies outside the horizon")))?
        .mean
        .clone();
    let obs = Observation { state, time: t_obs };
    let (est, g_hat) = estimate_goal(&start, &obs, &prior, &plant, &cost, &ctx.cfg.solver)?;
    let residual = (&est.states[n_o].mean - &obs.state).amax();

    let dim = prior.dim();
    let h = cost.step;
    let (hp, ep) = (ee_path(&human, &plant), ee_path(&est, &plant));
    let mut header = vec!["step".to_string(), "time_s".to_string()];
    header.extend(axis_columns("human_ee", dim));
    header.extend(axis_columns("estimated_ee", dim));
    let rows: Vec<Vec<String>> = (0..hp.len())
        .map(|i| {
            let mut r = vec![i.to_string(), num(i as f64 * h)];
            r.extend(hp[i].iter().chain(ep[i].iter()).map(|v| num(*v)));
            r
        })
        .collect();
    ctx.out.csv("estimate.csv", &header, &rows)?;
    let err = (&g_hat - &truth.center).norm();
    let mut s = Summary::default();
    s.vec("prior_goal", prior.center.as_slice())
        .vec("true_goal", truth.center.as_slice())
        .vec("estimated_goal", g_hat.as_slice())
        .num("goal_error_m", err)
        .num("observation_time_s", t_obs)
        .raw("observation_step", &n_o.to_string())
        .num("constraint_residual", residual)
        .raw("iterations", &est.iterations.to_string())
        .raw("converged", &est.converged.to_string());
    ctx.out.text("estimate.txt", &s.finish())?;
    let panel = Panel::new("goal inference", "x [m]", "y [m]")
        .with(Series::line("human", xy(&hp)))
        .with(Series::line("estimated plan", xy(&ep)))
        .with(Series::points("observed", vec![(hp[n_o][0], hp[n_o].get(1).copied().unwrap_or(0.0))]));
    ctx.out.svg("estimate.svg", &render(&[panel]))?;
    Ok(Status::flagged(est.converged, format!("estimated goal {:?}, error {} m", g_hat.as_slice(), num(err))))
}

fn write_samples(ctx: &Context, name: &str, samples: &[TransitionSample]) -> Result<(), Failure> {
    let header: Vec<String> = ["norm_distance", "width", "transition_distance"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| vec![num(s.norm_distance), num(s.width), num(s.transition_distance)])
        .collect();
    ctx.out.csv(name, &header, &rows)
}

/// Surrogate training data from the configured grids.
fn generate_samples(ctx: &Context, trials: usize) -> Result<(Vec<TransitionSample>, usize), Failure> {
    let (plant, start, cost) = planar(ctx)?;
    let t = &ctx.cfg.transition;
    let setup = sweep_setup(ctx, &plant, &start, &cost, trials);
    let cells = generate_transition_data(&t.distances, &t.widths, ctx.cfg.plant.arm_length, &setup)?;
    let mut samples = vec![];
    let mut failed = 0;
    for c in cells {
        match c.outcome {
            CellOutcome::Sample { sample, .. } => samples.push(sample),
            CellOutcome::Degenerate => eprintln!("cell distance {} width {}: no dispersion, skipped", c.distance, c.width),
            CellOutcome::Failed(e) => {
                failed += 1;
                eprintln!("cell distance {} width {} failed: {e}", c.distance, c.width);
            }
        }
    }
    Ok((samples, failed))
}

fn samples_panel(samples: &[TransitionSample]) -> Panel {
    let mut widths: Vec<f64> = samples.iter().map(|s| s.width).collect();
    widths.sort_by(f64::total_cmp);
    widths.dedup();
    let mut panel = Panel::new("transition point", "goal distance / arm length", "distance from goal [m]");
    for w in widths {
        let mut pts: Vec<(f64, f64)> =
            samples.iter().filter(|s| s.width == w).map(|s| (s.norm_distance, s.transition_distance)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        panel = panel.with(Series::line(format!("W = {w} m"), pts));
    }
    panel
}

pub fn transition_generate(ctx: &Context, trials: Option<usize>) -> Outcome {
    let (samples, failed) = generate_samples(ctx, trials.unwrap_or(ctx.cfg.transition.trials))?;
    write_samples(ctx, "transition_data.csv", &samples)?;
    ctx.out.svg("transition_data.svg", &render(&[samples_panel(&samples)]))?;
    Ok(Status::flagged(failed == 0, format!("{} samples, {failed} failed cells", samples.len())))
}

fn read_samples(path: &Path) -> Result<Vec<TransitionSample>, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let samples: Vec<TransitionSample> = r.deserialize().collect::<Result<_, _>>()?;
    if samples.is_empty() {
        return Err(Failure::Usage(format!("{} holds no samples", path.display())));
    }
    Ok(samples)
}

pub fn transition_fit(ctx: &Context, data: &Path) -> Outcome {
    let samples = read_samples(data)?;
    let model = gp_fit(&samples, &ctx.cfg.transition.kernel)?;
    ctx.out.text("transition_model.toml", &model.to_text())?;
    let k = model.kernel;
    Ok(Status::ok(format!(
        "signal variance {}, length scales [{}, {}], noise variance {}",
        num(k.signal_var),
        num(k.length_scales[0]),
        num(k.length_scales[1]),
        num(k.noise_var)
    )))
}

fn load_model(path: &Path) -> Result<TransitionModel, Failure> {
    let src = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(TransitionModel::from_text(&src)?)
}

pub fn transition_predict(ctx: &Context, model: &Path, distances: &[f64], widths: &[f64]) -> Outcome {
    let model = load_model(model)?;
    let arm = ctx.cfg.plant.arm_length;
    let header: Vec<String> =
        ["distance_m", "norm_distance", "width", "transition_distance", "variance"].map(String::from).to_vec();
    let mut rows = vec![];
    let mut panel = Panel::new("predicted transition point", "goal distance [m]", "distance from goal [m]");
    for &w in widths {
        let mut pts = vec![];
        for &d in distances {
            let (m, v) = gp_predict(&model, d / arm, w);
            rows.push(vec![num(d), num(d / arm), num(w), num(m), num(v)]);
            pts.push((d, m));
        }
        panel = panel.with(Series::line(format!("W = {w} m"), pts));
    }
    ctx.out.csv("transition_predict.csv", &header, &rows)?;
    ctx.out.svg("transition_predict.svg", &render(&[panel]))?;
    Ok(Status::ok(format!("{} predictions", rows.len())))
}

fn write_report(ctx: &Context, name: &str, r: &ScenarioReport) -> Result<(), Failure> {
    let dim = r.human_traj.first().map_or(0, |x| x.len());
    let mut header = vec!["time_s".to_string()];
    header.extend(axis_columns("human_ee", dim));
    header.extend(axis_columns("robot_ee", dim));
    header.extend(axis_columns("stiffness", dim));
    header.extend(axis_columns("force", dim));
    header.push("work_J".into());
    header.extend(axis_columns("rest", dim));
    header.push("sync_error_m".into());
    let rows: Vec<Vec<String>> = (0..r.time.len())
        .map(|i| {
            let mut row = vec![num(r.time[i])];
            for v in [&r.human_traj[i], &r.robot_traj[i], &r.stiffness[i], &r.force[i]] {
                row.extend(v.iter().map(|x| num(*x)));
            }
            row.push(num(r.work[i]));
            row.extend(r.rest_traj[i].iter().map(|x| num(*x)));
            row.push(num(r.sync_error[i]));
            row
        })
        .collect();
    ctx.out.csv(&format!("{name}.csv"), &header, &rows)?;

    let mut s = Summary::default();
    s.num("finish_time_human_s", r.finish_time_human)
        .num("finish_time_robot_s", r.finish_time_robot)
        .num("interaction_work_J", r.interaction_work)
        .num("max_sync_error_m", r.sync_error.iter().copied().fold(0.0, f64::max))
        .raw("completed", &r.completed.to_string());
    if let Some(t) = r.transition_time {
        s.num("transition_time_s", t);
    }
    if let Some(g) = &r.estimated_goal {
        s.vec("estimated_goal", g.as_slice());
    }
    ctx.out.text(&format!("{name}_summary.txt"), &s.finish())?;

    let h = r.time.get(1).copied().unwrap_or(1.0);
    let k: Vec<f64> = r.stiffness.iter().map(|v| v.amax()).collect();
    let path = Panel::new("paths", "x [m]", "y [m]")
        .with(Series::line("object", xy(&r.human_traj)))
        .with(Series::line("spring rest", xy(&r.rest_traj)));
    let err = Panel::new("sync error", "time [s]", "[m]").with(Series::line("", timed(&r.sync_error, h)));
    let st = Panel::new("stiffness and work", "time [s]", "[N/m], [J]")
        .with(Series::line("max stiffness / 100", k.iter().enumerate().map(|(i, v)| (i as f64 * h, v / 100.0)).collect()))
        .with(Series::line("work", timed(&r.work, h)));
    ctx.out.svg(&format!("{name}.svg"), &render(&[path, err, st]))
}

pub fn scenario_sync_cmd(ctx: &Context, true_goal: Option<&[f64]>, t_obs: Option<f64>) -> Outcome {
    let c = &ctx.cfg.scenario.cartesian;
    let plant = ctx.cfg.cartesian_plant();
    let cost = ctx.cfg.cartesian_cost()?;
    let start = StateGaussian::at(&c.start, &[0.0; 3]);
    let truth = retarget(&cost.goal, true_goal.unwrap_or(&c.true_goal))?;
    let setup = SyncSetup {
        plant: &plant,
        start: &start,
        prior: &cost.goal,
        cost: &cost,
        opts: &ctx.cfg.solver,
        rule: &ctx.cfg.analysis.rule,
        stiffness: DVector::from_column_slice(&ctx.cfg.scenario.sync_stiffness),
        t_obs: t_obs.unwrap_or(ctx.cfg.scenario.t_obs),
    };
    let r = scenario_sync(&truth.center, &setup, ctx.seed)?;
    write_report(ctx, "scenario_sync", &r)?;
    Ok(Status::ok(format!(
        "human finishes at {} s, robot at {} s, work {} J",
        num(r.finish_time_human),
        num(r.finish_time_robot),
        num(r.interaction_work)
    )))
}

/// `all` or one policy name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyChoice {
    All,
    One(HandoverPolicy),
}

impl std::str::FromStr for PolicyChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            return Ok(PolicyChoice::All);
        }
        s.parse().map(PolicyChoice::One).map_err(|e: Error| e.to_string())
    }
}

pub fn scenario_handover_cmd(ctx: &Context, policy: PolicyChoice, model: Option<&Path>, offset: Option<&[f64]>) -> Outcome {
    let (plant, start, cost) = planar(ctx)?;
    let sc = &ctx.cfg.scenario;
    let offset = offset.unwrap_or(&sc.goal_offset);
    if offset.len() != cost.goal.dim() {
        return Err(Failure::Usage(format!("goal offset needs {} coordinates", cost.goal.dim())));
    }
    let truth = &cost.goal.center + DVector::from_column_slice(offset);
    let model = match model {
        Some(p) => load_model(p)?,
        None => {
            let (samples, _) = generate_samples(ctx, ctx.cfg.transition.trials)?;
            gp_fit(&samples, &ctx.cfg.transition.kernel)?
        }
    };
    let corrective = Corrective {
        width_factor: sc.corrective_width_factor,
        discount_drop: sc.corrective_discount_drop,
        horizon: sc.corrective_horizon,
        replan_interval: sc.replan_interval,
    };
    let setup = HandoverSetup::new(
        &plant,
        &start,
        &cost,
        &ctx.cfg.solver,
        &ctx.cfg.analysis.rule,
        sc.stiffness,
        sc.ramp,
        sc.robot_mass,
        corrective,
        sc.duration,
        ctx.cfg.plant.arm_length,
    )?;
    match policy {
        PolicyChoice::One(p) => {
            let r = scenario_handover(&truth, &setup, Some(&model), p, ctx.seed)?;
            write_report(ctx, &format!("scenario_handover_{p}"), &r)?;
            Ok(Status::flagged(
                r.completed,
                format!("{p}: total time {} s, work {} J", num(r.finish_time_human), num(r.interaction_work)),
            ))
        }
        PolicyChoice::All => {
            let seeds: Vec<u64> = (0..sc.seeds as u64).map(|k| ctx.seed.wrapping_add(k)).collect();
            let summary = compare_handover(&truth, &setup, Some(&model), &seeds)?;
            let header: Vec<String> =
                ["policy", "mean_total_time_s", "mean_work_J", "mean_transition_time_s", "completed", "runs"]
                    .map(String::from)
                    .to_vec();
            let rows: Vec<Vec<String>> = summary
                .iter()
                .map(|s| {
                    vec![
                        s.policy.to_string(),
                        num(s.mean_total_time),
                        num(s.mean_work),
                        num(s.mean_transition_time),
                        s.completed.to_string(),
                        s.runs.to_string(),
                    ]
                })
                .collect();
            ctx.out.csv("handover_comparison.csv", &header, &rows)?;
            let all_done = summary.iter().all(|s| s.completed == s.runs);
            let note: Vec<String> = summary
                .iter()
                .map(|s| format!("{} {:.3} s {:.3} J", s.policy, s.mean_total_time, s.mean_work))
                .collect();
            Ok(Status::flagged(all_done, note.join("; ")))
        }
    }
}
