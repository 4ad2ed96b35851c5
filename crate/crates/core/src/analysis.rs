//! Movement-time extraction, speed-profile metrics and Fitts'-law fits.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{PlantModel, StateGaussian};
use crate::planner::{plan, CostParams, PlannerOpts};
use crate::reward::GoalSpec;
use crate::rollout::rollout;
use crate::{Error, Result};

/// Convention deciding when a movement has ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MovementRule {
    /// The movement ends once speed drops below this fraction of the peak.
    pub speed_fraction: f64,
}

impl Default for MovementRule {
    fn default() -> Self {
        MovementRule { speed_fraction: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityMetrics {
    /// [s]
    pub movement_time: f64,
    /// [m/s]
    pub peak_speed: f64,
    /// [s]
    pub peak_time: f64,
    /// `peak_time / movement_time`.
    pub asymmetry: f64,
}

/// Speeds by central differences, one-sided at both ends.
pub fn speeds(path: &[DVector<f64>], h: f64) -> Vec<f64> {
    let n = path.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let (a, b, span) = match i {
                0 => (0, 1, h),
                _ if i == n - 1 => (n - 2, n - 1, h),
                _ => (i - 1, i + 1, 2.0 * h),
            };
            (&path[b] - &path[a]).norm() / span
        })
        .collect()
}

fn within(x: &DVector<f64>, goal: &GoalSpec, scale: f64) -> bool {
    let r = goal.radii();
    x.iter().zip(goal.center.iter()).zip(r.iter()).all(|((x, g), r)| (x - g).abs() <= scale * r)
}

/// Movement time is the first sample after the global speed peak whose
/// speed is below `rule.speed_fraction` of the peak while the position is
/// within `√diag(W)` of the goal.
pub fn velocity_metrics(path: &[DVector<f64>], h: f64, goal: &GoalSpec, rule: &MovementRule) -> Result<VelocityMetrics> {
    if !path.iter().any(|x| within(x, goal, 3.0)) {
        return Err(Error::MovementIncomplete);
    }
    let v = speeds(path, h);
    let (peak_idx, peak) = v
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, s)| if s > best.1 { (i, s) } else { best });
    if !(peak > 0.0) {
        return Err(Error::MovementIncomplete);
    }
    let end = (peak_idx + 1..path.len())
        .find(|&i| v[i] < rule.speed_fraction * peak && within(&path[i], goal, 1.0))
        .ok_or(Error::MovementIncomplete)?;
    let movement_time = end as f64 * h;
    let peak_time = peak_idx as f64 * h;
    Ok(VelocityMetrics { movement_time, peak_speed: peak, peak_time, asymmetry: peak_time / movement_time })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittsDatum {
    /// [m]
    pub distance: f64,
    /// Scalar width [m].
    pub width: f64,
    /// `log2(2D/W)` [bits].
    pub index_of_difficulty: f64,
    /// [s]
    pub movement_time: f64,
}

pub fn index_of_difficulty(distance: f64, width: f64) -> f64 {
    (2.0 * distance / width).log2()
}

/// One failed sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub distance: f64,
    pub width: f64,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    /// Rows ordered width-major, then distance.
    pub data: Vec<FittsDatum>,
    /// Per-cell diagnostics in the same order as `data`.
    pub metrics: Vec<VelocityMetrics>,
    pub failures: Vec<CellFailure>,
}

/// Reach along +x from the start's end-effector position for every
/// (width, distance) pair, with an isotropic goal of standard width `w`.
pub struct SweepSetup<'a> {
    pub plant: &'a PlantModel,
    pub start: &'a StateGaussian,
    pub cost_template: &'a CostParams,
    pub opts: &'a PlannerOpts,
    pub rule: &'a MovementRule,
    /// 0 measures the mean plan; otherwise movement times are averaged over
    /// this many noisy trials.
    pub trials: usize,
    pub seed: u64,
}

/// Goal placed `distance` along +x from `origin`.
pub fn reach_goal(origin: &DVector<f64>, distance: f64, width: f64) -> Result<GoalSpec> {
    let mut c = origin.clone();
    c[0] += distance;
    GoalSpec::isotropic(c.as_slice(), width)
}

/// Plan (and optionally roll out) one reach and measure it.
pub fn measure_reach(setup: &SweepSetup, distance: f64, width: f64, cell: usize) -> Result<(FittsDatum, VelocityMetrics)> {
    let origin = setup.plant.kinematics.forward(&setup.start.position());
    let goal = reach_goal(&origin, distance, width)?;
    let cost = setup.cost_template.with_goal(goal.clone());
    let p = plan(setup.start, setup.plant, &cost, setup.opts)?;
    let metrics = if setup.trials == 0 {
        let path: Vec<_> = p.states.iter().map(|s| setup.plant.kinematics.forward(&s.position())).collect();
        velocity_metrics(&path, cost.step, &goal, setup.rule)?
    } else {
        let ens = rollout(&p, setup.plant, setup.trials, setup.seed.wrapping_add(cell as u64))?;
        let ok: Vec<VelocityMetrics> = (0..ens.trials)
            .filter_map(|k| velocity_metrics(&ens.ee_path(k), cost.step, &goal, setup.rule).ok())
            .collect();
        if ok.is_empty() {
            return Err(Error::MovementIncomplete);
        }
        let m = ok.len() as f64;
        let mean = |f: fn(&VelocityMetrics) -> f64| ok.iter().map(f).sum::<f64>() / m;
        VelocityMetrics {
            movement_time: mean(|v| v.movement_time),
            peak_speed: mean(|v| v.peak_speed),
            peak_time: mean(|v| v.peak_time),
            asymmetry: mean(|v| v.asymmetry),
        }
    };
    let datum = FittsDatum {
        distance,
        width,
        index_of_difficulty: index_of_difficulty(distance, width),
        movement_time: metrics.movement_time,
    };
    Ok((datum, metrics))
}

pub fn fitts_sweep(widths: &[f64], distances: &[f64], setup: &SweepSetup) -> Result<SweepOutput> {
    if widths.is_empty() || distances.is_empty() {
        return Err(Error::InvalidInput("sweep grids must be nonempty".into()));
    }
    let cells: Vec<(f64, f64)> = widths.iter().flat_map(|&w| distances.iter().map(move |&d| (d, w))).collect();
    let results: Vec<_> = cells
        .par_iter()
        .enumerate()
        .map(|(k, &(d, w))| measure_reach(setup, d, w, k))
        .collect();
    let mut out = SweepOutput { data: vec![], metrics: vec![], failures: vec![] };
    for ((d, w), r) in cells.into_iter().zip(results) {
        match r {
            Ok((datum, m)) => {
                out.data.push(datum);
                out.metrics.push(m);
            }
            Err(error) => out.failures.push(CellFailure { distance: d, width: w, error }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittsFit {
    /// Intercept [s].
    pub a: f64,
    /// Slope [s/bit].
    pub b: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `MT = a + b·ID`.
pub fn fitts_fit(data: &[FittsDatum]) -> Result<FittsFit> {
    let n = data.len() as f64;
    let ids: Vec<f64> = data.iter().map(|d| d.index_of_difficulty).collect();
    let mts: Vec<f64> = data.iter().map(|d| d.movement_time).collect();
    let mx = ids.iter().sum::<f64>() / n;
    let my = mts.iter().sum::<f64>() / n;
    let sxx: f64 = ids.iter().map(|x| (x - mx).powi(2)).sum();
    if data.len() < 2 || !(sxx > 1e-12 * (1.0 + mx * mx) * n) {
        return Err(Error::DegenerateRegression);
    }
    let sxy: f64 = ids.iter().zip(&mts).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = ids.iter().zip(&mts).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let ss_tot: f64 = mts.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    Ok(FittsFit { a, b, r_squared })
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
