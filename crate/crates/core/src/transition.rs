//! Gaussian-process model of where ballistic control hands over to
//! corrective control, indexed by normalized goal distance and goal width.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{reach_goal, SweepSetup};
use crate::planner::plan;
use crate::rollout::{mean_distance, rollout, velocity_dispersion_profile, RolloutEnsemble};
use crate::solver::{minimize, SolverOpts};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionSample {
    /// Goal distance over arm length.
    pub norm_distance: f64,
    /// Scalar goal width [m].
    pub width: f64,
    /// Distance from the goal at the transition [m].
    pub transition_distance: f64,
}

/// Squared-exponential kernel hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    /// [m²]
    pub signal_var: f64,
    /// Length scales for (norm_distance, width).
    pub length_scales: [f64; 2],
    /// [m²]
    pub noise_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelOpts {
    /// Starting hyperparameters; derived from the data when absent.
    pub initial: Option<KernelParams>,
    /// Maximize the log marginal likelihood over the hyperparameters.
    pub optimize: bool,
}

impl Default for KernelOpts {
    fn default() -> Self {
        KernelOpts { initial: None, optimize: true }
    }
}

/// Largest diagonal jitter, relative to the mean Gram diagonal, tried
/// before a factorization is declared ill-conditioned.
pub const MAX_JITTER: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct TransitionModel {
    pub samples: Vec<TransitionSample>,
    pub kernel: KernelParams,
    /// Constant prior mean (sample mean of the targets) [m].
    pub mean_offset: f64,
    /// Relative jitter that made the Gram matrix factorizable.
    pub jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn inputs(s: &TransitionSample) -> [f64; 2] {
    [s.norm_distance, s.width]
}

fn se(a: [f64; 2], b: [f64; 2], k: &KernelParams) -> f64 {
    let r2: f64 = (0..2).map(|d| ((a[d] - b[d]) / k.length_scales[d]).powi(2)).sum();
    k.signal_var * (-0.5 * r2).exp()
}

fn gram(samples: &[TransitionSample], k: &KernelParams) -> DMatrix<f64> {
    let n = samples.len();
    DMatrix::from_fn(n, n, |i, j| {
        se(inputs(&samples[i]), inputs(&samples[j]), k) + if i == j { k.noise_var } else { 0.0 }
    })
}

fn factor(k: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let scale = k.trace() / n as f64;
    let mut jitter = 0.0;
    loop {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter * scale;
        }
        if let Some(c) = kj.cholesky() {
            return Ok((c, jitter));
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
        if jitter > MAX_JITTER * 1.0000001 {
            return Err(Error::IllConditionedGram { jitter: MAX_JITTER });
        }
    }
}

fn targets(samples: &[TransitionSample]) -> (DVector<f64>, f64) {
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.transition_distance));
    let m = y.mean();
    (y.add_scalar(-m), m)
}

/// Log marginal likelihood and its gradient with respect to
/// `(ln signal_var, ln ℓ_1, ln ℓ_2, ln noise_var)`.
pub fn log_marginal_likelihood(samples: &[TransitionSample], k: &KernelParams) -> Result<(f64, [f64; 4])> {
    let n = samples.len();
    let (y, _) = targets(samples);
    let kmat = gram(samples, k);
    let (chol, _) = factor(kmat.clone())?;
    let alpha = chol.solve(&y);
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let lml = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let inner = &alpha * alpha.transpose() - chol.inverse();
    let mut grad = [0.0; 4];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (inputs(&samples[i]), inputs(&samples[j]));
            let kf = se(a, b, k);
            let w = 0.5 * inner[(i, j)];
            grad[0] += w * kf;
            for d in 0..2 {
                grad[1 + d] += w * kf * ((a[d] - b[d]) / k.length_scales[d]).powi(2);
            }
            if i == j {
                grad[3] += w * k.noise_var;
            }
        }
    }
    Ok((lml, grad))
}

fn default_kernel(samples: &[TransitionSample]) -> KernelParams {
    let spread = |f: fn(&TransitionSample) -> f64| {
        let lo = samples.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = samples.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if hi > lo { 0.5 * (hi - lo) } else { 1.0 }
    };
    let (y, _) = targets(samples);
    let var = (y.norm_squared() / samples.len() as f64).max(1e-12);
    KernelParams {
        signal_var: var,
        length_scales: [spread(|s| s.norm_distance), spread(|s| s.width)],
        noise_var: 1e-2 * var,
    }
}

fn pack(k: &KernelParams) -> DVector<f64> {
    DVector::from_vec(vec![k.signal_var.ln(), k.length_scales[0].ln(), k.length_scales[1].ln(), k.noise_var.ln()])
}

fn unpack(x: &DVector<f64>) -> KernelParams {
    KernelParams { signal_var: x[0].exp(), length_scales: [x[1].exp(), x[2].exp()], noise_var: x[3].exp() }
}

pub fn gp_fit(samples: &[TransitionSample], opts: &KernelOpts) -> Result<TransitionModel> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput("a transition model needs at least two samples".into()));
    }
    if samples.iter().any(|s| ![s.norm_distance, s.width, s.transition_distance].iter().all(|v| v.is_finite())) {
        return Err(Error::InvalidInput("non-finite transition sample".into()));
    }
    let mut kernel = opts.initial.unwrap_or_else(|| default_kernel(samples));
    if opts.optimize {
        let f = |x: &DVector<f64>| {
            if x.iter().any(|v| v.abs() > 40.0) {
                return (f64::NAN, DVector::zeros(4));
            }
            match log_marginal_likelihood(samples, &unpack(x)) {
                Ok((l, g)) => (-l, DVector::from_iterator(4, g.iter().map(|v| -v))),
                Err(_) => (f64::NAN, DVector::zeros(4)),
            }
        };
        let solver = SolverOpts { grad_tol: 1e-8, max_iters: 200, ..Default::default() };
        let (x, diag) = minimize(f, pack(&kernel), &solver);
        if diag.value.is_finite() {
            kernel = unpack(&x);
        }
    }
    with_kernel(samples, kernel)
}

/// Condition the GP on `samples` with fixed hyperparameters.
pub fn with_kernel(samples: &[TransitionSample], kernel: KernelParams) -> Result<TransitionModel> {
    let (y, mean_offset) = targets(samples);
    let (chol, jitter) = factor(gram(samples, &kernel))?;
    let alpha = chol.solve(&y);
    Ok(TransitionModel { samples: samples.to_vec(), kernel, mean_offset, jitter, chol, alpha })
}

/// Posterior mean [m] and latent variance [m²] of the transition distance.
pub fn gp_predict(model: &TransitionModel, norm_distance: f64, width: f64) -> (f64, f64) {
    let x = [norm_distance, width];
    let ks = DVector::from_iterator(model.samples.len(), model.samples.iter().map(|s| se(inputs(s), x, &model.kernel)));
    let mean = model.mean_offset + ks.dot(&model.alpha);
    let v = model.chol.l().solve_lower_triangular(&ks).expect("triangular factor");
    ((mean), (model.kernel.signal_var - v.norm_squared()).max(0.0))
}

/// On-disk form: hyperparameters plus training samples; the factorization
/// is recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub kernel: KernelParams,
    pub samples: Vec<TransitionSample>,
}

impl TransitionModel {
    pub fn to_file(&self) -> ModelFile {
        ModelFile { kernel: self.kernel, samples: self.samples.clone() }
    }

    pub fn from_file(f: &ModelFile) -> Result<Self> {
        with_kernel(&f.samples, f.kernel)
    }

    /// TOML text of [`ModelFile`].
    pub fn to_text(&self) -> String {
        toml::to_string(&self.to_file()).expect("model file serializes")
    }

    pub fn from_text(src: &str) -> Result<Self> {
        let f: ModelFile = toml::from_str(src).map_err(|e| Error::InvalidInput(format!("transition model: {}", e.message())))?;
        Self::from_file(&f)
    }
}

/// Step of peak end-effector velocity dispersion and the mean distance of
/// the trials from `goal` there. The peak is refined between samples by a
/// parabola through its neighbours and the distance interpolated linearly.
/// `None` when the ensemble carries no dispersion at all.
pub fn locate_transition(ens: &RolloutEnsemble, goal: &DVector<f64>) -> Option<(usize, f64)> {
    let prof = velocity_dispersion_profile(ens);
    let (step, peak) = prof
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    if !(peak > 0.0) {
        return None;
    }
    let dist = |k: usize| mean_distance(ens, k, goal);
    if step == 0 || step + 1 >= prof.len() {
        return Some((step, dist(step)));
    }
    let (a, b, c) = (prof[step - 1], prof[step], prof[step + 1]);
    let curv = a - 2.0 * b + c;
    let shift = if curv < 0.0 { (0.5 * (a - c) / curv).clamp(-0.5, 0.5) } else { 0.0 };
    let d = if shift >= 0.0 {
        (1.0 - shift) * dist(step) + shift * dist(step + 1)
    } else {
        (1.0 + shift) * dist(step) - shift * dist(step - 1)
    };
    Some((step, d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCell {
    pub distance: f64,
    pub width: f64,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Sample { sample: TransitionSample, step: usize, steps: usize },
    /// The ensemble never disperses (noise-free plant).
    Degenerate,
    Failed(Error),
}

/// Surrogate transition data: for every cell plan a reach, roll it out and
/// record the distance from the goal where trial-to-trial velocity spread
/// peaks, i.e. where the noisy ballistic phase ends.
pub fn generate_transition_data(
    distances: &[f64],
    widths: &[f64],
    arm_length: f64,
    setup: &SweepSetup,
) -> Result<Vec<GeneratedCell>> {
    if distances.is_empty() || widths.is_empty() {
        return Err(Error::InvalidInput("transition grids must be nonempty".into()));
    }
    if !(arm_length > 0.0) {
        return Err(Error::InvalidInput("arm length must be positive".into()));
    }
    let trials = setup.trials.max(2);
    let cells: Vec<(f64, f64)> = distances.iter().flat_map(|&d| widths.iter().map(move |&w| (d, w))).collect();
    let out = cells
        .par_iter()
        .enumerate()
        .map(|(k, &(distance, width))| {
            let run = || -> Result<CellOutcome> {
                let origin = setup.plant.kinematics.forward(&setup.start.position());
                let goal = reach_goal(&origin, distance, width)?;
                let cost = setup.cost_template.with_goal(goal.clone());
                let p = plan(setup.start, setup.plant, &cost, setup.opts)?;
                let ens = rollout(&p, setup.plant, trials, setup.seed.wrapping_add(k as u64))?;
                Ok(match locate_transition(&ens, &goal.center) {
                    None => CellOutcome::Degenerate,
                    Some((step, d)) => CellOutcome::Sample {
                        sample: TransitionSample {
                            norm_distance: distance / arm_length,
                            width,
                            transition_distance: d,
                        },
                        step,
                        steps: ens.steps,
                    },
                })
            };
            let outcome = run().unwrap_or_else(CellOutcome::Failed);
            GeneratedCell { distance, width, outcome }
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(d: f64, w: f64, t: f64) -> TransitionSample {
        TransitionSample { norm_distance: d, width: w, transition_distance: t }
    }

    #[test]
    fn two_identical_outputs_interpolate() {
        let s = vec![sample(0.3, 0.01, 0.02), sample(0.6, 0.03, 0.02)];
        let m = gp_fit(&s, &KernelOpts::default()).unwrap();
        for x in &s {
            let (mean, _) = gp_predict(&m, x.norm_distance, x.width);
            assert!((mean - 0.02).abs() <= m.kernel.noise_var.sqrt() + 1e-12);
        }
    }

    #[test]
    fn variance_grows_away_from_data() {
        let s: Vec<_> = (0..6).map(|i| sample(0.2 + 0.1 * i as f64, 0.01 + 0.005 * (i % 3) as f64, 0.01 * i as f64)).collect();
        let m = gp_fit(&s, &KernelOpts::default()).unwrap();
        let (_, near) = gp_predict(&m, s[2].norm_distance, s[2].width);
        let (_, far) = gp_predict(&m, 5.0, 0.5);
        assert!(near <= far);
        assert!(near >= 0.0);
    }

    #[test]
    fn lml_gradient_matches_finite_differences() {
        let s: Vec<_> = (0..8).map(|i| sample(0.2 + 0.07 * i as f64, 0.005 * (1 + i % 4) as f64, 0.02 + 0.01 * (i as f64).sin())).collect();
        let k = KernelParams { signal_var: 2e-4, length_scales: [0.3, 0.01], noise_var: 1e-6 };
        let (_, g) = log_marginal_likelihood(&s, &k).unwrap();
        let x0 = pack(&k);
        for p in 0..4 {
            let eps = 1e-6;
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[p] += eps;
            xm[p] -= eps;
            let fd = (log_marginal_likelihood(&s, &unpack(&xp)).unwrap().0 - log_marginal_likelihood(&s, &unpack(&xm)).unwrap().0)
                / (2.0 * eps);
            assert_relative_eq!(fd, g[p], max_relative = 1e-5, epsilon = 1e-8);
        }
    }

    #[test]
    fn fitting_does_not_lower_likelihood() {
        let s: Vec<_> = (0..10).map(|i| sample(0.2 + 0.05 * i as f64, 0.005 * (1 + i % 3) as f64, 0.05 * (0.2 + 0.05 * i as f64))).collect();
        let init = default_kernel(&s);
        let m = gp_fit(&s, &KernelOpts { initial: Some(init), optimize: true }).unwrap();
        let before = log_marginal_likelihood(&s, &init).unwrap().0;
        let after = log_marginal_likelihood(&s, &m.kernel).unwrap().0;
        assert!(after >= before);
    }

    #[test]
    fn duplicate_inputs_need_jitter_or_noise() {
        let k = KernelParams { signal_var: 1.0, length_scales: [1.0, 1.0], noise_var: 0.0 };
        let s = vec![sample(0.5, 0.01, 0.1), sample(0.5, 0.01, 0.1), sample(0.7, 0.02, 0.2)];
        let m = with_kernel(&s, k).unwrap();
        assert!(m.jitter > 0.0);
        let bad = KernelParams { signal_var: f64::NAN, ..k };
        assert!(matches!(with_kernel(&s, bad), Err(Error::IllConditionedGram { .. })));
    }

    #[test]
    fn persistence_round_trip() {
        let s: Vec<_> = (0..5).map(|i| sample(0.2 + 0.1 * i as f64, 0.01, 0.01 * i as f64)).collect();
        let m = gp_fit(&s, &KernelOpts::default()).unwrap();
        let text = toml::to_string(&m.to_file()).unwrap();
        let back = TransitionModel::from_file(&toml::from_str(&text).unwrap()).unwrap();
        assert_eq!(gp_predict(&m, 0.45, 0.015), gp_predict(&back, 0.45, 0.015));
    }
}
