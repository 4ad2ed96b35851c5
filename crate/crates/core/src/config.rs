//! Experiment configuration loaded from a TOML file.
//!
//! Every section and key is optional; missing values take the planar
//! validation defaults (two Cartesian axes, `M = 2I`, `D = 0.3I`, `h = 0.02`,
//! `H = 30`, `γ = 0.97`, `ν = 1e-5`). Unknown keys are rejected.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::MovementRule;
use crate::dynamics::{ArmSegments, Inertia, NoiseForm, NoiseModel, PlantModel, StateGaussian};
use crate::kinematics::Kinematics;
use crate::planner::{CostParams, PlannerOpts};
use crate::reward::GoalSpec;
use crate::transition::KernelOpts;
use crate::{Error, Result};

/// Environment variable that overrides `output.directory`.
pub const OUTPUT_DIR_ENV: &str = "REACHPLAN_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KinematicsKind {
    /// Point mass; joints are Cartesian axes.
    Identity,
    TwoLinkPlanar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSection {
    pub kinematics: KinematicsKind,
    pub n_q: usize,
    /// Diagonal of `M` [kg]; ignored by the two-link arm.
    pub mass: Vec<f64>,
    /// Diagonal of `D`.
    pub damping: Vec<f64>,
    /// Diagonal of the multiplicative torque-noise covariance κ.
    pub kappa: Vec<f64>,
    /// Recorded for completeness; does not enter the model.
    pub sigma_tau: f64,
    pub noise_form: NoiseForm,
    /// Gravity along −y (two-link arm only).
    pub gravity: bool,
    /// [m]
    pub link_lengths: [f64; 2],
    /// [kg]
    pub link_masses: [f64; 2],
    /// Normalizer for transition-model goal distances [m].
    pub arm_length: f64,
}

impl Default for PlantSection {
    fn default() -> Self {
        PlantSection {
            kinematics: KinematicsKind::Identity,
            n_q: 2,
            mass: vec![2.0; 2],
            damping: vec![0.3; 2],
            kappa: vec![3e-4; 2],
            sigma_tau: 1e2,
            noise_form: NoiseForm::Corrected,
            gravity: false,
            link_lengths: [0.3, 0.3],
            link_masses: [1.9, 1.6],
            arm_length: 0.6,
        }
    }
}

/// Initial end-effector state; the planner starts from a point belief.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StartSection {
    /// [m]
    pub position: Vec<f64>,
    /// [m/s]
    pub velocity: Vec<f64>,
    /// Joint-space guess used to invert nonlinear kinematics.
    pub joint_hint: Vec<f64>,
}

impl Default for StartSection {
    fn default() -> Self {
        StartSection { position: vec![0.0; 2], velocity: vec![0.0; 2], joint_hint: vec![] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSection {
    /// Goal prior centre [m].
    pub goal: Vec<f64>,
    /// Per-axis standard goal widths [m]; `W = diag(widths²)`.
    pub widths: Vec<f64>,
    pub discount: f64,
    pub effort_weight: f64,
    pub horizon: usize,
    /// [s]
    pub step: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        CostSection {
            goal: vec![0.3, 0.0],
            widths: vec![0.02; 2],
            discount: 0.97,
            effort_weight: 1e-5,
            horizon: 30,
            step: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    #[serde(flatten)]
    pub rule: MovementRule,
    /// Fitts grid [m].
    pub widths: Vec<f64>,
    pub distances: Vec<f64>,
    /// 0 measures mean plans only.
    pub trials: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            rule: MovementRule::default(),
            widths: vec![0.005, 0.01, 0.02, 0.04],
            distances: vec![0.15, 0.3, 0.45],
            trials: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutSection {
    pub trials: usize,
    pub seed: u64,
}

impl Default for RolloutSection {
    fn default() -> Self {
        RolloutSection { trials: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransitionSection {
    /// Goal distances for surrogate data [m].
    pub distances: Vec<f64>,
    /// Goal widths for surrogate data [m].
    pub widths: Vec<f64>,
    pub trials: usize,
    pub kernel: KernelOpts,
}

impl Default for TransitionSection {
    fn default() -> Self {
        TransitionSection {
            distances: vec![0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45],
            widths: vec![0.01, 0.02, 0.03, 0.04],
            trials: 500,
            kernel: KernelOpts::default(),
        }
    }
}

/// Three-axis point-mass model used by the synchronization scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartesianSection {
    pub mass: f64,
    pub damping: f64,
    pub kappa: f64,
    pub start: [f64; 3],
    /// Goal prior centre [m].
    pub goal: [f64; 3],
    /// Standard goal width [m], all axes.
    pub width: f64,
    pub discount: f64,
    pub effort_weight: f64,
    pub horizon: usize,
    pub step: f64,
    /// Goal the simulated human actually reaches for [m].
    pub true_goal: [f64; 3],
}

impl Default for CartesianSection {
    fn default() -> Self {
        CartesianSection {
            mass: 2.0,
            damping: 0.3,
            kappa: 3e-4,
            start: [0.0; 3],
            goal: [0.3, 0.0, 0.2],
            width: 0.05,
            discount: 0.97,
            effort_weight: 1e-5,
            horizon: 50,
            step: 0.02,
            true_goal: [0.3, 0.1, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    /// Handover spring stiffness before the ramp [N/m].
    pub stiffness: f64,
    /// Synchronization spring stiffness per axis [N/m].
    pub sync_stiffness: [f64; 3],
    /// Stiffness ramp-down duration [s].
    pub ramp: f64,
    /// Observation time for goal inference [s].
    pub t_obs: f64,
    /// Corrective-phase goal width relative to the nominal width.
    pub corrective_width_factor: f64,
    /// Amount subtracted from γ for the corrective phase.
    pub corrective_discount_drop: f64,
    /// True handover goal minus the robot's believed goal [m].
    pub goal_offset: Vec<f64>,
    /// Corrective-phase horizon [steps].
    pub corrective_horizon: usize,
    /// Steps executed between corrective re-plans.
    pub replan_interval: usize,
    /// Apparent robot mass felt by the human after handover [kg].
    pub robot_mass: f64,
    /// Simulated handover time [s].
    pub duration: f64,
    pub seeds: usize,
    pub cartesian: CartesianSection,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            stiffness: 400.0,
            sync_stiffness: [0.0, 0.0, 400.0],
            ramp: 0.5,
            t_obs: 0.2,
            corrective_width_factor: 0.5,
            corrective_discount_drop: 0.02,
            goal_offset: vec![0.0, 0.03],
            corrective_horizon: 40,
            replan_interval: 5,
            robot_mass: 4.0,
            duration: 1.5,
            seeds: 10,
            cartesian: CartesianSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: "out".into(), formats: vec![OutputFormat::Csv, OutputFormat::Svg] }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub plant: PlantSection,
    pub start: StartSection,
    pub cost: CostSection,
    pub solver: PlannerOpts,
    pub analysis: AnalysisSection,
    pub rollout: RolloutSection,
    pub transition: TransitionSection,
    pub scenario: ScenarioSection,
    pub output: OutputSection,
}

fn invalid(field: &str, constraint: &str) -> Error {
    Error::ConfigValidation { field: field.into(), constraint: constraint.into() }
}

fn check(ok: bool, field: &str, constraint: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(invalid(field, constraint))
    }
}

fn check_all(xs: &[f64], pred: impl Fn(f64) -> bool, field: &str, constraint: &str) -> Result<()> {
    check(xs.iter().all(|&x| x.is_finite() && pred(x)), field, constraint)
}

fn check_len(xs: &[f64], n: usize, field: &str) -> Result<()> {
    check(xs.len() == n, field, &format!("must have {n} entries"))
}

/// 1-based (line, column) of byte offset `pos` in `src`.
fn line_col(src: &str, pos: usize) -> (usize, usize) {
    let before = &src[..pos.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl ExperimentConfig {
    /// Parse and validate TOML text.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(src, s.start));
            Error::ConfigParse { line, column, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The end-effector dimension implied by the plant section.
    pub fn dim(&self) -> usize {
        match self.plant.kinematics {
            KinematicsKind::Identity => self.plant.n_q,
            KinematicsKind::TwoLinkPlanar => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.plant;
        check(p.n_q >= 1, "plant.n_q", "must be at least 1")?;
        if p.kinematics == KinematicsKind::TwoLinkPlanar {
            check(p.n_q == 2, "plant.n_q", "must be 2 for two_link_planar")?;
            check_all(&p.link_lengths, |x| x > 0.0, "plant.link_lengths", "must be positive")?;
            check_all(&p.link_masses, |x| x > 0.0, "plant.link_masses", "must be positive")?;
        } else {
            check(!p.gravity, "plant.gravity", "only supported for two_link_planar")?;
        }
        check_len(&p.mass, p.n_q, "plant.mass")?;
        check_all(&p.mass, |x| x > 0.0, "plant.mass", "must be positive")?;
        check_len(&p.damping, p.n_q, "plant.damping")?;
        check_all(&p.damping, |x| x >= 0.0, "plant.damping", "must be nonnegative")?;
        check_len(&p.kappa, p.n_q, "plant.kappa")?;
        check_all(&p.kappa, |x| x >= 0.0, "plant.kappa", "must be nonnegative")?;
        check(p.sigma_tau.is_finite() && p.sigma_tau > 0.0, "plant.sigma_tau", "must be positive")?;
        check(p.arm_length.is_finite() && p.arm_length > 0.0, "plant.arm_length", "must be positive")?;

        let dim = self.dim();
        check_len(&self.start.position, dim, "start.position")?;
        check_all(&self.start.position, |_| true, "start.position", "must be finite")?;
        check_len(&self.start.velocity, dim, "start.velocity")?;
        check_all(&self.start.velocity, |_| true, "start.velocity", "must be finite")?;
        check(
            self.start.joint_hint.is_empty() || self.start.joint_hint.len() == p.n_q,
            "start.joint_hint",
            &format!("must be empty or have {} entries", p.n_q),
        )?;

        let c = &self.cost;
        check_len(&c.goal, dim, "cost.goal")?;
        check_all(&c.goal, |_| true, "cost.goal", "must be finite")?;
        check_len(&c.widths, dim, "cost.widths")?;
        check_all(&c.widths, |x| x > 0.0, "cost.widths", "must be positive")?;
        check(c.discount > 0.0 && c.discount <= 1.0, "cost.discount", "discount must lie in (0,1]")?;
        check(c.effort_weight.is_finite() && c.effort_weight >= 0.0, "cost.effort_weight", "must be nonnegative")?;
        check(c.horizon >= 1, "cost.horizon", "must be at least 1")?;
        check(c.step.is_finite() && c.step > 0.0, "cost.step", "must be positive")?;

        let s = &self.solver;
        check(s.solver.grad_tol > 0.0, "solver.grad_tol", "must be positive")?;
        check(s.solver.step_tol >= 0.0, "solver.step_tol", "must be nonnegative")?;
        check(s.solver.max_iters >= 1, "solver.max_iters", "must be at least 1")?;
        check(s.solver.memory >= 1, "solver.memory", "must be at least 1")?;
        check(s.constraint_tol > 0.0, "solver.constraint_tol", "must be positive")?;
        check(s.penalty_start > 0.0, "solver.penalty_start", "must be positive")?;
        check(s.penalty_growth > 1.0, "solver.penalty_growth", "must exceed 1")?;
        check(s.penalty_rounds >= 1, "solver.penalty_rounds", "must be at least 1")?;

        let a = &self.analysis;
        check(
            a.rule.speed_fraction > 0.0 && a.rule.speed_fraction < 1.0,
            "analysis.speed_fraction",
            "must lie in (0,1)",
        )?;
        check(!a.widths.is_empty(), "analysis.widths", "must be nonempty")?;
        check_all(&a.widths, |x| x > 0.0, "analysis.widths", "must be positive")?;
        check(!a.distances.is_empty(), "analysis.distances", "must be nonempty")?;
        check_all(&a.distances, |x| x > 0.0, "analysis.distances", "must be positive")?;

        check(self.rollout.trials >= 1, "rollout.trials", "must be at least 1")?;

        let t = &self.transition;
        check(!t.distances.is_empty(), "transition.distances", "must be nonempty")?;
        check_all(&t.distances, |x| x > 0.0, "transition.distances", "must be positive")?;
        check(!t.widths.is_empty(), "transition.widths", "must be nonempty")?;
        check_all(&t.widths, |x| x > 0.0, "transition.widths", "must be positive")?;
        check(t.trials >= 2, "transition.trials", "must be at least 2")?;
        if let Some(k) = t.kernel.initial {
            check(
                k.signal_var > 0.0 && k.noise_var > 0.0 && k.length_scales.iter().all(|&l| l > 0.0),
                "transition.kernel.initial",
                "hyperparameters must be positive",
            )?;
        }

        let sc = &self.scenario;
        check(sc.stiffness.is_finite() && sc.stiffness >= 0.0, "scenario.stiffness", "must be nonnegative")?;
        check_all(&sc.sync_stiffness, |x| x >= 0.0, "scenario.sync_stiffness", "must be nonnegative")?;
        check(sc.ramp.is_finite() && sc.ramp > 0.0, "scenario.ramp", "must be positive")?;
        check(sc.t_obs.is_finite() && sc.t_obs > 0.0, "scenario.t_obs", "must be positive")?;
        check(
            sc.corrective_width_factor > 0.0 && sc.corrective_width_factor <= 1.0,
            "scenario.corrective_width_factor",
            "must lie in (0,1]",
        )?;
        check(
            sc.corrective_discount_drop >= 0.0 && c.discount - sc.corrective_discount_drop > 0.0,
            "scenario.corrective_discount_drop",
            "must be nonnegative and leave a positive discount",
        )?;
        check_len(&sc.goal_offset, dim, "scenario.goal_offset")?;
        check_all(&sc.goal_offset, |_| true, "scenario.goal_offset", "must be finite")?;
        check(sc.corrective_horizon >= 1, "scenario.corrective_horizon", "must be at least 1")?;
        check(sc.replan_interval >= 1, "scenario.replan_interval", "must be at least 1")?;
        check(sc.robot_mass.is_finite() && sc.robot_mass >= 0.0, "scenario.robot_mass", "must be nonnegative")?;
        check(sc.duration.is_finite() && sc.duration > 0.0, "scenario.duration", "must be positive")?;
        check(sc.seeds >= 1, "scenario.seeds", "must be at least 1")?;

        let k = &sc.cartesian;
        check(k.mass > 0.0, "scenario.cartesian.mass", "must be positive")?;
        check(k.damping >= 0.0, "scenario.cartesian.damping", "must be nonnegative")?;
        check(k.kappa >= 0.0, "scenario.cartesian.kappa", "must be nonnegative")?;
        check(k.width > 0.0, "scenario.cartesian.width", "must be positive")?;
        check(k.discount > 0.0 && k.discount <= 1.0, "scenario.cartesian.discount", "discount must lie in (0,1]")?;
        check(k.effort_weight >= 0.0, "scenario.cartesian.effort_weight", "must be nonnegative")?;
        check(k.horizon >= 1, "scenario.cartesian.horizon", "must be at least 1")?;
        check(k.step > 0.0, "scenario.cartesian.step", "must be positive")?;
        check(sc.t_obs < k.horizon as f64 * k.step, "scenario.t_obs", "must precede the end of the cartesian horizon")?;

        check(!self.output.directory.is_empty(), "output.directory", "must be nonempty")?;
        Ok(())
    }

    /// Plant model described by the `plant` section.
    pub fn plant(&self) -> PlantModel {
        let p = &self.plant;
        let noise = NoiseModel { cov: DVector::from_column_slice(&p.kappa), form: p.noise_form };
        let damping = DMatrix::from_diagonal(&DVector::from_column_slice(&p.damping));
        match p.kinematics {
            KinematicsKind::Identity => PlantModel {
                n_q: p.n_q,
                inertia: Inertia::Constant(DMatrix::from_diagonal(&DVector::from_column_slice(&p.mass))),
                damping,
                gravity_enabled: false,
                noise,
                kinematics: Kinematics::Identity { dim: p.n_q },
            },
            KinematicsKind::TwoLinkPlanar => {
                let [l1, l2] = p.link_lengths;
                let [m1, m2] = p.link_masses;
                PlantModel {
                    n_q: 2,
                    inertia: Inertia::TwoLink(ArmSegments::uniform(l1, l2, m1, m2)),
                    damping,
                    gravity_enabled: p.gravity,
                    noise,
                    kinematics: Kinematics::TwoLinkPlanar { l1, l2 },
                }
            }
        }
    }

    /// Joint-space point belief at the configured end-effector start.
    pub fn start_state(&self, plant: &PlantModel) -> Result<StateGaussian> {
        let hint = if self.start.joint_hint.is_empty() {
            DVector::from_fn(plant.n_q, |i, _| if i == 0 { 0.3 } else { 1.2 })
        } else {
            DVector::from_column_slice(&self.start.joint_hint)
        };
        let x = DVector::from_column_slice(&self.start.position);
        let q = plant
            .kinematics
            .inverse(&x, &hint)
            .ok_or_else(|| invalid("start.position", "not reachable by the arm"))?;
        let j = plant.kinematics.jacobian(&q);
        let v = DVector::from_column_slice(&self.start.velocity);
        let qd = j
            .lu()
            .solve(&v)
            .filter(|qd| qd.iter().all(|x| x.is_finite()))
            .ok_or_else(|| invalid("start.velocity", "arm is singular at the start position"))?;
        Ok(StateGaussian::at(q.as_slice(), qd.as_slice()))
    }

    pub fn goal(&self) -> Result<GoalSpec> {
        GoalSpec::with_radii(&self.cost.goal, &self.cost.widths)
    }

    pub fn cost(&self) -> Result<CostParams> {
        let c = &self.cost;
        Ok(CostParams {
            goal: self.goal()?,
            discount: c.discount,
            effort_weight: c.effort_weight,
            horizon: c.horizon,
            step: c.step,
        })
    }

    /// Three-axis point-mass plant of the synchronization scenario.
    pub fn cartesian_plant(&self) -> PlantModel {
        let k = &self.scenario.cartesian;
        let mut p = PlantModel::cartesian(3, k.mass, k.damping, k.kappa);
        p.noise.form = self.plant.noise_form;
        p
    }

    pub fn cartesian_cost(&self) -> Result<CostParams> {
        let k = &self.scenario.cartesian;
        Ok(CostParams {
            goal: GoalSpec::isotropic(&k.goal, k.width)?,
            discount: k.discount,
            effort_weight: k.effort_weight,
            horizon: k.horizon,
            step: k.step,
        })
    }

    /// Output directory, honouring [`OUTPUT_DIR_ENV`].
    pub fn output_dir(&self) -> String {
        std::env::var(OUTPUT_DIR_ENV).ok().filter(|s| !s.is_empty()).unwrap_or_else(|| self.output.directory.clone())
    }

    pub fn wants(&self, f: OutputFormat) -> bool {
        self.output.formats.contains(&f)
    }
}

/// Read, parse and validate a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml_str(&src)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_planar_defaults() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.plant.n_q, 2);
        assert_eq!(c.plant.mass, vec![2.0, 2.0]);
        assert_eq!(c.plant.damping, vec![0.3, 0.3]);
        assert_eq!(c.plant.sigma_tau, 1e2);
        assert_eq!(c.cost.goal, vec![0.3, 0.0]);
        assert_eq!(c.cost.discount, 0.97);
        assert_eq!(c.cost.effort_weight, 1e-5);
        assert_eq!(c.cost.horizon, 30);
        assert_eq!(c.cost.step, 0.02);
        assert_eq!(c.scenario.cartesian.horizon, 50);
        assert_eq!(c.scenario.cartesian.width, 0.05);
        assert_eq!(c.scenario.stiffness, 400.0);
        assert_eq!(c.scenario.t_obs, 0.2);
        assert_eq!(c.plant.arm_length, 0.6);
    }

    #[test]
    fn discount_out_of_range() {
        let e = ExperimentConfig::from_toml_str("[cost]\ndiscount = 1.5\n").unwrap_err();
        assert!(e.to_string().contains("discount must lie in (0,1]"), "{e}");
        match e {
            Error::ConfigValidation { field, .. } => assert_eq!(field, "cost.discount"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_position() {
        let e = ExperimentConfig::from_toml_str("[cost]\nhorizon = 30\nbogus = 1\n").unwrap_err();
        match e {
            Error::ConfigParse { line, column, message } => {
                assert_eq!(line, 3);
                assert_eq!(column, 1);
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(ExperimentConfig::from_toml_str("[plant\n"), Err(Error::ConfigParse { line: 1, .. })));
        for src in ["[solver]\nbogus = 1\n", "[analysis]\nbogus = 1\n", "[scenario.cartesian]\nbogus = 1\n"] {
            assert!(matches!(ExperimentConfig::from_toml_str(src), Err(Error::ConfigParse { .. })), "{src}");
        }
        let c = ExperimentConfig::from_toml_str("[solver]\ngrad_tol = 1e-8\nseeds = 2\n[analysis]\nspeed_fraction = 0.1\n").unwrap();
        assert_eq!((c.solver.solver.grad_tol, c.solver.seeds, c.analysis.rule.speed_fraction), (1e-8, 2, 0.1));
    }

    #[test]
    fn round_trip_is_stable() {
        let src = "[plant]\nkinematics = \"two_link_planar\"\ngravity = true\n[start]\nposition = [0.2, 0.3]\n\
                   [cost]\ngoal = [0.4, 0.1]\nwidths = [0.01, 0.03]\ndiscount = 1.0\n[solver]\nseeds = 3\n\
                   [transition.kernel]\noptimize = false\n[transition.kernel.initial]\nsignal_var = 1e-4\n\
                   length_scales = [0.2, 0.01]\nnoise_var = 1e-7\n";
        let a = ExperimentConfig::from_toml_str(src).unwrap();
        let b = ExperimentConfig::from_toml_str(&a.to_toml_string()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_toml_string(), b.to_toml_string());
        let d = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml_str(&d.to_toml_string()).unwrap(), d);
    }

    #[test]
    fn length_mismatch_names_field() {
        let e = ExperimentConfig::from_toml_str("[cost]\ngoal = [0.3, 0.0, 0.1]\n").unwrap_err();
        assert!(matches!(e, Error::ConfigValidation { ref field, .. } if field == "cost.goal"));
    }

    #[test]
    fn builders_reproduce_the_planar_model() {
        let c = ExperimentConfig::default();
        let p = c.plant();
        assert_eq!(p, PlantModel::cartesian(2, 2.0, 0.3, 3e-4));
        let s = c.start_state(&p).unwrap();
        assert_eq!(s.mean.as_slice(), &[0.0; 4]);
        let cost = c.cost().unwrap();
        assert!(cost.validate().is_ok());
        assert!((cost.goal.width[(0, 0)] - 4e-4).abs() < 1e-18);
    }

    #[test]
    fn two_link_start_is_inverted() {
        let c = ExperimentConfig::from_toml_str(
            "[plant]\nkinematics = \"two_link_planar\"\n[start]\nposition = [0.2, 0.3]\nvelocity = [0.1, 0.0]\n",
        )
        .unwrap();
        let p = c.plant();
        let s = c.start_state(&p).unwrap();
        let x = p.kinematics.forward(&s.position());
        assert!((x[0] - 0.2).abs() < 1e-9 && (x[1] - 0.3).abs() < 1e-9);
        let v = p.kinematics.jacobian(&s.position()) * s.velocity();
        assert!((v[0] - 0.1).abs() < 1e-9 && v[1].abs() < 1e-9);
        assert!(c.start_state(&p).is_ok());
        let far = ExperimentConfig::from_toml_str(
            "[plant]\nkinematics = \"two_link_planar\"\n[start]\nposition = [2.0, 0.0]\n",
        )
        .unwrap();
        assert!(far.start_state(&far.plant()).is_err());
    }
}
