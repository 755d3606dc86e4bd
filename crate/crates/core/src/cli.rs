//! Config-driven experiment runner behind the `turnpike` binary.
//!
//! A TOML config describes the system, cost, horizons, solver and
//! diagnostics. Subcommands solve one horizon, sweep several, probe the
//! control-cost estimates, or run the classification demo; every run
//! writes JSON reports and CSV signals into an output directory.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{self, ClassifyConfig, ClassifyReport, Projection};
use crate::diagnostics::{
    bootstrap_certificate, check_uniform_bound, BootstrapCertificate, Thresholds, TurnpikeReport,
    Verdict,
};
use crate::dynamics::{
    make_neural_system, Activation, ControlAffineSystem, NeuralKind, Scheme, Trajectory,
};
use crate::error::{Error, Result};
use crate::ocp::{solve, CostSpec, FinalCost, OcpProblem, SolverOptions};
use crate::pde::{self, Field, Grid1D, PdeKind, PdeSystem, ScalarNonlinearity};
use crate::quasi_turnpike::{probe_cost_estimate, CostEstimateProbe, ProbeOptions};

pub const SCHEMA_VERSION: u32 = 1;

fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub probe: Option<ProbeConfig>,
    #[serde(default)]
    pub classify: Option<ClassifySection>,
}

fn default_activation() -> Activation {
    Activation::Tanh
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    /// Scalar `ẏ = u`.
    Integrator,
    /// `ẏ = A y + B u`, matrices given row by row.
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
    },
    NeuralOutside {
        dim: usize,
        #[serde(default = "default_activation")]
        activation: Activation,
    },
    NeuralInside {
        dim: usize,
        #[serde(default = "default_activation")]
        activation: Activation,
    },
    Heat(PdeConfig),
    Wave(PdeConfig),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub length: f64,
    pub n: usize,
    pub omega: [f64; 2],
    #[serde(default)]
    pub nonlinearity: ScalarNonlinearity,
    /// Solve in deviation variables `(y − ȳ, u − ū)`; reported distances
    /// then resolve values far below the rounding level of `ȳ`.
    #[serde(default)]
    pub deviation: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Zero,
    /// `sin(πx/L)`.
    FirstMode,
    /// `sin²(πx/L)`.
    Bump,
    /// The steady state `ȳ`.
    Steady,
}

fn one() -> f64 {
    1.0
}

/// Explicit values, or a named spatial profile for PDE systems.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Values(Vec<f64>),
    Profile {
        profile: ProfileKind,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn default_steps_per_unit() -> f64 {
    100.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub y0: Option<StateSpec>,
    pub horizons: Vec<f64>,
    #[serde(default = "default_steps_per_unit")]
    pub steps_per_unit: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalKind {
    #[default]
    None,
    Quadratic,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalCostConfig {
    #[serde(default)]
    pub kind: FinalKind,
    #[serde(default = "one")]
    pub weight: f64,
    /// Defaults to the running target.
    #[serde(default)]
    pub anchor: Option<StateSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub y_bar: Option<Vec<f64>>,
    /// For PDE systems a single value is broadcast over `ω`.
    pub u_bar: Option<Vec<f64>>,
    pub state_weight: f64,
    pub control_weight: f64,
    pub h1_weight: f64,
    pub final_cost: FinalCostConfig,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            y_bar: None,
            u_bar: None,
            state_weight: 1.0,
            control_weight: 1.0,
            h1_weight: 0.0,
            final_cost: FinalCostConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub tolerance: f64,
    pub restarts: usize,
    pub init_scale: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            max_iters: d.max_iters,
            tolerance: d.tolerance,
            restarts: d.restarts,
            init_scale: d.init_scale,
        }
    }
}

impl SolverConfig {
    fn options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            max_iters: self.max_iters,
            tolerance: self.tolerance,
            restarts: self.restarts,
            seed,
            init_scale: self.init_scale,
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(config_err(format!("{path}.tolerance"), "must be positive"));
        }
        if self.restarts == 0 {
            return Err(config_err(format!("{path}.restarts"), "must be at least 1"));
        }
        if !(self.init_scale >= 0.0) {
            return Err(config_err(
                format!("{path}.init_scale"),
                "must be nonnegative",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub tau: f64,
    pub c2: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Steering time `T0`; the boundary width defaults to `2·T0`.
    pub t0: f64,
    pub boundary_width: Option<f64>,
    pub margin: f64,
    pub max_rms_log_residual: f64,
    pub uniform_rel_tol: f64,
    /// Smallest horizon entering the uniform-bound check.
    pub uniform_from: Option<f64>,
    pub bootstrap: Option<BootstrapConfig>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        let t = Thresholds::default();
        Self {
            t0: 1.0,
            boundary_width: None,
            margin: t.margin,
            max_rms_log_residual: t.max_rms_log_residual,
            uniform_rel_tol: 0.05,
            uniform_from: None,
            bootstrap: None,
        }
    }
}

impl DiagnosticsConfig {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            boundary_width: self.boundary_width.unwrap_or(2.0 * self.t0),
            margin: self.margin,
            max_rms_log_residual: self.max_rms_log_residual,
            ..Thresholds::default()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub radius: f64,
    pub t0: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_probe_steps")]
    pub steps: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_samples() -> usize {
    64
}

fn default_probe_steps() -> usize {
    100
}

fn default_bins() -> usize {
    10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySection {
    /// Explicit points; when absent a two-moons sample is drawn.
    pub points: Option<Vec<[f64; 2]>>,
    pub labels: Option<Vec<f64>>,
    pub n_points: usize,
    pub noise: f64,
    pub activation: Activation,
    pub horizon: f64,
    pub steps: usize,
    pub projection: Projection,
    pub regularization: f64,
    pub grid_resolution: usize,
    pub solver: SolverConfig,
}

impl Default for ClassifySection {
    fn default() -> Self {
        let d = ClassifyConfig::default();
        Self {
            points: None,
            labels: None,
            n_points: 20,
            noise: 0.05,
            activation: d.sigma,
            horizon: d.horizon,
            steps: d.steps,
            projection: d.projection,
            regularization: d.regularization,
            grid_resolution: d.grid_resolution,
            solver: SolverConfig {
                max_iters: d.solver.max_iters,
                tolerance: d.solver.tolerance,
                restarts: d.solver.restarts,
                init_scale: d.solver.init_scale,
            },
        }
    }
}

impl ClassifySection {
    pub fn to_config(&self, seed: u64) -> ClassifyConfig {
        let (points, labels) = match (&self.points, &self.labels) {
            (Some(p), Some(l)) => (p.clone(), l.clone()),
            _ => classify::two_moons(self.n_points, self.noise, seed),
        };
        ClassifyConfig {
            points,
            labels,
            sigma: self.activation,
            horizon: self.horizon,
            steps: self.steps,
            projection: self.projection.clone(),
            regularization: self.regularization,
            seed,
            solver: self.solver.options(seed),
            grid_resolution: self.grid_resolution,
        }
    }
}

/// Parses a config and checks the schema version.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| config_err(error_path(&e), e.message().to_string()))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(config_err(
            "schema_version",
            format!(
                "unsupported version {}, expected {SCHEMA_VERSION}",
                cfg.schema_version
            ),
        ));
    }
    Ok(cfg)
}

fn error_path(e: &toml::de::Error) -> String {
    let msg = e.message();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    "<root>".to_string()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| {
        config_err(
            path.display().to_string(),
            format!("cannot read config: {e}"),
        )
    })?;
    parse_config(&text)
}

fn require_positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(path, format!("must be positive, got {v}")))
    }
}

fn matrix(path: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(config_err(path, "must be a nonempty rectangular matrix"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// A configured system ready to build problems for any horizon.
pub struct Experiment {
    pub system: ControlAffineSystem,
    pub pde: Option<PdeSystem>,
    /// Set when the PDE runs in deviation variables.
    pub deviation: bool,
    pub y0: Vec<f64>,
    pub cost: CostSpec,
    pub scheme: Scheme,
    pub steps_per_unit: f64,
    pub horizons: Vec<f64>,
    pub solver: SolverOptions,
    pub thresholds: Thresholds,
}

impl Experiment {
    pub fn steps_for(&self, horizon: f64) -> usize {
        let k = (horizon * self.steps_per_unit - 1e-9).ceil().max(1.0) as usize;
        match &self.pde {
            Some(p) if p.kind == PdeKind::Wave => k.max(pde::wave_steps(&p.grid, horizon)),
            Some(p) => k.max(pde::heat_steps(
                &p.grid,
                p.nonlinearity,
                horizon,
                self.scheme,
            )),
            None => k,
        }
    }

    pub fn problem(&self, horizon: f64) -> Result<OcpProblem> {
        Ok(OcpProblem::new(
            self.system.clone(),
            self.y0.clone(),
            horizon,
            self.steps_for(horizon),
            self.cost.clone(),
        )?
        .with_scheme(self.scheme))
    }
}

fn resolve_state(
    path: &str,
    spec: &StateSpec,
    d: usize,
    pde: Option<&PdeSystem>,
) -> Result<Vec<f64>> {
    match (spec, pde) {
        (StateSpec::Values(v), _) => {
            if v.len() != d {
                return Err(config_err(
                    path,
                    format!("expected {d} values, got {}", v.len()),
                ));
            }
            Ok(v.clone())
        }
        (StateSpec::Profile { .. }, None) => Err(config_err(
            path,
            "profiles are only available for PDE systems",
        )),
        (StateSpec::Profile { profile, amplitude }, Some(p)) => {
            let l = p.grid.length();
            let pi = std::f64::consts::PI;
            let field = match profile {
                ProfileKind::Zero => Field::zeros(&p.grid),
                ProfileKind::FirstMode => {
                    Field::from_fn(&p.grid, |x| amplitude * (pi * x / l).sin())
                }
                ProfileKind::Bump => {
                    Field::from_fn(&p.grid, |x| amplitude * (pi * x / l).sin().powi(2))
                }
                ProfileKind::Steady => Field::new(
                    p.grid.h(),
                    p.y_bar.values.iter().map(|v| amplitude * v).collect(),
                ),
            };
            Ok(p.state_from(&field))
        }
    }
}

impl ExperimentConfig {
    fn system_section(&self) -> Result<&SystemConfig> {
        self.system
            .as_ref()
            .ok_or_else(|| config_err("system", "missing section"))
    }

    fn problem_section(&self) -> Result<&ProblemConfig> {
        self.problem
            .as_ref()
            .ok_or_else(|| config_err("problem", "missing section"))
    }

    /// Validates everything needed to build an [`Experiment`] and builds it.
    pub fn experiment(&self) -> Result<Experiment> {
        let problem = self.problem_section()?;
        if problem.horizons.is_empty() {
            return Err(config_err(
                "problem.horizons",
                "must list at least one horizon",
            ));
        }
        for (i, t) in problem.horizons.iter().enumerate() {
            require_positive(&format!("problem.horizons[{i}]"), *t)?;
        }
        require_positive("problem.steps_per_unit", problem.steps_per_unit)?;
        self.solver.validate("solver")?;
        let diag = &self.diagnostics;
        require_positive("diagnostics.t0", diag.t0)?;
        if let Some(w) = diag.boundary_width {
            require_positive("diagnostics.boundary_width", w)?;
        }
        require_positive("diagnostics.margin", diag.margin)?;
        require_positive(
            "diagnostics.max_rms_log_residual",
            diag.max_rms_log_residual,
        )?;
        if !(diag.uniform_rel_tol >= 0.0) {
            return Err(config_err(
                "diagnostics.uniform_rel_tol",
                "must be nonnegative",
            ));
        }
        if let Some(b) = &diag.bootstrap {
            require_positive("diagnostics.bootstrap.tau", b.tau)?;
            require_positive("diagnostics.bootstrap.c2", b.c2)?;
            require_positive("diagnostics.bootstrap.kappa", b.kappa)?;
        }
        let cost_cfg = &self.cost;
        if !(cost_cfg.state_weight >= 0.0) {
            return Err(config_err("cost.state_weight", "must be nonnegative"));
        }
        require_positive("cost.control_weight", cost_cfg.control_weight)?;
        if !(cost_cfg.h1_weight >= 0.0) {
            return Err(config_err("cost.h1_weight", "must be nonnegative"));
        }

        let (system, pde) = self.build_system()?;
        let deviation = match self.system.as_ref() {
            Some(SystemConfig::Heat(p)) | Some(SystemConfig::Wave(p)) => p.deviation,
            _ => false,
        };
        let (d, m) = (system.d(), system.m());
        let y_bar = match (&pde, &cost_cfg.y_bar) {
            (Some(_), Some(_)) => {
                return Err(config_err(
                    "cost.y_bar",
                    "not accepted for PDE systems; the steady state is solved from u_bar",
                ))
            }
            (Some(p), None) => p.steady_state(),
            (None, Some(v)) => {
                if v.len() != d {
                    return Err(config_err(
                        "cost.y_bar",
                        format!("expected {d} values, got {}", v.len()),
                    ));
                }
                v.clone()
            }
            (None, None) => vec![0.0; d],
        };
        let u_bar = match &pde {
            Some(p) => p.u_bar.clone(),
            None => match &cost_cfg.u_bar {
                Some(v) if v.len() != m => {
                    return Err(config_err(
                        "cost.u_bar",
                        format!("expected {m} values, got {}", v.len()),
                    ))
                }
                Some(v) => v.clone(),
                None => vec![0.0; m],
            },
        };
        let mut y0 = match (&problem.y0, &pde) {
            (Some(spec), p) => resolve_state("problem.y0", spec, d, p.as_ref())?,
            (None, Some(p)) => p.state_from(&Field::zeros(&p.grid)),
            (None, None) => return Err(config_err("problem.y0", "required for ODE systems")),
        };
        if let (true, Some(p)) = (deviation, &pde) {
            y0.iter_mut()
                .zip(p.steady_state())
                .for_each(|(a, s)| *a -= s);
        }
        let final_cost = match cost_cfg.final_cost.kind {
            FinalKind::None => FinalCost::None,
            FinalKind::Quadratic => {
                require_positive("cost.final_cost.weight", cost_cfg.final_cost.weight)?;
                let anchor = match &cost_cfg.final_cost.anchor {
                    Some(spec) => resolve_state("cost.final_cost.anchor", spec, d, pde.as_ref())?,
                    None => y_bar.clone(),
                };
                FinalCost::Quadratic {
                    weight: cost_cfg.final_cost.weight,
                    anchor,
                }
            }
        };
        let base = match &pde {
            Some(p) if deviation => pde::pde_deviation_cost_spec(p, final_cost),
            Some(p) => pde::pde_cost_spec(p, final_cost),
            None => CostSpec::new(y_bar, u_bar).with_final_cost(final_cost),
        };
        let cost = base
            .with_weights(cost_cfg.state_weight, cost_cfg.control_weight)
            .with_h1_weight(cost_cfg.h1_weight);
        cost.validate(d, m)
            .map_err(|e| config_err("cost", e.to_string()))?;

        Ok(Experiment {
            system,
            pde,
            deviation,
            y0,
            cost,
            scheme: problem.scheme,
            steps_per_unit: problem.steps_per_unit,
            horizons: problem.horizons.clone(),
            solver: self.solver.options(self.seed),
            thresholds: diag.thresholds(),
        })
    }

    fn build_system(&self) -> Result<(ControlAffineSystem, Option<PdeSystem>)> {
        let wrap = |e: Error| config_err("system", e.to_string());
        Ok(match self.system_section()? {
            SystemConfig::Integrator => (ControlAffineSystem::integrator(), None),
            SystemConfig::Linear { a, b } => {
                let a = matrix("system.a", a)?;
                let b = matrix("system.b", b)?;
                (ControlAffineSystem::linear(a, b).map_err(wrap)?, None)
            }
            SystemConfig::NeuralOutside { dim, activation } => {
                if *dim == 0 {
                    return Err(config_err("system.dim", "must be positive"));
                }
                (
                    make_neural_system(NeuralKind::Outside, *activation, *dim).map_err(wrap)?,
                    None,
                )
            }
            SystemConfig::NeuralInside { dim, activation } => {
                if *dim == 0 {
                    return Err(config_err("system.dim", "must be positive"));
                }
                (
                    make_neural_system(NeuralKind::Inside, *activation, *dim).map_err(wrap)?,
                    None,
                )
            }
            SystemConfig::Heat(p) => self.build_pde(PdeKind::Heat, p)?,
            SystemConfig::Wave(p) => self.build_pde(PdeKind::Wave, p)?,
        })
    }

    fn build_pde(
        &self,
        kind: PdeKind,
        p: &PdeConfig,
    ) -> Result<(ControlAffineSystem, Option<PdeSystem>)> {
        require_positive("system.length", p.length)?;
        if p.n == 0 {
            return Err(config_err("system.n", "must be positive"));
        }
        p.nonlinearity
            .validate()
            .map_err(|e| config_err("system.nonlinearity", e.to_string()))?;
        let grid = Grid1D::new(p.length, p.n, p.omega[0], p.omega[1])
            .map_err(|e| config_err("system.omega", e.to_string()))?;
        let m = grid.omega().len();
        let u_bar = match &self.cost.u_bar {
            None => vec![0.0; m],
            Some(v) if v.len() == 1 => vec![v[0]; m],
            Some(v) if v.len() == m => v.clone(),
            Some(v) => {
                return Err(config_err(
                    "cost.u_bar",
                    format!("expected 1 or {m} values, got {}", v.len()),
                ))
            }
        };
        let pde_system =
            PdeSystem::new(kind, grid, p.nonlinearity, u_bar).map_err(|e| match e {
                Error::SteadySolve { .. } => e,
                other => config_err("system", other.to_string()),
            })?;
        let system = if p.deviation {
            pde::semidiscretize_deviation(&pde_system)
        } else {
            pde::semidiscretize(&pde_system)
        };
        Ok((system, Some(pde_system)))
    }

    /// Checks every section present in the config.
    pub fn validate(&self) -> Result<()> {
        if self.system.is_some() || self.problem.is_some() {
            self.experiment()?;
        }
        if let Some(p) = &self.probe {
            if !(p.radius >= 0.0) {
                return Err(config_err("probe.radius", "must be nonnegative"));
            }
            require_positive("probe.t0", p.t0)?;
            if p.steps == 0 || p.bins == 0 {
                return Err(config_err("probe", "steps and bins must be positive"));
            }
        }
        if let Some(c) = &self.classify {
            c.solver.validate("classify.solver")?;
            if c.points.is_some() != c.labels.is_some() {
                return Err(config_err(
                    "classify",
                    "points and labels must be given together",
                ));
            }
            c.to_config(self.seed)
                .validate()
                .map_err(|e| config_err("classify", e.to_string()))?;
        }
        if self.system.is_none() && self.classify.is_none() {
            return Err(config_err("system", "missing section"));
        }
        Ok(())
    }
}

/// Overrides shared by all subcommands.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn prepare(mut cfg: ExperimentConfig, opts: &RunOptions) -> Result<(ExperimentConfig, PathBuf)> {
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    Ok((cfg, dir))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_trajectory(dir: &Path, exp: &Experiment, traj: &Trajectory, suffix: &str) -> Result<()> {
    match &exp.pde {
        Some(p) => pde::write_space_time_csv(
            &p.grid,
            traj,
            exp.deviation.then_some(p.y_bar.values.as_slice()),
            fs::File::create(dir.join(format!("space_time{suffix}.csv")))?,
        ),
        None => traj.write_csv(fs::File::create(
            dir.join(format!("trajectory{suffix}.csv")),
        )?),
    }
}

/// Solves one horizon and runs the diagnostics.
pub fn solve_horizon(exp: &Experiment, horizon: f64) -> Result<(TurnpikeReport, Trajectory)> {
    let problem = exp.problem(horizon)?;
    let solution = solve(&problem, &exp.solver)?;
    let report = TurnpikeReport::analyze(&problem, &solution, &exp.thresholds)?;
    Ok((report, solution.trajectory))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOutput {
    pub report: TurnpikeReport,
    pub bootstrap: Option<BootstrapCertificate>,
}

impl SolveOutput {
    pub fn failed(&self) -> bool {
        self.report.verdicts.any_fail()
            || !self.report.solver.converged
            || self
                .bootstrap
                .as_ref()
                .is_some_and(|b| b.verdict().is_fail())
    }
}

/// `solve`: single horizon; writes `report.json`, `signals.csv` and the trajectory.
pub fn run_solve(cfg: ExperimentConfig, opts: &RunOptions) -> Result<SolveOutput> {
    let (cfg, dir) = prepare(cfg, opts)?;
    let exp = cfg.experiment()?;
    if exp.horizons.len() != 1 {
        return Err(config_err(
            "problem.horizons",
            format!(
                "solve takes exactly one horizon, got {}; use sweep",
                exp.horizons.len()
            ),
        ));
    }
    let (report, traj) = solve_horizon(&exp, exp.horizons[0])?;
    let bootstrap = cfg.diagnostics.bootstrap.as_ref().map(|b| {
        bootstrap_certificate(
            &report.distance_signal(),
            b.tau,
            cfg.diagnostics.t0,
            b.c2,
            b.kappa,
        )
    });
    write_json(&dir.join("report.json"), &report)?;
    if let Some(b) = &bootstrap {
        write_json(&dir.join("bootstrap.json"), b)?;
    }
    report.write_signals_csv(fs::File::create(dir.join("signals.csv"))?)?;
    write_trajectory(&dir, &exp, &traj, "")?;
    Ok(SolveOutput { report, bootstrap })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub cost_value: Option<f64>,
    /// `‖y_T(T/2) − ȳ‖`.
    pub midpoint_distance: Option<f64>,
    pub final_distance: Option<f64>,
    pub mu_turnpike: Option<f64>,
    pub mu_stabilization: Option<f64>,
    pub rms_stabilization: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub horizons: Vec<f64>,
    pub entries: Vec<SweepEntry>,
    pub uniform_bound: Verdict,
    pub uniform_from: f64,
    pub uniform_rel_tol: f64,
    /// Horizons whose solve failed.
    pub missing: Vec<f64>,
}

impl SweepReport {
    pub fn failed(&self, reports: &[TurnpikeReport]) -> bool {
        self.uniform_bound.is_fail()
            || !self.missing.is_empty()
            || reports.iter().any(|r| r.verdicts.any_fail())
    }
}

fn midpoint(values: &[f64]) -> f64 {
    let k = values.len() - 1;
    if k.is_multiple_of(2) {
        values[k / 2]
    } else {
        0.5 * (values[k / 2] + values[k / 2 + 1])
    }
}

fn horizon_tag(t: f64) -> String {
    format!("_T{t}")
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub sweep: SweepReport,
    pub reports: Vec<TurnpikeReport>,
}

/// `sweep`: one solve per horizon (in parallel), then aggregate checks.
pub fn run_sweep(cfg: ExperimentConfig, opts: &RunOptions) -> Result<SweepOutput> {
    let (cfg, dir) = prepare(cfg, opts)?;
    let exp = cfg.experiment()?;
    if exp.horizons.len() < 2 {
        return Err(config_err(
            "problem.horizons",
            "sweep needs at least two horizons",
        ));
    }
    let results: Vec<Result<(TurnpikeReport, Trajectory)>> = exp
        .horizons
        .par_iter()
        .map(|t| solve_horizon(&exp, *t))
        .collect();

    let mut entries = Vec::new();
    let mut reports = Vec::new();
    let mut trajectories = Vec::new();
    let mut missing = Vec::new();
    for (t, r) in exp.horizons.iter().zip(results) {
        match r {
            Ok((report, traj)) => {
                entries.push(SweepEntry {
                    horizon: *t,
                    cost_value: Some(report.cost_value),
                    midpoint_distance: Some(midpoint(&report.distance)),
                    final_distance: report.distance.last().copied(),
                    mu_turnpike: report.fits.get("turnpike").map(|f| f.mu),
                    mu_stabilization: report.fits.get("stabilization").map(|f| f.mu),
                    rms_stabilization: report.fits.get("stabilization").map(|f| f.rms_log_residual),
                    error: None,
                });
                reports.push(report);
                trajectories.push(traj);
            }
            Err(e) => {
                entries.push(SweepEntry {
                    horizon: *t,
                    cost_value: None,
                    midpoint_distance: None,
                    final_distance: None,
                    mu_turnpike: None,
                    mu_stabilization: None,
                    rms_stabilization: None,
                    error: Some(e.to_string()),
                });
                missing.push(*t);
            }
        }
    }
    let uniform_from = cfg
        .diagnostics
        .uniform_from
        .unwrap_or_else(|| exp.horizons.iter().copied().fold(f64::INFINITY, f64::min));
    let costs: Vec<(f64, f64)> = entries
        .iter()
        .filter_map(|e| e.cost_value.map(|c| (e.horizon, c)))
        .collect();
    let uniform_bound = check_uniform_bound(&costs, uniform_from, cfg.diagnostics.uniform_rel_tol)
        .unwrap_or(Verdict::NotApplicable);
    for r in &mut reports {
        r.verdicts.uniform_bound = uniform_bound;
    }
    for (r, traj) in reports.iter().zip(&trajectories) {
        let tag = horizon_tag(r.horizon);
        write_json(&dir.join(format!("report{tag}.json")), r)?;
        r.write_signals_csv(fs::File::create(dir.join(format!("signals{tag}.csv")))?)?;
        write_trajectory(&dir, &exp, traj, &tag)?;
    }
    let sweep = SweepReport {
        horizons: exp.horizons.clone(),
        entries,
        uniform_bound,
        uniform_from,
        uniform_rel_tol: cfg.diagnostics.uniform_rel_tol,
        missing,
    };
    write_json(&dir.join("sweep.json"), &sweep)?;
    Ok(SweepOutput { sweep, reports })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeReport {
    pub into_steady: CostEstimateProbe,
    pub out_of_steady: CostEstimateProbe,
    /// Set when neither direction produced a ratio.
    pub no_data: bool,
}

impl ProbeReport {
    pub fn failed(&self) -> bool {
        self.no_data || !self.into_steady.reliable || !self.out_of_steady.reliable
    }
}

fn write_histogram(path: &Path, probes: &[&CostEstimateProbe], bins: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["direction", "bin_lower", "bin_upper", "count"])?;
    for p in probes {
        let name = serde_json::to_value(p.direction)?
            .as_str()
            .unwrap_or_default()
            .to_string();
        if p.ratios.is_empty() {
            continue;
        }
        let lo = p.ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo {
            (hi - lo) / bins as f64
        } else {
            1.0
        };
        let mut counts = vec![0usize; bins];
        for r in &p.ratios {
            let b = (((r - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            w.write_record([
                name.clone(),
                (lo + b as f64 * width).to_string(),
                (lo + (b + 1) as f64 * width).to_string(),
                c.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `probe`: control-cost estimates in both directions around `(ȳ, ū)`.
pub fn run_probe(cfg: ExperimentConfig, opts: &RunOptions) -> Result<ProbeReport> {
    let (cfg, dir) = prepare(cfg, opts)?;
    let probe_cfg = cfg
        .probe
        .clone()
        .ok_or_else(|| config_err("probe", "missing section"))?;
    cfg.validate()?;
    let exp = cfg.experiment()?;
    let probe_opts = ProbeOptions {
        samples: probe_cfg.samples,
        seed: cfg.seed,
        steps: probe_cfg.steps,
        ..ProbeOptions::default()
    };
    let [into_steady, out_of_steady] = probe_cost_estimate(
        &exp.system,
        &exp.cost.y_bar,
        &exp.cost.u_bar,
        probe_cfg.radius,
        probe_cfg.t0,
        &probe_opts,
    )?;
    let report = ProbeReport {
        no_data: into_steady.estimated_c.is_none() && out_of_steady.estimated_c.is_none(),
        into_steady,
        out_of_steady,
    };
    write_json(&dir.join("probe.json"), &report)?;
    write_histogram(
        &dir.join("probe_ratios.csv"),
        &[&report.into_steady, &report.out_of_steady],
        probe_cfg.bins,
    )?;
    Ok(report)
}

/// `classify`: the shared-control classification demo.
pub fn run_classify(cfg: ExperimentConfig, opts: &RunOptions) -> Result<ClassifyReport> {
    let (cfg, dir) = prepare(cfg, opts)?;
    let section = cfg
        .classify
        .clone()
        .ok_or_else(|| config_err("classify", "missing section"))?;
    cfg.validate()?;
    let run = classify::run_classify(&section.to_config(cfg.seed))?;
    write_json(&dir.join("classify.json"), &run.report)?;
    run.write_trajectories_csv(fs::File::create(dir.join("trajectories.csv"))?)?;
    run.report
        .decision_grid
        .write_csv(fs::File::create(dir.join("decision_grid.csv"))?)?;
    Ok(run.report)
}

#[derive(Parser, Debug)]
#[command(
    name = "turnpike",
    version,
    about = "Long-horizon optimal control experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exit with status 1 when a verdict fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve a single horizon and run diagnostics.
    Solve(CommonArgs),
    /// Solve a list of horizons and aggregate.
    Sweep(CommonArgs),
    /// Estimate control-cost constants by steering.
    Probe(CommonArgs),
    /// Run the classification demo.
    Classify(CommonArgs),
    /// Parse and validate a config without running it.
    ValidateConfig(CommonArgs),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Runs a parsed command; returns `(failed_verdicts, summary line)`.
fn dispatch(command: &Command) -> Result<(bool, String)> {
    let (args, kind) = match command {
        Command::Solve(a) => (a, "solve"),
        Command::Sweep(a) => (a, "sweep"),
        Command::Probe(a) => (a, "probe"),
        Command::Classify(a) => (a, "classify"),
        Command::ValidateConfig(a) => (a, "validate-config"),
    };
    let cfg = load_config(&args.config)?;
    let opts = RunOptions {
        out: args.out.clone(),
        seed: args.seed,
    };
    match kind {
        "solve" => {
            let out = run_solve(cfg, &opts)?;
            let v = &out.report.verdicts;
            Ok((
                out.failed(),
                format!(
                    "cost {:.6e}, converged {}, turnpike {:?}, stabilization {:?}, control_decay {:?}",
                    out.report.cost_value,
                    out.report.solver.converged,
                    v.turnpike,
                    v.stabilization,
                    v.control_decay
                ),
            ))
        }
        "sweep" => {
            let out = run_sweep(cfg, &opts)?;
            Ok((
                out.sweep.failed(&out.reports),
                format!(
                    "{} horizons, uniform_bound {:?}, missing {:?}",
                    out.sweep.horizons.len(),
                    out.sweep.uniform_bound,
                    out.sweep.missing
                ),
            ))
        }
        "probe" => {
            let r = run_probe(cfg, &opts)?;
            Ok((
                r.failed(),
                format!(
                    "C into {:?} (reliable {}), C out {:?} (reliable {})",
                    r.into_steady.estimated_c,
                    r.into_steady.reliable,
                    r.out_of_steady.estimated_c,
                    r.out_of_steady.reliable
                ),
            ))
        }
        "classify" => {
            let r = run_classify(cfg, &opts)?;
            Ok((
                r.accuracy < 1.0 || !r.flatness.flat,
                format!(
                    "accuracy {}, loss {:.6e}, flat {}",
                    r.accuracy, r.loss, r.flatness.flat
                ),
            ))
        }
        _ => {
            let mut cfg = cfg;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            cfg.validate()?;
            Ok((false, "config ok".to_string()))
        }
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let strict = match &cli.command {
        Command::Solve(a)
        | Command::Sweep(a)
        | Command::Probe(a)
        | Command::Classify(a)
        | Command::ValidateConfig(a) => a.strict,
    };
    match dispatch(&cli.command) {
        Ok((failed, summary)) => {
            println!("{summary}");
            if failed && strict {
                EXIT_VERDICT
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
