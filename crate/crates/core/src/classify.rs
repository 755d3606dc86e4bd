//! Binary classification with a continuous-depth network `ẋ = wσ(x) + b`.
//!
//! All sample points share one time-dependent control `(w(t), b(t))`. The
//! functional is `Σ_i ∫‖P x_i − ŷ_i‖² + reg·∫‖u‖²` with an affine readout
//! `P x = p·x + p0`.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    make_batched_neural_system, Activation, ControlSignal, NeuralKind, NeuralOde, Scheme,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::ocp::{solve, CostSpec, Metric, OcpProblem, QuadraticForm, Solution, SolverOptions};

/// Affine readout `P x = p·x + p0` on `ℝ²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Projection {
    pub p: [f64; 2],
    #[serde(default)]
    pub p0: f64,
}

impl Default for Projection {
    fn default() -> Self {
        Self {
            p: [0.0, 1.0],
            p0: 0.0,
        }
    }
}

impl Projection {
    pub fn apply(&self, x: &[f64]) -> f64 {
        self.p[0] * x[0] + self.p[1] * x[1] + self.p0
    }

    fn norm_sq(&self) -> f64 {
        self.p[0] * self.p[0] + self.p[1] * self.p[1]
    }

    /// Point of `{x : P x = value}` nearest to `x`.
    pub fn nearest_preimage(&self, x: &[f64], value: f64) -> [f64; 2] {
        let s = (value - self.apply(x)) / self.norm_sq();
        [x[0] + s * self.p[0], x[1] + s * self.p[1]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub points: Vec<[f64; 2]>,
    /// `±1` per point.
    pub labels: Vec<f64>,
    pub sigma: Activation,
    pub horizon: f64,
    pub steps: usize,
    pub projection: Projection,
    /// Weight on `∫‖u‖²`.
    pub regularization: f64,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Samples per axis of the decision grid over `[−2, 2]²`.
    pub grid_resolution: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            labels: Vec::new(),
            sigma: Activation::Tanh,
            horizon: 15.0,
            steps: 150,
            projection: Projection::default(),
            regularization: 1.0,
            seed: 0,
            solver: SolverOptions {
                max_iters: 3000,
                tolerance: 1e-6,
                restarts: 4,
                ..SolverOptions::default()
            },
            grid_resolution: 41,
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::InvalidInput(
                "classification needs at least two points".into(),
            ));
        }
        if self.points.len() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: self.points.len(),
                got: self.labels.len(),
            });
        }
        if let Some(l) = self.labels.iter().find(|l| **l != 1.0 && **l != -1.0) {
            return Err(Error::InvalidInput(format!(
                "labels must be +1 or -1, got {l}"
            )));
        }
        if self.projection.norm_sq() == 0.0 {
            return Err(Error::InvalidInput(
                "projection needs a nonzero linear part".into(),
            ));
        }
        if !(self.horizon > 0.0) || self.steps == 0 {
            return Err(Error::InvalidInput(
                "horizon and steps must be positive".into(),
            ));
        }
        if !(self.regularization > 0.0) {
            return Err(Error::InvalidInput(
                "regularization must be positive".into(),
            ));
        }
        if self.grid_resolution < 2 {
            return Err(Error::InvalidInput(
                "grid_resolution must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Two interleaved half-circles centered near the origin, labelled `+1`
/// (upper) and `−1` (lower), with Gaussian jitter.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> (Vec<[f64; 2]>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise.max(0.0)).expect("nonnegative std");
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let theta = rng.random::<f64>() * std::f64::consts::PI;
        let upper = i % 2 == 0;
        let (x, y) = if upper {
            (theta.cos(), theta.sin())
        } else {
            (1.0 - theta.cos(), 0.5 - theta.sin())
        };
        points.push([
            x - 0.5 + jitter.sample(&mut rng),
            y - 0.25 + jitter.sample(&mut rng),
        ]);
        labels.push(if upper { 1.0 } else { -1.0 });
    }
    (points, labels)
}

/// `‖x‖² = Σ_i (p·x_i)²` over the batch.
struct ReadoutForm {
    p: [f64; 2],
    batch: usize,
}

impl QuadraticForm for ReadoutForm {
    fn dim(&self) -> usize {
        2 * self.batch
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (xi, oi) in x.chunks(2).zip(out.chunks_mut(2)) {
            let s = self.p[0] * xi[0] + self.p[1] * xi[1];
            oi[0] = s * self.p[0];
            oi[1] = s * self.p[1];
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFlatness {
    pub early_slope: f64,
    pub late_slope: f64,
    pub flat: bool,
}

/// Flattening of `t ↦ ‖x_i(t) − x̄_i‖`, where `x̄_i` is the preimage point
/// nearest to `x_i(T)`.
///
/// Each curve is smoothed by a centered moving average; the early slope is
/// the largest `|d'|` over the first third of `[0, T]`, the late slope the
/// largest over the final third. A curve is flat when the late slope is
/// below 10% of the early one. The verdict uses the mean curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flatness {
    pub early_slope: f64,
    pub late_slope: f64,
    pub ratio_limit: f64,
    pub flat: bool,
    pub per_point: Vec<PointFlatness>,
}

pub const FLATNESS_RATIO: f64 = 0.1;

fn smooth(values: &[f64], half: usize) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn phase_slopes(curve: &[f64], dt: f64) -> (f64, f64) {
    let smoothed = smooth(curve, (curve.len() / 40).max(1));
    let slopes: Vec<f64> = smoothed
        .windows(2)
        .map(|w| ((w[1] - w[0]) / dt).abs())
        .collect();
    let n = slopes.len();
    let third = (n / 3).max(1);
    let early = slopes[..third].iter().copied().fold(0.0, f64::max);
    let late = slopes[n - third..].iter().copied().fold(0.0, f64::max);
    (early, late)
}

fn is_flat(early: f64, late: f64) -> bool {
    late <= 1e-12 || late < FLATNESS_RATIO * early
}

/// Flatness of per-point distance curves sampled every `dt`.
pub fn flatness(curves: &[Vec<f64>], dt: f64) -> Flatness {
    let per_point: Vec<PointFlatness> = curves
        .iter()
        .map(|c| {
            let (early, late) = phase_slopes(c, dt);
            PointFlatness {
                early_slope: early,
                late_slope: late,
                flat: is_flat(early, late),
            }
        })
        .collect();
    let len = curves.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..len)
        .map(|k| curves.iter().map(|c| c[k]).sum::<f64>() / curves.len() as f64)
        .collect();
    let (early, late) = if len >= 2 {
        phase_slopes(&mean, dt)
    } else {
        (0.0, 0.0)
    };
    Flatness {
        early_slope: early,
        late_slope: late,
        ratio_limit: FLATNESS_RATIO,
        flat: is_flat(early, late),
        per_point,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionGrid {
    pub resolution: usize,
    pub lower: f64,
    pub upper: f64,
    /// `P x(T)` for each grid point, row-major with `x1` varying fastest.
    pub values: Vec<f64>,
}

impl DecisionGrid {
    pub fn coordinate(&self, i: usize) -> f64 {
        self.lower + (self.upper - self.lower) * i as f64 / (self.resolution - 1) as f64
    }

    /// Columns `x1, x2, value, class`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x1", "x2", "value", "class"])?;
        let r = self.resolution;
        for (idx, v) in self.values.iter().enumerate() {
            let class = if *v >= 0.0 { "1" } else { "-1" };
            w.write_record([
                self.coordinate(idx % r).to_string(),
                self.coordinate(idx / r).to_string(),
                v.to_string(),
                class.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub accuracy: f64,
    /// `Σ_i (P x_i(T) − ŷ_i)²`.
    pub loss: f64,
    /// The same misfit with `u ≡ 0`.
    pub baseline_loss: f64,
    /// `sign(P x_i(T))·ŷ_i`.
    pub margins: Vec<f64>,
    pub cost_value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub flatness: Flatness,
    /// `‖x_i(t_k) − x̄_i‖` per point and node.
    pub distances: Vec<Vec<f64>>,
    pub control: ControlSignal,
    pub decision_grid: DecisionGrid,
}

/// Full outcome of a classification run.
#[derive(Clone, Debug)]
pub struct ClassifyRun {
    pub report: ClassifyReport,
    pub trajectory: Trajectory,
    pub points: Vec<[f64; 2]>,
}

impl ClassifyRun {
    /// Columns `t, point, x1, x2`.
    pub fn write_trajectories_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "point", "x1", "x2"])?;
        for (k, state) in self.trajectory.iter().enumerate() {
            let t = self.trajectory.time(k).to_string();
            for (i, x) in state.chunks(2).enumerate() {
                w.write_record([t.clone(), i.to_string(), x[0].to_string(), x[1].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn misfit(proj: &Projection, state: &[f64], labels: &[f64]) -> f64 {
    state
        .chunks(2)
        .zip(labels)
        .map(|(x, y)| (proj.apply(x) - y).powi(2))
        .sum()
}

pub fn run_classify(cfg: &ClassifyConfig) -> Result<ClassifyRun> {
    cfg.validate()?;
    let n = cfg.points.len();
    let system = make_batched_neural_system(NeuralKind::Outside, cfg.sigma, 2, n)?;
    let proj = &cfg.projection;
    let y0: Vec<f64> = cfg.points.iter().flatten().copied().collect();
    let targets: Vec<f64> = cfg
        .labels
        .iter()
        .flat_map(|l| {
            let s = (l - proj.p0) / proj.norm_sq();
            [s * proj.p[0], s * proj.p[1]]
        })
        .collect();
    let m = NeuralOde::control_dim_for(2);
    let cost = CostSpec::new(targets, vec![0.0; m])
        .with_weights(1.0, cfg.regularization)
        .with_metrics(
            Metric::Form(Arc::new(ReadoutForm {
                p: proj.p,
                batch: n,
            })),
            Metric::Euclidean,
        );
    let problem = OcpProblem::new(system.clone(), y0.clone(), cfg.horizon, cfg.steps, cost)?
        .with_scheme(Scheme::Rk4);
    let opts = SolverOptions {
        seed: cfg.seed,
        ..cfg.solver.clone()
    };
    let solution: Solution = solve(&problem, &opts)?;
    let baseline = problem.integrate(&problem.reference_control())?;

    let final_state = solution.trajectory.final_state();
    let margins: Vec<f64> = final_state
        .chunks(2)
        .zip(&cfg.labels)
        .map(|(x, y)| proj.apply(x).signum() * y)
        .collect();
    let single_class = cfg.labels.iter().all(|l| *l == cfg.labels[0]);
    let accuracy = if single_class {
        1.0
    } else {
        margins.iter().filter(|m| **m > 0.0).count() as f64 / n as f64
    };

    let anchors: Vec<[f64; 2]> = final_state
        .chunks(2)
        .zip(&cfg.labels)
        .map(|(x, y)| proj.nearest_preimage(x, *y))
        .collect();
    let distances: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            solution
                .trajectory
                .iter()
                .map(|s| {
                    let x = &s[2 * i..2 * i + 2];
                    ((x[0] - anchors[i][0]).powi(2) + (x[1] - anchors[i][1]).powi(2)).sqrt()
                })
                .collect()
        })
        .collect();
    let flat = flatness(&distances, problem.dt());

    let r = cfg.grid_resolution;
    let (lower, upper) = (-2.0, 2.0);
    let coord = |i: usize| lower + (upper - lower) * i as f64 / (r - 1) as f64;
    let grid_y0: Vec<f64> = (0..r * r)
        .flat_map(|idx| [coord(idx % r), coord(idx / r)])
        .collect();
    let grid_system = make_batched_neural_system(NeuralKind::Outside, cfg.sigma, 2, r * r)?;
    let grid_traj = grid_system.integrate(&grid_y0, &solution.control, Scheme::Rk4)?;
    let values = grid_traj
        .final_state()
        .chunks(2)
        .map(|x| proj.apply(x))
        .collect();

    let report = ClassifyReport {
        horizon: cfg.horizon,
        dt: problem.dt(),
        accuracy,
        loss: misfit(proj, final_state, &cfg.labels),
        baseline_loss: misfit(proj, baseline.final_state(), &cfg.labels),
        margins,
        cost_value: solution.cost_value,
        grad_norm: solution.grad_norm,
        iterations: solution.iterations,
        converged: solution.converged,
        flatness: flat,
        distances,
        control: solution.control.clone(),
        decision_grid: DecisionGrid {
            resolution: r,
            lower,
            upper,
            values,
        },
    };
    Ok(ClassifyRun {
        report,
        trajectory: solution.trajectory,
        points: cfg.points.clone(),
    })
}
