//! 1-D semilinear heat and wave equations with distributed control on a
//! subinterval, discretized by the method of lines.
//!
//! Space is a uniform grid on `[0, L]` with homogeneous Dirichlet data
//! eliminated, so states hold interior values only. `Δ_h` is the centered
//! three-point stencil and the control enters through the nodal indicator
//! of `ω = (a, b)`, one channel per interior node inside `ω`.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlAffineSystem, Dynamics, SystemForm, Trajectory};
use crate::error::{check_dim, Error, Result};
use crate::ocp::{CostSpec, FinalCost, Metric, QuadraticForm};

/// Residual level at which the Newton iteration stops.
pub const STEADY_TOLERANCE: f64 = 1e-10;
/// Largest steady-pair residual accepted by [`PdeSystem::with_steady`].
pub const STEADY_ACCEPT: f64 = 1e-8;
const NEWTON_MAX_ITERS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    length: f64,
    n_interior: usize,
    a: f64,
    b: f64,
    omega: Vec<usize>,
}

impl Grid1D {
    pub fn new(length: f64, n_interior: usize, a: f64, b: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "domain length must be positive, got {length}"
            )));
        }
        if n_interior == 0 {
            return Err(Error::InvalidInput(
                "grid needs at least one interior node".into(),
            ));
        }
        if !(0.0 <= a && a < b && b <= length) {
            return Err(Error::InvalidInput(format!(
                "control window ({a}, {b}) must satisfy 0 <= a < b <= L = {length}"
            )));
        }
        let h = length / (n_interior + 1) as f64;
        let omega: Vec<usize> = (0..n_interior)
            .filter(|i| {
                let x = (i + 1) as f64 * h;
                x > a && x < b
            })
            .collect();
        if omega.is_empty() {
            return Err(Error::InvalidInput(format!(
                "control window ({a}, {b}) contains no interior node at spacing {h}"
            )));
        }
        Ok(Self {
            length,
            n_interior,
            a,
            b,
            omega,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn window(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn h(&self) -> f64 {
        self.length / (self.n_interior + 1) as f64
    }

    /// Coordinate of interior node `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h()
    }

    /// Smallest eigenvalue of `−Δ_h`: `(2/h)² sin²(πh/(2L))`.
    pub fn lambda1(&self) -> f64 {
        let h = self.h();
        let s = (std::f64::consts::PI * h / (2.0 * self.length)).sin();
        (2.0 / h).powi(2) * s * s
    }

    /// Largest eigenvalue of `−Δ_h`.
    pub fn lambda_max(&self) -> f64 {
        let h = self.h();
        let s = (std::f64::consts::PI * self.n_interior as f64 * h / (2.0 * self.length)).sin();
        (2.0 / h).powi(2) * s * s
    }

    /// `out = Δ_h v` with zero boundary values.
    pub fn laplacian(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n_interior;
        let inv = 1.0 / (self.h() * self.h());
        for i in 0..n {
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i + 1 < n { v[i + 1] } else { 0.0 };
            out[i] = (left - 2.0 * v[i] + right) * inv;
        }
    }

    /// Scatters control channels onto the grid: `E u`.
    pub fn inject(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &i) in self.omega.iter().enumerate() {
            out[i] = u[j];
        }
    }

    /// First Dirichlet eigenvector, scaled to unit l2 norm.
    pub fn first_mode(&self) -> Field {
        let values = (0..self.n_interior)
            .map(|i| (std::f64::consts::PI * self.x(i) / self.length).sin())
            .collect();
        let mut f = Field::new(self.h(), values);
        let n = f.l2();
        f.values.iter_mut().for_each(|v| *v /= n);
        f
    }
}

/// Interior nodal values with zero Dirichlet data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub h: f64,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(h: f64, values: Vec<f64>) -> Self {
        Self { h, values }
    }

    pub fn zeros(grid: &Grid1D) -> Self {
        Self::new(grid.h(), vec![0.0; grid.n_interior()])
    }

    pub fn from_fn(grid: &Grid1D, f: impl Fn(f64) -> f64) -> Self {
        Self::new(
            grid.h(),
            (0..grid.n_interior()).map(|i| f(grid.x(i))).collect(),
        )
    }

    /// `sqrt(h Σ v_i²)`.
    pub fn l2(&self) -> f64 {
        l2_norm(self.h, &self.values)
    }

    /// `sqrt(h Σ ((v_{i+1} − v_i)/h)²)` including both boundary differences.
    pub fn h10(&self) -> f64 {
        h10_norm(self.h, &self.values)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([((i + 1) as f64 * self.h).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn l2_norm(h: f64, v: &[f64]) -> f64 {
    (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

pub fn h10_norm(h: f64, v: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut prev = 0.0;
    for x in v.iter().chain(std::iter::once(&0.0)) {
        s += (x - prev) * (x - prev);
        prev = *x;
    }
    (s / h).sqrt()
}

/// Scalar nonlinearity `f` in `−Δy + f(y)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "param")]
pub enum ScalarNonlinearity {
    #[default]
    Zero,
    Linear(f64),
    Tanh,
    /// `max(x, αx)`, derivative 1 at 0.
    LeakyRelu(f64),
}

impl ScalarNonlinearity {
    pub fn value(self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Linear(c) => c * x,
            Self::Tanh => x.tanh(),
            Self::LeakyRelu(a) => {
                if x >= 0.0 {
                    x
                } else {
                    a * x
                }
            }
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Linear(c) => c,
            Self::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Self::LeakyRelu(a) => {
                if x >= 0.0 {
                    1.0
                } else {
                    a
                }
            }
        }
    }

    /// `f(a + z) − f(a)` without cancellation for small `z`.
    pub fn increment(self, a: f64, z: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Linear(c) => c * z,
            Self::Tanh => {
                let (ta, tz) = (a.tanh(), z.tanh());
                tz * (1.0 - ta * ta) / (1.0 + ta * tz)
            }
            Self::LeakyRelu(alpha) => {
                let b = a + z;
                match (a >= 0.0, b >= 0.0) {
                    (true, true) => z,
                    (false, false) => alpha * z,
                    _ => self.value(b) - self.value(a),
                }
            }
        }
    }

    pub fn lipschitz(self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Linear(c) => c.abs(),
            Self::Tanh => 1.0,
            Self::LeakyRelu(a) => a.abs().max(1.0),
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            Self::Linear(c) if !c.is_finite() => Err(Error::InvalidInput(
                "linear nonlinearity slope must be finite".into(),
            )),
            Self::LeakyRelu(a) if !(0.0..1.0).contains(&a) => Err(Error::InvalidInput(format!(
                "leaky relu slope must lie in [0, 1), got {a}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeKind {
    Heat,
    Wave,
}

/// A controlled semilinear PDE with its steady pair `(ȳ, ū)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdeSystem {
    pub kind: PdeKind,
    pub grid: Grid1D,
    pub nonlinearity: ScalarNonlinearity,
    /// One value per control channel (node in `ω`).
    pub u_bar: Vec<f64>,
    pub y_bar: Field,
}

impl PdeSystem {
    /// Solves for `ȳ` given `ū`.
    pub fn new(
        kind: PdeKind,
        grid: Grid1D,
        nonlinearity: ScalarNonlinearity,
        u_bar: Vec<f64>,
    ) -> Result<Self> {
        let y_bar = solve_steady(&grid, nonlinearity, &u_bar)?;
        Ok(Self {
            kind,
            grid,
            nonlinearity,
            u_bar,
            y_bar,
        })
    }

    /// Uses a given `ȳ`, which must satisfy the steady equation to [`STEADY_ACCEPT`].
    pub fn with_steady(
        kind: PdeKind,
        grid: Grid1D,
        nonlinearity: ScalarNonlinearity,
        u_bar: Vec<f64>,
        y_bar: Field,
    ) -> Result<Self> {
        let r = steady_residual(&grid, nonlinearity, &u_bar, &y_bar.values)?;
        if r > STEADY_ACCEPT {
            return Err(Error::InvalidInput(format!(
                "steady pair residual {r:e} exceeds {STEADY_ACCEPT:e}"
            )));
        }
        Ok(Self {
            kind,
            grid,
            nonlinearity,
            u_bar,
            y_bar,
        })
    }

    pub fn state_dim(&self) -> usize {
        match self.kind {
            PdeKind::Heat => self.grid.n_interior(),
            PdeKind::Wave => 2 * self.grid.n_interior(),
        }
    }

    /// `ȳ` for heat, `(ȳ, 0)` for wave.
    pub fn steady_state(&self) -> Vec<f64> {
        let mut s = self.y_bar.values.clone();
        if self.kind == PdeKind::Wave {
            s.extend(std::iter::repeat_n(0.0, self.grid.n_interior()));
        }
        s
    }

    /// Builds a full state from a position profile (and zero velocity for wave).
    pub fn state_from(&self, position: &Field) -> Vec<f64> {
        let mut s = position.values.clone();
        if self.kind == PdeKind::Wave {
            s.extend(std::iter::repeat_n(0.0, self.grid.n_interior()));
        }
        s
    }

    /// Grid-norm distance used for tracking: l2 for heat, energy norm for wave.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        state_metric(self).dist_sq(a, b).max(0.0).sqrt()
    }
}

/// l2 norm of `−Δ_h y + f(y) − E ū`.
pub fn steady_residual(
    grid: &Grid1D,
    f: ScalarNonlinearity,
    u_bar: &[f64],
    y: &[f64],
) -> Result<f64> {
    check_dim("steady control", grid.omega().len(), u_bar.len())?;
    check_dim("steady state", grid.n_interior(), y.len())?;
    let r = residual_vec(grid, f, u_bar, y);
    Ok(l2_norm(grid.h(), &r))
}

fn residual_vec(grid: &Grid1D, f: ScalarNonlinearity, u_bar: &[f64], y: &[f64]) -> Vec<f64> {
    let n = grid.n_interior();
    let mut lap = vec![0.0; n];
    let mut eu = vec![0.0; n];
    grid.laplacian(y, &mut lap);
    grid.inject(u_bar, &mut eu);
    (0..n).map(|i| -lap[i] + f.value(y[i]) - eu[i]).collect()
}

/// Solves `T x = r` for tridiagonal `T` (sub, diag, sup) by the Thomas algorithm.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = if n > 1 { sup[0] / diag[0] } else { 0.0 };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        if i + 1 < n {
            c[i] = sup[i] / m;
        }
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Newton iteration for `−Δ_h ȳ + f(ȳ) = ū 1_ω` from `ȳ = 0`, halving the
/// step while the residual grows.
pub fn solve_steady(grid: &Grid1D, f: ScalarNonlinearity, u_bar: &[f64]) -> Result<Field> {
    f.validate()?;
    check_dim("steady control", grid.omega().len(), u_bar.len())?;
    let n = grid.n_interior();
    let h = grid.h();
    let inv = 1.0 / (h * h);
    let mut y = vec![0.0; n];
    let mut r = residual_vec(grid, f, u_bar, &y);
    let mut norm = l2_norm(h, &r);
    let off = vec![-inv; n];
    let mut converged_at = None;
    for it in 0..NEWTON_MAX_ITERS {
        if norm <= STEADY_TOLERANCE && converged_at.is_none() {
            converged_at = Some(it);
        }
        // A few extra steps once converged squeeze out remaining roundoff.
        if let Some(c) = converged_at {
            if it >= c + 3 {
                break;
            }
        }
        let diag: Vec<f64> = y.iter().map(|v| 2.0 * inv + f.derivative(*v)).collect();
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = thomas(&off, &diag, &off, &neg);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = y.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
            let tr = residual_vec(grid, f, u_bar, &trial);
            let tn = l2_norm(h, &tr);
            if tn < norm || (converged_at.is_none() && tn <= norm && step == 1.0) {
                y = trial;
                r = tr;
                norm = tn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm <= STEADY_TOLERANCE {
        Ok(Field::new(h, y))
    } else {
        Err(Error::SteadySolve {
            iterations: NEWTON_MAX_ITERS,
            residual: norm,
        })
    }
}

struct PdeKernel {
    kind: PdeKind,
    grid: Grid1D,
    f: ScalarNonlinearity,
    /// When set, states are deviations `y − ȳ` and `f` acts through increments.
    shift: Option<Vec<f64>>,
}

impl PdeKernel {
    fn f_value(&self, i: usize, y: f64) -> f64 {
        match &self.shift {
            Some(base) => self.f.increment(base[i], y),
            None => self.f.value(y),
        }
    }

    fn f_derivative(&self, i: usize, y: f64) -> f64 {
        match &self.shift {
            Some(base) => self.f.derivative(base[i] + y),
            None => self.f.derivative(y),
        }
    }
}

impl Dynamics for PdeKernel {
    fn state_dim(&self) -> usize {
        match self.kind {
            PdeKind::Heat => self.grid.n_interior(),
            PdeKind::Wave => 2 * self.grid.n_interior(),
        }
    }

    fn control_dim(&self) -> usize {
        self.grid.omega().len()
    }

    fn rhs(&self, y: &[f64], u: &[f64], out: &mut [f64]) {
        let n = self.grid.n_interior();
        match self.kind {
            PdeKind::Heat => {
                self.grid.laplacian(y, out);
                for i in 0..n {
                    out[i] -= self.f_value(i, y[i]);
                }
                for (j, &i) in self.grid.omega().iter().enumerate() {
                    out[i] += u[j];
                }
            }
            PdeKind::Wave => {
                let (pos, vel) = y.split_at(n);
                let (dpos, dvel) = out.split_at_mut(n);
                dpos.copy_from_slice(vel);
                self.grid.laplacian(pos, dvel);
                for i in 0..n {
                    dvel[i] -= self.f_value(i, pos[i]);
                }
                for (j, &i) in self.grid.omega().iter().enumerate() {
                    dvel[i] += u[j];
                }
            }
        }
    }

    fn vjp(&self, y: &[f64], _u: &[f64], lambda: &[f64], gy: &mut [f64], gu: &mut [f64]) {
        let n = self.grid.n_interior();
        match self.kind {
            PdeKind::Heat => {
                self.grid.laplacian(lambda, gy);
                for i in 0..n {
                    gy[i] -= self.f_derivative(i, y[i]) * lambda[i];
                }
                for (j, &i) in self.grid.omega().iter().enumerate() {
                    gu[j] = lambda[i];
                }
            }
            PdeKind::Wave => {
                let pos = &y[..n];
                let (lpos, lvel) = lambda.split_at(n);
                let (gpos, gvel) = gy.split_at_mut(n);
                self.grid.laplacian(lvel, gpos);
                for i in 0..n {
                    gpos[i] -= self.f_derivative(i, pos[i]) * lvel[i];
                }
                gvel.copy_from_slice(lpos);
                for (j, &i) in self.grid.omega().iter().enumerate() {
                    gu[j] = lvel[i];
                }
            }
        }
    }
}

/// Method-of-lines system: heat has state `y` (dim N), wave has `(y, v)` (dim 2N).
pub fn semidiscretize(pde: &PdeSystem) -> ControlAffineSystem {
    let label = match pde.kind {
        PdeKind::Heat => "heat",
        PdeKind::Wave => "wave",
    };
    ControlAffineSystem::from_dynamics(
        label,
        SystemForm::Affine,
        Arc::new(PdeKernel {
            kind: pde.kind,
            grid: pde.grid.clone(),
            f: pde.nonlinearity,
            shift: None,
        }),
    )
}

/// The same dynamics in deviation variables `(y − ȳ, u − ū)`.
///
/// The steady pair becomes the origin, and the nonlinearity is evaluated
/// through [`ScalarNonlinearity::increment`], so distances to `ȳ` far below
/// the rounding level of `ȳ` itself stay resolvable. The steady residual
/// of `(ȳ, ū)` is dropped.
pub fn semidiscretize_deviation(pde: &PdeSystem) -> ControlAffineSystem {
    let label = match pde.kind {
        PdeKind::Heat => "heat_deviation",
        PdeKind::Wave => "wave_deviation",
    };
    ControlAffineSystem::from_dynamics(
        label,
        SystemForm::Affine,
        Arc::new(PdeKernel {
            kind: pde.kind,
            grid: pde.grid.clone(),
            f: pde.nonlinearity,
            shift: Some(pde.y_bar.values.clone()),
        }),
    )
}

/// `‖(y, v)‖² = ‖y‖²_{h10} + ‖v‖²_{l2}`.
struct WaveEnergyForm {
    grid: Grid1D,
}

impl QuadraticForm for WaveEnergyForm {
    fn dim(&self) -> usize {
        2 * self.grid.n_interior()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.grid.n_interior();
        let h = self.grid.h();
        let (pos, vel) = x.split_at(n);
        let (opos, ovel) = out.split_at_mut(n);
        self.grid.laplacian(pos, opos);
        opos.iter_mut().for_each(|v| *v *= -h);
        for (o, v) in ovel.iter_mut().zip(vel) {
            *o = h * v;
        }
    }
}

fn state_metric(pde: &PdeSystem) -> Metric {
    match pde.kind {
        PdeKind::Heat => Metric::Diagonal(vec![pde.grid.h(); pde.grid.n_interior()]),
        PdeKind::Wave => Metric::Form(Arc::new(WaveEnergyForm {
            grid: pde.grid.clone(),
        })),
    }
}

/// Tracking cost with grid norms: heat penalizes `‖y − ȳ‖²_{l2}`, wave
/// penalizes `‖y − ȳ‖²_{h10} + ‖v‖²_{l2}`; controls use `‖u − ū‖²_{l2(ω)}`.
/// A quadratic final cost is measured in the same state norm.
pub fn pde_cost_spec(pde: &PdeSystem, final_cost: FinalCost) -> CostSpec {
    let control_metric = Metric::Diagonal(vec![pde.grid.h(); pde.grid.omega().len()]);
    CostSpec::new(pde.steady_state(), pde.u_bar.clone())
        .with_final_cost(final_cost)
        .with_metrics(state_metric(pde), control_metric)
}

/// [`pde_cost_spec`] for [`semidiscretize_deviation`]: zero targets, with
/// the final-cost anchor shifted by the steady state.
pub fn pde_deviation_cost_spec(pde: &PdeSystem, final_cost: FinalCost) -> CostSpec {
    let steady = pde.steady_state();
    let final_cost = match final_cost {
        FinalCost::None => FinalCost::None,
        FinalCost::Quadratic { weight, anchor } => FinalCost::Quadratic {
            weight,
            anchor: anchor.iter().zip(&steady).map(|(a, s)| a - s).collect(),
        },
    };
    let control_metric = Metric::Diagonal(vec![pde.grid.h(); pde.grid.omega().len()]);
    CostSpec::new(vec![0.0; steady.len()], vec![0.0; pde.u_bar.len()])
        .with_final_cost(final_cost)
        .with_metrics(state_metric(pde), control_metric)
}

/// `2·max(a, L − b)`: travel time at unit speed from the farthest point to `ω`, and back.
pub fn wave_min_time(grid: &Grid1D) -> f64 {
    let (a, b) = grid.window();
    2.0 * a.max(grid.length() - b)
}

/// `½(‖v‖²_{l2} + ‖y‖²_{h10})` of a wave state.
pub fn wave_energy(grid: &Grid1D, state: &[f64]) -> f64 {
    let n = grid.n_interior();
    let h = grid.h();
    0.5 * (l2_norm(h, &state[n..]).powi(2) + h10_norm(h, &state[..n]).powi(2))
}

/// Smallest `K` with `T/K ≤ 0.5 h`.
pub fn wave_steps(grid: &Grid1D, horizon: f64) -> usize {
    (horizon / (0.5 * grid.h()) - 1e-9).ceil().max(1.0) as usize
}

/// A step count inside the explicit stability region of the heat system
/// (with a 20% margin), for RK4 or forward Euler.
pub fn heat_steps(
    grid: &Grid1D,
    f: ScalarNonlinearity,
    horizon: f64,
    scheme: crate::dynamics::Scheme,
) -> usize {
    let rho = grid.lambda_max() + f.lipschitz();
    let limit = match scheme {
        crate::dynamics::Scheme::Rk4 => 2.78,
        crate::dynamics::Scheme::ForwardEuler => 2.0,
    };
    let dt_max = 0.8 * limit / rho;
    (horizon / dt_max).ceil().max(1.0) as usize
}

/// Space-time CSV: header `t,x_1,...,x_N` carrying node coordinates, then one
/// row per time node with the position values. `offset` is added to every
/// row (pass `ȳ` for trajectories in deviation variables).
pub fn write_space_time_csv<W: Write>(
    grid: &Grid1D,
    trajectory: &Trajectory,
    offset: Option<&[f64]>,
    out: W,
) -> Result<()> {
    let n = grid.n_interior();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| grid.x(i).to_string()));
    w.write_record(&header)?;
    for (k, state) in trajectory.iter().enumerate() {
        let mut row = vec![trajectory.time(k).to_string()];
        row.extend((0..n).map(|i| (state[i] + offset.map_or(0.0, |o| o[i])).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
