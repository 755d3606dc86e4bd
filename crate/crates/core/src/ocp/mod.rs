//! Tracking functionals, their discrete adjoint gradients and direct
//! transcription solvers.
//!
//! The functional is transcribed on the control grid with left-endpoint
//! quadrature:
//!
//! ```text
//! J(u) = φ(y_K) + Σ_{k<K} (state_weight‖y_k − ȳ‖² + control_weight‖u_k − ū‖²) Δt
//! ```
//!
//! where `y_k` are the integrator nodes. [`gradient`] differentiates exactly
//! this discrete quantity by a reverse sweep through the one-step scheme.

mod cost;
mod endpoint;
mod solver;

pub use cost::{CostSpec, FinalCost, Metric, QuadraticForm};
pub use endpoint::{solve_fixed_endpoint, EndpointMode, EndpointOptions, EndpointSolution};
pub use solver::{solve, solve_from, Solution, SolverOptions};

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate, step_adjoint, ControlAffineSystem, ControlSignal, Scheme, StepWorkspace, Trajectory,
};
use crate::error::{check_dim, Error, Result};

/// Tolerance on `‖f(ȳ, ū)‖` below which the running target counts as steady.
pub const STEADY_TOLERANCE: f64 = 1e-8;

/// One tracking problem instance on a fixed grid.
#[derive(Clone, Debug)]
pub struct OcpProblem {
    pub system: ControlAffineSystem,
    pub y0: Vec<f64>,
    pub horizon: f64,
    pub steps: usize,
    pub cost: CostSpec,
    pub scheme: Scheme,
    steady_residual: f64,
}

impl OcpProblem {
    pub fn new(
        system: ControlAffineSystem,
        y0: Vec<f64>,
        horizon: f64,
        steps: usize,
        cost: CostSpec,
    ) -> Result<Self> {
        check_dim("y0", system.d(), y0.len())?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidInput("steps must be positive".into()));
        }
        cost.validate(system.d(), system.m())?;
        let steady_residual = system.steady_residual(&cost.y_bar, &cost.u_bar)?;
        Ok(Self {
            system,
            y0,
            horizon,
            steps,
            cost,
            scheme: Scheme::Rk4,
            steady_residual,
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `‖f(ȳ, ū)‖` recorded at construction.
    pub fn steady_residual(&self) -> f64 {
        self.steady_residual
    }

    /// Set when the running target is not a steady pair.
    pub fn steady_warning(&self) -> bool {
        self.steady_residual > STEADY_TOLERANCE
    }

    /// The constant control `ū` on the problem grid.
    pub fn reference_control(&self) -> ControlSignal {
        ControlSignal::constant(self.horizon, self.steps, &self.cost.u_bar)
            .expect("problem grid is valid")
    }

    pub(crate) fn check_control(&self, control: &ControlSignal) -> Result<()> {
        check_dim("control steps", self.steps, control.steps())?;
        check_dim("control channels", self.system.m(), control.channels())?;
        if ((control.horizon() - self.horizon) / self.horizon).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "control horizon {} does not match problem horizon {}",
                control.horizon(),
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn integrate(&self, control: &ControlSignal) -> Result<Trajectory> {
        integrate(&self.system, &self.y0, control, self.scheme)
    }
}

/// Discrete functional value for a given trajectory/control pair.
pub fn cost_of(cost: &CostSpec, trajectory: &Trajectory, control: &ControlSignal) -> f64 {
    let dt = control.dt();
    let mut running = 0.0;
    for k in 0..control.steps() {
        running += (cost.state_term(trajectory.state(k)) + cost.control_term(control.at(k))) * dt;
    }
    if cost.h1_weight > 0.0 {
        for k in 0..control.steps().saturating_sub(1) {
            let jump: f64 = control
                .at(k + 1)
                .iter()
                .zip(control.at(k))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            running += cost.h1_weight * jump / dt;
        }
    }
    cost.final_value(trajectory.final_state()) + running
}

/// `J_T(u)`.
pub fn evaluate_cost(problem: &OcpProblem, control: &ControlSignal) -> Result<f64> {
    problem.check_control(control)?;
    let traj = problem.integrate(control)?;
    Ok(cost_of(&problem.cost, &traj, control))
}

/// Control gradient laid out like a [`ControlSignal`] (`K × m`, row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlGradient {
    pub steps: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl ControlGradient {
    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.channels..(k + 1) * self.channels]
    }

    /// Norm of the `L²` Riesz representative `g / Δt`.
    pub fn l2_norm(&self, dt: f64) -> f64 {
        (self.values.iter().map(|g| g * g).sum::<f64>() / dt).sqrt()
    }
}

/// Exact gradient of the discrete functional with respect to the control
/// values, by reverse accumulation through the one-step scheme.
pub fn gradient(problem: &OcpProblem, control: &ControlSignal) -> Result<ControlGradient> {
    problem.check_control(control)?;
    problem.system.dynamics().check_differentiable()?;
    let traj = problem.integrate(control)?;
    Ok(gradient_along(problem, control, &traj))
}

pub(crate) fn gradient_along(
    problem: &OcpProblem,
    control: &ControlSignal,
    traj: &Trajectory,
) -> ControlGradient {
    let (d, m) = (problem.system.d(), problem.system.m());
    let steps = control.steps();
    let dt = control.dt();
    let cost = &problem.cost;
    let mut grad = vec![0.0; steps * m];
    let mut lam = vec![0.0; d];
    cost.add_final_grad(traj.final_state(), &mut lam);
    let mut lam_prev = vec![0.0; d];
    let mut ws = StepWorkspace::new(d, m);
    for k in (0..steps).rev() {
        let (y, u) = (traj.state(k), control.at(k));
        let g = &mut grad[k * m..(k + 1) * m];
        step_adjoint(
            problem.system.dynamics(),
            problem.scheme,
            y,
            u,
            dt,
            &lam,
            &mut ws,
            &mut lam_prev,
            g,
        );
        cost.control_metric
            .add_grad(u, &cost.u_bar, dt * cost.control_weight, g);
        cost.state_metric
            .add_grad(y, &cost.y_bar, dt * cost.state_weight, &mut lam_prev);
        std::mem::swap(&mut lam, &mut lam_prev);
    }
    if cost.h1_weight > 0.0 {
        let c = 2.0 * cost.h1_weight / dt;
        for k in 0..steps.saturating_sub(1) {
            for j in 0..m {
                let jump = control.at(k + 1)[j] - control.at(k)[j];
                grad[(k + 1) * m + j] += c * jump;
                grad[k * m + j] -= c * jump;
            }
        }
    }
    ControlGradient {
        steps,
        channels: m,
        values: grad,
    }
}
