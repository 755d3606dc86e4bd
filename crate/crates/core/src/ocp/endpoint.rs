use serde::{Deserialize, Serialize};

use super::{cost_of, solve_from, CostSpec, FinalCost, OcpProblem, SolverOptions};
use crate::dynamics::{distance, norm, ControlAffineSystem, ControlSignal, Scheme, Trajectory};
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointMode {
    /// Minimize `∫‖u − ū‖²` only: minimal-norm steering.
    ControlNormOnly,
    /// Minimize `∫‖y − ȳ‖² + ‖u − ū‖²` with fixed endpoints.
    FullTracking,
}

#[derive(Clone, Debug)]
pub struct EndpointOptions {
    /// Increasing penalty weights `ρ_1 < … < ρ_n`.
    pub schedule: Vec<f64>,
    /// Terminal mismatch accepted as "reached"; defaults to `1e-6·(1 + ‖y_end‖)`.
    pub threshold: Option<f64>,
    /// Reference control `ū` (zero when `None`).
    pub u_ref: Option<Vec<f64>>,
    /// Tracking target `ȳ` for [`EndpointMode::FullTracking`].
    pub y_ref: Option<Vec<f64>>,
    pub scheme: Scheme,
    pub solver: SolverOptions,
}

impl Default for EndpointOptions {
    fn default() -> Self {
        Self {
            schedule: (1..=6).map(|p| 10f64.powi(p)).collect(),
            threshold: None,
            u_ref: None,
            y_ref: None,
            scheme: Scheme::Rk4,
            solver: SolverOptions {
                max_iters: 5000,
                tolerance: 1e-10,
                restarts: 1,
                ..SolverOptions::default()
            },
        }
    }
}

impl EndpointOptions {
    pub fn default_threshold(y_end: &[f64]) -> f64 {
        1e-6 * (1.0 + norm(y_end))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EndpointSolution {
    pub control: ControlSignal,
    pub trajectory: Trajectory,
    /// The mode's running cost, without the penalty term.
    pub running_cost: f64,
    /// `‖y(τ2) − y_end‖`.
    pub terminal_error: f64,
    pub threshold: f64,
    /// Terminal mismatch after each penalty stage.
    pub mismatch_history: Vec<f64>,
    pub penalties_used: Vec<f64>,
    pub iterations: usize,
    /// `terminal_error ≤ threshold`; false signals a steering failure.
    pub achieved: bool,
}

/// Fixed-endpoint problem on `[τ1, τ2]` by quadratic penalty continuation.
///
/// Each stage minimizes the mode's running cost plus `ρ‖y(τ2) − ŷ‖²`, warm
/// started from the previous stage. The penalized target `ŷ` is shifted by the
/// accumulated mismatch (a multiplier update, rescaled when `ρ` grows) so that
/// the stage minimizers converge to the constrained one without `ρ → ∞`. Stops early once the
/// mismatch is below the threshold.
#[allow(clippy::too_many_arguments)]
pub fn solve_fixed_endpoint(
    system: &ControlAffineSystem,
    y_start: &[f64],
    y_end: &[f64],
    tau1: f64,
    tau2: f64,
    steps: usize,
    mode: EndpointMode,
    opts: &EndpointOptions,
) -> Result<EndpointSolution> {
    check_dim("y_start", system.d(), y_start.len())?;
    check_dim("y_end", system.d(), y_end.len())?;
    if !(tau2 > tau1) {
        return Err(Error::InvalidInput(format!(
            "endpoint window needs tau2 > tau1, got [{tau1}, {tau2}]"
        )));
    }
    if opts.schedule.is_empty() || opts.schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "penalty schedule must be a nonempty increasing sequence".into(),
        ));
    }
    let threshold = opts
        .threshold
        .unwrap_or_else(|| EndpointOptions::default_threshold(y_end));
    let u_ref = opts.u_ref.clone().unwrap_or_else(|| vec![0.0; system.m()]);
    let y_ref = opts.y_ref.clone().unwrap_or_else(|| y_end.to_vec());
    let state_weight = match mode {
        EndpointMode::ControlNormOnly => 0.0,
        EndpointMode::FullTracking => 1.0,
    };
    let running = CostSpec::new(y_ref, u_ref).with_weights(state_weight, 1.0);

    let horizon = tau2 - tau1;
    let mut control = ControlSignal::constant(horizon, steps, &running.u_bar)?;
    // Penalized target `ŷ = y_end − s`; `ρ·s` plays the role of a multiplier.
    let mut shift = vec![0.0; y_end.len()];
    let mut mismatch_history = Vec::new();
    let mut penalties_used = Vec::new();
    let mut iterations = 0;
    let mut trajectory = None;

    for (stage, &rho) in opts.schedule.iter().enumerate() {
        let shifted_target: Vec<f64> = y_end.iter().zip(&shift).map(|(e, s)| e - s).collect();
        let cost = running.clone().with_final_cost(FinalCost::Quadratic {
            weight: 2.0 * rho,
            anchor: shifted_target,
        });
        let problem = OcpProblem::new(system.clone(), y_start.to_vec(), horizon, steps, cost)?
            .with_scheme(opts.scheme);
        let sol = solve_from(&problem, control, &opts.solver)?;
        iterations += sol.iterations;
        let reached = sol.trajectory.final_state();
        let mismatch = distance(reached, y_end);
        let next = opts.schedule.get(stage + 1).copied().unwrap_or(rho);
        for ((s, r), e) in shift.iter_mut().zip(reached).zip(y_end) {
            *s = (*s + r - e) * rho / next;
        }
        mismatch_history.push(mismatch);
        penalties_used.push(rho);
        control = sol.control;
        trajectory = Some(sol.trajectory);
        if mismatch <= threshold {
            break;
        }
    }

    let trajectory = trajectory.expect("schedule is nonempty");
    let terminal_error = *mismatch_history.last().expect("schedule is nonempty");
    Ok(EndpointSolution {
        running_cost: cost_of(&running, &trajectory, &control),
        control,
        trajectory,
        terminal_error,
        threshold,
        mismatch_history,
        penalties_used,
        iterations,
        achieved: terminal_error <= threshold,
    })
}
