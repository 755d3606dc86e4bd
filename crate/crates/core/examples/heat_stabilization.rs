//! Semilinear heat equation `y_t − y_xx + tanh(y) = u 1_ω` without final
//! cost, solved in deviation variables around the controlled steady state.
//! The midpoint distance to `ȳ` collapses as the horizon doubles.

use turnpike::diagnostics::{Thresholds, TurnpikeReport};
use turnpike::dynamics::Scheme;
use turnpike::ocp::{solve, FinalCost, OcpProblem, SolverOptions};
use turnpike::pde::{self, Grid1D, PdeKind, PdeSystem, ScalarNonlinearity};

fn main() -> turnpike::Result<()> {
    let grid = Grid1D::new(1.0, 64, 0.3, 0.7)?;
    let m = grid.omega().len();
    let heat = PdeSystem::new(
        PdeKind::Heat,
        grid.clone(),
        ScalarNonlinearity::Tanh,
        vec![5.0; m],
    )?;
    let peak = heat.y_bar.values.iter().copied().fold(0.0, f64::max);
    println!("steady state peak {peak:.4}");

    let system = pde::semidiscretize_deviation(&heat);
    // Start from y ≡ 0, i.e. at −ȳ in deviation variables.
    let y0: Vec<f64> = heat.y_bar.values.iter().map(|v| -v).collect();
    let opts = SolverOptions {
        tolerance: 1e-7,
        restarts: 1,
        ..SolverOptions::default()
    };
    for horizon in [4.0, 8.0, 16.0] {
        let steps = pde::heat_steps(&grid, heat.nonlinearity, horizon, Scheme::Rk4);
        let cost = pde::pde_deviation_cost_spec(&heat, FinalCost::None);
        let problem = OcpProblem::new(system.clone(), y0.clone(), horizon, steps, cost)?;
        let solution = solve(&problem, &opts)?;
        let report =
            TurnpikeReport::analyze(&problem, &solution, &Thresholds::for_steering_time(0.5))?;
        let mid = report.distance[report.distance.len() / 2];
        let fit = &report.fits["stabilization"];
        println!(
            "T = {horizon:>4}: J = {:.6}, |y(T/2) - ybar| = {mid:.3e}, mu = {:.3}",
            solution.cost_value, fit.mu
        );
    }
    Ok(())
}
