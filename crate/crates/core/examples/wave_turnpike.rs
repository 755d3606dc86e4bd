//! Semilinear wave equation with control on `ω = (0.7, 1)` and a final cost
//! pulling back to the initial profile: the energy-norm distance to `ȳ` is
//! small in the middle of long horizons.

use turnpike::diagnostics::{Thresholds, TurnpikeReport};
use turnpike::ocp::{solve, FinalCost, OcpProblem, SolverOptions};
use turnpike::pde::{self, Field, Grid1D, PdeKind, PdeSystem, ScalarNonlinearity};

fn main() -> turnpike::Result<()> {
    let grid = Grid1D::new(1.0, 128, 0.7, 1.0)?;
    let m = grid.omega().len();
    let wave = PdeSystem::new(
        PdeKind::Wave,
        grid.clone(),
        ScalarNonlinearity::Tanh,
        vec![0.0; m],
    )?;
    let system = pde::semidiscretize(&wave);
    let t_min = pde::wave_min_time(&grid);
    let pi = std::f64::consts::PI;
    let y0 = wave.state_from(&Field::from_fn(&grid, |x| (pi * x).sin()));
    let anchor = wave.state_from(&Field::from_fn(&grid, |x| (pi * x).sin()));
    let opts = SolverOptions {
        tolerance: 1e-6,
        restarts: 1,
        max_iters: 4000,
        ..SolverOptions::default()
    };
    for factor in [4.0, 8.0] {
        let horizon = factor * t_min;
        let steps = pde::wave_steps(&grid, horizon);
        let cost = pde::pde_cost_spec(
            &wave,
            FinalCost::Quadratic {
                weight: 20.0,
                anchor: anchor.clone(),
            },
        );
        let problem = OcpProblem::new(system.clone(), y0.clone(), horizon, steps, cost)?;
        let solution = solve(&problem, &opts)?;
        let thresholds = Thresholds {
            boundary_width: 0.5 * t_min,
            ..Thresholds::default()
        };
        let report = TurnpikeReport::analyze(&problem, &solution, &thresholds)?;
        let fit = &report.fits["turnpike"];
        println!(
            "T = {horizon:.2}: J = {:.5}, mu = {:.3}, rms = {:.3}, verdict {:?}",
            solution.cost_value, fit.mu, fit.rms_log_residual, report.verdicts.turnpike
        );
    }
    Ok(())
}
