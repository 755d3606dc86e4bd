//! Scalar LQ problem `ẏ = u`, `J = ∫ y² + u² + (y(T) − 2)²`: the optimal
//! state hugs `ȳ = 0` with rate 1 in the interior.

use turnpike::diagnostics::{Thresholds, TurnpikeReport};
use turnpike::dynamics::ControlAffineSystem;
use turnpike::ocp::{solve, CostSpec, FinalCost, OcpProblem, SolverOptions};

fn main() -> turnpike::Result<()> {
    let horizon = 20.0;
    let cost = CostSpec::new(vec![0.0], vec![0.0]).with_final_cost(FinalCost::Quadratic {
        weight: 2.0,
        anchor: vec![2.0],
    });
    let problem = OcpProblem::new(
        ControlAffineSystem::integrator(),
        vec![1.0],
        horizon,
        2000,
        cost,
    )?;
    let opts = SolverOptions {
        tolerance: 1e-6,
        restarts: 1,
        ..SolverOptions::default()
    };
    let solution = solve(&problem, &opts)?;
    let report = TurnpikeReport::analyze(&problem, &solution, &Thresholds::for_steering_time(1.0))?;
    let fit = &report.fits["turnpike"];
    println!(
        "J = {:.6}, iterations {}",
        solution.cost_value, solution.iterations
    );
    println!(
        "two-sided fit: C = {:.4}, mu = {:.4}, rms = {:.3e}",
        fit.c, fit.mu, fit.rms_log_residual
    );
    println!("verdicts: {:?}", report.verdicts);
    Ok(())
}
