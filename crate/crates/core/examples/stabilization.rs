//! Without a final cost the optimal state settles on `ȳ` and stays there: a
//! one-sided decay, and a smaller terminal gap than the run pulled to `y = 2`.

use turnpike::diagnostics::{Thresholds, TurnpikeReport};
use turnpike::dynamics::ControlAffineSystem;
use turnpike::ocp::{solve, CostSpec, FinalCost, OcpProblem, SolverOptions};

fn main() -> turnpike::Result<()> {
    let opts = SolverOptions {
        restarts: 1,
        ..SolverOptions::default()
    };
    let thresholds = Thresholds::for_steering_time(1.0);
    for (name, final_cost) in [
        ("no final cost", FinalCost::None),
        (
            "pulled to 2",
            FinalCost::Quadratic {
                weight: 2.0,
                anchor: vec![2.0],
            },
        ),
    ] {
        let cost = CostSpec::new(vec![0.0], vec![0.0]).with_final_cost(final_cost);
        let problem = OcpProblem::new(
            ControlAffineSystem::integrator(),
            vec![1.0],
            10.0,
            1000,
            cost,
        )?;
        let solution = solve(&problem, &opts)?;
        let report = TurnpikeReport::analyze(&problem, &solution, &thresholds)?;
        let gap = report.distance.last().copied().unwrap_or(f64::NAN);
        print!(
            "{name:>14}: J = {:.5}, |y(T)| = {gap:.3e}",
            solution.cost_value
        );
        if let Some(fit) = report.fits.get("stabilization") {
            print!(
                ", one-sided mu = {:.4}, rms = {:.2e}",
                fit.mu, fit.rms_log_residual
            );
        }
        println!();
    }
    Ok(())
}
