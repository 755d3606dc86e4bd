//! Optimal costs of a tanh neural ODE stay flat in `T` and never exceed the
//! cost of the steer-then-hold control.

use turnpike::diagnostics::check_uniform_bound;
use turnpike::dynamics::{make_neural_system, Activation, NeuralKind};
use turnpike::ocp::{
    evaluate_cost, solve, CostSpec, EndpointOptions, FinalCost, OcpProblem, SolverOptions,
};
use turnpike::quasi_turnpike::build_quasi_turnpike;

fn main() -> turnpike::Result<()> {
    let system = make_neural_system(NeuralKind::Outside, Activation::Tanh, 2)?;
    let m = system.m();
    let y0 = vec![1.0, -0.5];
    let opts = SolverOptions {
        restarts: 1,
        ..SolverOptions::default()
    };
    let mut costs = Vec::new();
    for horizon in [10.0, 20.0, 40.0] {
        let steps = (100.0 * horizon) as usize;
        let cost =
            CostSpec::new(vec![0.0; 2], vec![0.0; m]).with_final_cost(FinalCost::Quadratic {
                weight: 2.0,
                anchor: vec![1.5, 1.5],
            });
        let problem = OcpProblem::new(system.clone(), y0.clone(), horizon, steps, cost)?;
        let solution = solve(&problem, &opts)?;
        let quasi = build_quasi_turnpike(
            &system,
            &y0,
            &[0.0; 2],
            &vec![0.0; m],
            1.0,
            horizon,
            steps,
            &EndpointOptions::default(),
        )?;
        let quasi_cost = evaluate_cost(&problem, &quasi)?;
        println!(
            "T = {horizon:>4}: J = {:.6}, quasi-turnpike cost {quasi_cost:.6}",
            solution.cost_value
        );
        costs.push((horizon, solution.cost_value));
    }
    println!(
        "uniform over T >= 20: {:?}",
        check_uniform_bound(&costs, 20.0, 0.05)?
    );
    Ok(())
}
