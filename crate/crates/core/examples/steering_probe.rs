//! Minimal-norm steering: the penalty continuation against the exact Gramian
//! control, then a sampled estimate of the steering cost constant.

use nalgebra::DMatrix;
use turnpike::dynamics::ControlAffineSystem;
use turnpike::ocp::EndpointOptions;
use turnpike::quasi_turnpike::{gramian_steer, probe_cost_estimate, steer, ProbeOptions};

fn main() -> turnpike::Result<()> {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let system = ControlAffineSystem::linear(a.clone(), b.clone())?;
    let (y0, y1) = ([1.0, 0.0], [0.0, 0.0]);
    let exact = gramian_steer(&a, &b, &y0, &y1, 2.0, 100)?;
    let numeric = steer(&system, &y0, &y1, 2.0, 100, &EndpointOptions::default())?;
    println!(
        "double integrator: Gramian norm {:.6}, continuation norm {:.6}, terminal error {:.2e}",
        exact.l2_norm(),
        numeric.control_norm,
        numeric.terminal_error
    );

    let opts = ProbeOptions {
        samples: 16,
        seed: 3,
        ..ProbeOptions::default()
    };
    let [into, out] = probe_cost_estimate(
        &ControlAffineSystem::integrator(),
        &[0.0],
        &[0.0],
        0.5,
        1.0,
        &opts,
    )?;
    println!(
        "scalar integrator, t0 = 1: C into ȳ = {:.4}, C out of ȳ = {:.4}",
        into.estimated_c.unwrap_or(f64::NAN),
        out.estimated_c.unwrap_or(f64::NAN)
    );
    Ok(())
}
