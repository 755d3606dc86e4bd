//! Stretching a driftless steering control from `[0, t0]` to `[0, T]`
//! reproduces the same path at the slower clock with `L²` norm scaled by
//! `√(t0/T)`.

use turnpike::dynamics::{make_neural_system, Activation, NeuralKind, Scheme};
use turnpike::ocp::EndpointOptions;
use turnpike::quasi_turnpike::{steer, time_rescale};

fn main() -> turnpike::Result<()> {
    let system = make_neural_system(NeuralKind::Outside, Activation::Tanh, 2)?;
    let y0 = [0.8, -0.4];
    let s = steer(
        &system,
        &y0,
        &[0.0, 0.0],
        1.0,
        100,
        &EndpointOptions::default(),
    )?;
    let short = system.integrate(&y0, &s.control, Scheme::Rk4)?;
    for horizon in [2.0, 5.0] {
        let slow = time_rescale(&s.control, horizon)?;
        let long = system.integrate(&y0, &slow, Scheme::Rk4)?;
        let mismatch = short
            .iter()
            .zip(long.iter())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        println!(
            "T = {horizon}: path mismatch {mismatch:.2e}, norm ratio {:.6} (expected {:.6})",
            slow.l2_norm() / s.control.l2_norm(),
            (1.0 / horizon).sqrt()
        );
    }
    Ok(())
}
