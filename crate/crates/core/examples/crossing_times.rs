//! Small-value crossing times of a U-shaped distance signal and the nested
//! window certificate built on them.

use turnpike::diagnostics::{bootstrap_certificate, small_crossing_times, Signal};

fn main() -> turnpike::Result<()> {
    let horizon = 40.0;
    let steps = 4000;
    let dt = horizon / steps as f64;
    let values: Vec<f64> = (0..=steps)
        .map(|k| {
            let t = k as f64 * dt;
            (-t).exp() + 0.5 * (-(horizon - t)).exp()
        })
        .collect();
    let signal = Signal::on_nodes(values, dt);
    for tau in [horizon / 10.0, horizon / 4.0, horizon / 2.0] {
        let c = small_crossing_times(&signal, tau)?;
        println!(
            "tau = {tau:>4}: t1 = {:.2}, t2 = {:.2}, threshold {:.3e}",
            c.t1, c.t2, c.threshold
        );
    }
    let cert = bootstrap_certificate(&signal, 4.0, 1.0, 0.5, 2.0);
    println!(
        "bootstrap: contraction {:.3}, {:?} ({})",
        cert.contraction,
        cert.verdict(),
        cert.note
    );
    for step in &cert.steps {
        println!(
            "  n = {}: max {:.3e} <= bound {:.3e}: {:?}",
            step.n, step.max_signal, step.bound, step.verdict
        );
    }
    Ok(())
}
