//! Two-moons classification with a shared-control neural ODE over `T = 15`.

use turnpike::classify::{run_classify, two_moons, ClassifyConfig};

fn main() -> turnpike::Result<()> {
    let (points, labels) = two_moons(20, 0.05, 7);
    let cfg = ClassifyConfig {
        points,
        labels,
        seed: 7,
        ..ClassifyConfig::default()
    };
    let run = run_classify(&cfg)?;
    let r = &run.report;
    println!(
        "accuracy {}, loss {:.4e} (u = 0: {:.4e})",
        r.accuracy, r.loss, r.baseline_loss
    );
    println!(
        "flatness: early slope {:.3e}, late slope {:.3e}, flat {}",
        r.flatness.early_slope, r.flatness.late_slope, r.flatness.flat
    );
    println!(
        "iterations {}, converged {}, grad {:.2e}",
        r.iterations, r.converged, r.grad_norm
    );
    Ok(())
}
