//! Explicit suboptimal controls and empirical controllability probes.
//!
//! Steering is realized numerically by minimal-norm fixed-endpoint problems
//! ([`crate::ocp::solve_fixed_endpoint`]). A steering that misses its target
//! is reported as a result with `achieved = false`, not as an error. For
//! linear systems [`gramian_steer`] gives the exact minimal-norm control.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{distance, ControlAffineSystem, ControlSignal};
use crate::error::{check_dim, Error, Result};
use crate::ocp::{solve_fixed_endpoint, EndpointMode, EndpointOptions, STEADY_TOLERANCE};

/// Gramian condition numbers above this are treated as uncontrollable.
pub const MAX_GRAMIAN_CONDITION: f64 = 1e12;

/// Fraction of failed steerings above which a probe is unreliable.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteeringResult {
    pub control: ControlSignal,
    pub terminal_error: f64,
    /// `‖u − ū‖_{L²}`.
    pub control_norm: f64,
    pub threshold: f64,
    pub achieved: bool,
}

/// Minimal-norm steering from `y0` to `y1` on `[0, t0]`.
///
/// `opts.u_ref` sets the reference control the norm is measured from.
pub fn steer(
    system: &ControlAffineSystem,
    y0: &[f64],
    y1: &[f64],
    t0: f64,
    steps: usize,
    opts: &EndpointOptions,
) -> Result<SteeringResult> {
    if !(t0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "steering time must be positive, got {t0}"
        )));
    }
    let sol = solve_fixed_endpoint(
        system,
        y0,
        y1,
        0.0,
        t0,
        steps,
        EndpointMode::ControlNormOnly,
        opts,
    )?;
    let u_ref = opts.u_ref.clone().unwrap_or_else(|| vec![0.0; system.m()]);
    Ok(SteeringResult {
        control_norm: sol.control.l2_distance_to(&u_ref),
        control: sol.control,
        terminal_error: sol.terminal_error,
        threshold: sol.threshold,
        achieved: sol.achieved,
    })
}

/// Exact minimal-`L²` piecewise-constant control steering `ẏ = Ay + Bu` from
/// `y0` to `y1` in time `t0`.
///
/// With `Γ_k = ∫_{t_k}^{t_{k+1}} e^{A(t0−s)} ds B` and the grid Gramian
/// `W = Σ_k Γ_k Γ_kᵀ / Δt`, the control is `u_k = Γ_kᵀ W⁻¹ (y1 − e^{A t0} y0) / Δt`,
/// the cell average of `Bᵀe^{Aᵀ(t0−t)}W⁻¹(y1 − e^{At0}y0)`.
pub fn gramian_steer(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    y0: &[f64],
    y1: &[f64],
    t0: f64,
    steps: usize,
) -> Result<ControlSignal> {
    let d = a.nrows();
    let m = b.ncols();
    if !a.is_square() {
        return Err(Error::InvalidInput("drift matrix must be square".into()));
    }
    check_dim("input matrix rows", d, b.nrows())?;
    check_dim("y0", d, y0.len())?;
    check_dim("y1", d, y1.len())?;
    if !(t0 > 0.0) || steps == 0 {
        return Err(Error::InvalidInput(
            "gramian steering needs t0 > 0 and steps > 0".into(),
        ));
    }
    let dt = t0 / steps as f64;
    let mut aug = DMatrix::zeros(d + m, d + m);
    aug.view_mut((0, 0), (d, d)).copy_from(&(a * dt));
    aug.view_mut((0, d), (d, m)).copy_from(&(b * dt));
    let e = aug.exp();
    let phi = e.view((0, 0), (d, d)).into_owned();
    let gamma = e.view((0, d), (d, m)).into_owned();

    // Γ_k = Φ^{K−1−k} Γ, built backwards.
    let mut blocks = vec![DMatrix::zeros(d, m); steps];
    let mut current = gamma;
    for k in (0..steps).rev() {
        blocks[k] = current.clone();
        current = &phi * current;
    }
    let mut w = DMatrix::zeros(d, d);
    for g in &blocks {
        w += g * g.transpose();
    }
    w /= dt;
    let sv = w.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_GRAMIAN_CONDITION) {
        return Err(Error::NotControllable { condition });
    }
    let mut free = DVector::from_column_slice(y0);
    for _ in 0..steps {
        free = &phi * free;
    }
    let residual = DVector::from_column_slice(y1) - free;
    let nu = w
        .lu()
        .solve(&residual)
        .ok_or(Error::NotControllable { condition })?;
    let mut values = Vec::with_capacity(steps * m);
    for g in &blocks {
        values.extend((g.transpose() * &nu / dt).iter());
    }
    ControlSignal::new(t0, steps, m, values)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeDirection {
    /// Steer sampled `y⁰` to `ȳ`.
    IntoSteady,
    /// Steer `ȳ` to sampled `y¹`.
    OutOfSteady,
}

/// Empirical control-cost ratios `‖u − ū‖_{L²} / ‖y − ȳ‖` over a ball.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostEstimateProbe {
    pub direction: ProbeDirection,
    pub radius: f64,
    pub t0: f64,
    pub samples: usize,
    /// Ratios of achieved steerings, by sample index.
    pub ratios: Vec<f64>,
    /// Max ratio; `None` when no sample produced data.
    pub estimated_c: Option<f64>,
    pub failures: usize,
    /// Samples at distance zero from `ȳ` (ratio 0/0).
    pub excluded: usize,
    pub reliable: bool,
}

#[derive(Clone, Debug)]
pub struct ProbeOptions {
    pub samples: usize,
    pub seed: u64,
    pub steps: usize,
    pub endpoint: EndpointOptions,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            samples: 64,
            seed: 0,
            steps: 100,
            endpoint: EndpointOptions::default(),
        }
    }
}

/// Uniform sample in the ball of radius `r` around `center`.
fn sample_ball(center: &[f64], r: f64, rng: &mut impl Rng) -> Vec<f64> {
    let d = center.len();
    let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let n = dir
        .iter()
        .map(|x: &f64| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    let u: f64 = rng.random();
    let rho = r * u.powf(1.0 / d as f64);
    center
        .iter()
        .zip(&dir)
        .map(|(c, x)| c + rho * x / n)
        .collect()
}

/// Probes both cost estimates around the steady pair `(ȳ, ū)`.
///
/// Returns `[into_steady, out_of_steady]`.
pub fn probe_cost_estimate(
    system: &ControlAffineSystem,
    y_bar: &[f64],
    u_bar: &[f64],
    radius: f64,
    t0: f64,
    opts: &ProbeOptions,
) -> Result<[CostEstimateProbe; 2]> {
    let residual = system.steady_residual(y_bar, u_bar)?;
    if residual > STEADY_TOLERANCE {
        return Err(Error::InvalidInput(format!(
            "probe needs a steady pair, residual {residual:e}"
        )));
    }
    if !(radius >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "probe radius must be nonnegative, got {radius}"
        )));
    }
    let points: Vec<Vec<f64>> = (0..opts.samples)
        .map(|i| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
            sample_ball(y_bar, radius, &mut rng)
        })
        .collect();
    let mut endpoint = opts.endpoint.clone();
    endpoint.u_ref = Some(u_bar.to_vec());

    let run = |direction: ProbeDirection| -> Result<CostEstimateProbe> {
        let outcomes: Vec<Result<Option<(f64, bool)>>> = points
            .par_iter()
            .map(|p| {
                let dist = distance(p, y_bar);
                if dist == 0.0 {
                    return Ok(None);
                }
                let (from, to) = match direction {
                    ProbeDirection::IntoSteady => (p.as_slice(), y_bar),
                    ProbeDirection::OutOfSteady => (y_bar, p.as_slice()),
                };
                let s = steer(system, from, to, t0, opts.steps, &endpoint)?;
                Ok(Some((s.control_norm / dist, s.achieved)))
            })
            .collect();
        let mut ratios = Vec::new();
        let (mut failures, mut excluded) = (0, 0);
        for o in outcomes {
            match o? {
                None => excluded += 1,
                Some((ratio, true)) if ratio.is_finite() => ratios.push(ratio),
                Some(_) => failures += 1,
            }
        }
        let attempted = ratios.len() + failures;
        let estimated_c = ratios.iter().copied().reduce(f64::max);
        Ok(CostEstimateProbe {
            direction,
            radius,
            t0,
            samples: opts.samples,
            estimated_c,
            reliable: attempted > 0 && (failures as f64) <= MAX_FAILURE_FRACTION * attempted as f64,
            ratios,
            failures,
            excluded,
        })
    };
    Ok([
        run(ProbeDirection::IntoSteady)?,
        run(ProbeDirection::OutOfSteady)?,
    ])
}

fn cells_for(duration: f64, dt: f64, what: &str) -> Result<usize> {
    let cells = (duration / dt).round();
    if (cells * dt - duration).abs() > 1e-9 * duration.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "{what} = {duration} is not a multiple of the step {dt}"
        )));
    }
    Ok(cells as usize)
}

fn require_achieved(s: &SteeringResult) -> Result<()> {
    if s.achieved {
        Ok(())
    } else {
        Err(Error::SteeringFailed {
            terminal_error: s.terminal_error,
            threshold: s.threshold,
        })
    }
}

/// Steer `y0 → ȳ` on `[0, t0]`, then hold `ū` on `[t0, T]`.
#[allow(clippy::too_many_arguments)]
pub fn build_quasi_turnpike(
    system: &ControlAffineSystem,
    y0: &[f64],
    y_bar: &[f64],
    u_bar: &[f64],
    t0: f64,
    horizon: f64,
    steps: usize,
    opts: &EndpointOptions,
) -> Result<ControlSignal> {
    check_dim("u_bar", system.m(), u_bar.len())?;
    if !(horizon >= t0 && t0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "quasi-turnpike needs 0 < t0 <= T, got t0 = {t0}, T = {horizon}"
        )));
    }
    let dt = horizon / steps as f64;
    let k0 = cells_for(t0, dt, "t0")?;
    let mut endpoint = opts.clone();
    endpoint.u_ref = Some(u_bar.to_vec());
    let head = steer(system, y0, y_bar, t0, k0, &endpoint)?;
    require_achieved(&head)?;
    let mut parts = vec![head.control];
    if steps > k0 {
        parts.push(ControlSignal::constant(horizon - t0, steps - k0, u_bar)?);
    }
    ControlSignal::concat(&parts)
}

/// Steer `y_a → ȳ` on `(τ1, τ1+t0)`, hold `ū`, then steer `ȳ → y_b` on
/// `(τ2−t0, τ2)`. The returned signal lives on `[0, τ2 − τ1]`.
#[allow(clippy::too_many_arguments)]
pub fn build_two_sided(
    system: &ControlAffineSystem,
    y_a: &[f64],
    y_b: &[f64],
    y_bar: &[f64],
    u_bar: &[f64],
    t0: f64,
    tau1: f64,
    tau2: f64,
    steps: usize,
    opts: &EndpointOptions,
) -> Result<ControlSignal> {
    check_dim("u_bar", system.m(), u_bar.len())?;
    if !(t0 > 0.0 && tau2 - tau1 >= 2.0 * t0) {
        return Err(Error::InvalidInput(format!(
            "two-sided construction needs tau2 - tau1 >= 2 t0, got [{tau1}, {tau2}] with t0 = {t0}"
        )));
    }
    let horizon = tau2 - tau1;
    let dt = horizon / steps as f64;
    let k0 = cells_for(t0, dt, "t0")?;
    let mut endpoint = opts.clone();
    endpoint.u_ref = Some(u_bar.to_vec());
    let head = steer(system, y_a, y_bar, t0, k0, &endpoint)?;
    require_achieved(&head)?;
    let tail = steer(system, y_bar, y_b, t0, k0, &endpoint)?;
    require_achieved(&tail)?;
    let mut parts = vec![head.control];
    if steps > 2 * k0 {
        parts.push(ControlSignal::constant(
            horizon - 2.0 * t0,
            steps - 2 * k0,
            u_bar,
        )?);
    }
    parts.push(tail.control);
    ControlSignal::concat(&parts)
}

/// `u_T(t) = (t0/T) u_{t0}(t·t0/T)` on the same number of cells.
pub fn time_rescale(control: &ControlSignal, horizon: f64) -> Result<ControlSignal> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "new horizon must be positive, got {horizon}"
        )));
    }
    let factor = control.horizon() / horizon;
    ControlSignal::new(
        horizon,
        control.steps(),
        control.channels(),
        control.values().iter().map(|v| v * factor).collect(),
    )
}
