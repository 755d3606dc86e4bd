//! Turnpike, stabilization and control-decay diagnostics for solved problems.
//!
//! Signals are sampled nonnegative functions on `[0, T]`. Decay envelopes
//! are fitted by least squares on `log(signal)`, which weighs every decade
//! of decay equally. Samples at or below [`TRIVIAL_LEVEL`] are already at
//! the turnpike and are left out of the fit.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::SystemForm;
use crate::error::{Error, Result};
use crate::ocp::{FinalCost, OcpProblem, Solution};

/// Signals are floored here before taking logarithms.
pub const SIGNAL_FLOOR: f64 = 1e-14;

/// A signal whose window maximum is at or below this is already at the
/// turnpike and passes every decay check.
pub const TRIVIAL_LEVEL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn is_fail(self) -> bool {
        self == Self::Fail
    }
}

/// A sampled nonnegative function on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub horizon: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Signal {
    /// Values at grid nodes `t_k = kΔt`, `k = 0..=K`.
    pub fn on_nodes(values: Vec<f64>, dt: f64) -> Self {
        let times = (0..values.len()).map(|k| k as f64 * dt).collect();
        Self {
            horizon: dt * (values.len().saturating_sub(1)) as f64,
            times,
            values,
        }
    }

    /// Piecewise-constant cell values stamped at cell midpoints.
    pub fn on_cells(values: Vec<f64>, dt: f64) -> Self {
        let times = (0..values.len()).map(|k| (k as f64 + 0.5) * dt).collect();
        Self {
            horizon: dt * values.len() as f64,
            times,
            values,
        }
    }

    fn window(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let tol = 1e-9 * self.horizon.max(1.0);
        self.times
            .iter()
            .zip(&self.values)
            .filter(move |(t, _)| **t >= lo - tol && **t <= hi + tol)
            .map(|(t, v)| (*t, *v))
    }

    fn uniform_dt(&self) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::InvalidInput(
                "signal needs at least two samples".into(),
            ));
        }
        Ok(self.times[1] - self.times[0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `C(e^{−μt} + e^{−μ(T−t)})`
    TwoSided,
    /// `C e^{−μt}`
    OneSided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: FitModel,
    #[serde(rename = "C")]
    pub c: f64,
    pub mu: f64,
    pub horizon: f64,
    pub window: [f64; 2],
    pub rms_log_residual: f64,
    /// Signal already at or below [`TRIVIAL_LEVEL`] on the window.
    pub trivial: bool,
}

impl DecayFit {
    pub fn envelope(&self, t: f64) -> f64 {
        match self.model {
            FitModel::TwoSided => {
                self.c * ((-self.mu * t).exp() + (-self.mu * (self.horizon - t)).exp())
            }
            FitModel::OneSided => self.c * (-self.mu * t).exp(),
        }
    }

    /// `μ > 0` and small log residual, or trivially converged.
    pub fn passes(&self, thresholds: &Thresholds) -> bool {
        self.trivial
            || (self.mu > thresholds.mu_min
                && self.rms_log_residual <= thresholds.max_rms_log_residual)
    }
}

/// Verdict thresholds, recorded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub boundary_width: f64,
    pub mu_min: f64,
    pub max_rms_log_residual: f64,
    pub margin: f64,
    pub signal_floor: f64,
    pub trivial_level: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            boundary_width: 2.0,
            mu_min: 0.0,
            max_rms_log_residual: 0.5,
            margin: 2.0,
            signal_floor: SIGNAL_FLOOR,
            trivial_level: TRIVIAL_LEVEL,
        }
    }
}

impl Thresholds {
    /// Defaults with the boundary width set to `2·t0`.
    pub fn for_steering_time(t0: f64) -> Self {
        Self {
            boundary_width: 2.0 * t0,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingTimes {
    pub t1: f64,
    pub t2: f64,
    pub index1: usize,
    pub index2: usize,
    /// `‖s‖_{L²}/√τ`.
    pub threshold: f64,
}

/// Grid times `t1 ∈ [0, τ)` and `t2 ∈ (T − τ, T]` where the signal is at most
/// `‖s‖_{L²(0,T)}/√τ`; `t1` is the earliest and `t2` the latest such time.
///
/// Expects a node-sampled signal ([`Signal::on_nodes`]). The discrete norm is
/// `sqrt(Σ_k s_k² Δt)` over all nodes, for which both
/// windows provably contain a qualifying node.
pub fn small_crossing_times(signal: &Signal, tau: f64) -> Result<CrossingTimes> {
    let dt = signal.uniform_dt()?;
    let horizon = signal.horizon;
    if !(tau > 0.0 && tau <= horizon / 2.0 * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput(format!(
            "crossing window needs 0 < tau <= T/2, got tau = {tau}, T = {horizon}"
        )));
    }
    let energy: f64 = signal.values.iter().map(|v| v * v).sum::<f64>() * dt;
    let threshold = (energy / tau).sqrt();
    let qualifies = |v: f64| v * v * tau <= energy;
    // Window membership by index: k·Δt < τ and k·Δt > T − τ, with τ/Δt
    // snapped to an integer when it is one up to rounding.
    let mut r = tau / dt;
    if (r - r.round()).abs() < 1e-9 * r.max(1.0) {
        r = r.round();
    }
    let last_index = signal.values.len() - 1;
    let first = (0..=last_index)
        .take_while(|k| (*k as f64) < r)
        .find(|k| qualifies(signal.values[*k]));
    let last = (0..=last_index)
        .rev()
        .take_while(|k| (*k as f64) > last_index as f64 - r)
        .find(|k| qualifies(signal.values[*k]));
    match (first, last) {
        (Some(i), Some(j)) => Ok(CrossingTimes {
            t1: signal.times[i],
            t2: signal.times[j],
            index1: i,
            index2: j,
            threshold,
        }),
        _ => Err(Error::Internal(format!(
            "no crossing time found for tau = {tau}; quadrature is inconsistent"
        ))),
    }
}

fn floored_logs(points: &[(f64, f64)], floor: f64) -> Vec<f64> {
    points.iter().map(|(_, v)| v.max(floor).ln()).collect()
}

/// Least-squares line `intercept + slope·t`.
fn linear_fit(ts: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    let sxy: f64 = ts.iter().zip(ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (ym - slope * tm, slope)
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

/// Rates whose total decay over the horizon is at rounding level are zero.
fn snap_rate(mu: f64, horizon: f64) -> f64 {
    if (mu * horizon).abs() < 1e-9 {
        0.0
    } else {
        mu
    }
}

/// `log(e^{−μt} + e^{−μ(T−t)})` and its `μ`-derivative, evaluated stably.
fn two_sided_log(mu: f64, t: f64, horizon: f64) -> (f64, f64) {
    let (a, b) = (t, horizon - t);
    let (near, far) = if a <= b { (a, b) } else { (b, a) };
    let r = (-mu * (far - near)).exp();
    let value = -mu * near + r.ln_1p();
    let deriv = -(near + far * r) / (1.0 + r);
    (value, deriv)
}

/// Samples already at the turnpike carry no rate information.
fn resolved(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points
        .into_iter()
        .filter(|(_, v)| *v > TRIVIAL_LEVEL)
        .collect()
}

fn trivial_fit(model: FitModel, horizon: f64, window: [f64; 2]) -> DecayFit {
    DecayFit {
        model,
        c: 0.0,
        mu: 0.0,
        horizon,
        window,
        rms_log_residual: 0.0,
        trivial: true,
    }
}

/// Two-sided envelope fit on `[W, T − W]`.
///
/// `log C` is profiled out; `μ ≥ 0` is found by Gauss–Newton started from
/// separate log-linear fits of the left and right arcs. A signal without a
/// U-shaped decay ends at `μ = 0`.
pub fn fit_turnpike_envelope(signal: &Signal, boundary_width: f64) -> Result<DecayFit> {
    let horizon = signal.horizon;
    if !(horizon > 4.0 * boundary_width) {
        return Err(Error::InvalidInput(format!(
            "two-sided fit needs T > 4W, got T = {horizon}, W = {boundary_width}"
        )));
    }
    let window = [boundary_width, horizon - boundary_width];
    let points: Vec<(f64, f64)> = signal.window(window[0], window[1]).collect();
    if points.len() < 3 {
        return Err(Error::InvalidInput(
            "fit window holds fewer than 3 samples".into(),
        ));
    }
    let points = resolved(points);
    if points.len() < 3 {
        return Ok(trivial_fit(FitModel::TwoSided, horizon, window));
    }
    let ts: Vec<f64> = points.iter().map(|(t, _)| *t).collect();
    let logs = floored_logs(&points, SIGNAL_FLOOR);

    let arc = |lo: f64, hi: f64| {
        let (t, y): (Vec<f64>, Vec<f64>) = ts
            .iter()
            .zip(&logs)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .map(|(t, y)| (*t, *y))
            .unzip();
        if t.len() >= 2 {
            linear_fit(&t, &y).1
        } else {
            0.0
        }
    };
    let mid = horizon / 2.0;
    let mu_left = -arc(window[0], mid);
    let mu_right = arc(mid, window[1]);
    let mut mu = (0.5 * (mu_left + mu_right)).max(0.0);

    // Profiled residuals r_i = ℓ_i − g_i − mean(ℓ − g).
    let evaluate = |mu: f64| -> (f64, f64, Vec<f64>, Vec<f64>) {
        let mut g = Vec::with_capacity(ts.len());
        let mut dg = Vec::with_capacity(ts.len());
        for t in &ts {
            let (v, d) = two_sided_log(mu, *t, horizon);
            g.push(v);
            dg.push(d);
        }
        let n = ts.len() as f64;
        let log_c = logs.iter().zip(&g).map(|(l, g)| l - g).sum::<f64>() / n;
        let dmean = dg.iter().sum::<f64>() / n;
        let res: Vec<f64> = logs.iter().zip(&g).map(|(l, g)| l - g - log_c).collect();
        let jac: Vec<f64> = dg.iter().map(|d| -(d - dmean)).collect();
        let rss = res.iter().map(|r| r * r).sum::<f64>();
        (rss, log_c, res, jac)
    };

    let (mut rss, mut log_c, mut res, mut jac) = evaluate(mu);
    for _ in 0..200 {
        let jj: f64 = jac.iter().map(|j| j * j).sum();
        let jr: f64 = jac.iter().zip(&res).map(|(j, r)| j * r).sum();
        if jj <= 0.0 {
            break;
        }
        let mut step = -jr / jj;
        let mut improved = false;
        for _ in 0..40 {
            let candidate = (mu + step).max(0.0);
            let trial = evaluate(candidate);
            if trial.0 < rss {
                let moved = (candidate - mu).abs();
                mu = candidate;
                (rss, log_c, res, jac) = trial;
                improved = moved > 1e-14 * mu.max(1.0);
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let mu = snap_rate(mu, horizon);
    Ok(DecayFit {
        model: FitModel::TwoSided,
        c: log_c.exp(),
        mu,
        horizon,
        window,
        rms_log_residual: (rss / ts.len() as f64).sqrt(),
        trivial: false,
    })
}

/// One-sided fit `C e^{−μt}` on `[W, T]` by log-linear least squares.
pub fn fit_stabilization(signal: &Signal, boundary_width: f64) -> Result<DecayFit> {
    let horizon = signal.horizon;
    if !(horizon > boundary_width) {
        return Err(Error::InvalidInput(format!(
            "one-sided fit needs T > W, got T = {horizon}, W = {boundary_width}"
        )));
    }
    let window = [boundary_width, horizon];
    let points: Vec<(f64, f64)> = signal.window(window[0], window[1]).collect();
    if points.len() < 3 {
        return Err(Error::InvalidInput(
            "fit window holds fewer than 3 samples".into(),
        ));
    }
    let points = resolved(points);
    if points.len() < 3 {
        return Ok(trivial_fit(FitModel::OneSided, horizon, window));
    }
    let ts: Vec<f64> = points.iter().map(|(t, _)| *t).collect();
    let logs = floored_logs(&points, SIGNAL_FLOOR);
    let (intercept, slope) = linear_fit(&ts, &logs);
    let residual = rms(ts.iter().zip(&logs).map(|(t, l)| l - intercept - slope * t));
    Ok(DecayFit {
        model: FitModel::OneSided,
        c: intercept.exp(),
        mu: snap_rate(-slope, horizon),
        horizon,
        window,
        rms_log_residual: residual,
        trivial: false,
    })
}

/// Control-decay verdict: the fitted envelope times `margin` must dominate
/// the control magnitude on the fit window, with `μ > 0`. Only defined for
/// driftless systems.
pub fn check_control_decay(
    control: &Signal,
    fit: &DecayFit,
    margin: f64,
    form: SystemForm,
) -> Verdict {
    if !form.is_driftless() {
        return Verdict::NotApplicable;
    }
    let mut window = control.window(fit.window[0], fit.window[1]).peekable();
    if window.peek().is_none() {
        return Verdict::Fail;
    }
    let points: Vec<(f64, f64)> = window.collect();
    if fit.trivial || points.iter().all(|(_, v)| *v <= TRIVIAL_LEVEL) {
        return Verdict::Pass;
    }
    if !(fit.mu > 0.0) {
        return Verdict::Fail;
    }
    Verdict::from_bool(
        points
            .iter()
            .all(|(t, v)| *v <= TRIVIAL_LEVEL || *v <= margin * fit.envelope(*t)),
    )
}

/// Pass iff `max J / min J ≤ 1 + rel_tol` over horizons `T ≥ t_threshold`.
pub fn check_uniform_bound(
    costs: &[(f64, f64)],
    t_threshold: f64,
    rel_tol: f64,
) -> Result<Verdict> {
    let selected: Vec<f64> = costs
        .iter()
        .filter(|(t, _)| *t >= t_threshold)
        .map(|(_, j)| *j)
        .collect();
    if selected.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "uniform bound needs at least two horizons >= {t_threshold}, got {}",
            selected.len()
        )));
    }
    let max = selected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = selected.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        return Ok(Verdict::Pass);
    }
    Ok(Verdict::from_bool(min > 0.0 && max / min <= 1.0 + rel_tol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapStep {
    pub n: usize,
    pub window: [f64; 2],
    pub max_signal: f64,
    pub bound: f64,
    pub verdict: Verdict,
}

/// Per-level check of `max_{[nτ, T−nτ]} s ≤ (κ/2)(4C₂²/√τ)ⁿ`.
///
/// The constants are empirical stand-ins (probe-fitted `C₂`, user-chosen
/// `κ`), so a pass is a numerical certificate rather than a proof.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCertificate {
    pub applicable: bool,
    pub note: String,
    pub tau: f64,
    pub contraction: f64,
    pub steps: Vec<BootstrapStep>,
}

impl BootstrapCertificate {
    pub fn verdict(&self) -> Verdict {
        if !self.applicable || self.steps.is_empty() {
            Verdict::NotApplicable
        } else {
            Verdict::from_bool(self.steps.iter().all(|s| s.verdict == Verdict::Pass))
        }
    }
}

pub fn bootstrap_certificate(
    distance: &Signal,
    tau: f64,
    t0: f64,
    c2_hat: f64,
    kappa_hat: f64,
) -> BootstrapCertificate {
    let contraction = 4.0 * c2_hat * c2_hat / tau.sqrt();
    let mut cert = BootstrapCertificate {
        applicable: false,
        note: String::new(),
        tau,
        contraction,
        steps: Vec::new(),
    };
    if !(tau > 16.0 * c2_hat.powi(4)) {
        cert.note = format!(
            "tau = {tau} does not exceed 16·C2^4 = {}; the bound does not contract",
            16.0 * c2_hat.powi(4)
        );
        return cert;
    }
    let horizon = distance.horizon;
    let levels = ((horizon / 2.0 - t0) / tau).floor();
    if levels < 1.0 {
        cert.note = format!(
            "no admissible level: (T/2 - T0)/tau = {}",
            (horizon / 2.0 - t0) / tau
        );
        return cert;
    }
    cert.applicable = true;
    cert.note = "empirical constants; numerical certificate, not a proof".into();
    for n in 1..=levels as usize {
        let lo = n as f64 * tau;
        let hi = horizon - lo;
        let max_signal = distance.window(lo, hi).map(|(_, v)| v).fold(0.0, f64::max);
        let bound = 0.5 * kappa_hat * contraction.powi(n as i32);
        cert.steps.push(BootstrapStep {
            n,
            window: [lo, hi],
            max_signal,
            bound,
            verdict: Verdict::from_bool(max_signal <= bound),
        });
    }
    cert
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub turnpike: Verdict,
    pub stabilization: Verdict,
    pub control_decay: Verdict,
    pub uniform_bound: Verdict,
}

impl Verdicts {
    pub fn any_fail(&self) -> bool {
        [
            self.turnpike,
            self.stabilization,
            self.control_decay,
            self.uniform_bound,
        ]
        .iter()
        .any(|v| v.is_fail())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub grad_norm: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
    pub steady_residual: f64,
    pub steady_warning: bool,
}

/// Diagnostics of one solved horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnpikeReport {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    /// `‖y_T(t_k) − ȳ‖` at the nodes, in the problem's state metric.
    pub distance: Vec<f64>,
    /// `‖u_T − ū‖` per cell, in the problem's control metric.
    pub control: Vec<f64>,
    pub fits: BTreeMap<String, DecayFit>,
    pub verdicts: Verdicts,
    pub thresholds: Thresholds,
    pub cost_value: f64,
    pub solver: SolverSummary,
}

impl TurnpikeReport {
    pub fn distance_signal(&self) -> Signal {
        Signal::on_nodes(self.distance.clone(), self.dt)
    }

    pub fn control_signal(&self) -> Signal {
        Signal::on_cells(self.control.clone(), self.dt)
    }

    /// Builds the report and all applicable verdicts for a solution.
    pub fn analyze(
        problem: &OcpProblem,
        solution: &Solution,
        thresholds: &Thresholds,
    ) -> Result<Self> {
        let cost = &problem.cost;
        let distance: Vec<f64> = solution
            .trajectory
            .iter()
            .map(|y| cost.state_metric.dist_sq(y, &cost.y_bar).max(0.0).sqrt())
            .collect();
        let control: Vec<f64> = (0..solution.control.steps())
            .map(|k| {
                cost.control_metric
                    .dist_sq(solution.control.at(k), &cost.u_bar)
                    .max(0.0)
                    .sqrt()
            })
            .collect();
        let dt = problem.dt();
        let horizon = problem.horizon;
        let w = thresholds.boundary_width;
        let dist_signal = Signal::on_nodes(distance.clone(), dt);
        let ctrl_signal = Signal::on_cells(control.clone(), dt);
        let mut fits = BTreeMap::new();

        let free_end = matches!(cost.final_cost, FinalCost::None);
        // Without a final cost there is no right arc; the one-sided fits take over.
        let turnpike = if !free_end && horizon > 4.0 * w {
            let fit = fit_turnpike_envelope(&dist_signal, w)?;
            let v = Verdict::from_bool(fit.passes(thresholds));
            fits.insert("turnpike".to_string(), fit);
            v
        } else {
            Verdict::NotApplicable
        };
        let stabilization = if free_end && horizon > w {
            let fit = fit_stabilization(&dist_signal, w)?;
            let v = Verdict::from_bool(fit.passes(thresholds));
            fits.insert("stabilization".to_string(), fit);
            v
        } else {
            Verdict::NotApplicable
        };
        let control_decay = if problem.system.form().is_driftless() && horizon > 4.0 * w {
            let fit = if free_end {
                fit_stabilization(&ctrl_signal, w)?
            } else {
                fit_turnpike_envelope(&ctrl_signal, w)?
            };
            let v =
                check_control_decay(&ctrl_signal, &fit, thresholds.margin, problem.system.form());
            fits.insert("control".to_string(), fit);
            v
        } else {
            Verdict::NotApplicable
        };

        Ok(Self {
            horizon,
            dt,
            distance,
            control,
            fits,
            verdicts: Verdicts {
                turnpike,
                stabilization,
                control_decay,
                uniform_bound: Verdict::NotApplicable,
            },
            thresholds: thresholds.clone(),
            cost_value: solution.cost_value,
            solver: SolverSummary {
                grad_norm: solution.grad_norm,
                iterations: solution.iterations,
                restarts_used: solution.restarts_used,
                converged: solution.converged,
                steady_residual: problem.steady_residual(),
                steady_warning: problem.steady_warning(),
            },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// CSV with columns `t, dist, ctrl`; `ctrl` is empty on the final node.
    pub fn write_signals_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "dist", "ctrl"])?;
        for (k, d) in self.distance.iter().enumerate() {
            let ctrl = self.control.get(k).map(f64::to_string).unwrap_or_default();
            w.write_record([(k as f64 * self.dt).to_string(), d.to_string(), ctrl])?;
        }
        w.flush()?;
        Ok(())
    }
}
