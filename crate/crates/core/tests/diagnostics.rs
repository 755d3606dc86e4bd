use proptest::prelude::*;
use turnpike::diagnostics::{
    bootstrap_certificate, check_control_decay, check_uniform_bound, fit_stabilization,
    fit_turnpike_envelope, small_crossing_times, FitModel, Signal, Thresholds, TurnpikeReport,
    Verdict,
};
use turnpike::dynamics::{ControlAffineSystem, SystemForm};
use turnpike::ocp::{solve, CostSpec, FinalCost, OcpProblem, SolverOptions};
use turnpike::Error;

fn sampled(horizon: f64, steps: usize, f: impl Fn(f64) -> f64) -> Signal {
    let dt = horizon / steps as f64;
    Signal::on_nodes((0..=steps).map(|k| f(k as f64 * dt)).collect(), dt)
}

fn lq_report(final_cost: FinalCost) -> TurnpikeReport {
    let cost = CostSpec::new(vec![0.0], vec![0.0]).with_final_cost(final_cost);
    let p = OcpProblem::new(
        ControlAffineSystem::integrator(),
        vec![1.0],
        20.0,
        2000,
        cost,
    )
    .unwrap();
    let s = solve(
        &p,
        &SolverOptions {
            restarts: 1,
            ..SolverOptions::default()
        },
    )
    .unwrap();
    TurnpikeReport::analyze(&p, &s, &Thresholds::for_steering_time(1.0)).unwrap()
}

fn symmetric_pull() -> FinalCost {
    FinalCost::Quadratic {
        weight: 2.0,
        anchor: vec![2.0],
    }
}

#[test]
fn crossing_times_of_zero_and_constant_signals() {
    let zero = sampled(10.0, 100, |_| 0.0);
    let c = small_crossing_times(&zero, 3.0).unwrap();
    assert_eq!((c.t1, c.index2), (0.0, 100));
    let constant = sampled(10.0, 100, |_| 2.0);
    let c = small_crossing_times(&constant, 2.5).unwrap();
    assert_eq!((c.index1, c.index2), (0, 100));
    assert!(c.threshold >= 2.0);
}

#[test]
fn crossing_times_of_exponential() {
    let s = sampled(10.0, 1000, |t| (-t).exp());
    let c = small_crossing_times(&s, 2.0).unwrap();
    let dt = 0.01;
    let energy: f64 = s.values.iter().map(|v| v * v).sum::<f64>() * dt;
    let threshold = (energy / 2.0).sqrt();
    assert!((threshold - 0.5).abs() < 5e-3);
    let first = s.values.iter().position(|v| *v <= threshold).unwrap();
    assert_eq!(c.index1, first);
    assert!((c.t1 - 2f64.ln()).abs() <= 2.0 * dt);
    // Every node of the right window qualifies; the latest is returned.
    assert_eq!(c.index2, 1000);
    let earliest_right = (801..=1000).find(|k| s.values[*k] <= threshold).unwrap();
    assert_eq!(earliest_right, 801);
    assert!(matches!(
        small_crossing_times(&s, 6.0),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn two_sided_fit_recovers_own_model() {
    let s = sampled(20.0, 400, |t| {
        2.0 * ((-0.5 * t).exp() + (-0.5 * (20.0 - t)).exp())
    });
    let fit = fit_turnpike_envelope(&s, 2.0).unwrap();
    assert_eq!(fit.model, FitModel::TwoSided);
    assert!((fit.c / 2.0 - 1.0).abs() < 0.01);
    assert!((fit.mu / 0.5 - 1.0).abs() < 0.01);
    assert_eq!(fit.window, [2.0, 18.0]);
    assert!(fit_turnpike_envelope(&s, 5.0).is_err());
}

#[test]
fn one_sided_fit_recovers_own_model() {
    let s = sampled(10.0, 400, |t| 3.0 * (-t).exp());
    let fit = fit_stabilization(&s, 1.0).unwrap();
    assert!((fit.c / 3.0 - 1.0).abs() < 0.01);
    assert!((fit.mu - 1.0).abs() < 0.01);
    assert_eq!(fit.window, [1.0, 10.0]);
}

#[test]
fn samples_at_the_turnpike_are_left_out() {
    // Drops below the trivial level near t = 28 and keeps decaying.
    let s = sampled(60.0, 1200, |t| 3.0 * (-t).exp());
    let fit = fit_stabilization(&s, 1.0).unwrap();
    assert!((fit.mu - 1.0).abs() < 1e-9 && fit.rms_log_residual < 1e-9);
    let s = sampled(80.0, 1600, |t| (-t).exp() + (-(80.0 - t)).exp());
    let fit = fit_turnpike_envelope(&s, 1.0).unwrap();
    assert!((fit.mu - 1.0).abs() < 1e-6, "mu {}", fit.mu);
    let s = sampled(20.0, 200, |t| if t < 1.05 { 1.0 } else { 1e-13 });
    assert!(fit_stabilization(&s, 1.0).unwrap().trivial);
}

#[test]
fn model_mismatch_shows_in_residual() {
    let s = sampled(20.0, 400, |t| (-t).exp() + (-(20.0 - t)).exp());
    let two = fit_turnpike_envelope(&s, 2.0).unwrap();
    let one = fit_stabilization(&s, 2.0).unwrap();
    assert!(one.rms_log_residual > 10.0 * two.rms_log_residual.max(1e-6));
}

#[test]
fn constant_signal_does_not_decay() {
    let s = sampled(20.0, 200, |_| 0.3);
    let fit = fit_turnpike_envelope(&s, 2.0).unwrap();
    assert!(fit.mu <= 0.0);
    assert!(!fit.passes(&Thresholds::default()));
}

#[test]
fn lq_solve_fits_unit_rate() {
    let report = lq_report(symmetric_pull());
    let fit = &report.fits["turnpike"];
    assert!((fit.mu - 1.0).abs() <= 0.1, "mu = {}", fit.mu);
    assert_eq!(report.verdicts.turnpike, Verdict::Pass);
    assert_eq!(report.verdicts.stabilization, Verdict::NotApplicable);
    // Driftless scalar: the control decays at the state rate.
    assert_eq!(report.verdicts.control_decay, Verdict::Pass);
    assert!((report.fits["control"].mu / fit.mu - 1.0).abs() <= 0.3);
}

#[test]
fn control_decay_rules() {
    let fit = fit_turnpike_envelope(
        &sampled(20.0, 200, |t| (-t).exp() + (-(20.0 - t)).exp()),
        2.0,
    )
    .unwrap();
    let zero = Signal::on_cells(vec![0.0; 200], 0.1);
    assert_eq!(
        check_control_decay(&zero, &fit, 2.0, SystemForm::Driftless),
        Verdict::Pass
    );
    let constant = Signal::on_cells(vec![0.5; 200], 0.1);
    assert_eq!(
        check_control_decay(&constant, &fit, 2.0, SystemForm::Driftless),
        Verdict::Fail
    );
    assert_eq!(
        check_control_decay(&constant, &fit, 2.0, SystemForm::Affine),
        Verdict::NotApplicable
    );
}

#[test]
fn uniform_bound_examples() {
    let flat = [(10.0, 5.0), (20.0, 5.02), (40.0, 5.01)];
    assert_eq!(
        check_uniform_bound(&flat, 10.0, 0.05).unwrap(),
        Verdict::Pass
    );
    let growing = [(10.0, 5.0), (20.0, 7.0), (40.0, 9.0)];
    assert_eq!(
        check_uniform_bound(&growing, 10.0, 0.05).unwrap(),
        Verdict::Fail
    );
    assert!(check_uniform_bound(&growing, 30.0, 0.05).is_err());
}

#[test]
fn lq_sweep_costs_are_uniform() {
    let mut costs = Vec::new();
    for horizon in [10.0, 20.0, 40.0] {
        let steps = (100.0 * horizon) as usize;
        let p = OcpProblem::new(
            ControlAffineSystem::integrator(),
            vec![1.0],
            horizon,
            steps,
            CostSpec::new(vec![0.0], vec![0.0]),
        )
        .unwrap();
        let s = solve(
            &p,
            &SolverOptions {
                restarts: 1,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        costs.push((horizon, s.cost_value));
    }
    assert_eq!(
        check_uniform_bound(&costs, 10.0, 0.01).unwrap(),
        Verdict::Pass
    );
}

#[test]
fn bootstrap_examples() {
    let zero = sampled(40.0, 400, |_| 0.0);
    let cert = bootstrap_certificate(&zero, 4.0, 1.0, 0.5, 1.0);
    assert!(cert.applicable);
    assert_eq!(cert.verdict(), Verdict::Pass);
    assert_eq!(cert.steps.len(), 4);

    // Signal equal to the n = 1 bound on its window.
    let bound = 0.5 * 2.0 * (4.0 * 0.25 / 2.0);
    let exact = sampled(40.0, 400, |_| bound);
    let cert = bootstrap_certificate(&exact, 4.0, 1.0, 0.5, 2.0);
    assert_eq!(cert.steps[0].verdict, Verdict::Pass);

    let short = bootstrap_certificate(&zero, 0.5, 1.0, 0.5, 1.0);
    assert!(!short.applicable);
    assert_eq!(short.verdict(), Verdict::NotApplicable);
    assert!(short.note.contains("16"));
}

#[test]
fn bootstrap_on_lq_solve() {
    let report = lq_report(symmetric_pull());
    // Scalar integrator: steering cost constant 1/√t0; any C₂ with
    // τ > 16·C₂⁴ and a κ above the boundary values.
    let cert = bootstrap_certificate(&report.distance_signal(), 4.0, 1.0, 0.5, 4.0);
    assert!(cert.applicable);
    assert_eq!(cert.verdict(), Verdict::Pass);
}

#[test]
fn report_round_trips_through_json() {
    let report = lq_report(FinalCost::None);
    let text = report.to_json().unwrap();
    let back = TurnpikeReport::from_json(&text).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.to_json().unwrap(), text);
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "T",
        "dt",
        "distance",
        "control",
        "fits",
        "verdicts",
        "thresholds",
    ] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
    assert!(value["fits"]["stabilization"].get("C").is_some());
}

#[test]
fn signals_csv_columns() {
    let report = lq_report(FinalCost::None);
    let mut out = Vec::new();
    report.write_signals_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,dist,ctrl"));
    assert_eq!(lines.count(), report.distance.len());
}

#[test]
fn passing_reports_are_dominated_by_their_envelope() {
    let report = lq_report(symmetric_pull());
    let fit = &report.fits["control"];
    assert_eq!(report.verdicts.control_decay, Verdict::Pass);
    let signal = report.control_signal();
    for (t, v) in signal.times.iter().zip(&signal.values) {
        if *t >= fit.window[0] && *t <= fit.window[1] {
            assert!(*v <= report.thresholds.margin * fit.envelope(*t));
        }
    }
}

fn piecewise_linear(knots: &[f64], horizon: f64, steps: usize) -> Signal {
    let segments = (knots.len() - 1) as f64;
    sampled(horizon, steps, |t| {
        let x = t / horizon * segments;
        let i = (x.floor() as usize).min(knots.len() - 2);
        let f = x - i as f64;
        knots[i] * (1.0 - f) + knots[i + 1] * f
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn crossing_times_satisfy_discrete_bound(
        knots in proptest::collection::vec(0.0f64..5.0, 2..12),
        horizon in 1.0f64..50.0,
        steps in 20usize..400,
        which in 0usize..3,
    ) {
        let s = piecewise_linear(&knots, horizon, steps);
        let horizon = s.horizon;
        let tau = horizon * [0.1, 0.25, 0.5][which];
        let c = small_crossing_times(&s, tau).unwrap();
        let dt = horizon / steps as f64;
        let energy: f64 = s.values.iter().map(|v| v * v).sum::<f64>() * dt;
        prop_assert!(c.t1 < tau && c.t2 > horizon - tau);
        prop_assert!(s.values[c.index1].powi(2) * tau <= energy);
        prop_assert!(s.values[c.index2].powi(2) * tau <= energy);
    }

    #[test]
    fn fits_recover_parameters(c in 0.1f64..10.0, mu in 0.2f64..2.0) {
        let horizon = 20.0;
        let two = sampled(horizon, 400, |t| c * ((-mu * t).exp() + (-mu * (horizon - t)).exp()));
        let fit = fit_turnpike_envelope(&two, 2.0).unwrap();
        prop_assert!((fit.c / c - 1.0).abs() < 0.01 && (fit.mu / mu - 1.0).abs() < 0.01);
        // Shorter horizon keeps the one-sided tail above the log floor.
        let one = sampled(10.0, 400, |t| c * (-mu * t).exp());
        let fit = fit_stabilization(&one, 1.0).unwrap();
        prop_assert!((fit.c / c - 1.0).abs() < 0.01 && (fit.mu / mu - 1.0).abs() < 0.01);
    }
}
