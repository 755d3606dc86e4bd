mod common;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turnpike::dynamics::{
    make_neural_system, Activation, ControlAffineSystem, ControlSignal, NeuralKind,
};
use turnpike::ocp::{
    evaluate_cost, gradient, solve, solve_fixed_endpoint, CostSpec, EndpointMode, EndpointOptions,
    FinalCost, OcpProblem, SolverOptions,
};
use turnpike::quasi_turnpike::build_quasi_turnpike;
use turnpike::Error;

fn lq(y0: f64, horizon: f64, steps: usize, final_cost: FinalCost) -> OcpProblem {
    let cost = CostSpec::new(vec![0.0], vec![0.0]).with_final_cost(final_cost);
    OcpProblem::new(
        ControlAffineSystem::integrator(),
        vec![y0],
        horizon,
        steps,
        cost,
    )
    .unwrap()
}

fn quick() -> SolverOptions {
    SolverOptions {
        restarts: 1,
        ..SolverOptions::default()
    }
}

#[test]
fn cost_vanishes_at_steady_pair() {
    let p = lq(0.0, 5.0, 50, FinalCost::None);
    assert_eq!(evaluate_cost(&p, &p.reference_control()).unwrap(), 0.0);
    let g = gradient(&p, &p.reference_control()).unwrap();
    assert!(g.values.iter().all(|v| *v == 0.0));
    assert!(!p.steady_warning());
}

#[test]
fn cost_of_free_unit_state() {
    let p = lq(1.0, 1.0, 20, FinalCost::None);
    assert!((evaluate_cost(&p, &p.reference_control()).unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn control_term_gradient() {
    let cost = CostSpec::new(vec![0.0], vec![0.0]).with_weights(0.0, 1.0);
    let p = OcpProblem::new(ControlAffineSystem::integrator(), vec![0.0], 2.0, 40, cost).unwrap();
    let c = 0.7;
    let g = gradient(&p, &ControlSignal::constant(2.0, 40, &[c]).unwrap()).unwrap();
    assert!(g
        .values
        .iter()
        .all(|v| (v - 2.0 * c * p.dt()).abs() < 1e-15));
}

#[test]
fn steady_warning_is_recorded() {
    let f0 = turnpike::dynamics::VectorField::new("f0", 1, 1, |y| vec![1.0 - y[0]]);
    let sys = ControlAffineSystem::affine(
        f0,
        vec![turnpike::dynamics::VectorField::constant("f1", vec![1.0])],
    )
    .unwrap();
    let p = OcpProblem::new(sys, vec![0.0], 1.0, 10, CostSpec::new(vec![0.0], vec![0.0])).unwrap();
    assert!(p.steady_warning());
    assert!((p.steady_residual() - 1.0).abs() < 1e-15);
}

#[test]
fn missing_derivative_names_the_field() {
    let f0 = turnpike::dynamics::VectorField::new("opaque", 1, 1, |y| vec![-y[0]]);
    let sys = ControlAffineSystem::affine(
        f0,
        vec![turnpike::dynamics::VectorField::constant("f1", vec![1.0])],
    )
    .unwrap();
    let p = OcpProblem::new(sys, vec![1.0], 1.0, 10, CostSpec::new(vec![0.0], vec![0.0])).unwrap();
    match gradient(&p, &p.reference_control()) {
        Err(Error::MissingDerivative { field }) => assert_eq!(field, "opaque"),
        other => panic!("expected missing derivative, got {other:?}"),
    }
}

#[test]
fn invalid_problems_are_rejected() {
    let sys = ControlAffineSystem::integrator();
    let cost = CostSpec::new(vec![0.0], vec![0.0]);
    assert!(OcpProblem::new(sys.clone(), vec![0.0], -1.0, 10, cost.clone()).is_err());
    assert!(OcpProblem::new(sys.clone(), vec![0.0], 1.0, 0, cost.clone()).is_err());
    assert!(OcpProblem::new(sys.clone(), vec![0.0, 1.0], 1.0, 10, cost).is_err());
    let bad = CostSpec::new(vec![0.0], vec![0.0]).with_final_cost(FinalCost::Quadratic {
        weight: -1.0,
        anchor: vec![0.0],
    });
    assert!(OcpProblem::new(sys, vec![0.0], 1.0, 10, bad).is_err());
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for i in 0..20 {
        let d = 1 + i % 4;
        let m = 1 + i % 3;
        let steps = rng.random_range(50..=200);
        let sys = common::random_tanh_system(&mut rng, d, m);
        let cost = CostSpec::new(common::random_vec(&mut rng, d, 0.5), vec![0.0; m])
            .with_final_cost(FinalCost::Quadratic {
                weight: 1.5,
                anchor: common::random_vec(&mut rng, d, 1.0),
            })
            .with_h1_weight(if i % 2 == 0 { 0.1 } else { 0.0 });
        let p =
            OcpProblem::new(sys, common::random_vec(&mut rng, d, 1.0), 2.0, steps, cost).unwrap();
        let u = common::random_control(&mut rng, 2.0, steps, m, 0.5);
        let err = common::gradient_fd_error(&p, &u, &mut rng);
        assert!(err <= 1e-6, "instance {i}: relative error {err:e}");
    }
}

#[test]
fn neural_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kind in [NeuralKind::Inside, NeuralKind::Outside] {
        let sys = make_neural_system(kind, Activation::Tanh, 2).unwrap();
        let m = sys.m();
        let p = OcpProblem::new(
            sys,
            vec![0.4, -0.8],
            3.0,
            60,
            CostSpec::new(vec![0.0; 2], vec![0.0; m]),
        )
        .unwrap();
        let u = common::random_control(&mut rng, 3.0, 60, m, 0.5);
        assert!(common::gradient_fd_error(&p, &u, &mut rng) <= 1e-6);
    }
}

#[test]
fn trivial_problem_solves_to_zero() {
    let p = lq(0.0, 5.0, 50, FinalCost::None);
    let s = solve(&p, &SolverOptions::default()).unwrap();
    assert!(s.cost_value <= 1e-8);
    assert!(s.converged);
}

#[test]
fn lq_value_matches_riccati() {
    // The left-rectangle rule biases the discrete value by about Δt/2.
    let p = lq(1.0, 10.0, 2000, FinalCost::None);
    let s = solve(&p, &quick()).unwrap();
    // P = 1 for q = r = 1; finite horizon correction tanh(10) is negligible.
    assert!((s.cost_value - 1.0).abs() < 5e-3, "J = {}", s.cost_value);
    let p = lq(1.0, 10.0, 500, FinalCost::None);
    let s = solve(&p, &quick()).unwrap();
    let (oracle, _) = common::linear_qp_oracle(&p.system, &[1.0], 10.0, 500, 0.0, &[0.0]);
    assert!(
        ((s.cost_value - oracle) / oracle).abs() < 1e-6,
        "{} vs {oracle}",
        s.cost_value
    );
    let direct = evaluate_cost(&p, &s.control).unwrap();
    assert!((direct - s.cost_value).abs() <= 1e-12 * direct);
}

#[test]
fn lq_interior_rate_is_one() {
    use turnpike::diagnostics::{Thresholds, TurnpikeReport};
    let p = lq(1.0, 10.0, 1000, FinalCost::None);
    let s = solve(&p, &quick()).unwrap();
    let report = TurnpikeReport::analyze(&p, &s, &Thresholds::for_steering_time(1.0)).unwrap();
    let mu = report.fits["stabilization"].mu;
    assert!((mu - 1.0).abs() <= 0.1, "mu = {mu}");
}

#[test]
fn two_dimensional_lq_matches_dense_qp() {
    let sys = ControlAffineSystem::linear(DMatrix::zeros(2, 2), DMatrix::identity(2, 2)).unwrap();
    let (oracle, _) = common::linear_qp_oracle(&sys, &[1.0, -1.0], 4.0, 80, 0.0, &[0.0, 0.0]);
    let p = OcpProblem::new(
        sys,
        vec![1.0, -1.0],
        4.0,
        80,
        CostSpec::new(vec![0.0; 2], vec![0.0; 2]),
    )
    .unwrap();
    let s = solve(&p, &quick()).unwrap();
    assert!(
        ((s.cost_value - oracle) / oracle).abs() <= 1e-4,
        "{} vs {oracle}",
        s.cost_value
    );
}

#[test]
fn descent_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sys = common::random_tanh_system(&mut rng, 3, 2);
    let p = OcpProblem::new(
        sys,
        vec![1.0, -0.5, 0.3],
        4.0,
        200,
        CostSpec::new(vec![0.0; 3], vec![0.0; 2]),
    )
    .unwrap();
    let s = solve(
        &p,
        &SolverOptions {
            restarts: 3,
            ..SolverOptions::default()
        },
    )
    .unwrap();
    assert!(s.history.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(s.restarts_used, 3);
}

#[test]
fn solve_is_deterministic_given_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sys = common::random_tanh_system(&mut rng, 2, 2);
    let p = OcpProblem::new(
        sys,
        vec![0.5, 0.5],
        3.0,
        100,
        CostSpec::new(vec![0.0; 2], vec![0.0; 2]),
    )
    .unwrap();
    let opts = SolverOptions {
        restarts: 3,
        seed: 17,
        ..SolverOptions::default()
    };
    let a = solve(&p, &opts).unwrap();
    let b = solve(&p, &opts).unwrap();
    assert_eq!(a.control, b.control);
    assert_eq!(a.cost_value.to_bits(), b.cost_value.to_bits());
}

#[test]
fn optimum_beats_quasi_turnpike_control() {
    let p = lq(1.0, 10.0, 1000, FinalCost::None);
    let aux = build_quasi_turnpike(
        &p.system,
        &[1.0],
        &[0.0],
        &[0.0],
        1.0,
        10.0,
        1000,
        &EndpointOptions::default(),
    )
    .unwrap();
    let aux_cost = evaluate_cost(&p, &aux).unwrap();
    assert!((aux_cost - 4.0 / 3.0).abs() < 1e-2, "aux cost {aux_cost}");
    let s = solve(&p, &quick()).unwrap();
    assert!(s.cost_value <= aux_cost + 1e-9);
}

#[test]
fn fixed_endpoint_trivial_and_scalar_gramian() {
    let sys = ControlAffineSystem::integrator();
    let opts = EndpointOptions::default();
    let s = solve_fixed_endpoint(
        &sys,
        &[0.0],
        &[0.0],
        0.0,
        1.0,
        50,
        EndpointMode::ControlNormOnly,
        &opts,
    )
    .unwrap();
    assert_eq!(s.terminal_error, 0.0);
    assert_eq!(s.running_cost, 0.0);
    for (horizon, level) in [(1.0, 1.0), (2.0, 0.5)] {
        let s = solve_fixed_endpoint(
            &sys,
            &[0.0],
            &[1.0],
            0.0,
            horizon,
            100,
            EndpointMode::ControlNormOnly,
            &opts,
        )
        .unwrap();
        assert!(s.achieved);
        assert!(s.control.values().iter().all(|u| (u - level).abs() < 1e-5));
        assert!((s.control.l2_norm() - level * horizon.sqrt()).abs() < 1e-5);
        assert!(s.mismatch_history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn fixed_endpoint_full_tracking_reaches_target() {
    let sys = make_neural_system(NeuralKind::Outside, Activation::Tanh, 2).unwrap();
    let opts = EndpointOptions::default();
    let s = solve_fixed_endpoint(
        &sys,
        &[0.5, 0.2],
        &[-0.3, 0.4],
        1.0,
        3.0,
        100,
        EndpointMode::FullTracking,
        &opts,
    )
    .unwrap();
    assert!(s.achieved, "terminal error {}", s.terminal_error);
    assert!(s.mismatch_history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn penalty_schedule_must_increase() {
    let sys = ControlAffineSystem::integrator();
    let opts = EndpointOptions {
        schedule: vec![10.0, 5.0],
        ..EndpointOptions::default()
    };
    assert!(solve_fixed_endpoint(
        &sys,
        &[0.0],
        &[1.0],
        0.0,
        1.0,
        10,
        EndpointMode::ControlNormOnly,
        &opts
    )
    .is_err());
    assert!(solve_fixed_endpoint(
        &sys,
        &[0.0],
        &[1.0],
        1.0,
        1.0,
        10,
        EndpointMode::ControlNormOnly,
        &EndpointOptions::default()
    )
    .is_err());
}
