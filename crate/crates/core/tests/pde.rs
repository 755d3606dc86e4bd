mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turnpike::dynamics::{ControlSignal, Scheme};
use turnpike::ocp::{evaluate_cost, FinalCost, OcpProblem};
use turnpike::pde::{
    self, h10_norm, l2_norm, solve_steady, steady_residual, Field, Grid1D, PdeKind, PdeSystem,
    ScalarNonlinearity,
};

fn grid(n: usize) -> Grid1D {
    Grid1D::new(1.0, n, 0.3, 0.7).unwrap()
}

#[test]
fn grid_validation() {
    assert!(Grid1D::new(0.0, 10, 0.1, 0.2).is_err());
    assert!(Grid1D::new(1.0, 0, 0.1, 0.2).is_err());
    assert!(Grid1D::new(1.0, 10, 0.5, 0.4).is_err());
    assert!(Grid1D::new(1.0, 10, 0.5, 1.5).is_err());
    // No node strictly inside (0.50, 0.52) at h = 1/11.
    assert!(Grid1D::new(1.0, 10, 0.50, 0.52).is_err());
    let g = Grid1D::new(1.0, 9, 0.25, 0.65).unwrap();
    assert_eq!(g.h(), 0.1);
    assert_eq!(g.omega(), &[2, 3, 4, 5]);
}

#[test]
fn wave_min_time_examples() {
    assert_eq!(
        pde::wave_min_time(&Grid1D::new(1.0, 20, 0.0, 1.0).unwrap()),
        0.0
    );
    assert!((pde::wave_min_time(&Grid1D::new(1.0, 20, 0.8, 1.0).unwrap()) - 1.6).abs() < 1e-15);
    assert!((pde::wave_min_time(&Grid1D::new(1.0, 20, 0.4, 0.6).unwrap()) - 0.8).abs() < 1e-15);
}

#[test]
fn norms_of_simple_fields() {
    let g = grid(63);
    let one = Field::from_fn(&g, |_| 1.0);
    assert!((one.l2().powi(2) - (1.0 - g.h())).abs() < 1e-12);
    // Only the two boundary jumps contribute.
    assert!((one.h10().powi(2) - 2.0 / g.h()).abs() < 1e-9);
    let mode = g.first_mode();
    assert!((mode.l2() - 1.0).abs() < 1e-12);
    assert!((mode.h10().powi(2) - g.lambda1()).abs() < 1e-9);
}

#[test]
fn heat_first_mode_decays_at_lambda1() {
    let g = grid(64);
    let heat = PdeSystem::new(
        PdeKind::Heat,
        g.clone(),
        ScalarNonlinearity::Zero,
        vec![0.0; g.omega().len()],
    )
    .unwrap();
    let sys = pde::semidiscretize(&heat);
    let steps = pde::heat_steps(&g, ScalarNonlinearity::Zero, 1.0, Scheme::Rk4);
    let u = ControlSignal::zeros(1.0, steps, g.omega().len()).unwrap();
    let traj = sys
        .integrate(&g.first_mode().values, &u, Scheme::Rk4)
        .unwrap();
    let rate = -(l2_norm(g.h(), traj.final_state())).ln();
    assert!(
        (rate / g.lambda1() - 1.0).abs() < 0.01,
        "rate {rate} vs {}",
        g.lambda1()
    );
}

#[test]
fn linear_wave_conserves_energy() {
    let g = Grid1D::new(1.0, 64, 0.7, 1.0).unwrap();
    let wave = PdeSystem::new(
        PdeKind::Wave,
        g.clone(),
        ScalarNonlinearity::Zero,
        vec![0.0; g.omega().len()],
    )
    .unwrap();
    let sys = pde::semidiscretize(&wave);
    let steps = pde::wave_steps(&g, 10.0);
    assert!(10.0 / steps as f64 <= 0.5 * g.h());
    let u = ControlSignal::zeros(10.0, steps, g.omega().len()).unwrap();
    let y0 = wave.state_from(&g.first_mode());
    let traj = sys.integrate(&y0, &u, Scheme::Rk4).unwrap();
    let e0 = pde::wave_energy(&g, &y0);
    let drift = traj
        .iter()
        .map(|s| (pde::wave_energy(&g, s) - e0).abs() / e0)
        .fold(0.0, f64::max);
    assert!(drift <= 1e-6, "relative energy drift {drift:e}");
}

#[test]
fn steady_pair_is_stationary() {
    for kind in [PdeKind::Heat, PdeKind::Wave] {
        let g = grid(32);
        let m = g.omega().len();
        let p = PdeSystem::new(kind, g.clone(), ScalarNonlinearity::Tanh, vec![5.0; m]).unwrap();
        let sys = pde::semidiscretize(&p);
        let steps = match kind {
            PdeKind::Heat => pde::heat_steps(&g, p.nonlinearity, 2.0, Scheme::Rk4),
            PdeKind::Wave => pde::wave_steps(&g, 2.0),
        };
        let u = ControlSignal::constant(2.0, steps, &p.u_bar).unwrap();
        let steady = p.steady_state();
        let traj = sys.integrate(&steady, &u, Scheme::Rk4).unwrap();
        let drift = traj
            .iter()
            .flat_map(|s| s.iter().zip(&steady).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        assert!(drift <= 1e-8, "{kind:?}: drift {drift:e}");
    }
}

#[test]
fn steady_solve_examples() {
    let g = grid(64);
    let m = g.omega().len();
    let zero = solve_steady(&g, ScalarNonlinearity::Tanh, &vec![0.0; m]).unwrap();
    assert!(zero.values.iter().all(|v| *v == 0.0));

    // Linear oracle: tridiagonal −Δ_h assembled densely.
    let n = g.n_interior();
    let h2 = g.h() * g.h();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = 2.0 / h2;
        if i > 0 {
            a[(i, i - 1)] = -1.0 / h2;
        }
        if i + 1 < n {
            a[(i, i + 1)] = -1.0 / h2;
        }
    }
    let mut rhs = DVector::zeros(n);
    for &i in g.omega() {
        rhs[i] = 1.0;
    }
    let oracle = a.lu().solve(&rhs).unwrap();
    let linear = solve_steady(&g, ScalarNonlinearity::Zero, &vec![1.0; m]).unwrap();
    let err = linear
        .values
        .iter()
        .zip(oracle.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-12, "max difference {err:e}");

    let tanh = solve_steady(&g, ScalarNonlinearity::Tanh, &vec![5.0; m]).unwrap();
    assert!(
        steady_residual(&g, ScalarNonlinearity::Tanh, &vec![5.0; m], &tanh.values).unwrap()
            <= 1e-10
    );
    assert!(g.omega().iter().all(|&i| tanh.values[i] > 0.0));
}

#[test]
fn with_steady_checks_the_pair() {
    let g = grid(16);
    let m = g.omega().len();
    let bad = Field::from_fn(&g, |_| 1.0);
    assert!(PdeSystem::with_steady(
        PdeKind::Heat,
        g.clone(),
        ScalarNonlinearity::Tanh,
        vec![0.0; m],
        bad
    )
    .is_err());
    let good = solve_steady(&g, ScalarNonlinearity::Tanh, &vec![2.0; m]).unwrap();
    assert!(PdeSystem::with_steady(
        PdeKind::Heat,
        g,
        ScalarNonlinearity::Tanh,
        vec![2.0; m],
        good
    )
    .is_ok());
}

#[test]
fn cost_spec_vanishes_at_steady_pair_and_measures_constants() {
    let g = grid(32);
    let m = g.omega().len();
    for kind in [PdeKind::Heat, PdeKind::Wave] {
        let p = PdeSystem::new(kind, g.clone(), ScalarNonlinearity::Tanh, vec![3.0; m]).unwrap();
        let cost = pde::pde_cost_spec(&p, FinalCost::None);
        let steps = match kind {
            PdeKind::Heat => pde::heat_steps(&g, p.nonlinearity, 0.1, Scheme::Rk4),
            PdeKind::Wave => pde::wave_steps(&g, 0.1),
        };
        let problem = OcpProblem::new(
            pde::semidiscretize(&p),
            p.steady_state(),
            0.1,
            steps,
            cost.clone(),
        )
        .unwrap();
        let j = evaluate_cost(&problem, &problem.reference_control()).unwrap();
        assert!(j <= 1e-16, "{kind:?}: J = {j:e}");
    }
    let p = PdeSystem::new(
        PdeKind::Heat,
        g.clone(),
        ScalarNonlinearity::Zero,
        vec![0.0; m],
    )
    .unwrap();
    let cost = pde::pde_cost_spec(&p, FinalCost::None);
    let shifted: Vec<f64> = p.y_bar.values.iter().map(|v| v + 1.0).collect();
    assert!((cost.state_term(&shifted) - g.length()).abs() <= g.h() + 1e-12);
}

#[test]
fn wave_gradient_matches_finite_differences() {
    let g = Grid1D::new(1.0, 24, 0.7, 1.0).unwrap();
    let m = g.omega().len();
    let wave = PdeSystem::new(
        PdeKind::Wave,
        g.clone(),
        ScalarNonlinearity::Linear(0.5),
        vec![0.0; m],
    )
    .unwrap();
    let anchor = wave.state_from(&Field::from_fn(&g, |x| (std::f64::consts::PI * x).sin()));
    let cost = pde::pde_cost_spec(
        &wave,
        FinalCost::Quadratic {
            weight: 3.0,
            anchor,
        },
    );
    let steps = pde::wave_steps(&g, 1.0);
    let y0 = wave.state_from(&Field::from_fn(&g, |x| x * (1.0 - x)));
    let problem = OcpProblem::new(pde::semidiscretize(&wave), y0, 1.0, steps, cost).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let u = common::random_control(&mut rng, 1.0, steps, m, 1.0);
    let err = common::gradient_fd_error(&problem, &u, &mut rng);
    assert!(err <= 1e-6, "relative error {err:e}");
}

#[test]
fn deviation_form_matches_plain_form() {
    let g = grid(32);
    let m = g.omega().len();
    let heat = PdeSystem::new(
        PdeKind::Heat,
        g.clone(),
        ScalarNonlinearity::Tanh,
        vec![5.0; m],
    )
    .unwrap();
    let steps = pde::heat_steps(&g, heat.nonlinearity, 0.5, Scheme::Rk4);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let du = common::random_control(&mut rng, 0.5, steps, m, 1.0);
    let u = du
        .with_values(
            du.values()
                .iter()
                .enumerate()
                .map(|(i, v)| v + heat.u_bar[i % m])
                .collect(),
        )
        .unwrap();
    let y0: Vec<f64> = (0..g.n_interior())
        .map(|i| (i as f64 * 0.3).sin())
        .collect();
    let dy0: Vec<f64> = y0
        .iter()
        .zip(&heat.y_bar.values)
        .map(|(a, b)| a - b)
        .collect();
    let plain = pde::semidiscretize(&heat)
        .integrate(&y0, &u, Scheme::Rk4)
        .unwrap();
    let dev = pde::semidiscretize_deviation(&heat)
        .integrate(&dy0, &du, Scheme::Rk4)
        .unwrap();
    let gap = plain
        .final_state()
        .iter()
        .zip(dev.final_state())
        .zip(&heat.y_bar.values)
        .map(|((p, d), s)| (p - d - s).abs())
        .fold(0.0, f64::max);
    assert!(gap <= 1e-10, "gap {gap:e}");
}

#[test]
fn csv_layouts() {
    let g = grid(7);
    let mut out = Vec::new();
    g.first_mode().write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next(), Some("x,value"));
    assert_eq!(text.lines().count(), 8);

    let heat = PdeSystem::new(
        PdeKind::Heat,
        g.clone(),
        ScalarNonlinearity::Zero,
        vec![0.0; g.omega().len()],
    )
    .unwrap();
    let u = ControlSignal::zeros(0.1, 5, g.omega().len()).unwrap();
    let traj = pde::semidiscretize(&heat)
        .integrate(&g.first_mode().values, &u, Scheme::Rk4)
        .unwrap();
    let mut out = Vec::new();
    pde::write_space_time_csv(&g, &traj, None, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 8);
    assert_eq!(header[0], "t");
    assert_eq!(header[1].parse::<f64>().unwrap(), g.x(0));
    assert_eq!(text.lines().count(), 7);
}

/// Duhamel-type ratio for the semilinear heat equation: the constant is
/// fitted on half of the random samples and checked with a 1.5 margin on
/// the rest.
#[test]
fn heat_gronwall_ratio_is_bounded() {
    let g = grid(24);
    let m = g.omega().len();
    let heat = PdeSystem::new(
        PdeKind::Heat,
        g.clone(),
        ScalarNonlinearity::Tanh,
        vec![2.0; m],
    )
    .unwrap();
    let sys = pde::semidiscretize(&heat);
    let horizon = 1.0;
    let steps = pde::heat_steps(&g, heat.nonlinearity, horizon, Scheme::Rk4);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let ratios: Vec<f64> = (0..60)
        .map(|_| {
            let scale = rng.random_range(0.0..3.0);
            let du = common::random_control(&mut rng, horizon, steps, m, scale);
            let u = du
                .with_values(du.values().iter().map(|v| v + 2.0).collect())
                .unwrap();
            let amp = rng.random_range(0.1..2.0);
            let y0: Vec<f64> = heat
                .y_bar
                .values
                .iter()
                .zip(common::random_vec(&mut rng, g.n_interior(), amp))
                .map(|(a, b)| a + b)
                .collect();
            let traj = sys.integrate(&y0, &u, Scheme::Rk4).unwrap();
            let dist = |s: &[f64]| heat.distance(s, &heat.y_bar.values);
            let sup = traj.iter().map(dist).fold(0.0, f64::max);
            let l2y = (traj
                .iter()
                .take(steps)
                .map(|s| dist(s).powi(2))
                .sum::<f64>()
                * u.dt())
            .sqrt();
            let l2u = (du.values().iter().map(|v| v * v).sum::<f64>() * g.h() * du.dt()).sqrt();
            sup / (dist(&y0) + l2u + l2y)
        })
        .collect();
    let (fit, check) = ratios.split_at(30);
    let bound = fit.iter().copied().fold(0.0, f64::max);
    assert!(check.iter().all(|r| *r <= 1.5 * bound));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn discrete_poincare(values in proptest::collection::vec(-10.0f64..10.0, 1..80)) {
        let n = values.len();
        let g = Grid1D::new(1.0, n, 0.0, 1.0).unwrap();
        let h = g.h();
        prop_assert!(h10_norm(h, &values) + 1e-12 >= g.lambda1().sqrt() * l2_norm(h, &values));
    }

    #[test]
    fn free_heat_contracts(seed in 0u64..1000) {
        let g = grid(20);
        let heat = PdeSystem::new(PdeKind::Heat, g.clone(), ScalarNonlinearity::Zero, vec![0.0; g.omega().len()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y0 = common::random_vec(&mut rng, g.n_interior(), 1.0);
        let steps = pde::heat_steps(&g, ScalarNonlinearity::Zero, 0.2, Scheme::Rk4);
        let u = ControlSignal::zeros(0.2, steps, g.omega().len()).unwrap();
        let traj = pde::semidiscretize(&heat).integrate(&y0, &u, Scheme::Rk4).unwrap();
        let norms: Vec<f64> = traj.iter().map(|s| l2_norm(g.h(), s)).collect();
        prop_assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14)));
    }
}
