#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use turnpike::dynamics::{ControlAffineSystem, ControlSignal, Scheme, VectorField};
use turnpike::ocp::{evaluate_cost, gradient, OcpProblem};

/// `x ↦ M tanh(x) + c` with its Jacobian.
pub fn tanh_field(name: &str, m: DMatrix<f64>, c: Vec<f64>) -> VectorField {
    let d = m.nrows();
    let me = m.clone();
    VectorField::new(name, d, d, move |y| {
        let t = DVector::from_iterator(d, y.iter().map(|v| v.tanh()));
        (&me * t).iter().zip(&c).map(|(a, b)| a + b).collect()
    })
    .with_derivative(move |y| {
        let s = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            y.iter().map(|v| 1.0 - v.tanh().powi(2)),
        ));
        &m * s
    })
}

pub fn random_matrix(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * rng.random_range(-1.0..1.0))
}

pub fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.random_range(-1.0..1.0))
        .collect()
}

/// Random control-affine system with `tanh` fields and `f0(0) = 0`.
pub fn random_tanh_system(rng: &mut impl Rng, d: usize, m: usize) -> ControlAffineSystem {
    let f0 = tanh_field("f0", random_matrix(rng, d, d, 1.0), vec![0.0; d]);
    let controls = (0..m)
        .map(|j| {
            let c = random_vec(rng, d, 1.0);
            tanh_field(&format!("f{}", j + 1), random_matrix(rng, d, d, 0.5), c)
        })
        .collect();
    ControlAffineSystem::affine(f0, controls).unwrap()
}

pub fn random_control(
    rng: &mut impl Rng,
    horizon: f64,
    steps: usize,
    m: usize,
    scale: f64,
) -> ControlSignal {
    ControlSignal::new(horizon, steps, m, random_vec(rng, steps * m, scale)).unwrap()
}

/// Relative error between the adjoint directional derivative and a central
/// difference along a random direction.
pub fn gradient_fd_error(problem: &OcpProblem, control: &ControlSignal, rng: &mut impl Rng) -> f64 {
    let g = gradient(problem, control).unwrap();
    let dir = random_vec(rng, control.values().len(), 1.0);
    let analytic: f64 = g.values.iter().zip(&dir).map(|(a, b)| a * b).sum();
    let eps = 1e-5;
    let shifted = |s: f64| {
        let v = control
            .values()
            .iter()
            .zip(&dir)
            .map(|(u, d)| u + s * d)
            .collect();
        evaluate_cost(problem, &control.with_values(v).unwrap()).unwrap()
    };
    let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-12)
}

/// Affine map `u ↦ (y_1, …, y_K)` of a linear system on the grid, read off by
/// integrating unit controls: returns `(free, columns)` with
/// `y = free + columns · u`, states stacked node by node.
fn affine_response(
    system: &ControlAffineSystem,
    y0: &[f64],
    horizon: f64,
    steps: usize,
    scheme: Scheme,
) -> (DVector<f64>, DMatrix<f64>) {
    let (d, m) = (system.d(), system.m());
    let stack = |u: &ControlSignal| {
        let traj = system.integrate(y0, u, scheme).unwrap();
        DVector::from_column_slice(traj.states())
    };
    let free = stack(&ControlSignal::zeros(horizon, steps, m).unwrap());
    let zero_start = vec![0.0; d];
    let mut cols = DMatrix::zeros((steps + 1) * d, steps * m);
    for j in 0..steps * m {
        let mut values = vec![0.0; steps * m];
        values[j] = 1.0;
        let u = ControlSignal::new(horizon, steps, m, values).unwrap();
        let traj = system.integrate(&zero_start, &u, scheme).unwrap();
        cols.set_column(j, &DVector::from_column_slice(traj.states()));
    }
    (free, cols)
}

/// Minimum of the discrete functional
/// `Σ_{k<K}(q‖y_k‖² + r‖u_k‖²)Δt + (λ/2)‖y_K − z‖²` for a linear system with
/// zero targets, by a dense normal-equation solve.
pub fn linear_qp_oracle(
    system: &ControlAffineSystem,
    y0: &[f64],
    horizon: f64,
    steps: usize,
    final_weight: f64,
    anchor: &[f64],
) -> (f64, Vec<f64>) {
    let (d, m) = (system.d(), system.m());
    let dt = horizon / steps as f64;
    let (free, cols) = affine_response(system, y0, horizon, steps, Scheme::Rk4);
    let n = steps * m;
    let mut h = DMatrix::identity(n, n) * (2.0 * dt);
    let mut rhs = DVector::zeros(n);
    for k in 0..=steps {
        let rows = cols.rows(k * d, d);
        let f = free.rows(k * d, d);
        let (w, target) = if k < steps {
            (2.0 * dt, DVector::zeros(d))
        } else {
            (final_weight, DVector::from_column_slice(anchor))
        };
        h += rows.transpose() * rows * w;
        rhs -= rows.transpose() * (f - target) * w;
    }
    let u = h.cholesky().expect("positive definite").solve(&rhs);
    let y = &free + &cols * &u;
    let mut cost = 0.0;
    for k in 0..steps {
        cost += y.rows(k * d, d).norm_squared() * dt + u.rows(k * m, m).norm_squared() * dt;
    }
    let yk = y.rows(steps * d, d) - DVector::from_column_slice(anchor);
    cost += 0.5 * final_weight * yk.norm_squared();
    (cost, u.as_slice().to_vec())
}
