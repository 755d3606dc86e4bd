use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cost_of, gradient_along, OcpProblem};
use crate::dynamics::{ControlSignal, Trajectory};
use crate::error::{Error, Result};

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const LBFGS_MEMORY: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop once the `L²` gradient norm falls below this value.
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Standard deviation of the random initial perturbation around `ū`.
    pub init_scale: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tolerance: 1e-6,
            restarts: 5,
            seed: 0,
            init_scale: 0.1,
        }
    }
}

/// Outcome of a direct-transcription solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Solution {
    pub control: ControlSignal,
    pub trajectory: Trajectory,
    pub cost_value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub converged: bool,
    /// Accepted cost values, starting with the initial guess.
    pub history: Vec<f64>,
}

/// Multi-start gradient descent with Armijo backtracking.
///
/// Restart 0 starts from `u ≡ ū`; restart `r ≥ 1` from `ū` plus a seeded
/// Gaussian perturbation of scale `init_scale`. The best local solution is
/// returned.
pub fn solve(problem: &OcpProblem, opts: &SolverOptions) -> Result<Solution> {
    if !(opts.tolerance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "solver tolerance must be positive, got {}",
            opts.tolerance
        )));
    }
    problem.system.dynamics().check_differentiable()?;
    let restarts = opts.restarts.max(1);
    let runs: Vec<Result<Solution>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let init = initial_guess(problem, opts, r);
            solve_from(problem, init, opts)
        })
        .collect();
    let mut best: Option<Solution> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(sol) => {
                if best.as_ref().is_none_or(|b| sol.cost_value < b.cost_value) {
                    best = Some(sol);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some(mut sol) => {
            sol.restarts_used = restarts;
            Ok(sol)
        }
        None => Err(first_err.expect("at least one restart ran")),
    }
}

fn initial_guess(problem: &OcpProblem, opts: &SolverOptions, restart: usize) -> ControlSignal {
    let mut init = problem.reference_control();
    if restart > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(
            opts.seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        for v in init.values_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += opts.init_scale * z;
        }
    }
    init
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two-loop recursion: `−H r` for the stored pairs `(s, y, 1/⟨s, y⟩)`.
fn lbfgs_direction(r: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = r.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * inner(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = inner(s, y) / inner(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * inner(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Single descent run from `init`.
///
/// Directions come from a limited-memory BFGS recursion in the `L²` inner
/// product (steepest descent when the recursion fails to give descent);
/// steps are accepted by Armijo backtracking, so costs never increase.
pub fn solve_from(
    problem: &OcpProblem,
    init: ControlSignal,
    opts: &SolverOptions,
) -> Result<Solution> {
    problem.check_control(&init)?;
    problem.system.dynamics().check_differentiable()?;
    let dt = problem.dt();
    let mut u = init;
    let mut traj = problem.integrate(&u)?;
    let mut cost = cost_of(&problem.cost, &traj, &u);
    // Riesz representative of the gradient in the L² inner product.
    let riesz = |u: &ControlSignal, traj: &Trajectory| -> Vec<f64> {
        let mut g = gradient_along(problem, u, traj).values;
        g.iter_mut().for_each(|v| *v /= dt);
        g
    };
    let mut r = riesz(&u, &traj);
    let mut gnorm = (inner(&r, &r) * dt).sqrt();
    let mut history = vec![cost];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = gnorm <= opts.tolerance;
    let mut trial = u.values().to_vec();

    while !converged && iterations < opts.max_iters {
        let mut dir = lbfgs_direction(&r, &memory);
        let mut slope = inner(&r, &dir);
        if !(slope < 0.0) {
            memory.clear();
            dir = r.iter().map(|g| -g).collect();
            slope = -inner(&r, &r);
        }
        let mut alpha = if memory.is_empty() {
            (1.0 / gnorm).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            for ((t, v), d) in trial.iter_mut().zip(u.values()).zip(&dir) {
                *t = v + alpha * d;
            }
            let candidate = u.with_values(trial.clone())?;
            if let Ok(tr) = problem.integrate(&candidate) {
                let c = cost_of(&problem.cost, &tr, &candidate);
                if c <= cost + ARMIJO_C * alpha * slope * dt {
                    accepted = Some((candidate, tr, c));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((candidate, tr, c)) = accepted else {
            break;
        };
        if c >= cost {
            // Cost is at roundoff level; further steps cannot make progress.
            break;
        }
        let r_new = riesz(&candidate, &tr);
        let step: Vec<f64> = candidate
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| a - b)
            .collect();
        let change: Vec<f64> = r_new.iter().zip(&r).map(|(a, b)| a - b).collect();
        let sy = inner(&step, &change);
        if sy > 1e-12 * inner(&step, &step).sqrt() * inner(&change, &change).sqrt() {
            if memory.len() == LBFGS_MEMORY {
                memory.pop_front();
            }
            memory.push_back((step, change, 1.0 / sy));
        }
        u = candidate;
        traj = tr;
        cost = c;
        r = r_new;
        gnorm = (inner(&r, &r) * dt).sqrt();
        history.push(cost);
        iterations += 1;
        converged = gnorm <= opts.tolerance;
    }

    Ok(Solution {
        control: u,
        trajectory: traj,
        cost_value: cost,
        grad_norm: gnorm,
        iterations,
        restarts_used: 1,
        converged,
        history,
    })
}
