use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ControlAffineSystem, ControlSignal, Dynamics, BLOWUP_THRESHOLD};
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ForwardEuler,
    #[default]
    Rk4,
}

/// States at the `K + 1` nodes of a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dt: f64,
    dim: usize,
    states: Vec<f64>,
    scheme: Scheme,
}

impl Trajectory {
    pub(crate) fn with_capacity(dt: f64, dim: usize, nodes: usize, scheme: Scheme) -> Self {
        Self {
            dt,
            dim,
            states: Vec::with_capacity(dim * nodes),
            scheme,
        }
    }

    /// Wraps externally produced node states.
    pub fn from_states(dt: f64, dim: usize, states: Vec<f64>, scheme: Scheme) -> Result<Self> {
        if dim == 0 || !states.len().is_multiple_of(dim) || states.len() < dim {
            return Err(Error::InvalidInput(
                "state array does not match dimension".into(),
            ));
        }
        Ok(Self {
            dt,
            dim,
            states,
            scheme,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Number of nodes, `K + 1`.
    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks(self.dim)
    }

    /// Per-node distance to `target` in the Euclidean norm.
    pub fn distances_to(&self, target: &[f64]) -> Vec<f64> {
        self.iter().map(|y| super::distance(y, target)).collect()
    }

    /// CSV with columns `t, y_1, …, y_d`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("y_{i}")));
        w.write_record(&header)?;
        for (k, y) in self.iter().enumerate() {
            let mut row = vec![self.time(k).to_string()];
            row.extend(y.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub(crate) fn push(&mut self, y: &[f64]) {
        self.states.extend_from_slice(y);
    }
}

/// Scratch buffers for one-step maps and their adjoints.
pub struct StepWorkspace {
    k: [Vec<f64>; 4],
    z: [Vec<f64>; 4],
    kbar: [Vec<f64>; 4],
    gy: Vec<f64>,
    gu: Vec<f64>,
}

impl StepWorkspace {
    pub fn new(d: usize, m: usize) -> Self {
        let v = || vec![0.0; d];
        Self {
            k: [v(), v(), v(), v()],
            z: [v(), v(), v(), v()],
            kbar: [v(), v(), v(), v()],
            gy: v(),
            gu: vec![0.0; m],
        }
    }
}

/// One step of `scheme` with the control frozen at `u`.
pub(crate) fn step(
    f: &dyn Dynamics,
    scheme: Scheme,
    y: &[f64],
    u: &[f64],
    h: f64,
    ws: &mut StepWorkspace,
    out: &mut [f64],
) {
    match scheme {
        Scheme::ForwardEuler => {
            f.rhs(y, u, &mut ws.k[0]);
            for i in 0..y.len() {
                out[i] = y[i] + h * ws.k[0][i];
            }
        }
        Scheme::Rk4 => {
            rk4_stages(f, y, u, h, ws);
            let k = &ws.k;
            for i in 0..y.len() {
                out[i] = y[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            }
        }
    }
}

fn rk4_stages(f: &dyn Dynamics, y: &[f64], u: &[f64], h: f64, ws: &mut StepWorkspace) {
    let StepWorkspace { k, z, .. } = ws;
    z[0].copy_from_slice(y);
    f.rhs(&z[0], u, &mut k[0]);
    for (s, c) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
        for i in 0..y.len() {
            z[s][i] = y[i] + c * h * k[s - 1][i];
        }
        f.rhs(&z[s], u, &mut k[s]);
    }
}

/// Reverse-mode sweep through one step: given `λ_{k+1}`, writes
/// `λ_k = (∂Φ/∂y)ᵀλ_{k+1}` into `lam_out` and adds `(∂Φ/∂u)ᵀλ_{k+1}` to `gu_acc`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_adjoint(
    f: &dyn Dynamics,
    scheme: Scheme,
    y: &[f64],
    u: &[f64],
    h: f64,
    lam_next: &[f64],
    ws: &mut StepWorkspace,
    lam_out: &mut [f64],
    gu_acc: &mut [f64],
) {
    let d = y.len();
    match scheme {
        Scheme::ForwardEuler => {
            let hl: Vec<f64> = lam_next.iter().map(|l| h * l).collect();
            f.vjp(y, u, &hl, &mut ws.gy, &mut ws.gu);
            for i in 0..d {
                lam_out[i] = lam_next[i] + ws.gy[i];
            }
            gu_acc.iter_mut().zip(&ws.gu).for_each(|(a, g)| *a += g);
        }
        Scheme::Rk4 => {
            rk4_stages(f, y, u, h, ws);
            let weights = [h / 6.0, h / 3.0, h / 3.0, h / 6.0];
            for s in 0..4 {
                for i in 0..d {
                    ws.kbar[s][i] = weights[s] * lam_next[i];
                }
            }
            lam_out.copy_from_slice(lam_next);
            let coeff = [0.0, 0.5 * h, 0.5 * h, h];
            for s in (0..4).rev() {
                f.vjp(&ws.z[s], u, &ws.kbar[s], &mut ws.gy, &mut ws.gu);
                for i in 0..d {
                    lam_out[i] += ws.gy[i];
                }
                if s > 0 {
                    for i in 0..d {
                        ws.kbar[s - 1][i] += coeff[s] * ws.gy[i];
                    }
                }
                gu_acc.iter_mut().zip(&ws.gu).for_each(|(a, g)| *a += g);
            }
        }
    }
}

/// Integrates `system` from `y0` under `control` on the control's grid.
pub fn integrate(
    system: &ControlAffineSystem,
    y0: &[f64],
    control: &ControlSignal,
    scheme: Scheme,
) -> Result<Trajectory> {
    check_dim("initial state", system.d(), y0.len())?;
    check_dim("control channels", system.m(), control.channels())?;
    let (d, m) = (system.d(), system.m());
    let h = control.dt();
    let mut traj = Trajectory::with_capacity(h, d, control.steps() + 1, scheme);
    traj.push(y0);
    let mut ws = StepWorkspace::new(d, m);
    let mut next = vec![0.0; d];
    let mut current = y0.to_vec();
    for k in 0..control.steps() {
        step(
            system.dynamics(),
            scheme,
            &current,
            control.at(k),
            h,
            &mut ws,
            &mut next,
        );
        if let Some(bad) = next
            .iter()
            .find(|v| !v.is_finite() || v.abs() > BLOWUP_THRESHOLD)
        {
            return Err(Error::IntegrationFailure {
                step: k,
                reason: format!("state entry {bad} is non-finite or exceeds {BLOWUP_THRESHOLD:e}"),
            });
        }
        traj.push(&next);
        std::mem::swap(&mut current, &mut next);
    }
    Ok(traj)
}
