//! Controlled dynamical systems `ẏ = f(y, u)` and deterministic fixed-step
//! integration.
//!
//! Every system is backed by a [`Dynamics`] kernel that evaluates the
//! right-hand side and its vector–Jacobian products. Kernels exist for
//! user-supplied [`VectorField`]s, linear systems, neural ODEs and (in
//! [`crate::pde`]) method-of-lines discretizations.

mod field;
mod integrator;
mod neural;
mod signal;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use field::{Evaluator, JacobianFn, VectorField};
pub(crate) use integrator::step_adjoint;
pub use integrator::{integrate, Scheme, StepWorkspace, Trajectory};
pub use neural::{Activation, NeuralKind, NeuralOde};
pub use signal::ControlSignal;

use crate::error::{check_dim, Error, Result};

/// Entries beyond this magnitude abort integration.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Right-hand side kernel of a controlled system.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;

    /// Writes `f(y, u)` into `out`.
    fn rhs(&self, y: &[f64], u: &[f64], out: &mut [f64]);

    /// Writes `(∂f/∂y)ᵀλ` into `gy` and `(∂f/∂u)ᵀλ` into `gu`.
    fn vjp(&self, y: &[f64], u: &[f64], lambda: &[f64], gy: &mut [f64], gu: &mut [f64]);

    /// Fails with the name of the first field lacking a derivative.
    fn check_differentiable(&self) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemForm {
    Affine,
    Driftless,
    NeuralInside,
    NeuralOutside,
    General,
}

impl SystemForm {
    pub fn is_driftless(self) -> bool {
        matches!(self, Self::Driftless | Self::NeuralOutside)
    }

    pub fn is_control_affine(self) -> bool {
        !matches!(self, Self::NeuralInside | Self::General)
    }
}

/// A controlled system with its structural tag.
#[derive(Clone)]
pub struct ControlAffineSystem {
    form: SystemForm,
    label: String,
    kernel: Arc<dyn Dynamics>,
}

impl std::fmt::Debug for ControlAffineSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlAffineSystem")
            .field("label", &self.label)
            .field("form", &self.form)
            .field("d", &self.d())
            .field("m", &self.m())
            .finish()
    }
}

impl ControlAffineSystem {
    pub fn from_dynamics(
        label: impl Into<String>,
        form: SystemForm,
        kernel: Arc<dyn Dynamics>,
    ) -> Self {
        Self {
            form,
            label: label.into(),
            kernel,
        }
    }

    /// `ẏ = f0(y) + Σ_j u_j f_j(y)`.
    pub fn affine(f0: VectorField, controls: Vec<VectorField>) -> Result<Self> {
        let kernel = FieldSystem::new(Some(f0), controls)?;
        Ok(Self::from_dynamics(
            "affine",
            SystemForm::Affine,
            Arc::new(kernel),
        ))
    }

    /// `ẏ = Σ_j u_j f_j(y)`.
    pub fn driftless(controls: Vec<VectorField>) -> Result<Self> {
        let kernel = FieldSystem::new(None, controls)?;
        Ok(Self::from_dynamics(
            "driftless",
            SystemForm::Driftless,
            Arc::new(kernel),
        ))
    }

    /// `ẏ = A y + B u`; tagged driftless when `A = 0`.
    pub fn linear(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidInput("drift matrix must be square".into()));
        }
        check_dim("input matrix rows", a.nrows(), b.nrows())?;
        let form = if a.iter().all(|v| *v == 0.0) {
            SystemForm::Driftless
        } else {
            SystemForm::Affine
        };
        Ok(Self::from_dynamics(
            "linear",
            form,
            Arc::new(LinearSystem { a, b }),
        ))
    }

    /// Scalar integrator `ẏ = u`.
    pub fn integrator() -> Self {
        Self::linear(DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, 1.0))
            .expect("1x1 matrices are consistent")
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn form(&self) -> SystemForm {
        self.form
    }

    pub fn d(&self) -> usize {
        self.kernel.state_dim()
    }

    pub fn m(&self) -> usize {
        self.kernel.control_dim()
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        self.kernel.as_ref()
    }

    pub fn evaluate_rhs(&self, y: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        check_dim("state", self.d(), y.len())?;
        check_dim("control", self.m(), u.len())?;
        let mut out = vec![0.0; self.d()];
        self.kernel.rhs(y, u, &mut out);
        Ok(out)
    }

    /// `‖f(y, u)‖`; zero certifies `(u, y)` as a steady pair.
    pub fn steady_residual(&self, y: &[f64], u: &[f64]) -> Result<f64> {
        Ok(norm(&self.evaluate_rhs(y, u)?))
    }

    /// `f0` as a vector field, read off the kernel at `u = 0`.
    pub fn drift_field(&self) -> VectorField {
        let kernel = self.kernel.clone();
        let (d, m) = (self.d(), self.m());
        VectorField::new("f0", d, d, move |y| {
            let mut out = vec![0.0; d];
            kernel.rhs(y, &vec![0.0; m], &mut out);
            out
        })
    }

    /// Control fields `f_j(y) = f(y, e_j) − f(y, 0)`; only meaningful for
    /// control-affine forms.
    pub fn control_fields(&self) -> Vec<VectorField> {
        let (d, m) = (self.d(), self.m());
        (0..m)
            .map(|j| {
                let kernel = self.kernel.clone();
                VectorField::new(format!("f{}", j + 1), d, d, move |y| {
                    let mut base = vec![0.0; d];
                    let mut unit = vec![0.0; m];
                    kernel.rhs(y, &unit, &mut base);
                    unit[j] = 1.0;
                    let mut out = vec![0.0; d];
                    kernel.rhs(y, &unit, &mut out);
                    out.iter_mut().zip(&base).for_each(|(o, b)| *o -= b);
                    out
                })
            })
            .collect()
    }

    pub fn integrate(
        &self,
        y0: &[f64],
        control: &ControlSignal,
        scheme: Scheme,
    ) -> Result<Trajectory> {
        integrate(self, y0, control, scheme)
    }
}

/// Builds `ẋ = σ(w x + b)` (inside) or `ẋ = w σ(x) + b` (outside) on `ℝ^d`
/// with control `u = (vec(w), b) ∈ ℝ^{d²+d}`.
pub fn make_neural_system(
    kind: NeuralKind,
    sigma: Activation,
    d: usize,
) -> Result<ControlAffineSystem> {
    make_batched_neural_system(kind, sigma, d, 1)
}

/// Same as [`make_neural_system`] for `batch` samples sharing one control.
pub fn make_batched_neural_system(
    kind: NeuralKind,
    sigma: Activation,
    d: usize,
    batch: usize,
) -> Result<ControlAffineSystem> {
    if let Activation::LeakyRelu(a) = sigma {
        Activation::leaky_relu(a)?;
    }
    if d == 0 || batch == 0 {
        return Err(Error::InvalidInput(
            "neural system needs positive dimension and batch".into(),
        ));
    }
    let form = match kind {
        NeuralKind::Inside => SystemForm::NeuralInside,
        NeuralKind::Outside => SystemForm::NeuralOutside,
    };
    let label = match kind {
        NeuralKind::Inside => "neural_inside",
        NeuralKind::Outside => "neural_outside",
    };
    Ok(ControlAffineSystem::from_dynamics(
        label,
        form,
        Arc::new(NeuralOde {
            kind,
            sigma,
            dim: d,
            batch,
        }),
    ))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

struct FieldSystem {
    d: usize,
    drift: Option<VectorField>,
    controls: Vec<VectorField>,
}

impl FieldSystem {
    fn new(drift: Option<VectorField>, controls: Vec<VectorField>) -> Result<Self> {
        let d = drift
            .as_ref()
            .map(VectorField::dim_in)
            .or_else(|| controls.first().map(VectorField::dim_in))
            .ok_or_else(|| Error::InvalidInput("a system needs at least one field".into()))?;
        for f in drift.iter().chain(&controls) {
            check_dim("field input", d, f.dim_in())?;
            check_dim("field output", d, f.dim_out())?;
        }
        Ok(Self { d, drift, controls })
    }
}

impl Dynamics for FieldSystem {
    fn state_dim(&self) -> usize {
        self.d
    }

    fn control_dim(&self) -> usize {
        self.controls.len()
    }

    fn rhs(&self, y: &[f64], u: &[f64], out: &mut [f64]) {
        match &self.drift {
            Some(f0) => out.copy_from_slice(&f0.eval_unchecked(y)),
            None => out.iter_mut().for_each(|o| *o = 0.0),
        }
        for (fj, uj) in self.controls.iter().zip(u) {
            if *uj != 0.0 {
                for (o, v) in out.iter_mut().zip(fj.eval_unchecked(y)) {
                    *o += uj * v;
                }
            }
        }
    }

    fn vjp(&self, y: &[f64], u: &[f64], lambda: &[f64], gy: &mut [f64], gu: &mut [f64]) {
        let lam = nalgebra::DVector::from_column_slice(lambda);
        let mut acc = nalgebra::DVector::zeros(self.d);
        if let Some(f0) = &self.drift {
            let j = f0.jacobian(y).expect("derivative checked before use");
            acc += j.transpose() * &lam;
        }
        for ((fj, uj), g) in self.controls.iter().zip(u).zip(gu.iter_mut()) {
            *g = fj
                .eval_unchecked(y)
                .iter()
                .zip(lambda)
                .map(|(a, b)| a * b)
                .sum();
            if *uj != 0.0 {
                let j = fj.jacobian(y).expect("derivative checked before use");
                acc += (j.transpose() * &lam) * *uj;
            }
        }
        gy.copy_from_slice(acc.as_slice());
    }

    fn check_differentiable(&self) -> Result<()> {
        for f in self.drift.iter().chain(&self.controls) {
            if !f.has_derivative() {
                return Err(Error::MissingDerivative {
                    field: f.name().to_string(),
                });
            }
        }
        Ok(())
    }
}

struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl Dynamics for LinearSystem {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn rhs(&self, y: &[f64], u: &[f64], out: &mut [f64]) {
        let (d, m) = (self.a.nrows(), self.b.ncols());
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.a[(i, j)] * y[j];
            }
            for j in 0..m {
                acc += self.b[(i, j)] * u[j];
            }
            out[i] = acc;
        }
    }

    fn vjp(&self, _y: &[f64], _u: &[f64], lambda: &[f64], gy: &mut [f64], gu: &mut [f64]) {
        let (d, m) = (self.a.nrows(), self.b.ncols());
        for j in 0..d {
            gy[j] = (0..d).map(|i| self.a[(i, j)] * lambda[i]).sum();
        }
        for j in 0..m {
            gu[j] = (0..d).map(|i| self.b[(i, j)] * lambda[i]).sum();
        }
    }
}

/// Drift and input matrices when the system is linear, read off by probing
/// the kernel with unit vectors.
pub fn linearize_at(
    system: &ControlAffineSystem,
    y: &[f64],
    u: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (d, m) = (system.d(), system.m());
    let mut a = DMatrix::zeros(d, d);
    let mut b = DMatrix::zeros(d, m);
    let mut gy = vec![0.0; d];
    let mut gu = vec![0.0; m];
    let mut lam = vec![0.0; d];
    for i in 0..d {
        lam.iter_mut().for_each(|l| *l = 0.0);
        lam[i] = 1.0;
        system.dynamics().vjp(y, u, &lam, &mut gy, &mut gu);
        for j in 0..d {
            a[(i, j)] = gy[j];
        }
        for j in 0..m {
            b[(i, j)] = gu[j];
        }
    }
    (a, b)
}
