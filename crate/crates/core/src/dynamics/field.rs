use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{check_dim, Result};

pub type Evaluator = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A named map `ℝ^dim_in → ℝ^dim_out` with optional Jacobian and Lipschitz metadata.
#[derive(Clone)]
pub struct VectorField {
    name: String,
    dim_in: usize,
    dim_out: usize,
    evaluator: Evaluator,
    derivative: Option<JacobianFn>,
    lipschitz_bound: Option<f64>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("name", &self.name)
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .field("has_derivative", &self.derivative.is_some())
            .field("lipschitz_bound", &self.lipschitz_bound)
            .finish()
    }
}

impl VectorField {
    pub fn new<F>(name: impl Into<String>, dim_in: usize, dim_out: usize, evaluator: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim_in,
            dim_out,
            evaluator: Arc::new(evaluator),
            derivative: None,
            lipschitz_bound: None,
        }
    }

    pub fn with_derivative<F>(mut self, derivative: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    pub fn with_lipschitz(mut self, bound: f64) -> Self {
        self.lipschitz_bound = Some(bound);
        self
    }

    /// The identically zero field on `ℝ^d`.
    pub fn zero(d: usize) -> Self {
        Self::constant("zero", vec![0.0; d])
    }

    /// A field that ignores its argument.
    pub fn constant(name: impl Into<String>, value: Vec<f64>) -> Self {
        let d = value.len();
        Self::new(name, d, d, move |_| value.clone())
            .with_derivative(move |_| DMatrix::zeros(d, d))
            .with_lipschitz(0.0)
    }

    /// `y ↦ A y`.
    pub fn linear(name: impl Into<String>, a: DMatrix<f64>) -> Self {
        let (rows, cols) = a.shape();
        let lip = a.norm();
        let a_eval = a.clone();
        Self::new(name, cols, rows, move |y| {
            (0..rows)
                .map(|i| (0..cols).map(|j| a_eval[(i, j)] * y[j]).sum())
                .collect()
        })
        .with_derivative(move |_| a.clone())
        .with_lipschitz(lip)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz_bound
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim("vector field input", self.dim_in, y.len())?;
        let out = (self.evaluator)(y);
        check_dim("vector field output", self.dim_out, out.len())?;
        Ok(out)
    }

    pub(crate) fn eval_unchecked(&self, y: &[f64]) -> Vec<f64> {
        (self.evaluator)(y)
    }

    pub fn jacobian(&self, y: &[f64]) -> Option<DMatrix<f64>> {
        self.derivative.as_ref().map(|d| d(y))
    }

    /// Relative Frobenius mismatch between the declared Jacobian and central
    /// finite differences at `y`. `None` when no derivative is declared.
    pub fn derivative_mismatch(&self, y: &[f64], eps: f64) -> Option<f64> {
        let analytic = self.jacobian(y)?;
        let mut fd = DMatrix::zeros(self.dim_out, self.dim_in);
        let mut probe = y.to_vec();
        for j in 0..self.dim_in {
            let h = eps * (1.0 + y[j].abs());
            probe[j] = y[j] + h;
            let plus = self.eval_unchecked(&probe);
            probe[j] = y[j] - h;
            let minus = self.eval_unchecked(&probe);
            probe[j] = y[j];
            for i in 0..self.dim_out {
                fd[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        let scale = analytic.norm().max(1e-6);
        Some((fd - analytic).norm() / scale)
    }
}
