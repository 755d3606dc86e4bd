use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A symmetric positive semidefinite operator `Q` defining `‖x‖²_Q = xᵀQx`.
pub trait QuadraticForm: Send + Sync {
    fn dim(&self) -> usize;
    /// Writes `Q x` into `out`.
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

/// Norm used for state or control deviations.
#[derive(Clone, Default)]
pub enum Metric {
    #[default]
    Euclidean,
    Diagonal(Vec<f64>),
    Form(Arc<dyn QuadraticForm>),
}

impl std::fmt::Debug for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Euclidean => write!(f, "Euclidean"),
            Self::Diagonal(w) => write!(f, "Diagonal({} weights)", w.len()),
            Self::Form(q) => write!(f, "Form(dim {})", q.dim()),
        }
    }
}

impl Metric {
    fn check(&self, dim: usize) -> Result<()> {
        match self {
            Self::Euclidean => Ok(()),
            Self::Diagonal(w) => check_dim("metric weights", dim, w.len()),
            Self::Form(q) => check_dim("metric form", dim, q.dim()),
        }
    }

    /// `‖a − b‖²`.
    pub fn dist_sq(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Self::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
            Self::Diagonal(w) => a
                .iter()
                .zip(b)
                .zip(w)
                .map(|((x, y), w)| w * (x - y) * (x - y))
                .sum(),
            Self::Form(q) => {
                let e: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let mut qe = vec![0.0; e.len()];
                q.apply(&e, &mut qe);
                e.iter().zip(&qe).map(|(x, y)| x * y).sum()
            }
        }
    }

    /// `out += scale · ∇_a ‖a − b‖² = scale · 2Q(a − b)`.
    pub fn add_grad(&self, a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
        match self {
            Self::Euclidean => {
                for i in 0..a.len() {
                    out[i] += scale * 2.0 * (a[i] - b[i]);
                }
            }
            Self::Diagonal(w) => {
                for i in 0..a.len() {
                    out[i] += scale * 2.0 * w[i] * (a[i] - b[i]);
                }
            }
            Self::Form(q) => {
                let e: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                let mut qe = vec![0.0; e.len()];
                q.apply(&e, &mut qe);
                for i in 0..a.len() {
                    out[i] += scale * 2.0 * qe[i];
                }
            }
        }
    }
}

/// Final cost `φ`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FinalCost {
    /// `φ ≡ 0`.
    #[default]
    None,
    /// `φ(y) = (weight/2)‖y − anchor‖²` in the state metric.
    Quadratic { weight: f64, anchor: Vec<f64> },
}

/// Tracking functional data: targets, weights, norms and final cost.
///
/// The running cost is
/// `state_weight·‖y − ȳ‖² + control_weight·‖u − ū‖²`, optionally plus
/// `h1_weight·‖u̇‖²` measured by finite differences across cells.
#[derive(Clone, Debug)]
pub struct CostSpec {
    pub y_bar: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub final_cost: FinalCost,
    pub state_weight: f64,
    pub control_weight: f64,
    pub h1_weight: f64,
    pub state_metric: Metric,
    pub control_metric: Metric,
}

impl CostSpec {
    /// Unit weights, Euclidean norms, no final cost.
    pub fn new(y_bar: Vec<f64>, u_bar: Vec<f64>) -> Self {
        Self {
            y_bar,
            u_bar,
            final_cost: FinalCost::None,
            state_weight: 1.0,
            control_weight: 1.0,
            h1_weight: 0.0,
            state_metric: Metric::Euclidean,
            control_metric: Metric::Euclidean,
        }
    }

    pub fn with_final_cost(mut self, final_cost: FinalCost) -> Self {
        self.final_cost = final_cost;
        self
    }

    pub fn with_weights(mut self, state_weight: f64, control_weight: f64) -> Self {
        self.state_weight = state_weight;
        self.control_weight = control_weight;
        self
    }

    pub fn with_h1_weight(mut self, h1_weight: f64) -> Self {
        self.h1_weight = h1_weight;
        self
    }

    pub fn with_metrics(mut self, state: Metric, control: Metric) -> Self {
        self.state_metric = state;
        self.control_metric = control;
        self
    }

    pub(crate) fn validate(&self, d: usize, m: usize) -> Result<()> {
        check_dim("y_bar", d, self.y_bar.len())?;
        check_dim("u_bar", m, self.u_bar.len())?;
        self.state_metric.check(d)?;
        self.control_metric.check(m)?;
        if let FinalCost::Quadratic { weight, anchor } = &self.final_cost {
            check_dim("final cost anchor", d, anchor.len())?;
            if !(*weight >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "final cost weight must be nonnegative, got {weight}"
                )));
            }
        }
        for (name, w) in [
            ("state_weight", self.state_weight),
            ("control_weight", self.control_weight),
            ("h1_weight", self.h1_weight),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and nonnegative, got {w}"
                )));
            }
        }
        Ok(())
    }

    pub fn final_value(&self, y: &[f64]) -> f64 {
        match &self.final_cost {
            FinalCost::None => 0.0,
            FinalCost::Quadratic { weight, anchor } => {
                0.5 * weight * self.state_metric.dist_sq(y, anchor)
            }
        }
    }

    pub(crate) fn add_final_grad(&self, y: &[f64], out: &mut [f64]) {
        if let FinalCost::Quadratic { weight, anchor } = &self.final_cost {
            self.state_metric.add_grad(y, anchor, 0.5 * weight, out);
        }
    }

    pub fn state_term(&self, y: &[f64]) -> f64 {
        self.state_weight * self.state_metric.dist_sq(y, &self.y_bar)
    }

    pub fn control_term(&self, u: &[f64]) -> f64 {
        self.control_weight * self.control_metric.dist_sq(u, &self.u_bar)
    }
}
