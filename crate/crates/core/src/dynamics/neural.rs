//! Continuous-depth residual network dynamics.
//!
//! The control vector is laid out as the row-major weight matrix `w` (`d²`
//! entries) followed by the bias `b` (`d` entries). A batch of `n` samples
//! shares the same control; the state stacks the samples one after another.

use serde::{Deserialize, Serialize};

use super::Dynamics;
use crate::error::{Error, Result};

/// Componentwise activation with `σ(0) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    /// `max{αx, x}` with `α ∈ [0, 1)`.
    LeakyRelu(f64),
}

impl Activation {
    pub fn leaky_relu(alpha: f64) -> Result<Self> {
        if (0.0..1.0).contains(&alpha) {
            Ok(Self::LeakyRelu(alpha))
        } else {
            Err(Error::InvalidInput(format!(
                "leaky_relu slope must lie in [0, 1), got {alpha}"
            )))
        }
    }

    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            Self::Tanh => x.tanh(),
            Self::LeakyRelu(a) => {
                if x >= 0.0 {
                    x
                } else {
                    a * x
                }
            }
        }
    }

    /// Derivative; the kink at 0 takes the upper branch (slope 1).
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Self::LeakyRelu(a) => {
                if x >= 0.0 {
                    1.0
                } else {
                    a
                }
            }
        }
    }

    pub fn is_smooth(self) -> bool {
        matches!(self, Self::Tanh)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuralKind {
    /// `ẋ = σ(w x + b)`
    Inside,
    /// `ẋ = w σ(x) + b`
    Outside,
}

#[derive(Clone, Debug)]
pub struct NeuralOde {
    pub kind: NeuralKind,
    pub sigma: Activation,
    pub dim: usize,
    pub batch: usize,
}

impl NeuralOde {
    pub fn control_dim_for(dim: usize) -> usize {
        dim * dim + dim
    }

    fn split<'a>(&self, u: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        u.split_at(self.dim * self.dim)
    }
}

impl Dynamics for NeuralOde {
    fn state_dim(&self) -> usize {
        self.dim * self.batch
    }

    fn control_dim(&self) -> usize {
        Self::control_dim_for(self.dim)
    }

    fn rhs(&self, y: &[f64], u: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let (w, b) = self.split(u);
        for (x, o) in y.chunks(d).zip(out.chunks_mut(d)) {
            match self.kind {
                NeuralKind::Outside => {
                    for i in 0..d {
                        let row = &w[i * d..(i + 1) * d];
                        let mut acc = b[i];
                        for j in 0..d {
                            acc += row[j] * self.sigma.value(x[j]);
                        }
                        o[i] = acc;
                    }
                }
                NeuralKind::Inside => {
                    for i in 0..d {
                        let row = &w[i * d..(i + 1) * d];
                        let z: f64 = b[i] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
                        o[i] = self.sigma.value(z);
                    }
                }
            }
        }
    }

    fn vjp(&self, y: &[f64], u: &[f64], lambda: &[f64], gy: &mut [f64], gu: &mut [f64]) {
        let d = self.dim;
        let (w, b) = self.split(u);
        gu.iter_mut().for_each(|g| *g = 0.0);
        let (gw, gb) = gu.split_at_mut(d * d);
        let mut s = vec![0.0; d];
        for ((x, l), g) in y.chunks(d).zip(lambda.chunks(d)).zip(gy.chunks_mut(d)) {
            match self.kind {
                NeuralKind::Outside => {
                    for j in 0..d {
                        s[j] = self.sigma.value(x[j]);
                    }
                    for j in 0..d {
                        let mut acc = 0.0;
                        for i in 0..d {
                            acc += w[i * d + j] * l[i];
                        }
                        g[j] = acc * self.sigma.derivative(x[j]);
                    }
                    for i in 0..d {
                        for j in 0..d {
                            gw[i * d + j] += l[i] * s[j];
                        }
                        gb[i] += l[i];
                    }
                }
                NeuralKind::Inside => {
                    for i in 0..d {
                        let row = &w[i * d..(i + 1) * d];
                        let z: f64 = b[i] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
                        s[i] = self.sigma.derivative(z) * l[i];
                    }
                    for j in 0..d {
                        let mut acc = 0.0;
                        for i in 0..d {
                            acc += w[i * d + j] * s[i];
                        }
                        g[j] = acc;
                    }
                    for i in 0..d {
                        for j in 0..d {
                            gw[i * d + j] += s[i] * x[j];
                        }
                        gb[i] += s[i];
                    }
                }
            }
        }
    }
}
