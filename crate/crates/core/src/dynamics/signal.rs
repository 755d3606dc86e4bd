use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Piecewise-constant multichannel control on a uniform grid over `[0, horizon]`.
///
/// Row `k` holds the value on `[kΔt, (k+1)Δt)`, `Δt = horizon / steps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    horizon: f64,
    steps: usize,
    channels: usize,
    values: Vec<f64>,
}

impl ControlSignal {
    pub fn new(horizon: f64, steps: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "control horizon must be positive, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidInput(
                "control needs at least one step".into(),
            ));
        }
        check_dim("control values", steps * channels, values.len())?;
        Ok(Self {
            horizon,
            steps,
            channels,
            values,
        })
    }

    pub fn zeros(horizon: f64, steps: usize, channels: usize) -> Result<Self> {
        Self::new(horizon, steps, channels, vec![0.0; steps * channels])
    }

    pub fn constant(horizon: f64, steps: usize, value: &[f64]) -> Result<Self> {
        let values = value
            .iter()
            .copied()
            .cycle()
            .take(steps * value.len())
            .collect();
        Self::new(horizon, steps, value.len(), values)
    }

    /// Builds a signal by sampling `f` at the cell midpoints.
    pub fn from_fn<F>(horizon: f64, steps: usize, channels: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> Vec<f64>,
    {
        let dt = horizon / steps as f64;
        let mut values = Vec::with_capacity(steps * channels);
        for k in 0..steps {
            let v = f((k as f64 + 0.5) * dt);
            check_dim("sampled control", channels, v.len())?;
            values.extend_from_slice(&v);
        }
        Self::new(horizon, steps, channels, values)
    }

    /// Concatenates signals on the same step size into one signal.
    pub fn concat(parts: &[ControlSignal]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidInput("nothing to concatenate".into()))?;
        let dt = first.dt();
        let mut horizon = 0.0;
        let mut steps = 0;
        let mut values = Vec::new();
        for p in parts {
            check_dim("concatenated channels", first.channels, p.channels)?;
            if ((p.dt() - dt) / dt).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "step size mismatch in concatenation: {} vs {}",
                    p.dt(),
                    dt
                )));
            }
            horizon += p.horizon;
            steps += p.steps;
            values.extend_from_slice(&p.values);
        }
        Self::new(horizon, steps, first.channels, values)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.values[k * self.channels..(k + 1) * self.channels]
    }

    pub fn at_mut(&mut self, k: usize) -> &mut [f64] {
        let m = self.channels;
        &mut self.values[k * m..(k + 1) * m]
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.horizon, self.steps, self.channels, values)
    }

    /// `sqrt(Σ_k ‖u_k‖² Δt)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.dt()).sqrt()
    }

    /// `‖u − reference‖_{L²}` for a constant reference value.
    pub fn l2_distance_to(&self, reference: &[f64]) -> f64 {
        let sum: f64 = self
            .values
            .chunks(self.channels)
            .map(|row| {
                row.iter()
                    .zip(reference)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum();
        (sum * self.dt()).sqrt()
    }

    /// Pointwise Euclidean magnitude `‖u_k − reference‖` per cell.
    pub fn magnitudes(&self, reference: &[f64]) -> Vec<f64> {
        self.values
            .chunks(self.channels)
            .map(|row| {
                row.iter()
                    .zip(reference)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Cells `[start, end)` as a standalone signal.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.steps {
            return Err(Error::InvalidInput(format!(
                "invalid cell range {start}..{end} for {} steps",
                self.steps
            )));
        }
        let m = self.channels;
        Self::new(
            self.dt() * (end - start) as f64,
            end - start,
            m,
            self.values[start * m..end * m].to_vec(),
        )
    }
}
