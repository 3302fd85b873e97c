use crate::error::{Error, Result};

/// Uniform time grid on `[0, T]` with `steps` intervals.
///
/// Node times are `t_k = T * k / steps`, so `t_0 = 0` and `t_steps = T`
/// exactly in floating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Domain(format!(
                "horizon must be a finite positive real, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::Domain("time grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node time `t_k`.
    pub fn time(&self, k: usize) -> f64 {
        debug_assert!(k <= self.steps);
        self.horizon * (k as f64 / self.steps as f64)
    }

    /// Midpoint of the interval `[t_k, t_{k+1}]`.
    pub fn midpoint(&self, k: usize) -> f64 {
        debug_assert!(k < self.steps);
        self.horizon * ((k as f64 + 0.5) / self.steps as f64)
    }
}
