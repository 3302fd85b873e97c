//! Drift perturbations defining tilted measures.
//!
//! A tilt is a bounded, progressively measurable process `q(t, path)`: its
//! value at node `k` may read the path only up to node `k`. The API enforces
//! this discretely by handing the evaluation rule a prefix slice.

use std::sync::Arc;

use crate::error::{Error, Result};

type PathDependentFn = dyn Fn(f64, &[f64], usize) -> Vec<f64> + Send + Sync;
type TimeFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiltKind {
    Constant,
    TimeDependent,
    PathDependent,
}

/// Progressively measurable drift perturbation with a declared sup-bound.
#[derive(Clone)]
pub struct TiltProcess {
    kind: TiltKind,
    dim: usize,
    sup_bound: f64,
    constant: Option<Vec<f64>>,
    time_fn: Option<Arc<TimeFn>>,
    path_fn: Option<Arc<PathDependentFn>>,
}

impl std::fmt::Debug for TiltProcess {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TiltProcess")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl TiltProcess {
    pub fn zero(dim: usize) -> Self {
        Self::constant(vec![0.0; dim])
    }

    pub fn constant(c: Vec<f64>) -> Self {
        let sup_bound = crate::linalg::norm(&c);
        Self {
            kind: TiltKind::Constant,
            dim: c.len(),
            sup_bound,
            constant: Some(c),
            time_fn: None,
            path_fn: None,
        }
    }

    /// Deterministic time-dependent tilt `q(t)`; `sup_bound` must dominate
    /// `|q(t)|` on the horizon.
    pub fn time_dependent<F>(dim: usize, sup_bound: f64, f: F) -> Self
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            kind: TiltKind::TimeDependent,
            dim,
            sup_bound,
            constant: None,
            time_fn: Some(Arc::new(f)),
            path_fn: None,
        }
    }

    /// Path-dependent tilt. The rule receives `(t_k, prefix, dim)` where
    /// `prefix` holds path values at nodes `0..=k`, flat with stride `dim`.
    /// Outputs are clamped to the declared sup-bound, keeping the bound an
    /// invariant rather than a promise.
    pub fn path_dependent<F>(dim: usize, sup_bound: f64, f: F) -> Self
    where
        F: Fn(f64, &[f64], usize) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            kind: TiltKind::PathDependent,
            dim,
            sup_bound,
            constant: None,
            time_fn: None,
            path_fn: Some(Arc::new(f)),
        }
    }

    pub fn kind(&self) -> TiltKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn is_zero(&self) -> bool {
        self.sup_bound == 0.0
    }

    /// Evaluates `q(t_k, path)` given the path prefix up to node `k`
    /// (inclusive), flat with stride `dim`.
    pub fn eval(&self, t: f64, prefix: &[f64], k: usize) -> Result<Vec<f64>> {
        if prefix.len() < (k + 1) * self.dim {
            return Err(Error::Domain(format!(
                "tilt at node {k} needs a prefix of {} values, got {}",
                (k + 1) * self.dim,
                prefix.len()
            )));
        }
        let mut q = match self.kind {
            TiltKind::Constant => self.constant.as_ref().unwrap().clone(),
            TiltKind::TimeDependent => (self.time_fn.as_ref().unwrap())(t),
            TiltKind::PathDependent => {
                // Hand over exactly the admissible prefix, so the rule cannot
                // peek past node k even if given a longer buffer.
                (self.path_fn.as_ref().unwrap())(t, &prefix[..(k + 1) * self.dim], self.dim)
            }
        };
        if q.len() != self.dim {
            return Err(Error::Domain(format!(
                "tilt rule returned {} components, expected {}",
                q.len(),
                self.dim
            )));
        }
        let norm = crate::linalg::norm(&q);
        if norm > self.sup_bound {
            let scale = self.sup_bound / norm;
            for v in &mut q {
                *v *= scale;
            }
        }
        Ok(q)
    }
}
