//! Drift and diffusion coefficient fields.
//!
//! Measurable drifts are represented by explicit case-split closed forms
//! (sign, indicator regions, grid lookups), so evaluation is total and
//! deterministic. Every field carries the bounds it claims; simulation and
//! constant evaluation read the declared bounds, tests sample the fields to
//! check them.

use std::sync::Arc;

use crate::error::{Error, Result};

type VectorFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
type MatrixFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Drift coefficient `b(t, x) -> R^d` with a declared sup-bound and optional
/// integrability exponents `(p, q)` for singular-drift bookkeeping.
#[derive(Clone)]
pub struct DriftField {
    eval: Arc<VectorFn>,
    dim: usize,
    sup_bound: Option<f64>,
    exponents: Option<(f64, f64)>,
    is_zero: bool,
}

impl std::fmt::Debug for DriftField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriftField")
            .field("dim", &self.dim)
            .field("sup_bound", &self.sup_bound)
            .field("exponents", &self.exponents)
            .finish()
    }
}

impl DriftField {
    pub fn from_fn<F>(dim: usize, sup_bound: Option<f64>, f: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            dim,
            sup_bound,
            exponents: None,
            is_zero: false,
        }
    }

    pub fn with_exponents(mut self, p: f64, q: f64) -> Self {
        self.exponents = Some((p, q));
        self
    }

    pub fn zero(dim: usize) -> Self {
        let mut field = Self::from_fn(dim, Some(0.0), |_, _, out| out.fill(0.0));
        field.is_zero = true;
        field
    }

    pub fn constant(c: Vec<f64>) -> Self {
        let bound = crate::linalg::norm(&c);
        let dim = c.len();
        Self::from_fn(dim, Some(bound), move |_, _, out| out.copy_from_slice(&c))
    }

    /// Componentwise sign drift `b_i(x) = magnitude * sgn(x_i)`, with
    /// `sgn(0) = 0`.
    pub fn sign(dim: usize, magnitude: f64) -> Self {
        let bound = magnitude * (dim as f64).sqrt();
        Self::from_fn(dim, Some(bound), move |_, x, out| {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = magnitude * signum0(*xi);
            }
        })
    }

    /// Two-region regime switch on the first coordinate:
    /// `b(x) = lo` when `x_0 < threshold`, `hi` otherwise.
    pub fn regime_switch(lo: Vec<f64>, hi: Vec<f64>, threshold: f64) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Domain("regime drift vectors differ in length".into()));
        }
        let bound = crate::linalg::norm(&lo).max(crate::linalg::norm(&hi));
        let dim = lo.len();
        Ok(Self::from_fn(dim, Some(bound), move |_, x, out| {
            let src = if x[0] < threshold { &lo } else { &hi };
            out.copy_from_slice(src);
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    pub fn exponents(&self) -> Option<(f64, f64)> {
        self.exponents
    }

    /// True only for the canonical zero drift; used to pick the driftless
    /// fast path in pipelines.
    pub fn is_zero(&self) -> bool {
        self.is_zero
    }

    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        (self.eval)(t, x, out);
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, x, &mut out);
        out
    }
}

/// `sgn` with the `sgn(0) = 0` convention (f64::signum maps 0 to 0 with the
/// sign of the zero, which is not what a measurable case-split wants).
pub fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Diffusion coefficient `sigma(t, x) -> R^{d x d}` (row-major) with declared
/// spectral-norm sup-bound and ellipticity floor `lambda`.
#[derive(Clone)]
pub struct DiffusionField {
    eval: Arc<MatrixFn>,
    dim: usize,
    sup_bound: f64,
    ellipticity: f64,
}

impl std::fmt::Debug for DiffusionField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionField")
            .field("dim", &self.dim)
            .field("sup_bound", &self.sup_bound)
            .field("ellipticity", &self.ellipticity)
            .finish()
    }
}

impl DiffusionField {
    pub fn from_fn<F>(dim: usize, sup_bound: f64, ellipticity: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if !(sup_bound > 0.0) {
            return Err(Error::Domain("diffusion sup-bound must be positive".into()));
        }
        if !(ellipticity > 0.0) {
            return Err(Error::Domain("ellipticity must be positive".into()));
        }
        Ok(Self {
            eval: Arc::new(f),
            dim,
            sup_bound,
            ellipticity,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0).unwrap()
    }

    /// `sigma = s * I_d`.
    pub fn scalar(dim: usize, s: f64) -> Result<Self> {
        Self::from_fn(dim, s.abs(), s * s, move |_, _, out| {
            out.fill(0.0);
            for i in 0..dim {
                out[i * dim + i] = s;
            }
        })
    }

    /// Constant diagonal `sigma = diag(entries)`.
    pub fn diagonal(entries: Vec<f64>) -> Result<Self> {
        let dim = entries.len();
        let sup = entries.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        let floor = entries.iter().fold(f64::INFINITY, |m, e| m.min(e * e));
        if !(floor > 0.0) {
            return Err(Error::Domain("diagonal diffusion has a zero entry".into()));
        }
        Self::from_fn(dim, sup, floor, move |_, _, out| {
            out.fill(0.0);
            for (i, e) in entries.iter().enumerate() {
                out[i * dim + i] = *e;
            }
        })
    }

    /// Diagonal with time-only coefficients `sigma_i(t)`, bounded in
    /// `[lo, hi]` with `lo > 0`.
    pub fn diagonal_time_fns(
        fns: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        if !(lo > 0.0) || hi < lo {
            return Err(Error::Domain(
                "time-dependent diagonal needs 0 < lo <= hi".into(),
            ));
        }
        let dim = fns.len();
        Self::from_fn(dim, hi, lo * lo, move |t, _, out| {
            out.fill(0.0);
            for (i, f) in fns.iter().enumerate() {
                out[i * dim + i] = f(t);
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared spectral-norm bound.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Declared ellipticity floor `lambda` with `xi* sigma xi >= lambda |xi|^2`.
    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim * self.dim);
        (self.eval)(t, x, out);
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.eval_into(t, x, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn sign_drift_is_total_and_bounded() {
        let b = DriftField::sign(1, 2.0);
        assert_eq!(b.eval(0.0, &[3.0]), vec![2.0]);
        assert_eq!(b.eval(0.0, &[-0.1]), vec![-2.0]);
        assert_eq!(b.eval(0.0, &[0.0]), vec![0.0]);
        let bound = b.sup_bound().unwrap();
        let mut rng = crate::rng::NoiseSource::new(1).rng();
        for _ in 0..1000 {
            let x = [rng.random_range(-10.0..10.0)];
            assert!(crate::linalg::norm(&b.eval(0.3, &x)) <= bound + 1e-12);
        }
    }

    #[test]
    fn regime_switch_cases() {
        let b = DriftField::regime_switch(vec![0.5], vec![-1.0], 0.3).unwrap();
        assert_eq!(b.eval(0.0, &[0.29]), vec![0.5]);
        assert_eq!(b.eval(0.0, &[0.3]), vec![-1.0]);
        assert_eq!(b.sup_bound(), Some(1.0));
    }

    #[test]
    fn diffusion_declared_bounds_hold_on_samples() {
        let sigma = DiffusionField::diagonal(vec![0.5, 2.0]).unwrap();
        let m = sigma.eval(0.0, &[0.0, 0.0]);
        assert!((crate::linalg::spectral_norm(&m, 2) - sigma.sup_bound()).abs() < 1e-12);
        // ellipticity: xi* sigma xi >= lambda |xi|^2 on sampled xi
        let mut rng = crate::rng::NoiseSource::new(2).rng();
        for _ in 0..200 {
            let xi = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let mut sx = [0.0; 2];
            crate::linalg::mat_vec(&m, &xi, &mut sx);
            let quad: f64 = xi.iter().zip(&sx).map(|(a, b)| a * b).sum();
            let n2: f64 = xi.iter().map(|a| a * a).sum();
            assert!(quad + 1e-12 >= sigma.ellipticity() * n2);
        }
    }

    #[test]
    fn zero_entry_diagonal_is_rejected() {
        assert!(DiffusionField::diagonal(vec![1.0, 0.0]).is_err());
    }
}
