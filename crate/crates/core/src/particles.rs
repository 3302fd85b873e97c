//! Interacting-particle drift constructors: rank-based interactions, the
//! Atlas model, quantile interactions, and kernel-regressed conditional
//! drifts. All are packaged as [`DriftField`]s on the stacked state space so
//! the simulation engine treats a particle system like any other SDE.
//!
//! Tie rule: coincident particles are ordered by index (stable sort), making
//! every drift a total function. Ties are a null event under the elliptic
//! diffusions used here, but the rule matters for determinism.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::DriftField;
use crate::grid::TimeGrid;

/// Rank-based interaction: particle `i` receives coefficient
/// `delta[rank(i)]`, where rank 0 is the smallest particle.
#[derive(Debug, Clone)]
pub struct RankModelSpec {
    pub deltas: Vec<f64>,
    /// Per-particle constant diffusion coefficients, all in `[lo, hi]`
    /// with `lo > 0`.
    pub sigmas: Vec<f64>,
}

impl RankModelSpec {
    pub fn new(deltas: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() || deltas.len() != sigmas.len() {
            return Err(Error::Domain(
                "rank model needs one delta and one sigma per particle".into(),
            ));
        }
        if sigmas.iter().any(|s| s.abs() <= 0.0) {
            return Err(Error::Domain(
                "rank model diffusion coefficients must be nonzero".into(),
            ));
        }
        Ok(Self { deltas, sigmas })
    }

    pub fn particles(&self) -> usize {
        self.deltas.len()
    }

    /// Atlas variant: a single push of size `delta` carried by one rank.
    /// The permutation relabels which order statistic carries the push: rank
    /// `j` (0 = minimum) gets the push when `perm[j] == 0`. The identity
    /// permutation is the classic Atlas model pushing the minimum.
    pub fn atlas(delta: f64, perm: &[usize], sigmas: Vec<f64>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::Domain(format!(
                    "atlas permutation {perm:?} is not a permutation of 0..{n}"
                )));
            }
            seen[p] = true;
        }
        let mut deltas = vec![0.0; n];
        let target = perm
            .iter()
            .position(|&p| p == 0)
            .expect("checked permutation");
        deltas[target] = delta;
        Self::new(deltas, sigmas)
    }
}

/// Ranks of each particle under the stable tie rule: `ranks[i]` is the
/// position of particle `i` in the ordering by `(value, index)`.
pub fn ranks(state: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..state.len()).collect();
    order.sort_by(|&a, &b| state[a].total_cmp(&state[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; state.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r;
    }
    ranks
}

/// Evaluates the rank-based drift at a state.
pub fn rank_based_drift(spec: &RankModelSpec, state: &[f64], out: &mut [f64]) {
    debug_assert_eq!(state.len(), spec.particles());
    let r = ranks(state);
    for i in 0..state.len() {
        out[i] = spec.deltas[r[i]];
    }
}

/// Atlas drift: rank-based drift of the Atlas coefficient vector.
pub fn atlas_drift(spec: &RankModelSpec, state: &[f64], out: &mut [f64]) {
    rank_based_drift(spec, state, out);
}

/// Wraps a rank spec as a [`DriftField`] on the stacked state space.
pub fn rank_drift_field(spec: RankModelSpec) -> DriftField {
    let n = spec.particles();
    let bound: f64 = spec
        .deltas
        .iter()
        .map(|d| d * d)
        .sum::<f64>()
        .sqrt();
    DriftField::from_fn(n, Some(bound), move |_, x, out| {
        rank_based_drift(&spec, x, out)
    })
}

/// Empirical quantile at level `alpha`: the smallest `u` with
/// `#\{i: x_i <= u\} / n >= alpha`, i.e. the `ceil(alpha n)`-th order
/// statistic, with `alpha = 0` mapped to the minimum.
pub fn empirical_quantile(state: &[f64], alpha: f64) -> f64 {
    assert!(!state.is_empty());
    let mut sorted = state.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((alpha * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

type QuantileRule = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

/// Quantile interaction: component `i` is `b(t, x_i, V)` where `V` is the
/// empirical `alpha`-quantile of the configuration.
#[derive(Clone)]
pub struct QuantileModelSpec {
    pub particles: usize,
    pub alpha: f64,
    rule: Arc<QuantileRule>,
    rule_bound: f64,
}

impl std::fmt::Debug for QuantileModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuantileModelSpec")
            .field("particles", &self.particles)
            .field("alpha", &self.alpha)
            .field("rule_bound", &self.rule_bound)
            .finish()
    }
}

impl QuantileModelSpec {
    pub fn new<F>(particles: usize, alpha: f64, rule_bound: f64, rule: F) -> Result<Self>
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        if particles == 0 {
            return Err(Error::Domain("need at least one particle".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha must be in [0,1], got {alpha}")));
        }
        Ok(Self {
            particles,
            alpha,
            rule: Arc::new(rule),
            rule_bound,
        })
    }
}

pub fn quantile_drift(spec: &QuantileModelSpec, t: f64, state: &[f64], out: &mut [f64]) {
    debug_assert_eq!(state.len(), spec.particles);
    let v = empirical_quantile(state, spec.alpha);
    for i in 0..state.len() {
        out[i] = (spec.rule)(t, state[i], v);
    }
}

pub fn quantile_drift_field(spec: QuantileModelSpec) -> DriftField {
    let n = spec.particles;
    let bound = spec.rule_bound * (n as f64).sqrt();
    DriftField::from_fn(n, Some(bound), move |t, x, out| {
        quantile_drift(&spec, t, x, out)
    })
}

/// Kernel-regressed conditional drift on a 1D grid per time slice:
/// `b(t_k, x) = E[g | X(t_k) = x]` estimated by Nadaraya-Watson with a
/// Gaussian kernel and clipped to the declared bound of `g`.
#[derive(Debug, Clone)]
pub struct RegressedDrift {
    grid: TimeGrid,
    xs: Vec<f64>,
    /// `values[k][j]` = estimate at slice `k`, grid point `j`.
    values: Vec<Vec<f64>>,
    g_bound: f64,
}

impl RegressedDrift {
    /// `slices[k]` holds pairs `(x, g)` observed at node `k`; every slice
    /// must be non-empty. `x_grid` is the (sorted, uniform) evaluation grid.
    pub fn fit(
        grid: TimeGrid,
        slices: &[Vec<(f64, f64)>],
        x_grid: Vec<f64>,
        bandwidth: f64,
        g_bound: f64,
    ) -> Result<Self> {
        if slices.len() != grid.steps() + 1 {
            return Err(Error::Domain(format!(
                "need one slice per grid node ({}), got {}",
                grid.steps() + 1,
                slices.len()
            )));
        }
        if x_grid.len() < 2 {
            return Err(Error::Domain("regression grid needs >= 2 points".into()));
        }
        if !(bandwidth > 0.0) {
            return Err(Error::Domain("bandwidth must be positive".into()));
        }
        let values: Result<Vec<Vec<f64>>> = crate::map_indexed(slices.len(), |k| {
            let slice = &slices[k];
            if slice.is_empty() {
                return Err(Error::EmptyBatch);
            }
            Ok(x_grid
                .iter()
                .map(|&x| {
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for &(xi, gi) in slice {
                        let z = (x - xi) / bandwidth;
                        let w = (-0.5 * z * z).exp();
                        num += w * gi;
                        den += w;
                    }
                    let raw = if den > 0.0 { num / den } else { 0.0 };
                    raw.clamp(-g_bound, g_bound)
                })
                .collect())
        })
        .into_iter()
        .collect();
        Ok(Self {
            grid,
            xs: x_grid,
            values: values?,
            g_bound,
        })
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        // Nearest time slice (queries come grid-aligned), linear in x,
        // constant extension beyond the grid.
        let n = self.grid.steps();
        let k = ((t / self.grid.horizon() * n as f64).round() as usize).min(n);
        let row = &self.values[k];
        let lo = self.xs[0];
        let hi = *self.xs.last().unwrap();
        if x <= lo {
            return row[0];
        }
        if x >= hi {
            return *row.last().unwrap();
        }
        let step = (hi - lo) / (self.xs.len() - 1) as f64;
        let pos = (x - lo) / step;
        let j = (pos.floor() as usize).min(self.xs.len() - 2);
        let frac = pos - j as f64;
        row[j] * (1.0 - frac) + row[j + 1] * frac
    }

    pub fn g_bound(&self) -> f64 {
        self.g_bound
    }

    pub fn x_grid(&self) -> &[f64] {
        &self.xs
    }

    pub fn as_drift_field(self) -> DriftField {
        let bound = self.g_bound;
        DriftField::from_fn(1, Some(bound), move |t, x, out| {
            out[0] = self.eval(t, x[0]);
        })
    }
}
