//! Path-space transport distances between empirical measures.
//!
//! The ground metric is the grid sup-norm; the squared-cost assignment
//! problem between two equal-size samples is solved exactly by shortest
//! augmenting paths with dual potentials, O(N^3). Certificates only ever see
//! the exact solver — there is no regularized fast path feeding verdicts.

use crate::error::{Error, Result};
use crate::path::PathSample;
use crate::stats::MeanStderr;

/// Hard cap on the exact solver's instance size; bigger inputs must go
/// through [`batched_w2_estimate`].
pub const DEFAULT_ASSIGNMENT_CAP: usize = 4096;

/// `max_k |p1(t_k) - p2(t_k)|` over the shared grid.
pub fn sup_norm_distance(p1: &PathSample, p2: &PathSample) -> Result<f64> {
    if !p1.same_shape(p2) {
        return Err(Error::GridMismatch(
            "paths differ in grid or dimension".into(),
        ));
    }
    let mut sup: f64 = 0.0;
    for k in 0..=p1.grid().steps() {
        sup = sup.max(crate::linalg::dist(p1.node(k), p2.node(k)));
    }
    Ok(sup)
}

/// Uniformly weighted sample of paths on a common grid.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure<'a> {
    paths: &'a [PathSample],
}

impl<'a> EmpiricalMeasure<'a> {
    pub fn new(paths: &'a [PathSample]) -> Result<Self> {
        let first = paths.first().ok_or(Error::EmptyBatch)?;
        if paths.iter().any(|p| !p.same_shape(first)) {
            return Err(Error::GridMismatch(
                "empirical measure mixes grids or dimensions".into(),
            ));
        }
        Ok(Self { paths })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[PathSample] {
        self.paths
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.paths.len() {
            return Err(Error::Domain("slice out of range".into()));
        }
        Ok(Self {
            paths: &self.paths[range],
        })
    }
}

/// N x N matrix of squared sup-norm distances, row-parallel.
pub fn cost_matrix(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<Vec<f64>> {
    if !mu.paths()[0].same_shape(&nu.paths()[0]) {
        return Err(Error::GridMismatch(
            "measures live on different grids".into(),
        ));
    }
    let n = mu.len();
    let m = nu.len();
    let rows: Vec<Vec<f64>> = crate::map_indexed(n, |i| {
        let mut row = vec![0.0; m];
        for (j, q) in nu.paths().iter().enumerate() {
            let d = sup_norm_distance(&mu.paths()[i], q).expect("shape pre-checked");
            row[j] = d * d;
        }
        row
    });
    Ok(rows.into_iter().flatten().collect())
}

/// Exact minimum-cost perfect matching on a square cost matrix
/// (row-major, `n x n`). Returns `(row -> column, total cost)`.
///
/// Shortest-augmenting-path primal-dual scheme: each row is inserted by a
/// Dijkstra-like scan over reduced costs, potentials keep reduced costs
/// nonnegative, and the alternating path found is flipped into the matching.
pub fn solve_assignment(cost: &[f64], n: usize) -> Result<(Vec<usize>, f64)> {
    if cost.len() != n * n {
        return Err(Error::Domain(format!(
            "cost matrix length {} is not {n}x{n}",
            cost.len()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("cost matrix has non-finite entries".into()));
    }
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let sentinel = n;
    let mut u = vec![0.0_f64; n + 1]; // row potentials
    let mut v = vec![0.0_f64; n + 1]; // column potentials (index n = sentinel)
    let mut col_to_row: Vec<usize> = vec![usize::MAX; n + 1];
    let mut way = vec![sentinel; n + 1];
    for row in 0..n {
        col_to_row[sentinel] = row;
        let mut j0 = sentinel;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_to_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = sentinel;
            for j in 0..n {
                if !used[j] {
                    let cur = cost[i0 * n + j] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_to_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_to_row[j0] == usize::MAX {
                break;
            }
        }
        // Flip the alternating path back to the sentinel.
        loop {
            let j1 = way[j0];
            col_to_row[j0] = col_to_row[j1];
            j0 = j1;
            if j0 == sentinel {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 0..n {
        row_to_col[col_to_row[j]] = j;
    }
    let total = (0..n).map(|i| cost[i * n + row_to_col[i]]).sum();
    Ok((row_to_col, total))
}

/// Exact empirical distance between two equal-size samples: square root of
/// the optimal mean squared sup-norm cost.
pub fn empirical_w2(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    empirical_w2_capped(mu, nu, DEFAULT_ASSIGNMENT_CAP)
}

pub fn empirical_w2_capped(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    cap: usize,
) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::GridMismatch(format!(
            "sample counts differ: {} vs {}",
            mu.len(),
            nu.len()
        )));
    }
    if mu.len() > cap {
        return Err(Error::CapExceeded {
            n: mu.len(),
            cap,
        });
    }
    let n = mu.len();
    let cost = cost_matrix(mu, nu)?;
    let (_, total) = solve_assignment(&cost, n)?;
    Ok((total / n as f64).sqrt())
}

/// Averages the exact distance over `rounds` disjoint sub-batches of size
/// `batch` and reports the spread across rounds. The estimator carries the
/// finite-sample bias of empirical transport (upward for diffuse measures,
/// shrinking as `batch` grows); certificates record batch and rounds.
pub fn batched_w2_estimate(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    batch: usize,
    rounds: usize,
) -> Result<MeanStderr> {
    if batch == 0 || batch > DEFAULT_ASSIGNMENT_CAP {
        return Err(Error::Domain(format!(
            "batch size {batch} outside 1..={DEFAULT_ASSIGNMENT_CAP}"
        )));
    }
    if rounds < 2 {
        return Err(Error::Domain("need at least 2 rounds".into()));
    }
    if mu.len() != nu.len() {
        return Err(Error::GridMismatch(format!(
            "sample counts differ: {} vs {}",
            mu.len(),
            nu.len()
        )));
    }
    if mu.len() < batch * rounds {
        return Err(Error::Domain(format!(
            "need {} samples for {rounds} disjoint rounds of {batch}, have {}",
            batch * rounds,
            mu.len()
        )));
    }
    let values: Result<Vec<f64>> = crate::map_indexed(rounds, |r| {
        let lo = r * batch;
        let hi = lo + batch;
        empirical_w2(&mu.slice(lo..hi)?, &nu.slice(lo..hi)?)
    })
    .into_iter()
    .collect();
    Ok(MeanStderr::from_samples(&values?).expect("rounds >= 2"))
}
