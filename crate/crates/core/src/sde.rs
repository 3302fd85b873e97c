//! Time-discretized strong simulation: explicit Euler scheme with left-point
//! coefficient evaluation on a fixed grid.

use crate::error::{Error, Result};
use crate::field::{DiffusionField, DriftField};
use crate::grid::TimeGrid;
use crate::path::PathSample;
use crate::rng::{brownian_increments, NoiseSource, StreamPurpose};

/// One step of the scheme, writing `x += b(t,x) dt + sigma(t,x) dw`.
/// `mat` and `sdw` are caller-provided scratch of sizes `d*d` and `d`.
fn step(
    drift: &DriftField,
    diff: &DiffusionField,
    t: f64,
    dt: f64,
    x: &mut [f64],
    dw: &[f64],
    bvec: &mut [f64],
    mat: &mut [f64],
    sdw: &mut [f64],
) {
    drift.eval_into(t, x, bvec);
    diff.eval_into(t, x, mat);
    crate::linalg::mat_vec(mat, dw, sdw);
    for i in 0..x.len() {
        x[i] += bvec[i] * dt + sdw[i];
    }
}

/// Runs the scheme against a pre-drawn increment array (flat, stride `d`).
/// Sharing one increment array between several calls is how couplings and
/// common-random-number comparisons are built.
pub fn euler_with_increments(
    drift: &DriftField,
    diff: &DiffusionField,
    x0: &[f64],
    grid: &TimeGrid,
    increments: &[f64],
) -> Result<PathSample> {
    let d = x0.len();
    if drift.dim() != d || diff.dim() != d {
        return Err(Error::GridMismatch(format!(
            "field dimensions ({}, {}) do not match state dimension {}",
            drift.dim(),
            diff.dim(),
            d
        )));
    }
    if increments.len() != grid.steps() * d {
        return Err(Error::GridMismatch(format!(
            "increment array has {} entries, expected {}",
            increments.len(),
            grid.steps() * d
        )));
    }
    let n = grid.steps();
    let dt = grid.dt();
    let mut values = vec![0.0; (n + 1) * d];
    values[..d].copy_from_slice(x0);
    let mut x = x0.to_vec();
    let mut bvec = vec![0.0; d];
    let mut mat = vec![0.0; d * d];
    let mut sdw = vec![0.0; d];
    for k in 0..n {
        let t = grid.time(k);
        let dw = &increments[k * d..(k + 1) * d];
        step(drift, diff, t, dt, &mut x, dw, &mut bvec, &mut mat, &mut sdw);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        values[(k + 1) * d..(k + 2) * d].copy_from_slice(&x);
    }
    PathSample::new(*grid, d, values)
}

/// Simulates one path, drawing increments from `noise`.
pub fn euler_maruyama(
    drift: &DriftField,
    diff: &DiffusionField,
    x0: &[f64],
    grid: &TimeGrid,
    noise: &NoiseSource,
) -> Result<PathSample> {
    let increments = brownian_increments(noise, grid, x0.len())?;
    euler_with_increments(drift, diff, x0, grid, &increments)
}

/// Simulates `count` independent paths on streams
/// `purpose.stream(0..count)`, in parallel when enabled. Path `i` depends
/// only on its stream, so output is identical for any worker count.
pub fn simulate_batch(
    drift: &DriftField,
    diff: &DiffusionField,
    x0: &[f64],
    grid: &TimeGrid,
    noise: NoiseSource,
    purpose: StreamPurpose,
    count: usize,
) -> Result<Vec<PathSample>> {
    crate::map_indexed(count, |i| {
        euler_maruyama(drift, diff, x0, grid, &noise.for_path(purpose, i))
    })
    .into_iter()
    .collect()
}

/// Sequential variant of [`simulate_batch`] for benchmarking; always produces
/// the same output as the parallel route.
pub fn simulate_batch_serial(
    drift: &DriftField,
    diff: &DiffusionField,
    x0: &[f64],
    grid: &TimeGrid,
    noise: NoiseSource,
    purpose: StreamPurpose,
    count: usize,
) -> Result<Vec<PathSample>> {
    crate::map_indexed_serial(count, |i| {
        euler_maruyama(drift, diff, x0, grid, &noise.for_path(purpose, i))
    })
    .into_iter()
    .collect()
}
