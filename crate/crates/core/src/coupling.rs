//! Synchronous Girsanov coupling.
//!
//! Under the tilted measure the state solves
//! `dX = {b + sigma q} dt + sigma dW~`, while the reference process solves
//! `dY = b dt + sigma dW~` with the *same* Brownian increments. The pair is
//! a coupling of (tilted law, reference law), so the mean squared sup-gap
//! upper-bounds the squared Wasserstein distance, and the recorded q-trace
//! turns the entropy of the tilted law into a plain Monte Carlo mean of
//! `1/2 * integral |q|^2 dt` — no density estimation anywhere.

use crate::error::{Error, Result};
use crate::field::{DiffusionField, DriftField};
use crate::grid::TimeGrid;
use crate::path::PathSample;
use crate::rng::{brownian_increments, NoiseSource, StreamPurpose};
use crate::stats::MeanStderr;
use crate::tilt::TiltProcess;

/// One coupled draw: tilted path, reference path, and the tilt trace along
/// the tilted path. Both paths share the grid and the increment array.
#[derive(Debug, Clone)]
pub struct CoupledPaths {
    pub x_path: PathSample,
    pub y_path: PathSample,
    /// `q_trace[k*d..(k+1)*d]` is `q(t_k, x-path-so-far)`.
    pub q_trace: Vec<f64>,
}

impl CoupledPaths {
    /// `1/2 * sum_k |q_k|^2 dt` — the per-path entropy integrand.
    pub fn entropy_term(&self) -> f64 {
        let grid = self.x_path.grid();
        let d = self.x_path.dim();
        let dt = grid.dt();
        let mut acc = 0.0;
        for k in 0..grid.steps() {
            let q = &self.q_trace[k * d..(k + 1) * d];
            acc += q.iter().map(|v| v * v).sum::<f64>() * dt;
        }
        0.5 * acc
    }

    /// `max_k |X_k - Y_k|^2`.
    pub fn sup_gap_squared(&self) -> f64 {
        let mut sup: f64 = 0.0;
        for k in 0..=self.x_path.grid().steps() {
            let gap = crate::linalg::dist(self.x_path.node(k), self.y_path.node(k));
            sup = sup.max(gap * gap);
        }
        sup
    }
}

/// Simulates the coupled pair from one noise stream.
pub fn girsanov_coupling(
    drift: &DriftField,
    diff: &DiffusionField,
    tilt: &TiltProcess,
    x0: &[f64],
    grid: &TimeGrid,
    noise: &NoiseSource,
) -> Result<CoupledPaths> {
    let d = x0.len();
    if drift.dim() != d || diff.dim() != d || tilt.dim() != d {
        return Err(Error::GridMismatch(format!(
            "dimensions (drift {}, diffusion {}, tilt {}) do not match state {}",
            drift.dim(),
            diff.dim(),
            tilt.dim(),
            d
        )));
    }
    let n = grid.steps();
    let dt = grid.dt();
    let incr = brownian_increments(noise, grid, d)?;

    let mut x_values = vec![0.0; (n + 1) * d];
    x_values[..d].copy_from_slice(x0);
    let mut q_trace = vec![0.0; n * d];

    let mut bvec = vec![0.0; d];
    let mut mat = vec![0.0; d * d];
    let mut sq = vec![0.0; d];
    let mut sdw = vec![0.0; d];

    // X: drift b + sigma q, with q fed the path prefix up to the current node.
    for k in 0..n {
        let t = grid.time(k);
        let q = tilt.eval(t, &x_values[..(k + 1) * d], k)?;
        q_trace[k * d..(k + 1) * d].copy_from_slice(&q);
        let x = x_values[k * d..(k + 1) * d].to_vec();
        drift.eval_into(t, &x, &mut bvec);
        diff.eval_into(t, &x, &mut mat);
        crate::linalg::mat_vec(&mat, &q, &mut sq);
        crate::linalg::mat_vec(&mat, &incr[k * d..(k + 1) * d], &mut sdw);
        for c in 0..d {
            // Same floating-point association as the reference scheme, so a
            // zero tilt reproduces it bit for bit.
            let next = x[c] + ((bvec[c] + sq[c]) * dt + sdw[c]);
            if !next.is_finite() {
                return Err(Error::NonFinite { step: k + 1 });
            }
            x_values[(k + 1) * d + c] = next;
        }
    }
    let x_path = PathSample::new(*grid, d, x_values)?;

    // Y: reference dynamics on the identical increments.
    let y_path = crate::sde::euler_with_increments(drift, diff, x0, grid, &incr)?;

    Ok(CoupledPaths {
        x_path,
        y_path,
        q_trace,
    })
}

/// Per-path reductions kept for every draw of a batch; full paths are only
/// retained for the first `keep` draws (enough for the transport estimator)
/// to keep large batches in memory.
#[derive(Debug, Clone, Copy)]
pub struct CouplingSummary {
    pub entropy_term: f64,
    pub sup_gap_squared: f64,
}

#[derive(Debug)]
pub struct CoupledEnsemble {
    pub summaries: Vec<CouplingSummary>,
    pub kept: Vec<CoupledPaths>,
}

impl CoupledEnsemble {
    pub fn entropy(&self) -> Result<MeanStderr> {
        let vals: Vec<f64> = self.summaries.iter().map(|s| s.entropy_term).collect();
        MeanStderr::from_samples(&vals).ok_or(Error::EmptyBatch)
    }

    pub fn sup_distance_squared(&self) -> Result<MeanStderr> {
        let vals: Vec<f64> = self.summaries.iter().map(|s| s.sup_gap_squared).collect();
        MeanStderr::from_samples(&vals).ok_or(Error::EmptyBatch)
    }
}

/// Simulates `count` coupled pairs on streams `Coupling.stream(0..count)`.
pub fn coupled_batch(
    drift: &DriftField,
    diff: &DiffusionField,
    tilt: &TiltProcess,
    x0: &[f64],
    grid: &TimeGrid,
    noise: NoiseSource,
    count: usize,
    keep: usize,
) -> Result<CoupledEnsemble> {
    let results: Result<Vec<(CouplingSummary, Option<CoupledPaths>)>> =
        crate::map_indexed(count, |i| {
            let pair = girsanov_coupling(
                drift,
                diff,
                tilt,
                x0,
                grid,
                &noise.for_path(StreamPurpose::Coupling, i),
            )?;
            let summary = CouplingSummary {
                entropy_term: pair.entropy_term(),
                sup_gap_squared: pair.sup_gap_squared(),
            };
            Ok((summary, if i < keep { Some(pair) } else { None }))
        })
        .into_iter()
        .collect();
    let results = results?;
    if results.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut summaries = Vec::with_capacity(count);
    let mut kept = Vec::with_capacity(keep.min(count));
    for (s, p) in results {
        summaries.push(s);
        if let Some(p) = p {
            kept.push(p);
        }
    }
    Ok(CoupledEnsemble { summaries, kept })
}

/// Sequential variant of [`coupled_batch`] for benchmarking.
pub fn coupled_batch_serial(
    drift: &DriftField,
    diff: &DiffusionField,
    tilt: &TiltProcess,
    x0: &[f64],
    grid: &TimeGrid,
    noise: NoiseSource,
    count: usize,
    keep: usize,
) -> Result<CoupledEnsemble> {
    let mut summaries = Vec::with_capacity(count);
    let mut kept = Vec::with_capacity(keep.min(count));
    for i in 0..count {
        let pair = girsanov_coupling(
            drift,
            diff,
            tilt,
            x0,
            grid,
            &noise.for_path(StreamPurpose::Coupling, i),
        )?;
        summaries.push(CouplingSummary {
            entropy_term: pair.entropy_term(),
            sup_gap_squared: pair.sup_gap_squared(),
        });
        if i < keep {
            kept.push(pair);
        }
    }
    if summaries.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(CoupledEnsemble { summaries, kept })
}

/// Monte Carlo estimate of the entropy of the tilted law:
/// mean of `1/2 * integral |q|^2` over the batch.
pub fn entropy_of_tilt(couplings: &[CoupledPaths]) -> Result<MeanStderr> {
    let vals: Vec<f64> = couplings.iter().map(|c| c.entropy_term()).collect();
    MeanStderr::from_samples(&vals).ok_or(Error::EmptyBatch)
}

/// Monte Carlo mean of `max_k |X_k - Y_k|^2`; its square root upper-bounds
/// the Wasserstein distance up to discretization and MC error.
pub fn coupling_sup_distance(couplings: &[CoupledPaths]) -> Result<MeanStderr> {
    let vals: Vec<f64> = couplings.iter().map(|c| c.sup_gap_squared()).collect();
    MeanStderr::from_samples(&vals).ok_or(Error::EmptyBatch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup_1d() -> (TimeGrid, DriftField, DiffusionField) {
        (
            TimeGrid::new(1.0, 100).unwrap(),
            DriftField::zero(1),
            DiffusionField::identity(1),
        )
    }

    #[test]
    fn zero_tilt_couples_identically() {
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let b = DriftField::sign(1, 1.0);
        let s = DiffusionField::identity(1);
        let pair = girsanov_coupling(
            &b,
            &s,
            &TiltProcess::zero(1),
            &[0.1],
            &grid,
            &NoiseSource::new(4),
        )
        .unwrap();
        assert_eq!(pair.x_path, pair.y_path);
        assert_eq!(pair.sup_gap_squared(), 0.0);
    }

    #[test]
    fn constant_tilt_gap_is_linear_in_time() {
        let (grid, b, s) = setup_1d();
        let c = 0.7;
        let pair = girsanov_coupling(
            &b,
            &s,
            &TiltProcess::constant(vec![c]),
            &[0.0],
            &grid,
            &NoiseSource::new(9),
        )
        .unwrap();
        for k in 0..=grid.steps() {
            let gap = pair.x_path.node(k)[0] - pair.y_path.node(k)[0];
            assert!(
                (gap - c * grid.time(k)).abs() <= 1e-12 * (1.0 + c * grid.time(k)),
                "node {k}: {gap}"
            );
        }
        let sup = pair.sup_gap_squared();
        let expect = (c * grid.horizon()) * (c * grid.horizon());
        assert!((sup - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn constant_tilt_entropy_is_exact_and_deterministic() {
        let (grid, b, s) = setup_1d();
        let c = 1.3;
        for seed in [1_u64, 2, 3] {
            let pair = girsanov_coupling(
                &b,
                &s,
                &TiltProcess::constant(vec![c]),
                &[0.0],
                &grid,
                &NoiseSource::new(seed),
            )
            .unwrap();
            let h = pair.entropy_term();
            let expect = 0.5 * c * c * grid.horizon();
            assert!((h - expect).abs() <= 1e-12 * expect, "seed {seed}: {h}");
        }
    }

    #[test]
    fn time_dependent_tilt_entropy_converges_to_riemann_limit() {
        // q(t) = t on [0,1]: entropy converges to 1/6 as the grid refines,
        // and at each n equals the left-endpoint Riemann sum of t^2/2.
        let b = DriftField::zero(1);
        let s = DiffusionField::identity(1);
        for n in [100_usize, 1000] {
            let grid = TimeGrid::new(1.0, n).unwrap();
            let tilt = TiltProcess::time_dependent(1, 1.0, |t| vec![t]);
            let pair =
                girsanov_coupling(&b, &s, &tilt, &[0.0], &grid, &NoiseSource::new(3)).unwrap();
            let dt = grid.dt();
            let riemann: f64 = (0..n).map(|k| grid.time(k).powi(2) * dt).sum::<f64>() / 2.0;
            assert!((pair.entropy_term() - riemann).abs() < 1e-13);
            assert!((pair.entropy_term() - 1.0 / 6.0).abs() < 1.0 / n as f64);
        }
    }

    #[test]
    fn deterministic_time_tilt_matches_quadrature_in_2d() {
        // q(t) = (t, 0): X - Y at T equals (T^2/2, 0) up to left-endpoint
        // quadrature error <= dt * T.
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let b = DriftField::zero(2);
        let s = DiffusionField::identity(2);
        let tilt = TiltProcess::time_dependent(2, 1.0, |t| vec![t, 0.0]);
        let pair = girsanov_coupling(&b, &s, &tilt, &[0.0, 0.0], &grid, &NoiseSource::new(6))
            .unwrap();
        let gap0 = pair.x_path.terminal()[0] - pair.y_path.terminal()[0];
        let gap1 = pair.x_path.terminal()[1] - pair.y_path.terminal()[1];
        assert!((gap0 - 0.5).abs() <= grid.dt() * grid.horizon());
        assert_eq!(gap1, 0.0);
    }

    #[test]
    fn sup_distance_of_hand_built_batch() {
        // Gap sequence (0, 1, -2) -> sup of squares is 4.
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let x = PathSample::new(grid, 1, vec![0.0, 1.5, -1.0]).unwrap();
        let y = PathSample::new(grid, 1, vec![0.0, 0.5, 1.0]).unwrap();
        let pair = CoupledPaths {
            x_path: x,
            y_path: y,
            q_trace: vec![0.0, 0.0],
        };
        let ms = coupling_sup_distance(&[pair]).unwrap();
        assert_eq!(ms.mean, 4.0);
        assert_eq!(ms.stderr, 0.0);
        assert!(coupling_sup_distance(&[]).is_err());
        assert!(entropy_of_tilt(&[]).is_err());
    }

    #[test]
    fn tilted_marginal_matches_shifted_gaussian() {
        // b = 0, sigma = 1, q = c: X(T) ~ N(x0 + cT, T); check mean and
        // variance within 4 standard errors.
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let b = DriftField::zero(1);
        let s = DiffusionField::identity(1);
        let c = 0.8;
        let n = 20_000;
        let ens = coupled_batch(
            &b,
            &s,
            &TiltProcess::constant(vec![c]),
            &[0.2],
            &grid,
            NoiseSource::new(13),
            n,
            0,
        )
        .unwrap();
        // Terminal values are not kept; rerun singles cheaply for this test.
        let terminals: Vec<f64> = crate::map_indexed(n, |i| {
            girsanov_coupling(
                &b,
                &s,
                &TiltProcess::constant(vec![c]),
                &[0.2],
                &grid,
                &NoiseSource::new(13).for_path(StreamPurpose::Coupling, i),
            )
            .unwrap()
            .x_path
            .terminal()[0]
        });
        drop(ens);
        let ms = MeanStderr::from_samples(&terminals).unwrap();
        assert!((ms.mean - (0.2 + c)).abs() <= 4.0 * ms.stderr);
        let var = terminals
            .iter()
            .map(|x| (x - ms.mean) * (x - ms.mean))
            .sum::<f64>()
            / (n as f64 - 1.0);
        let var_se = var * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - 1.0).abs() <= 4.0 * var_se);
    }

    #[test]
    fn batch_parallel_matches_serial() {
        let (grid, b, s) = setup_1d();
        let tilt = TiltProcess::path_dependent(1, 1.0, |_, prefix, dim| {
            vec![(prefix[prefix.len() - dim]).tanh()]
        });
        let par = coupled_batch(&b, &s, &tilt, &[0.0], &grid, NoiseSource::new(21), 32, 32)
            .unwrap();
        let ser =
            coupled_batch_serial(&b, &s, &tilt, &[0.0], &grid, NoiseSource::new(21), 32, 32)
                .unwrap();
        assert_eq!(par.entropy().unwrap(), ser.entropy().unwrap());
        for (a, b) in par.kept.iter().zip(&ser.kept) {
            assert_eq!(a.x_path, b.x_path);
            assert_eq!(a.y_path, b.y_path);
            assert_eq!(a.q_trace, b.q_trace);
        }
    }
}
