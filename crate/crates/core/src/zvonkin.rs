//! Drift-removing space transform.
//!
//! With `u` solving the backward system of [`crate::pde::zvonkin_solve`],
//! the map `Phi(t, x) = x + u(t, x)` is bi-Lipschitz whenever
//! `sup |grad u| <= C_b / (1 + C_b) < 1`, its inverse comes from a
//! contraction fixed point, and `Y = Phi(t, X)` follows driftless dynamics
//! with diffusion `sigma~(t, y) = (grad Phi * sigma)(t, Psi(t, y))`. The
//! normalization `C_b` in the source term is not computable a priori (it
//! stems from inaccessible PDE estimates), so it is tuned a posteriori:
//! solve, check the gradient bound, double `C_b` and re-solve on failure.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{DiffusionField, DriftField};
use crate::grid::TimeGrid;
use crate::pde::{gradient_field, zvonkin_solve, GridField, PdeGrid};
use crate::rng::{NoiseSource, StreamPurpose};
use crate::stats::{self, MeanStderr};

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_MAX_ITERS: usize = 500;

/// Solver settings for [`solve_transform`].
#[derive(Debug, Clone, Copy)]
pub struct ZvonkinSettings {
    /// Starting value for the auto-tuned normalization constant.
    pub c_b_seed: f64,
    /// Maximum number of doubling rounds before giving up.
    pub max_doublings: usize,
    /// Wall band (in space units) excluded from sup scans.
    pub wall_margin: f64,
    /// Gradient-bound tolerance as a multiple of the grid step
    /// (`sup |grad u| <= C_b/(1+C_b) + grad_tol_h_factor * h` passes).
    pub grad_tol_h_factor: f64,
}

impl Default for ZvonkinSettings {
    fn default() -> Self {
        Self {
            c_b_seed: 1.0,
            max_doublings: 10,
            wall_margin: 0.5,
            grad_tol_h_factor: 10.0,
        }
    }
}

/// A solved transform: the PDE solution, its gradient, and the accepted
/// normalization constant.
#[derive(Debug)]
pub struct ZvonkinTransform {
    u: GridField,
    grad_u: GridField,
    c_b: f64,
    sup_grad: f64,
    wall_margin: f64,
    /// Counts evaluations that fell outside the box and were clamped.
    out_of_box: AtomicU64,
}

impl ZvonkinTransform {
    pub fn u(&self) -> &GridField {
        &self.u
    }

    pub fn grad_u(&self) -> &GridField {
        &self.grad_u
    }

    pub fn c_b(&self) -> f64 {
        self.c_b
    }

    /// Interior sup of `max_i |grad u^i|` measured on the accepted solve.
    pub fn sup_grad(&self) -> f64 {
        self.sup_grad
    }

    pub fn grid(&self) -> &PdeGrid {
        self.u.grid()
    }

    pub fn times(&self) -> &TimeGrid {
        self.u.times()
    }

    pub fn dim(&self) -> usize {
        self.grid().dim()
    }

    pub fn wall_margin(&self) -> f64 {
        self.wall_margin
    }

    pub fn out_of_box_count(&self) -> u64 {
        self.out_of_box.load(Ordering::Relaxed)
    }

    fn note_clamped(&self, clamped: bool) {
        if clamped {
            self.out_of_box.fetch_add(1, Ordering::Relaxed);
        }
    }

    /// `Phi(level, x) = x + u(level, x)`, interpolated.
    pub fn phi(&self, level: usize, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut uval = vec![0.0; d];
        self.note_clamped(self.u.interpolate(level, x, &mut uval));
        (0..d).map(|i| x[i] + uval[i]).collect()
    }

    /// `Phi` at a grid-aligned time.
    pub fn phi_at_time(&self, t: f64, x: &[f64]) -> Vec<f64> {
        self.phi(self.u.level_of_time(t), x)
    }

    /// Jacobian `grad Phi = I + grad u` at a point, row-major into `out`.
    pub fn grad_phi(&self, level: usize, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        self.note_clamped(self.grad_u.interpolate(level, x, out));
        for i in 0..d {
            out[i * d + i] += 1.0;
        }
    }

    /// Inverts `Phi(level, .)` by the contraction `x <- y - u(level, x)`;
    /// the contraction factor is `sup |grad u| < 1`.
    pub fn invert(&self, level: usize, y: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut x = y.to_vec();
        let mut uval = vec![0.0; d];
        for _ in 0..FIXED_POINT_MAX_ITERS {
            self.note_clamped(self.u.interpolate(level, &x, &mut uval));
            let mut delta = 0.0_f64;
            for i in 0..d {
                let next = y[i] - uval[i];
                delta = delta.max((next - x[i]).abs());
                x[i] = next;
            }
            if delta <= FIXED_POINT_TOL {
                return Ok(x);
            }
        }
        Err(Error::SolverDiverged(
            "inverse fixed point stalled; gradient bound likely violated".into(),
        ))
    }

    pub fn invert_at_time(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        self.invert(self.u.level_of_time(t), y)
    }
}

/// Interior sup of the largest gradient row norm.
fn interior_sup_grad(grad: &GridField, margin: f64) -> f64 {
    let grid = *grad.grid();
    let d = grid.dim();
    let mut sup: f64 = 0.0;
    for level in 0..=grad.times().steps() {
        for node in 0..grid.node_count() {
            if !grid.is_interior(node, margin) {
                continue;
            }
            for i in 0..d {
                let row: Vec<f64> = (0..d).map(|j| grad.at(level, node, i * d + j)).collect();
                sup = sup.max(crate::linalg::norm(&row));
            }
        }
    }
    sup
}

/// Outcome of the gradient bound check.
#[derive(Debug, Clone, Copy)]
pub struct GradientCheck {
    pub sup_grad: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn gradient_bound_check(u: &GridField, c_b: f64, margin: f64, tol: f64) -> GradientCheck {
    let grad = gradient_field(u);
    let sup_grad = interior_sup_grad(&grad, margin);
    let bound = c_b / (1.0 + c_b);
    GradientCheck {
        sup_grad,
        bound,
        tolerance: tol,
        pass: sup_grad <= bound + tol,
    }
}

/// Solves the transform with the a-posteriori doubling loop on `C_b`.
pub fn solve_transform(
    drift: &DriftField,
    diff: &DiffusionField,
    grid: &PdeGrid,
    times: &TimeGrid,
    settings: &ZvonkinSettings,
) -> Result<ZvonkinTransform> {
    if !(settings.c_b_seed > 0.0) {
        return Err(Error::Domain("c_b seed must be positive".into()));
    }
    let tol = settings.grad_tol_h_factor * grid.h();
    let mut c_b = settings.c_b_seed;
    for round in 0..=settings.max_doublings {
        let u = zvonkin_solve(drift, diff, c_b, grid, times)?;
        let grad_u = gradient_field(&u);
        let sup_grad = interior_sup_grad(&grad_u, settings.wall_margin);
        if sup_grad <= c_b / (1.0 + c_b) + tol {
            return Ok(ZvonkinTransform {
                u,
                grad_u,
                c_b,
                sup_grad,
                wall_margin: settings.wall_margin,
                out_of_box: AtomicU64::new(0),
            });
        }
        if round == settings.max_doublings {
            break;
        }
        c_b *= 2.0;
    }
    Err(Error::SolverDiverged(format!(
        "gradient bound not reached after {} doublings (last C_b = {c_b})",
        settings.max_doublings
    )))
}

/// Sampled two-sided distortion check of `Phi`.
#[derive(Debug, Clone)]
pub struct BiLipschitzReport {
    pub pairs: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub tolerance: f64,
    pub violations: usize,
    /// First violating pair, if any.
    pub witness: Option<(Vec<f64>, Vec<f64>, f64)>,
    pub pass: bool,
}

impl BiLipschitzReport {
    /// Largest observed `|x - y| / |Phi x - Phi y|`: the measured Lipschitz
    /// constant of the inverse map.
    pub fn measured_inverse_lip(&self) -> f64 {
        1.0 / self.min_ratio
    }
}

/// Samples `pairs` point pairs inside the margin-reduced box at random
/// levels and checks
/// `|x - y| / (1 + C_b) <= |Phi x - Phi y| <= (1 + 2 C_b)/(1 + C_b) |x - y|`.
/// Pairs closer than one grid step are re-drawn: below that separation the
/// ratio is dominated by interpolation error, not by the map. The tolerance
/// absorbs the remaining interpolation error.
pub fn phi_bilipschitz_check(
    transform: &ZvonkinTransform,
    pairs: usize,
    seed: u64,
    tol: f64,
) -> BiLipschitzReport {
    use rand::Rng;
    let d = transform.dim();
    let c_b = transform.c_b();
    let lower = 1.0 / (1.0 + c_b);
    let upper = (1.0 + 2.0 * c_b) / (1.0 + c_b);
    let reach = transform.grid().half_width() - transform.wall_margin();
    let levels = transform.times().steps();
    let mut rng = NoiseSource::new(seed).with_stream(StreamPurpose::Probe.base()).rng();
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    let mut witness = None;
    for _ in 0..pairs {
        let level = rng.random_range(0..=levels);
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        loop {
            for i in 0..d {
                x[i] = rng.random_range(-reach..reach);
                y[i] = rng.random_range(-reach..reach);
            }
            if crate::linalg::dist(&x, &y) >= transform.grid().h() {
                break;
            }
        }
        let px = transform.phi(level, &x);
        let py = transform.phi(level, &y);
        let ratio = crate::linalg::dist(&px, &py) / crate::linalg::dist(&x, &y);
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        if ratio < lower - tol || ratio > upper + tol {
            violations += 1;
            if witness.is_none() {
                witness = Some((x.clone(), y.clone(), ratio));
            }
        }
    }
    BiLipschitzReport {
        pairs,
        min_ratio,
        max_ratio,
        lower_bound: lower,
        upper_bound: upper,
        tolerance: tol,
        violations,
        witness,
        pass: violations == 0,
    }
}

/// Transformed diffusion `sigma~(t, y) = (grad Phi * sigma)(t, Psi(t, y))`,
/// with declared sup-bound `sup|sigma| (1 + 2 C_b)/(1 + C_b)`. Out-of-box
/// queries use constant extension and bump the transform's clamp counter.
pub fn transformed_sigma(
    diff: &DiffusionField,
    transform: Arc<ZvonkinTransform>,
) -> Result<DiffusionField> {
    let d = transform.dim();
    if diff.dim() != d {
        return Err(Error::GridMismatch(
            "diffusion dimension does not match the transform".into(),
        ));
    }
    let c_b = transform.c_b();
    let sup = diff.sup_bound() * (1.0 + 2.0 * c_b) / (1.0 + c_b);
    // Declared floor for the transformed field: the inverse Jacobian is
    // bounded by 1 + C_b, shrinking quadratic forms by its square at worst.
    let floor = diff.ellipticity() / ((1.0 + c_b) * (1.0 + c_b));
    let inner = diff.clone();
    DiffusionField::from_fn(d, sup, floor, move |t, y, out| {
        let level = transform.u().level_of_time(t);
        let x = transform
            .invert(level, y)
            .unwrap_or_else(|_| y.to_vec());
        let mut jac = vec![0.0; d * d];
        transform.grad_phi(level, &x, &mut jac);
        let mut sig = vec![0.0; d * d];
        inner.eval_into(t, &x, &mut sig);
        crate::linalg::mat_mul(&jac, &sig, d, out);
    })
}

/// Interior grid sup of the spectral norm of `grad Phi * sigma`.
pub fn sigma_tilde_sup(diff: &DiffusionField, transform: &ZvonkinTransform) -> f64 {
    let d = transform.dim();
    let grid = transform.grid();
    let times = transform.times();
    let mut sup: f64 = 0.0;
    let mut jac = vec![0.0; d * d];
    let mut sig = vec![0.0; d * d];
    let mut prod = vec![0.0; d * d];
    for level in 0..=times.steps() {
        let t = times.time(level);
        for node in 0..grid.node_count() {
            if !grid.is_interior(node, transform.wall_margin()) {
                continue;
            }
            let x = grid.position(node);
            jac.fill(0.0);
            for i in 0..d {
                for j in 0..d {
                    jac[i * d + j] = transform.grad_u().at(level, node, i * d + j);
                }
                jac[i * d + i] += 1.0;
            }
            diff.eval_into(t, &x, &mut sig);
            crate::linalg::mat_mul(&jac, &sig, d, &mut prod);
            sup = sup.max(crate::linalg::spectral_norm(&prod, d));
        }
    }
    sup
}

/// One block of the martingale diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct BlockTest {
    pub block: usize,
    pub comp: usize,
    pub mean: f64,
    pub stderr: f64,
    pub z: f64,
    pub p: f64,
}

/// Result of the driftless-residual diagnostic on `Y = Phi(t, X)`.
#[derive(Debug, Clone)]
pub struct MartingaleReport {
    pub blocks: Vec<BlockTest>,
    pub min_block_p: f64,
    /// Per component: (slope, stderr, z, p) of increment-on-level regression.
    pub slopes: Vec<(f64, f64, f64, f64)>,
    pub min_slope_p: f64,
    pub alpha: f64,
    pub paths: usize,
}

impl MartingaleReport {
    pub fn pass(&self) -> bool {
        self.min_block_p >= self.alpha && self.min_slope_p >= self.alpha
    }
}

/// Simulates `paths` trajectories of the original SDE, maps them through
/// `phi` (level-indexed), and tests the increments of the image process:
/// per-block z-tests of zero mean and a pooled regression of increments on
/// the current level. `phi` is any map `(level, state) -> image`, so a
/// deliberate misuse (identity on a drifted model) can serve as a negative
/// control.
pub fn martingale_residual_check<F>(
    phi: F,
    drift: &DriftField,
    diff: &DiffusionField,
    x0: &[f64],
    times: &TimeGrid,
    noise: NoiseSource,
    paths: usize,
    n_blocks: usize,
    alpha: f64,
) -> Result<MartingaleReport>
where
    F: Fn(usize, &[f64]) -> Vec<f64> + Send + Sync,
{
    if paths < 2 || n_blocks == 0 {
        return Err(Error::Domain("need >= 2 paths and >= 1 block".into()));
    }
    let d = x0.len();
    let n = times.steps();
    struct PerPath {
        block_sums: Vec<f64>,
        // Regression moments per component: sy, syy, sd, syd, sdd, count.
        reg: Vec<[f64; 6]>,
    }
    let per_path: Result<Vec<PerPath>> = crate::map_indexed(paths, |i| {
        let path = crate::sde::euler_maruyama(
            drift,
            diff,
            x0,
            times,
            &noise.for_path(StreamPurpose::Martingale, i),
        )?;
        let mut block_sums = vec![0.0; n_blocks * d];
        let mut reg = vec![[0.0; 6]; d];
        let mut y_prev = phi(0, path.node(0));
        for k in 1..=n {
            let y = phi(k, path.node(k));
            let block = (k - 1) * n_blocks / n;
            for c in 0..d {
                let incr = y[c] - y_prev[c];
                block_sums[block * d + c] += incr;
                let m = &mut reg[c];
                m[0] += y_prev[c];
                m[1] += y_prev[c] * y_prev[c];
                m[2] += incr;
                m[3] += y_prev[c] * incr;
                m[4] += incr * incr;
                m[5] += 1.0;
            }
            y_prev = y;
        }
        Ok(PerPath { block_sums, reg })
    })
    .into_iter()
    .collect();
    let per_path = per_path?;

    let mut blocks = Vec::with_capacity(n_blocks * d);
    let mut min_block_p = f64::INFINITY;
    for block in 0..n_blocks {
        for c in 0..d {
            let samples: Vec<f64> = per_path
                .iter()
                .map(|p| p.block_sums[block * d + c])
                .collect();
            let ms = MeanStderr::from_samples(&samples).expect("paths >= 2");
            let (z, p) = if ms.stderr == 0.0 {
                if ms.mean == 0.0 {
                    (0.0, 1.0)
                } else {
                    (f64::INFINITY, 0.0)
                }
            } else {
                let z = ms.mean / ms.stderr;
                (z, stats::two_sided_p(z))
            };
            min_block_p = min_block_p.min(p);
            blocks.push(BlockTest {
                block,
                comp: c,
                mean: ms.mean,
                stderr: ms.stderr,
                z,
                p,
            });
        }
    }

    let mut slopes = Vec::with_capacity(d);
    let mut min_slope_p = f64::INFINITY;
    for c in 0..d {
        let mut m = [0.0; 6];
        for p in &per_path {
            for j in 0..6 {
                m[j] += p.reg[c][j];
            }
        }
        let count = m[5];
        let syy_c = m[1] - m[0] * m[0] / count;
        let syd_c = m[3] - m[0] * m[2] / count;
        let sdd_c = m[4] - m[2] * m[2] / count;
        let (slope, se) = if syy_c <= 0.0 {
            (0.0, f64::INFINITY)
        } else {
            let slope = syd_c / syy_c;
            let ssr = (sdd_c - slope * syd_c).max(0.0);
            (slope, (ssr / (count - 2.0) / syy_c).sqrt())
        };
        let z = if se == 0.0 { 0.0 } else { slope / se };
        let p = stats::two_sided_p(z);
        min_slope_p = min_slope_p.min(p);
        slopes.push((slope, se, z, p));
    }

    Ok(MartingaleReport {
        blocks,
        min_block_p,
        slopes,
        min_slope_p,
        alpha,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_settings() -> ZvonkinSettings {
        ZvonkinSettings {
            wall_margin: 0.25,
            ..Default::default()
        }
    }

    fn sign_transform() -> ZvonkinTransform {
        let grid = PdeGrid::new(1, 4.0, 0.02).unwrap();
        let times = TimeGrid::new(0.5, 100).unwrap();
        solve_transform(
            &DriftField::sign(1, 1.0),
            &DiffusionField::identity(1),
            &grid,
            &times,
            &identity_settings(),
        )
        .unwrap()
    }

    #[test]
    fn zero_drift_transform_is_identity() {
        let grid = PdeGrid::new(1, 2.0, 0.05).unwrap();
        let times = TimeGrid::new(0.5, 20).unwrap();
        let tr = solve_transform(
            &DriftField::zero(1),
            &DiffusionField::identity(1),
            &grid,
            &times,
            &identity_settings(),
        )
        .unwrap();
        assert_eq!(tr.sup_grad(), 0.0);
        for x in [-1.5, 0.0, 0.3, 1.9] {
            assert_eq!(tr.phi(3, &[x]), vec![x]);
            assert_eq!(tr.invert(3, &[x]).unwrap(), vec![x]);
        }
        let check = gradient_bound_check(tr.u(), 0.5, 0.25, 0.0);
        assert!(check.pass);
        assert_eq!(check.sup_grad, 0.0);
    }

    #[test]
    fn constant_drift_transform_is_additive_shift() {
        // b = 1, C_b = 0 would give u = T - t; the doubling loop starts at
        // c_b_seed, but u is flat in x so the gradient check passes at once
        // and Phi(t, x) = x + (T - t)/(1 + c_b).
        let grid = PdeGrid::new(1, 2.0, 0.05).unwrap();
        let times = TimeGrid::new(0.5, 50).unwrap();
        let settings = identity_settings();
        let tr = solve_transform(
            &DriftField::constant(vec![1.0]),
            &DiffusionField::identity(1),
            &grid,
            &times,
            &settings,
        )
        .unwrap();
        assert_eq!(tr.c_b(), settings.c_b_seed);
        let shift = |level: usize| {
            (times.horizon() - times.time(level)) / (1.0 + tr.c_b())
        };
        for level in [0_usize, 25, 50] {
            let p = tr.phi(level, &[0.3]);
            assert!((p[0] - (0.3 + shift(level))).abs() < 1e-3);
            // Psi undoes the shift.
            let back = tr.invert(level, &p).unwrap();
            assert!((back[0] - 0.3).abs() < 1e-10);
        }
        // sigma~ is sigma relabeled: spectral sup stays 1.
        let sup = sigma_tilde_sup(&DiffusionField::identity(1), &tr);
        assert!((sup - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sign_transform_passes_all_static_checks() {
        let tr = sign_transform();
        // Gradient bound with 10h tolerance.
        assert!(tr.sup_grad() <= tr.c_b() / (1.0 + tr.c_b()) + 10.0 * tr.grid().h());
        // Round trip on sampled points.
        use rand::Rng;
        let mut rng = NoiseSource::new(31).rng();
        for _ in 0..10_000 {
            let level = rng.random_range(0..=tr.times().steps());
            let x = [rng.random_range(-3.5..3.5)];
            let y = tr.phi(level, &x);
            let back = tr.invert(level, &y).unwrap();
            assert!((back[0] - x[0]).abs() <= 1e-8, "x {} back {}", x[0], back[0]);
        }
        // Two-sided distortion on sampled pairs.
        let report = phi_bilipschitz_check(&tr, 10_000, 7, 10.0 * tr.grid().h());
        assert!(report.pass, "violations: {:?}", report.witness);
        assert!(report.measured_inverse_lip() <= 1.0 + tr.c_b() + 1e-6);
        // sigma~ sup respects the distortion envelope.
        let sup = sigma_tilde_sup(&DiffusionField::identity(1), &tr);
        assert!(sup <= (1.0 + 2.0 * tr.c_b()) / (1.0 + tr.c_b()) + 1e-9);
    }

    #[test]
    fn transformed_sigma_matches_pointwise_products() {
        let tr = Arc::new(sign_transform());
        let diff = DiffusionField::identity(1);
        let st = transformed_sigma(&diff, tr.clone()).unwrap();
        let level = 40;
        let t = tr.times().time(level);
        for x in [-2.0, -0.4, 0.7, 2.5] {
            let y = tr.phi(level, &[x]);
            let mut got = [0.0];
            st.eval_into(t, &y, &mut got);
            let mut jac = [0.0];
            tr.grad_phi(level, &[x], &mut jac);
            assert!((got[0] - jac[0]).abs() < 1e-6, "x {x}: {} vs {}", got[0], jac[0]);
        }
    }

    #[test]
    fn doubling_loop_raises_insufficient_seed() {
        // A steep drift with a tiny seed forces at least one doubling.
        let grid = PdeGrid::new(1, 3.0, 0.05).unwrap();
        let times = TimeGrid::new(0.5, 50).unwrap();
        let settings = ZvonkinSettings {
            c_b_seed: 0.05,
            wall_margin: 0.25,
            ..Default::default()
        };
        let tr = solve_transform(
            &DriftField::sign(1, 2.0),
            &DiffusionField::identity(1),
            &grid,
            &times,
            &settings,
        )
        .unwrap();
        assert!(tr.c_b() > settings.c_b_seed);
        assert!(tr.sup_grad() <= tr.c_b() / (1.0 + tr.c_b()) + 10.0 * grid.h());
    }

    #[test]
    fn martingale_check_passes_for_true_transform_and_fails_for_identity() {
        let tr = sign_transform();
        let drift = DriftField::sign(1, 1.0);
        let diff = DiffusionField::identity(1);
        let times = *tr.times();
        let noise = NoiseSource::new(51);
        let paths = 20_000;
        let report = martingale_residual_check(
            |level, x| tr.phi(level, x),
            &drift,
            &diff,
            &[0.5],
            &times,
            noise,
            paths,
            10,
            0.01,
        )
        .unwrap();
        assert!(
            report.pass(),
            "min block p {} slope p {}",
            report.min_block_p,
            report.min_slope_p
        );
        // Negative control: the identity map leaves the sign drift in place.
        let control = martingale_residual_check(
            |_, x| x.to_vec(),
            &drift,
            &diff,
            &[0.5],
            &times,
            noise,
            paths,
            10,
            0.01,
        )
        .unwrap();
        assert!(!control.pass());
    }
}
