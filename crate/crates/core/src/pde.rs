//! Truncated-box grids and the backward parabolic solver used by the
//! drift-removing transform.
//!
//! The terminal-value system
//! `d_t u^i + b . grad u^i + 1/2 tr(a D^2 u^i) + b^i/(1+C_b) = 0`, `u(T) = 0`
//! (with `a = sigma sigma^*`) is marched backward with a theta = 1/2
//! Crank-Nicolson step, coefficients frozen at the half level. Space is a
//! symmetric box `[-L, L]^d` for d in {1, 2} with homogeneous Neumann walls
//! realized by ghost reflection; the box is sized so simulated paths exit
//! only with negligible probability, and a margin band near the walls is
//! excluded from every sup/residual/gradient scan.

use crate::error::{Error, Result};
use crate::field::{DiffusionField, DriftField};
use crate::grid::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeGrid {
    dim: usize,
    half_width: f64,
    h: f64,
    nodes_per_axis: usize,
}

impl PdeGrid {
    /// Symmetric box `[-L, L]^d`. The step is snapped so that `2L/h` is an
    /// even integer, which puts a node exactly at the origin.
    pub fn new(dim: usize, half_width: f64, h: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::Domain(format!(
                "pde grid supports d in {{1, 2}}, got {dim}"
            )));
        }
        if !(half_width > 0.0) || !(h > 0.0) || h >= half_width {
            return Err(Error::Domain(format!(
                "need 0 < h < L, got h={h}, L={half_width}"
            )));
        }
        let mut m = (2.0 * half_width / h).round() as usize;
        if m % 2 == 1 {
            m += 1;
        }
        let h = 2.0 * half_width / m as f64;
        Ok(Self {
            dim,
            half_width,
            h,
            nodes_per_axis: m + 1,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + self.h * i as f64
    }

    /// Spatial position of a flat node index.
    pub fn position(&self, node: usize) -> Vec<f64> {
        match self.dim {
            1 => vec![self.coord(node)],
            _ => {
                let n = self.nodes_per_axis;
                vec![self.coord(node / n), self.coord(node % n)]
            }
        }
    }

    /// True when every coordinate satisfies `|x| <= L - margin`.
    pub fn is_interior(&self, node: usize, margin: f64) -> bool {
        self.position(node)
            .iter()
            .all(|x| x.abs() <= self.half_width - margin)
    }
}

/// Ghost reflection for homogeneous Neumann walls.
fn reflect(i: isize, n: usize) -> usize {
    if i < 0 {
        (-i) as usize
    } else if i as usize >= n {
        2 * (n - 1) - i as usize
    } else {
        i as usize
    }
}

/// Values on the space-time grid with `comps` components per node:
/// `data[(level * nodes + node) * comps + c]`.
#[derive(Debug, Clone)]
pub struct GridField {
    grid: PdeGrid,
    times: TimeGrid,
    comps: usize,
    data: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: PdeGrid, times: TimeGrid, comps: usize) -> Self {
        let len = (times.steps() + 1) * grid.node_count() * comps;
        Self {
            grid,
            times,
            comps,
            data: vec![0.0; len],
        }
    }

    pub fn grid(&self) -> &PdeGrid {
        &self.grid
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn comps(&self) -> usize {
        self.comps
    }

    #[inline]
    pub fn at(&self, level: usize, node: usize, comp: usize) -> f64 {
        self.data[(level * self.grid.node_count() + node) * self.comps + comp]
    }

    #[inline]
    pub fn set(&mut self, level: usize, node: usize, comp: usize, v: f64) {
        self.data[(level * self.grid.node_count() + node) * self.comps + comp] = v;
    }

    /// Maps a grid-aligned time to its level index.
    pub fn level_of_time(&self, t: f64) -> usize {
        let n = self.times.steps() as f64;
        ((t / self.times.horizon() * n).round() as usize).min(self.times.steps())
    }

    /// Multilinear interpolation in space at a fixed level, with constant
    /// extension outside the box. Returns true when `x` had to be clamped.
    pub fn interpolate(&self, level: usize, x: &[f64], out: &mut [f64]) -> bool {
        debug_assert_eq!(x.len(), self.grid.dim());
        debug_assert_eq!(out.len(), self.comps);
        let n = self.grid.nodes_per_axis();
        let l = self.grid.half_width();
        let h = self.grid.h();
        let mut clamped = false;
        let mut locate = |xi: f64| -> (usize, f64) {
            let mut v = xi;
            if v < -l {
                v = -l;
                clamped = true;
            } else if v > l {
                v = l;
                clamped = true;
            }
            let pos = (v + l) / h;
            let j = (pos.floor() as usize).min(n - 2);
            (j, pos - j as f64)
        };
        match self.grid.dim() {
            1 => {
                let (j, f) = locate(x[0]);
                for c in 0..self.comps {
                    out[c] = self.at(level, j, c) * (1.0 - f) + self.at(level, j + 1, c) * f;
                }
            }
            _ => {
                let (jx, fx) = locate(x[0]);
                let (jy, fy) = locate(x[1]);
                for c in 0..self.comps {
                    let v00 = self.at(level, jx * n + jy, c);
                    let v01 = self.at(level, jx * n + jy + 1, c);
                    let v10 = self.at(level, (jx + 1) * n + jy, c);
                    let v11 = self.at(level, (jx + 1) * n + jy + 1, c);
                    out[c] = v00 * (1.0 - fx) * (1.0 - fy)
                        + v01 * (1.0 - fx) * fy
                        + v10 * fx * (1.0 - fy)
                        + v11 * fx * fy;
                }
            }
        }
        clamped
    }
}

/// Per-node frozen coefficients of the spatial operator at one time.
struct Coefficients {
    /// Drift per node, stride d.
    b: Vec<f64>,
    /// `a = sigma sigma^*` per node, stride d*d.
    a: Vec<f64>,
}

fn freeze_coefficients(
    drift: &DriftField,
    diff: &DiffusionField,
    grid: &PdeGrid,
    t: f64,
) -> Coefficients {
    let d = grid.dim();
    let nodes = grid.node_count();
    let mut b = vec![0.0; nodes * d];
    let mut a = vec![0.0; nodes * d * d];
    let mut sig = vec![0.0; d * d];
    let mut gram = vec![0.0; d * d];
    for node in 0..nodes {
        let x = grid.position(node);
        drift.eval_into(t, &x, &mut b[node * d..(node + 1) * d]);
        diff.eval_into(t, &x, &mut sig);
        crate::linalg::mat_mul_transpose(&sig, d, &mut gram);
        a[node * d * d..(node + 1) * d * d].copy_from_slice(&gram);
    }
    Coefficients { b, a }
}

/// `(A u)(node)` for one scalar component, with Neumann ghost reflection.
/// At wall nodes the odd (first-derivative) stencils vanish with the ghosts.
fn apply_operator(coef: &Coefficients, grid: &PdeGrid, u: &[f64], node: usize) -> f64 {
    let h = grid.h();
    match grid.dim() {
        1 => {
            let n = grid.nodes_per_axis();
            let i = node as isize;
            let um = u[reflect(i - 1, n)];
            let up = u[reflect(i + 1, n)];
            let b = coef.b[node];
            let a = coef.a[node];
            let first = if node == 0 || node == n - 1 {
                0.0
            } else {
                b * (up - um) / (2.0 * h)
            };
            first + 0.5 * a * (up - 2.0 * u[node] + um) / (h * h)
        }
        _ => {
            let n = grid.nodes_per_axis();
            let ix = (node / n) as isize;
            let iy = (node % n) as isize;
            let at = |dx: isize, dy: isize| u[reflect(ix + dx, n) * n + reflect(iy + dy, n)];
            let b = &coef.b[node * 2..node * 2 + 2];
            let a = &coef.a[node * 4..node * 4 + 4];
            let on_wall_x = ix == 0 || ix as usize == n - 1;
            let on_wall_y = iy == 0 || iy as usize == n - 1;
            let dx1 = if on_wall_x {
                0.0
            } else {
                (at(1, 0) - at(-1, 0)) / (2.0 * h)
            };
            let dy1 = if on_wall_y {
                0.0
            } else {
                (at(0, 1) - at(0, -1)) / (2.0 * h)
            };
            let dxx = (at(1, 0) - 2.0 * at(0, 0) + at(-1, 0)) / (h * h);
            let dyy = (at(0, 1) - 2.0 * at(0, 0) + at(0, -1)) / (h * h);
            let dxy = if on_wall_x || on_wall_y {
                0.0
            } else {
                (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h * h)
            };
            b[0] * dx1 + b[1] * dy1 + 0.5 * (a[0] * dxx + 2.0 * a[1] * dxy + a[3] * dyy)
        }
    }
}

const GS_TOL: f64 = 1e-12;
const GS_MAX_SWEEPS: usize = 20_000;

/// One implicit half of the Crank-Nicolson step for a single component:
/// solves `(I - dt/2 A) u_new = rhs`. 1D goes through a direct tridiagonal
/// solve; 2D runs Gauss-Seidel sweeps starting from the previous level.
fn implicit_solve(
    coef: &Coefficients,
    grid: &PdeGrid,
    dt: f64,
    rhs: &[f64],
    u: &mut [f64],
) -> Result<()> {
    match grid.dim() {
        1 => {
            let n = grid.nodes_per_axis();
            let h = grid.h();
            let mut lower = vec![0.0; n];
            let mut diag = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 0..n {
                let b = coef.b[i];
                let a = coef.a[i];
                let adv = b / (2.0 * h);
                let dif = a / (2.0 * h * h);
                let (mut lo, mut up) = (dif - adv, dif + adv);
                if i == 0 {
                    up = 2.0 * dif;
                    lo = 0.0;
                } else if i == n - 1 {
                    lo = 2.0 * dif;
                    up = 0.0;
                }
                lower[i] = -0.5 * dt * lo;
                diag[i] = 1.0 + 0.5 * dt * (2.0 * dif);
                upper[i] = -0.5 * dt * up;
            }
            thomas(&lower, &diag, &upper, rhs, u)
        }
        _ => {
            let nodes = grid.node_count();
            let h = grid.h();
            let mut scale = 0.0_f64;
            for v in rhs {
                scale = scale.max(v.abs());
            }
            let tol = GS_TOL * (1.0 + scale);
            for _ in 0..GS_MAX_SWEEPS {
                let mut max_delta = 0.0_f64;
                for node in 0..nodes {
                    let a_trace = coef.a[node * 4] + coef.a[node * 4 + 3];
                    let diag = 1.0 + 0.5 * dt * a_trace / (h * h);
                    // Split A u into its diagonal part and the rest:
                    // (I - dt/2 A) u = rhs  <=>
                    // u = (rhs + dt/2 (A u + (tr a / h^2) u)) / diag.
                    let au = apply_operator(coef, grid, u, node);
                    let off = au + a_trace / (h * h) * u[node];
                    let new = (rhs[node] + 0.5 * dt * off) / diag;
                    max_delta = max_delta.max((new - u[node]).abs());
                    u[node] = new;
                }
                if max_delta <= tol {
                    return Ok(());
                }
            }
            Err(Error::SolverDiverged(
                "gauss-seidel exhausted its sweep budget".into(),
            ))
        }
    }
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64], out: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    if diag[0] == 0.0 {
        return Err(Error::SolverDiverged("zero pivot in tridiagonal solve".into()));
    }
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        if m == 0.0 {
            return Err(Error::SolverDiverged("zero pivot in tridiagonal solve".into()));
        }
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    out[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = d[i] - c[i] * out[i + 1];
    }
    Ok(())
}

/// Solves the terminal-value system backward in time; the result has one
/// component per state coordinate.
pub fn zvonkin_solve(
    drift: &DriftField,
    diff: &DiffusionField,
    c_b: f64,
    grid: &PdeGrid,
    times: &TimeGrid,
) -> Result<GridField> {
    if c_b < 0.0 {
        return Err(Error::Domain(format!("c_b must be >= 0, got {c_b}")));
    }
    let d = grid.dim();
    if drift.dim() != d || diff.dim() != d {
        return Err(Error::GridMismatch(
            "pde grid dimension does not match the fields".into(),
        ));
    }
    let nodes = grid.node_count();
    let n = times.steps();
    let dt = times.dt();
    let mut u = GridField::zeros(*grid, *times, d);
    let mut comp_next = vec![0.0; nodes];
    let mut comp_new = vec![0.0; nodes];
    let mut rhs = vec![0.0; nodes];
    for m in (0..n).rev() {
        let t_mid = times.midpoint(m);
        let coef = freeze_coefficients(drift, diff, grid, t_mid);
        for comp in 0..d {
            for node in 0..nodes {
                comp_next[node] = u.at(m + 1, node, comp);
            }
            // rhs = (I + dt/2 A) u^{m+1} + dt * b^comp/(1+C_b)
            for node in 0..nodes {
                let au = apply_operator(&coef, grid, &comp_next, node);
                let source = coef.b[node * d + comp] / (1.0 + c_b);
                rhs[node] = comp_next[node] + 0.5 * dt * au + dt * source;
            }
            comp_new.copy_from_slice(&comp_next);
            implicit_solve(&coef, grid, dt, &rhs, &mut comp_new)?;
            for node in 0..nodes {
                if !comp_new[node].is_finite() {
                    return Err(Error::NonFinite { step: m });
                }
                u.set(m, node, comp, comp_new[node]);
            }
        }
    }
    Ok(u)
}

/// Independent consistency residual of a solved field: central differences
/// in time and space of `d_t u + b . grad u + 1/2 tr(a D^2 u) + b/(1+C_b)`,
/// sup over components, interior time levels and nodes at least `margin`
/// away from the walls. The solver enforces its own update equations to
/// solver precision, so this check is deliberately a *different*
/// discretization: it is second order for smooth solutions and halving both
/// steps should shrink it by about four.
///
/// Levels with `T - t < terminal_margin` are skipped: a discontinuous source
/// puts a similarity layer at the terminal corner whose time derivatives are
/// unbounded, so consistency there says nothing about the scheme. The margin
/// is a fixed time width, like the wall margin, so refinement studies compare
/// the same region.
pub fn pde_residual(
    u: &GridField,
    drift: &DriftField,
    diff: &DiffusionField,
    c_b: f64,
    margin: f64,
    terminal_margin: f64,
) -> f64 {
    let grid = *u.grid();
    let times = *u.times();
    let d = grid.dim();
    let nodes = grid.node_count();
    let n = times.steps();
    let dt = times.dt();
    let levels: Vec<f64> = crate::map_indexed(n - 1, |mi| {
        let m = mi + 1;
        if times.horizon() - times.time(m) < terminal_margin {
            return 0.0;
        }
        let coef = freeze_coefficients(drift, diff, &grid, times.time(m));
        let mut comp = vec![0.0; nodes];
        let mut sup: f64 = 0.0;
        for c in 0..d {
            for node in 0..nodes {
                comp[node] = u.at(m, node, c);
            }
            for node in 0..nodes {
                if !grid.is_interior(node, margin) {
                    continue;
                }
                let du_dt = (u.at(m + 1, node, c) - u.at(m - 1, node, c)) / (2.0 * dt);
                let au = apply_operator(&coef, &grid, &comp, node);
                let source = coef.b[node * d + c] / (1.0 + c_b);
                sup = sup.max((du_dt + au + source).abs());
            }
        }
        sup
    });
    levels.into_iter().fold(0.0, f64::max)
}

/// Central-difference spatial gradient of a `d`-component field, stored as a
/// `d x d` field with component `i*d + j = d u^i / d x_j`. Wall nodes carry
/// the reflected (zero normal derivative) value.
pub fn gradient_field(u: &GridField) -> GridField {
    let grid = *u.grid();
    let times = *u.times();
    let d = grid.dim();
    let n = grid.nodes_per_axis();
    let h = grid.h();
    let mut g = GridField::zeros(grid, times, d * d);
    for level in 0..=times.steps() {
        for node in 0..grid.node_count() {
            for i in 0..d {
                match d {
                    1 => {
                        let im = reflect(node as isize - 1, n);
                        let ip = reflect(node as isize + 1, n);
                        let v = if node == 0 || node == n - 1 {
                            0.0
                        } else {
                            (u.at(level, ip, i) - u.at(level, im, i)) / (2.0 * h)
                        };
                        g.set(level, node, 0, v);
                    }
                    _ => {
                        let ix = (node / n) as isize;
                        let iy = (node % n) as isize;
                        let at = |dx: isize, dy: isize| {
                            u.at(level, reflect(ix + dx, n) * n + reflect(iy + dy, n), i)
                        };
                        let gx = if ix == 0 || ix as usize == n - 1 {
                            0.0
                        } else {
                            (at(1, 0) - at(-1, 0)) / (2.0 * h)
                        };
                        let gy = if iy == 0 || iy as usize == n - 1 {
                            0.0
                        } else {
                            (at(0, 1) - at(0, -1)) / (2.0 * h)
                        };
                        g.set(level, node, i * d, gx);
                        g.set(level, node, i * d + 1, gy);
                    }
                }
            }
        }
    }
    g
}

/// Writes `t,x(,y),u1(,u2),grad` rows for every node of the selected levels,
/// where `grad` is the largest row norm of the gradient at the node.
pub fn export_fields_csv<W: std::io::Write>(
    u: &GridField,
    grad: &GridField,
    levels: &[usize],
    out: &mut W,
) -> Result<()> {
    let d = u.grid().dim();
    match d {
        1 => writeln!(out, "t,x,u1,grad")?,
        _ => writeln!(out, "t,x,y,u1,u2,grad")?,
    }
    for &level in levels {
        let t = u.times().time(level);
        for node in 0..u.grid().node_count() {
            let pos = u.grid().position(node);
            let mut grad_sup = 0.0_f64;
            for i in 0..d {
                let row: Vec<f64> = (0..d).map(|j| grad.at(level, node, i * d + j)).collect();
                grad_sup = grad_sup.max(crate::linalg::norm(&row));
            }
            match d {
                1 => writeln!(out, "{},{},{},{}", t, pos[0], u.at(level, node, 0), grad_sup)?,
                _ => writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    t,
                    pos[0],
                    pos[1],
                    u.at(level, node, 0),
                    u.at(level, node, 1),
                    grad_sup
                )?,
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_1d(l: f64, h: f64) -> PdeGrid {
        PdeGrid::new(1, l, h).unwrap()
    }

    #[test]
    fn grid_snaps_origin_onto_a_node() {
        let g = grid_1d(6.0, 0.01);
        assert_eq!(g.nodes_per_axis(), 1201);
        assert_eq!(g.coord(600), 0.0);
        assert!((g.h() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn zero_drift_gives_identically_zero_solution() {
        let grid = grid_1d(2.0, 0.05);
        let times = TimeGrid::new(0.5, 20).unwrap();
        let u = zvonkin_solve(
            &DriftField::zero(1),
            &DiffusionField::identity(1),
            0.0,
            &grid,
            &times,
        )
        .unwrap();
        for level in 0..=times.steps() {
            for node in 0..grid.node_count() {
                assert_eq!(u.at(level, node, 0), 0.0);
            }
        }
    }

    #[test]
    fn constant_drift_has_linear_in_time_solution() {
        // b = 1, sigma = 1, C_b = 0: u(t,x) = T - t solves the system and is
        // compatible with Neumann walls; the grid answer matches to scheme
        // accuracy.
        let grid = grid_1d(2.0, 0.05);
        let times = TimeGrid::new(0.5, 50).unwrap();
        let u = zvonkin_solve(
            &DriftField::constant(vec![1.0]),
            &DiffusionField::identity(1),
            0.0,
            &grid,
            &times,
        )
        .unwrap();
        let h = grid.h();
        let dt = times.dt();
        let tol = 10.0 * (h * h + dt * dt);
        for level in 0..=times.steps() {
            let expect = times.horizon() - times.time(level);
            for node in 0..grid.node_count() {
                assert!(
                    (u.at(level, node, 0) - expect).abs() <= tol,
                    "level {level} node {node}: {} vs {expect}",
                    u.at(level, node, 0)
                );
            }
        }
        // In this flat-in-x case the gradient vanishes.
        let g = gradient_field(&u);
        for node in 1..grid.node_count() - 1 {
            assert!(g.at(0, node, 0).abs() < 1e-8);
        }
    }

    #[test]
    fn sign_drift_solution_is_odd() {
        let grid = grid_1d(4.0, 0.02);
        let times = TimeGrid::new(0.5, 100).unwrap();
        let u = zvonkin_solve(
            &DriftField::sign(1, 1.0),
            &DiffusionField::identity(1),
            1.0,
            &grid,
            &times,
        )
        .unwrap();
        let n = grid.nodes_per_axis();
        for level in 0..=times.steps() {
            for node in 0..n {
                let mirrored = n - 1 - node;
                let lhs = u.at(level, node, 0);
                let rhs = -u.at(level, mirrored, 0);
                assert!((lhs - rhs).abs() < 1e-10, "level {level} node {node}");
            }
        }
    }

    #[test]
    fn residual_is_small_and_second_order() {
        let drift = DriftField::sign(1, 1.0);
        let diff = DiffusionField::identity(1);
        let coarse_grid = grid_1d(4.0, 0.04);
        let coarse_times = TimeGrid::new(0.5, 125).unwrap();
        let fine_grid = grid_1d(4.0, 0.02);
        let fine_times = TimeGrid::new(0.5, 250).unwrap();
        let uc = zvonkin_solve(&drift, &diff, 1.0, &coarse_grid, &coarse_times).unwrap();
        let uf = zvonkin_solve(&drift, &diff, 1.0, &fine_grid, &fine_times).unwrap();
        let rc = pde_residual(&uc, &drift, &diff, 1.0, 0.5, 0.05);
        let rf = pde_residual(&uf, &drift, &diff, 1.0, 0.5, 0.05);
        assert!(rc < 1e-3, "coarse residual {rc}");
        assert!(rc / rf >= 3.0, "convergence factor {}", rc / rf);
    }

    #[test]
    fn maximum_principle_bound() {
        // |u| <= T * sup|b| / (1 + C_b).
        let grid = grid_1d(4.0, 0.02);
        let times = TimeGrid::new(0.5, 100).unwrap();
        let c_b = 1.0;
        let u = zvonkin_solve(
            &DriftField::sign(1, 1.0),
            &DiffusionField::identity(1),
            c_b,
            &grid,
            &times,
        )
        .unwrap();
        let bound = times.horizon() * 1.0 / (1.0 + c_b) + 1e-9;
        for level in 0..=times.steps() {
            for node in 0..grid.node_count() {
                assert!(u.at(level, node, 0).abs() <= bound);
            }
        }
    }

    #[test]
    fn two_dimensional_constant_drift_matches_closed_form() {
        // b = (1, -2), sigma = I, C_b = 0: u^i(t, x) = b^i (T - t).
        let grid = PdeGrid::new(2, 1.5, 0.1).unwrap();
        let times = TimeGrid::new(0.3, 30).unwrap();
        let u = zvonkin_solve(
            &DriftField::constant(vec![1.0, -2.0]),
            &DiffusionField::identity(2),
            0.0,
            &grid,
            &times,
        )
        .unwrap();
        let tol = 1e-6;
        for level in [0_usize, 15, 29] {
            let gap = times.horizon() - times.time(level);
            for node in 0..grid.node_count() {
                assert!((u.at(level, node, 0) - gap).abs() < tol);
                assert!((u.at(level, node, 1) + 2.0 * gap).abs() < tol);
            }
        }
    }

    #[test]
    fn two_dimensional_odd_drift_solution_is_odd() {
        let grid = PdeGrid::new(2, 2.0, 0.1).unwrap();
        let times = TimeGrid::new(0.25, 25).unwrap();
        let u = zvonkin_solve(
            &DriftField::sign(2, 1.0),
            &DiffusionField::identity(2),
            1.0,
            &grid,
            &times,
        )
        .unwrap();
        let n = grid.nodes_per_axis();
        for node in 0..grid.node_count() {
            let (ix, iy) = (node / n, node % n);
            let mirrored = (n - 1 - ix) * n + (n - 1 - iy);
            for c in 0..2 {
                let lhs = u.at(0, node, c);
                let rhs = -u.at(0, mirrored, c);
                assert!((lhs - rhs).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_linear_between() {
        let grid = grid_1d(1.0, 0.25);
        let times = TimeGrid::new(1.0, 1).unwrap();
        let mut f = GridField::zeros(grid, times, 1);
        for node in 0..grid.node_count() {
            let x = grid.coord(node);
            f.set(0, node, 0, 3.0 * x + 1.0);
        }
        let mut out = [0.0];
        for node in 0..grid.node_count() {
            assert!(!f.interpolate(0, &[grid.coord(node)], &mut out));
            assert!((out[0] - (3.0 * grid.coord(node) + 1.0)).abs() < 1e-14);
        }
        assert!(!f.interpolate(0, &[0.37], &mut out));
        assert!((out[0] - (3.0 * 0.37 + 1.0)).abs() < 1e-14);
        // Outside the box: clamped and flagged.
        assert!(f.interpolate(0, &[2.0], &mut out));
        assert!((out[0] - 4.0).abs() < 1e-14);
    }
}
