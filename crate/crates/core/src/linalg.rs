//! Small dense helpers for the low dimensions this crate works in.
//! Matrices are row-major `d x d` slices.
//!
//! Norm conventions: sup-bounds on diffusion matrices use the spectral norm,
//! matrix *differences* (as they appear in coupling estimates) use the
//! Frobenius norm. Both are exposed here and named explicitly.

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `out = m * v` for a row-major `d x d` matrix.
pub fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    debug_assert_eq!(m.len(), d * d);
    debug_assert_eq!(out.len(), d);
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

/// `out = a * b` for row-major `d x d` matrices.
pub fn mat_mul(a: &[f64], b: &[f64], d: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), d * d);
    debug_assert_eq!(b.len(), d * d);
    debug_assert_eq!(out.len(), d * d);
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[i * d + k] * b[k * d + j];
            }
            out[i * d + j] = s;
        }
    }
}

/// `out = m * m^T`.
pub fn mat_mul_transpose(m: &[f64], d: usize, out: &mut [f64]) {
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += m[i * d + k] * m[j * d + k];
            }
            out[i * d + j] = s;
        }
    }
}

pub fn frobenius_norm(m: &[f64]) -> f64 {
    norm(m)
}

/// Spectral norm (largest singular value) via power iteration on `m^T m`.
/// Deterministic: starts from a fixed vector and runs a fixed schedule.
pub fn spectral_norm(m: &[f64], d: usize) -> f64 {
    debug_assert_eq!(m.len(), d * d);
    if d == 1 {
        return m[0].abs();
    }
    // Gram matrix g = m^T m.
    let mut g = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += m[k * d + i] * m[k * d + j];
            }
            g[i * d + j] = s;
        }
    }
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut w = vec![0.0; d];
    let mut lambda = 0.0;
    for _ in 0..200 {
        mat_vec(&g, &v, &mut w);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        for i in 0..d {
            v[i] = w[i] / nw;
        }
        lambda = nw;
    }
    lambda.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mat_vec_identity() {
        let m = [1.0, 0.0, 0.0, 1.0];
        let v = [3.0, -2.0];
        let mut out = [0.0; 2];
        mat_vec(&m, &v, &mut out);
        assert_eq!(out, v);
    }

    #[test]
    fn spectral_norm_diagonal() {
        let m = [3.0, 0.0, 0.0, -5.0];
        assert!((spectral_norm(&m, 2) - 5.0).abs() < 1e-10);
    }

    #[test]
    fn spectral_norm_rotation_is_one() {
        let c = 0.6_f64;
        let s = 0.8_f64;
        let m = [c, -s, s, c];
        assert!((spectral_norm(&m, 2) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn spectral_vs_frobenius() {
        // For rank-one 2x2, spectral == frobenius.
        let m = [1.0, 2.0, 2.0, 4.0];
        assert!((spectral_norm(&m, 2) - frobenius_norm(&m)).abs() < 1e-8);
    }
}
