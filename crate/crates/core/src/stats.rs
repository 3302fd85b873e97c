//! Shared statistical helpers: moment summaries, z-tests, a two-sample
//! Kolmogorov-Smirnov statistic, and binomial tail envelopes.

use statrs::distribution::{ContinuousCDF, Normal};

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanStderr {
    /// Two-pass mean/stderr; `stderr = sd / sqrt(n)` with the n-1 divisor.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        let n = samples.len();
        if n == 0 {
            return None;
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Some(Self { mean, stderr: 0.0, n });
        }
        let var = samples
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / (n as f64 - 1.0);
        Some(Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            n,
        })
    }
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// Two-sided p-value of a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    2.0 * (1.0 - standard_normal_cdf(z.abs()))
}

/// Upper quantile `z_alpha` with `P(Z > z_alpha) = alpha`.
pub fn normal_upper_quantile(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha)
}

/// One-sample z-test of mean zero. Returns `(z, p)`; degenerate spread with a
/// nonzero mean yields `p = 0`.
pub fn z_test_mean_zero(samples: &[f64]) -> (f64, f64) {
    let ms = MeanStderr::from_samples(samples).expect("z-test needs samples");
    if ms.stderr == 0.0 {
        return if ms.mean == 0.0 { (0.0, 1.0) } else { (f64::INFINITY, 0.0) };
    }
    let z = ms.mean / ms.stderr;
    (z, two_sided_p(z))
}

/// OLS slope of `y` on `x` with its standard error, as `(slope, se)`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return (0.0, f64::INFINITY);
    }
    let slope = sxy / sxx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let fit = my + slope * (a - mx);
            (b - fit) * (b - fit)
        })
        .sum();
    let se = (ssr / (n - 2.0) / sxx).sqrt();
    (slope, se)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut i = 0;
    let mut j = 0;
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // Advance past ties on both sides together, so equal samples
        // contribute no spurious CDF gap.
        match a[i].total_cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let v = a[i];
                while i < a.len() && a[i] == v {
                    i += 1;
                }
                while j < b.len() && b[j] == v {
                    j += 1;
                }
            }
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

/// Upper 99% envelope of the empirical frequency under a true probability
/// `p`: values of `p_hat` above this are evidence (at one-sided 1%) that the
/// true tail exceeds `p`. Normal approximation with a 1/n continuity pad.
pub fn binomial_envelope_99(p: f64, n: usize) -> f64 {
    let z = normal_upper_quantile(0.01);
    let nf = n as f64;
    (p + z * (p * (1.0 - p) / nf).sqrt() + 1.0 / nf).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_stderr_basics() {
        let ms = MeanStderr::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((ms.mean - 2.5).abs() < 1e-15);
        // sd = sqrt(5/3), stderr = sd/2
        assert!((ms.stderr - (5.0_f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
        assert!(MeanStderr::from_samples(&[]).is_none());
    }

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a = [0.3, -1.0, 2.0, 0.7];
        assert_eq!(ks_statistic(&a, &a), 0.0);
    }

    #[test]
    fn ks_of_disjoint_samples_is_one() {
        let a = [0.0, 1.0];
        let b = [5.0, 6.0];
        assert_eq!(ks_statistic(&a, &b), 1.0);
    }

    #[test]
    fn slope_recovers_linear_data() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let (slope, se) = ols_slope(&x, &y);
        assert!((slope - 2.0).abs() < 1e-12);
        assert!(se < 1e-10);
    }

    #[test]
    fn quantile_and_cdf_are_consistent() {
        let z = normal_upper_quantile(0.01);
        assert!((standard_normal_cdf(z) - 0.99).abs() < 1e-9);
        assert!((z - 2.3263).abs() < 1e-3);
    }
}
