//! Simulation and certification toolkit for quadratic transportation
//! inequalities satisfied by laws of stochastic differential equations.
//!
//! The crate simulates d-dimensional SDEs with bounded measurable drift,
//! builds Girsanov-tilted measures with computable relative entropy, solves
//! the drift-removing parabolic transform on a grid, and estimates path-space
//! Wasserstein distances, so that the inequality `W2^2 <= C * H` can be
//! checked empirically against explicit constants.
//!
//! Batch Monte Carlo loops are data parallel via rayon when the `parallel`
//! feature (on by default) is enabled; results are bit-identical to the
//! sequential fallback because every path is a pure function of its stream id
//! and reductions run in a fixed order.

pub mod constants;
pub mod coupling;
pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod particles;
pub mod path;
pub mod pde;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod tilt;
pub mod transport;
pub mod zvonkin;

pub use error::{Error, Result};

/// Maps `0..n` through `f`, in parallel when the `parallel` feature is on.
/// Output order is by index either way, so downstream reductions are
/// scheduling-independent.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential counterpart of [`map_indexed`], available unconditionally so
/// benchmarks can compare the two routes.
pub fn map_indexed_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
