use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// A discretized d-dimensional path on a uniform time grid.
///
/// Values are stored flat, node-major: entry `(k, c)` of the path lives at
/// `values[k * dim + c]` for node `k in 0..=steps` and coordinate `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl PathSample {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("path dimension must be positive".into()));
        }
        if values.len() != (grid.steps() + 1) * dim {
            return Err(Error::Domain(format!(
                "path needs {} values, got {}",
                (grid.steps() + 1) * dim,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("path contains non-finite values".into()));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// State at node `k`.
    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn initial(&self) -> &[f64] {
        self.node(0)
    }

    pub fn terminal(&self) -> &[f64] {
        self.node(self.grid.steps())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn same_shape(&self, other: &PathSample) -> bool {
        self.grid == other.grid && self.dim == other.dim
    }
}

/// Path functionals that are 1-Lipschitz for the discrete sup-norm metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathFunctional {
    /// `max_k |x(t_k)|` (Euclidean norm per node).
    SupNorm,
    /// Coordinate `i` of the terminal state.
    Terminal(usize),
    /// Average of coordinate `i` over all grid nodes.
    TimeAverage(usize),
}

impl PathFunctional {
    /// Evaluates the functional; errors if a coordinate index is out of range.
    pub fn eval(&self, path: &PathSample) -> Result<f64> {
        let check = |i: usize| {
            if i < path.dim() {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "coordinate {i} out of range for dimension {}",
                    path.dim()
                )))
            }
        };
        match *self {
            PathFunctional::SupNorm => {
                let mut sup: f64 = 0.0;
                for k in 0..=path.grid().steps() {
                    let norm = crate::linalg::norm(path.node(k));
                    sup = sup.max(norm);
                }
                Ok(sup)
            }
            PathFunctional::Terminal(i) => {
                check(i)?;
                Ok(path.terminal()[i])
            }
            PathFunctional::TimeAverage(i) => {
                check(i)?;
                let nodes = path.grid().steps() + 1;
                let sum: f64 = (0..nodes).map(|k| path.node(k)[i]).sum();
                Ok(sum / nodes as f64)
            }
        }
    }
}

impl std::str::FromStr for PathFunctional {
    type Err = Error;

    /// Parses `sup`, `terminal[:i]` or `avg[:i]`; the coordinate defaults to 0.
    fn from_str(s: &str) -> Result<Self> {
        let (head, idx) = match s.split_once(':') {
            Some((h, i)) => {
                let idx: usize = i
                    .parse()
                    .map_err(|_| Error::Config(format!("bad coordinate in functional '{s}'")))?;
                (h, idx)
            }
            None => (s, 0),
        };
        match head {
            "sup" => Ok(PathFunctional::SupNorm),
            "terminal" => Ok(PathFunctional::Terminal(idx)),
            "avg" => Ok(PathFunctional::TimeAverage(idx)),
            _ => Err(Error::Config(format!("unknown path functional '{s}'"))),
        }
    }
}
