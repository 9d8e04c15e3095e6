use thiserror::Error;

use crate::dynamics::CovarianceState;

/// Library-wide error type. `Config` is the only variant a front end should
/// map to a usage error; everything else reflects a domain failure.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The linear drift has an eigenvalue with non-negative real part, so no
    /// stationary state exists.
    #[error("unstable drift: largest eigenvalue real part {max_re:.6e} >= 0 (need Re sqrt(chi^2 - delta^2) < gamma)")]
    UnstableDrift { max_re: f64 },

    #[error("covariance diverged at t = {t:.6e}: {entry} = {value:.3e} exceeds the divergence bound")]
    Diverged {
        t: f64,
        entry: &'static str,
        value: f64,
    },

    #[error("steady-state solve did not converge: residual {residual:.3e} after {iterations} iterations (last iterate {last})")]
    NoConvergence {
        residual: f64,
        iterations: usize,
        last: CovarianceState,
    },

    #[error("unphysical covariance: {0}")]
    InvalidState(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    /// The scanned objective had several interior minima; `grid` holds the
    /// coarse (mu/gamma, objective) samples for inspection.
    #[error("objective is not unimodal over the scan range: {minima} interior minima found; grid: {}", format_grid(grid))]
    NotUnimodal {
        minima: usize,
        grid: Vec<(f64, f64)>,
    },

    #[error("target {target} is not reachable over the search bracket [{lo:.3e}, {hi:.3e}]")]
    Unreachable { target: f64, lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_grid(grid: &[(f64, f64)]) -> String {
    grid.iter()
        .map(|(x, y)| format!("({x:.4e}, {y:.6e})"))
        .collect::<Vec<_>>()
        .join(" ")
}
