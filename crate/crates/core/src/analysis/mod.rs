//! Statistical diagnostics: largest Lyapunov exponent, Birkhoff averages and
//! equidistribution of the configuration.

mod birkhoff;
mod equidistribution;
mod lyapunov;

pub use birkhoff::*;
pub use equidistribution::*;
pub use lyapunov::*;

use crate::dynamics::DynamicsError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("trajectory and shadow took different events before renormalization {renormalization}; lower the renormalization interval")]
    SequenceDivergenceOverflow { renormalization: usize },
    #[error("gave up after {0} restarts caused by singular events")]
    TooManyRestarts(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("at least {need} seeds are needed, got {got}")]
    TooFewSeeds { need: usize, got: usize },
}

/// Mean and standard error of the mean of `xs` (zero error for fewer than 2 values).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    use statrs::statistics::Statistics;
    let mean = xs.mean();
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    (mean, xs.std_dev() / (xs.len() as f64).sqrt())
}
