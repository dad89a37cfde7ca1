use thiserror::Error;

use crate::inner::InnerSolveReport;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("could not reach design condition <= {target} after {rounds} rounds (best {best})")]
    Poisedness { target: f64, rounds: usize, best: f64 },
    #[error("least-squares design is rank deficient (min |R_ii| = {min_pivot:e})")]
    SingularFit { min_pivot: f64 },
    #[error("inner maximization did not certify tolerance {} within {} iterations", .report.tolerance_target, .report.iterations)]
    InnerNonConvergence { report: InnerSolveReport },
    #[error("iteration {k} failed: {source}")]
    Iteration {
        k: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("dataset error: {0}")]
    Data(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { context, expected, got })
    }
}
