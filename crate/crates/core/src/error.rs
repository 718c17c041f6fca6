use thiserror::Error;

/// Errors raised by models, samplers and estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("exhaustive enumeration over {dim} units exceeds the limit of {max}")]
    SizeLimit { dim: usize, max: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("initialisation error: {0}")]
    Initialization(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("all importance weights underflowed to zero")]
    DegenerateWeights,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("bootstrap round {round} failed: {source}")]
    Bootstrap {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trace I/O: {0}")]
    Io(#[from] std::io::Error),

    #[error("trace CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by floating-point or convergence failures rather
    /// than by malformed input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::DegenerateWeights | Error::Quadrature(_) => true,
            Error::Bootstrap { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
