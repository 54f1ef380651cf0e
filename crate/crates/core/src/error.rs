use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("map not diffeomorphic at this resolution (min Jacobian {min_jacobian:.3e})")]
    NotDiffeomorphic { min_jacobian: f64 },

    #[error("not a minimizing-geodesic regime (min Jacobian {min_jacobian:.3e} at t = {time})")]
    NotMinimizingGeodesic { min_jacobian: f64, time: f64 },

    #[error("incompatible right-hand side: integral {integral:.3e}")]
    IncompatibleRhs { integral: f64 },

    #[error("elliptic solver stagnated after {iterations} iterations (relative residual {residual:.3e})")]
    SolverStagnation { iterations: usize, residual: f64 },

    #[error("resolution insufficient: pairing drift {drift:.3e}")]
    ResolutionInsufficient { drift: f64 },

    #[error("subdivision too coarse; increase Q (leg {leg}, residual {residual:.3e} after {iterations} iterations)")]
    SubdivisionTooCoarse {
        leg: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("sample count {samples} is not divisible by Q = {q}")]
    Divisibility { samples: usize, q: usize },

    #[error("leg length {length} reaches the conjugate radius")]
    ConjugateRadius { length: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
