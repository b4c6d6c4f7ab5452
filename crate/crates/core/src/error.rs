use thiserror::Error;

/// Failures of the linear solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("conjugate gradients broke down at iteration {iteration}: non-positive curvature {curvature:e}")]
    Breakdown { iteration: usize, curvature: f64 },
    #[error("banded matrix is numerically singular at row {row} (pivot {pivot:e})")]
    SingularBanded { row: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid knot vector: {0}")]
    InvalidKnotVector(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-positive weight {value:e} at element ({}, {})", element.0, element.1)]
    NonPositiveWeight { element: (usize, usize), value: f64 },

    #[error("non-finite {what} at element ({}, {})", element.0, element.1)]
    NonFinite { what: &'static str, element: (usize, usize) },

    #[error("non-finite boundary value at ({}, {})", point[0], point[1])]
    NonFiniteBoundary { point: [f64; 2] },

    #[error("singular geometry Jacobian (det {det:e}) at parametric point ({}, {})", param[0], param[1])]
    SingularJacobian { param: [f64; 2], det: f64 },

    #[error("degenerate harmonic map at node ({}, {}): |J| = {jacobian:e}", node.0, node.1)]
    DegenerateMap { node: (usize, usize), jacobian: f64 },

    #[error("mesh wrapped: min Jacobian {min_jacobian:e} after {halvings} step halvings")]
    MeshWrap { min_jacobian: f64, halvings: usize },

    #[error("non-finite norm in outer iteration {iteration}")]
    NonFiniteNorm { iteration: usize },

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }
}

/// Coarse failure class, used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    InvalidArgument,
    Config,
    Solver,
    MeshWrap,
    Io,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } => ErrorCategory::Config,
            Error::MeshWrap { .. } => ErrorCategory::MeshWrap,
            Error::Io(_) => ErrorCategory::Io,
            Error::InvalidKnotVector(_) | Error::InvalidArgument(_) | Error::NonPositiveWeight { .. } => {
                ErrorCategory::InvalidArgument
            }
            Error::NonFinite { .. }
            | Error::NonFiniteBoundary { .. }
            | Error::SingularJacobian { .. }
            | Error::DegenerateMap { .. }
            | Error::NonFiniteNorm { .. }
            | Error::Solver(_) => ErrorCategory::Solver,
        }
    }

    /// Process exit code: 2 configuration, 3 solver, 4 mesh wrap, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Config => 2,
            ErrorCategory::Solver => 3,
            ErrorCategory::MeshWrap => 4,
            ErrorCategory::InvalidArgument | ErrorCategory::Io => 1,
        }
    }
}
