use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("eigenvalue iteration did not converge for a {n}x{n} matrix (norm {norm:.3e})")]
    EigenNoConvergence { n: usize, norm: f64 },
    #[error("Lyapunov operator singular: A and -A share an eigenvalue (pivot ratio {0:.3e})")]
    SpectrumCollision(f64),
    #[error("Newton iteration did not converge after {iters} iterations (residual {residual:.3e})")]
    NewtonNoConvergence { iters: usize, residual: f64 },
    #[error("singular Jacobian at Newton iteration {0}")]
    SingularJacobian(usize),
    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); the problem may be stiff")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite right-hand side at t = {t:.6e}; state = {state:?}")]
    NonFinite { t: f64, state: Vec<f64> },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("certificate failed: {0}")]
    Certificate(String),
    #[error("coupling error: {0}")]
    Coupling(String),
    #[error("not stabilizable at omega = {omega:.6e}: rank {rank} < {n}")]
    Stabilizability { omega: f64, rank: usize, n: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
