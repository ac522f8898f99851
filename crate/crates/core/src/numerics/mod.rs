//! Dense numerical kernel for small systems (n ≤ 32).
//!
//! All routines are pure: identical inputs give bit-identical outputs.

mod linalg;
mod lyapunov;
mod newton;
mod ode;

pub use linalg::{
    balance, eigenvalues, frobenius, is_hurwitz, is_psd, min_sym_eig, numerical_rank, spectral_norm, Spectrum,
};
pub use lyapunov::{lyapunov_residual, solve_lyapunov};
pub use newton::{finite_diff_jacobian, newton_solve, NewtonOptions};
pub use ode::{integrate_ode, OdeOptions, OdeStats, Trajectory};

pub type Mat = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

/// Default tolerance for Hurwitz tests.
pub const EIG_TOL: f64 = 1e-9;
/// Default tolerance for semidefiniteness tests.
pub const PSD_TOL: f64 = 1e-9;
