//! Certified smallest eigenvalues of Hankel moment matrices and the
//! circle-integral lower bound `1/rho_0` for indeterminate moment problems.
//!
//! Everything runs on MPFR floats with explicit error bounds: q-series are
//! truncated with geometric tail majorants, eigenvalues are enclosed by
//! shifted Cholesky tests, and circle integrals use the periodic trapezoid
//! rule with grid doubling.
//!
//! * [`qseries`] — q-Pochhammer symbols, basic hypergeometric series, theta products.
//! * [`moments`] — moment sources (log-normal weight, recurrences, files) and Hankel matrices.
//! * [`spectra`] — eigenvalue enclosures, orthonormal coefficients, kernel matrices.
//! * [`rho`] — `rho_0` for the Stieltjes–Wigert, Al-Salam–Carlitz, Freud and q^-1-Hermite families.
//! * [`sweep`] — `lambda_N` sequences, extrapolation, percentage-error sweeps.
//! * [`verify`] and [`cli`] — invariant suites and the command-line front end.

pub mod arith;
pub mod cli;
pub mod error;
mod linalg;
pub mod moments;
pub mod qseries;
pub mod rho;
pub mod spectra;
pub mod sweep;
pub mod verify;

pub use arith::{Complex, Precision, SeriesValue};
pub use error::{Error, Result};
