//! Penalized integrative accelerated failure time models.
//!
//! Several independent studies measure the same covariates. Each study gets
//! its own AFT coefficient vector, fitted by Stute-weighted least squares, and
//! the coefficients of one covariate across studies form a group. Group and
//! bi-level penalties select covariates jointly across studies while allowing
//! study-specific effects.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod penalty;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod tuning;

pub use data::{load_studies, IndexSets, MultiStudy, Study, StudyScaling};
pub use error::{Error, Result};
pub use penalty::{Family, Penalty, PenaltySpec};
pub use solver::{check_kkt, fit, fit_path, CoefMatrix, FitResult, SolverOptions};
