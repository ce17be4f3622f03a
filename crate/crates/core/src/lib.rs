//! Random walks in Markov-modulated random environments.
//!
//! The crate computes the tail index `kappa` of a finite-state Markov
//! environment from its tilted transition kernels, the asymptotic speed,
//! and the normalizations of the stable limit laws for hitting times and
//! positions. Monte Carlo tooling (quenched walks, the associated branching
//! process with immigration, regeneration blocks, tail sampling and stable
//! CDF fitting) checks those predictions at desk scale.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branching;
pub mod envmodel;
pub mod error;
pub mod limitlaws;
pub mod linalg;
pub mod model_file;
pub mod quadrature;
pub mod rng;
pub mod sampling;
pub mod spectral;
pub mod speed;
pub mod stats;
pub mod tails;
pub mod walksim;

pub use envmodel::{
    detect_arithmetic, minorization_split, reverse_kernel, stationary_distribution, validate, Arithmetic,
    EnvironmentSpec, MinorizationSplit, ValidationReport,
};
pub use error::{Result, RwreError};
pub use limitlaws::{LimitCheckReport, NormalizationSchedule, Regime, StableParams};
pub use spectral::{solve_kappa, SpectralReport};
pub use speed::{speed, SpeedReport};
pub use tails::TailReport;
pub use walksim::{EnvPath, WalkRecord};
