//! Closed-form and semi-analytic reference values.

mod ball;
mod bessel;
mod cylinder;
mod weinberger;

use thiserror::Error;

pub use ball::{mu2_ball, Mu2Ball, RadialProfile};
pub use bessel::{bessel_j, gamma_half_integer};
pub use cylinder::{critical_volume, cylinder_exact, CylinderCase, CylinderExact};
pub use weinberger::{weinberger_bound, weinberger_center, WeinbergerProfile, WeinbergerReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("outside the supported domain: {0}")]
    DomainError(String),
    #[error("length parameter must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("volume {volume} differs from the comparison volume {expected} by more than 1e-3")]
    VolumeMismatch { volume: f64, expected: f64 },
    #[error("centring failed: {0}")]
    CenteringFailed(String),
}
