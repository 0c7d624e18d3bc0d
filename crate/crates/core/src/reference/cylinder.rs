//! Closed-form spectrum of straight flat cylinders `[-r, r] × S¹_L`.

use std::f64::consts::PI;

use serde::Serialize;

use super::ball::mu2_ball;
use super::ReferenceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CylinderCase {
    /// `μ₂` comes from the circle factor: `u = cos(2πx/L)`.
    Case1,
    /// `μ₂` comes from the interval factor: `u = sin(πt/2r)`.
    Case2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderExact {
    pub r: f64,
    #[serde(rename = "L")]
    pub circumference: f64,
    /// `μ₂([-r, r]) = π²/(4r²)`.
    pub mu_r: f64,
    /// `μ₂(S¹_L) = (2π/L)²`.
    pub mu_n: f64,
    pub mu2: f64,
    pub case: CylinderCase,
    pub degenerate_equal: bool,
    /// Critical volume below which intervals lose to circles.
    pub v_c: f64,
}

/// Critical volume `(μ₂(B¹)/μ₂(N))^{1/2} · ω₁ · |N|` for `N = S¹_L`.
pub fn critical_volume(circumference: f64) -> Result<f64, ReferenceError> {
    if !(circumference > 0.0) {
        return Err(ReferenceError::NonPositiveRadius(circumference));
    }
    let mu_n = (2.0 * PI / circumference).powi(2);
    Ok((mu2_ball(1)?.mu2 / mu_n).sqrt() * 2.0 * circumference)
}

pub fn cylinder_exact(r: f64, circumference: f64) -> Result<CylinderExact, ReferenceError> {
    if !(r > 0.0) {
        return Err(ReferenceError::NonPositiveRadius(r));
    }
    if !(circumference > 0.0) {
        return Err(ReferenceError::NonPositiveRadius(circumference));
    }
    let mu_r = PI * PI / (4.0 * r * r);
    let mu_n = (2.0 * PI / circumference).powi(2);
    let degenerate_equal = (mu_r - mu_n).abs() <= 1e-12 * mu_r.max(mu_n);
    let case = if mu_r <= mu_n || degenerate_equal {
        CylinderCase::Case2
    } else {
        CylinderCase::Case1
    };
    Ok(CylinderExact {
        r,
        circumference,
        mu_r,
        mu_n,
        mu2: mu_r.min(mu_n),
        case,
        degenerate_equal,
        v_c: critical_volume(circumference)?,
    })
}
