//! First nontrivial Neumann eigenvalue of the unit ball and its radial profile.

use serde::Serialize;

use super::bessel::{bessel_j, gamma_half_integer};
use super::ReferenceError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mu2Ball {
    pub k: u32,
    pub mu2: f64,
    /// First positive zero of `d/dt [t^{(2-k)/2} J_{k/2}(t)]`.
    pub zero_location: f64,
}

/// Sign-carrying part of `d/dt [t^{1-ν} J_ν(t)]`.
fn radial_derivative_kernel(nu: f64, t: f64) -> f64 {
    bessel_j(nu - 1.0, t).unwrap() - (2.0 * nu - 1.0) * bessel_j(nu, t).unwrap() / t
}

/// `μ₂` of the unit ball in `ℝ^k`.
pub fn mu2_ball(k: u32) -> Result<Mu2Ball, ReferenceError> {
    if k == 0 {
        return Err(ReferenceError::DomainError("dimension must be >= 1".into()));
    }
    if k == 1 {
        let z = std::f64::consts::FRAC_PI_2;
        return Ok(Mu2Ball {
            k,
            mu2: std::f64::consts::PI * std::f64::consts::PI / 4.0,
            zero_location: z,
        });
    }
    let nu = k as f64 / 2.0;
    let step = 0.01;
    let mut lo = step;
    let mut flo = radial_derivative_kernel(nu, lo);
    let mut hi = lo;
    let mut found = false;
    while hi < 20.0 {
        hi = lo + step;
        let fhi = radial_derivative_kernel(nu, hi);
        if flo.signum() != fhi.signum() {
            found = true;
            break;
        }
        lo = hi;
        flo = fhi;
    }
    if !found {
        return Err(ReferenceError::DomainError(format!(
            "no derivative zero in (0, 20) for k={k}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = radial_derivative_kernel(nu, mid);
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    Ok(Mu2Ball {
        k,
        mu2: z * z,
        zero_location: z,
    })
}

/// Radial factor `φ` of the first nontrivial Neumann eigenfunction of the
/// unit ball, normalised by `φ(1) = 1`.
///
/// Solves `φ'' + (k-1)/t φ' + (μ - (k-1)/t²) φ = 0` with `φ(0) = 0`.
#[derive(Debug, Clone, Copy)]
pub struct RadialProfile {
    pub k: u32,
    pub mu: f64,
    nu: f64,
    s: f64,
    norm: f64,
}

impl RadialProfile {
    pub fn new(k: u32) -> Result<Self, ReferenceError> {
        let ball = mu2_ball(k)?;
        let nu = k as f64 / 2.0;
        let s = ball.mu2.sqrt();
        let mut p = RadialProfile {
            k,
            mu: ball.mu2,
            nu,
            s,
            norm: 1.0,
        };
        p.norm = p.raw(1.0);
        Ok(p)
    }

    fn raw(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        if self.k == 1 {
            return (self.s * t).sin();
        }
        t.powf(1.0 - self.nu) * bessel_j(self.nu, self.s * t).unwrap()
    }

    fn raw_derivative(&self, t: f64) -> f64 {
        if self.k == 1 {
            return self.s * (self.s * t).cos();
        }
        if t < 1e-8 {
            return (0.5 * self.s).powf(self.nu) / gamma_half_integer(self.nu + 1.0);
        }
        let z = self.s * t;
        t.powf(1.0 - self.nu)
            * (self.s * bessel_j(self.nu - 1.0, z).unwrap()
                + (1.0 - 2.0 * self.nu) * bessel_j(self.nu, z).unwrap() / t)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.raw(t) / self.norm
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.raw_derivative(t) / self.norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Newton on J₁' computed from the series alone, independent of bisection.
    fn j1_prime_zero_oracle() -> f64 {
        let j = |n: f64, x: f64| {
            let mut term = (x / 2.0).powf(n) / gamma_half_integer(n + 1.0);
            let mut s = term;
            for m in 1..60 {
                let m = m as f64;
                term *= -(x * x / 4.0) / (m * (m + n));
                s += term;
            }
            s
        };
        let f = |x: f64| j(0.0, x) - j(1.0, x) / x;
        let mut x = 1.8;
        for _ in 0..50 {
            let h = 1e-6;
            let d = (f(x + h) - f(x - h)) / (2.0 * h);
            x -= f(x) / d;
        }
        x
    }

    #[test]
    fn interval_is_exact() {
        let b = mu2_ball(1).unwrap();
        assert_eq!(b.mu2, std::f64::consts::PI.powi(2) / 4.0);
    }

    #[test]
    fn disk_zero_matches_independent_newton() {
        let b = mu2_ball(2).unwrap();
        let z = j1_prime_zero_oracle();
        assert!((b.zero_location - z).abs() < 1e-9, "{} {}", b.zero_location, z);
        assert!((b.zero_location - 1.84118378).abs() < 1e-8);
        assert!((b.mu2 - 3.38996).abs() < 1e-5);
    }

    #[test]
    fn three_ball_zero() {
        // First root of tan z = 2z / (2 - z²).
        let b = mu2_ball(3).unwrap();
        let z = b.zero_location;
        let resid = z.tan() - 2.0 * z / (2.0 - z * z);
        assert!(resid.abs() < 1e-9, "{z}");
        assert!((z - 2.0816).abs() < 1e-4);
    }

    #[test]
    fn profile_normalised_and_neumann() {
        for k in 1..=3 {
            let p = RadialProfile::new(k).unwrap();
            assert!((p.value(1.0) - 1.0).abs() < 1e-14);
            assert!(p.derivative(1.0).abs() < 1e-9, "k={k} {}", p.derivative(1.0));
            assert_eq!(p.value(0.0), 0.0);
        }
    }

    #[test]
    fn profile_solves_radial_ode() {
        for k in 1..=3 {
            let p = RadialProfile::new(k).unwrap();
            let km1 = k as f64 - 1.0;
            for i in 0..64 {
                // Chebyshev points mapped into (0.05, 1).
                let c = (std::f64::consts::PI * (i as f64 + 0.5) / 64.0).cos();
                let t = 0.525 + 0.475 * c;
                let h = 1e-5;
                let d2 = (p.derivative(t + h) - p.derivative(t - h)) / (2.0 * h);
                let r = d2 + km1 / t * p.derivative(t) + (p.mu - km1 / (t * t)) * p.value(t);
                assert!(r.abs() < 1e-8, "k={k} t={t} r={r}");
            }
        }
    }

    #[test]
    fn profile_derivative_matches_difference_quotient() {
        let p = RadialProfile::new(2).unwrap();
        for i in 1..20 {
            let t = i as f64 / 20.0;
            let h = 1e-6;
            let fd = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
            assert!((fd - p.derivative(t)).abs() < 1e-8);
        }
        let fd0 = p.value(1e-7) / 1e-7;
        assert!((fd0 - p.derivative(0.0)).abs() < 1e-6);
    }
}
