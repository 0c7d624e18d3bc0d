//! Analytic descriptions of the supported domains.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// `f(s) = mean + Σ_{m≥1} cos[m-1] cos(m ω s) + sin[m-1] sin(m ω s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierSeries {
    pub mean: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl FourierSeries {
    pub fn constant(mean: f64) -> Self {
        FourierSeries {
            mean,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    pub fn modes(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    /// Value and first derivative at phase `w = ω s`, derivative with
    /// respect to `w`.
    pub fn eval(&self, w: f64) -> (f64, f64) {
        let mut f = self.mean;
        let mut df = 0.0;
        for (m, a) in self.cos.iter().enumerate() {
            let k = (m + 1) as f64;
            f += a * (k * w).cos();
            df -= a * k * (k * w).sin();
        }
        for (m, b) in self.sin.iter().enumerate() {
            let k = (m + 1) as f64;
            f += b * (k * w).sin();
            df += b * k * (k * w).cos();
        }
        (f, df)
    }

    /// `∫_0^{2π} f² dw / 2π`.
    pub fn mean_square(&self) -> f64 {
        let osc: f64 = self.cos.iter().chain(&self.sin).map(|a| a * a).sum();
        self.mean * self.mean + 0.5 * osc
    }

    fn finite(&self) -> bool {
        self.mean.is_finite() && self.cos.iter().chain(&self.sin).all(|a| a.is_finite())
    }
}

/// Star-shaped planar domain `ρ(θ) = ρ₀ (1 + Σ a_m cos mθ + b_m sin mθ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarDomainSpec {
    pub rho0: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl PlanarDomainSpec {
    pub fn disk(radius: f64) -> Self {
        PlanarDomainSpec {
            rho0: radius,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    fn shape(&self) -> FourierSeries {
        FourierSeries {
            mean: 1.0,
            cos: self.cos.clone(),
            sin: self.sin.clone(),
        }
    }

    /// `(ρ(θ), ρ'(θ))`.
    pub fn radius(&self, theta: f64) -> (f64, f64) {
        let (f, df) = self.shape().eval(theta);
        (self.rho0 * f, self.rho0 * df)
    }

    pub fn point(&self, theta: f64) -> [f64; 2] {
        let (r, _) = self.radius(theta);
        [r * theta.cos(), r * theta.sin()]
    }

    pub fn area(&self) -> f64 {
        PI * self.rho0 * self.rho0 * self.shape().mean_square()
    }

    /// Smallest radius on a dense sample.
    pub fn min_radius(&self) -> f64 {
        let n = 64 * (self.shape().modes() + 4);
        (0..n)
            .map(|i| self.radius(2.0 * PI * i as f64 / n as f64).0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.rho0.is_finite() || !self.shape().finite() {
            return Err(GeometryError::InvalidSpec("non-finite coefficient".into()));
        }
        let m = self.min_radius();
        if !(m > 0.0) {
            return Err(GeometryError::NonPositiveRadius(m));
        }
        Ok(())
    }
}

/// Flat cylinder region `{(t, x) : g₋(x) < t < g₊(x)}` in `ℝ × S¹_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderDomainSpec {
    pub circumference: f64,
    pub g_plus: FourierSeries,
    pub g_minus: FourierSeries,
}

impl CylinderDomainSpec {
    /// `Ω_r = [-r, r] × S¹_L`.
    pub fn straight(r: f64, circumference: f64) -> Self {
        CylinderDomainSpec {
            circumference,
            g_plus: FourierSeries::constant(r),
            g_minus: FourierSeries::constant(-r),
        }
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI / self.circumference
    }

    /// `(g₊(x), g₊'(x))`.
    pub fn upper(&self, x: f64) -> (f64, f64) {
        let (f, df) = self.g_plus.eval(self.omega() * x);
        (f, df * self.omega())
    }

    pub fn lower(&self, x: f64) -> (f64, f64) {
        let (f, df) = self.g_minus.eval(self.omega() * x);
        (f, df * self.omega())
    }

    pub fn volume(&self) -> f64 {
        self.circumference * (self.g_plus.mean - self.g_minus.mean)
    }

    pub fn is_straight(&self) -> bool {
        let flat = |g: &FourierSeries| g.cos.iter().chain(&g.sin).all(|a| *a == 0.0);
        flat(&self.g_plus) && flat(&self.g_minus)
    }

    /// Smallest height `g₊ - g₋` on a dense sample.
    pub fn min_height(&self) -> f64 {
        let n = 64 * (self.g_plus.modes().max(self.g_minus.modes()) + 4);
        (0..n)
            .map(|i| {
                let x = self.circumference * i as f64 / n as f64;
                self.upper(x).0 - self.lower(x).0
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.circumference > 0.0) || !self.circumference.is_finite() {
            return Err(GeometryError::InvalidSpec(format!(
                "circumference {} must be positive",
                self.circumference
            )));
        }
        if !self.g_plus.finite() || !self.g_minus.finite() {
            return Err(GeometryError::InvalidSpec("non-finite coefficient".into()));
        }
        let h = self.min_height();
        if !(h > 0.0) {
            return Err(GeometryError::NonPositiveRadius(h));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle `[0, width] × [0, height]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectangleSpec {
    pub width: f64,
    pub height: f64,
}

impl RectangleSpec {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.width > 0.0 && self.height > 0.0) || !(self.width * self.height).is_finite() {
            return Err(GeometryError::NonPositiveRadius(self.width.min(self.height)));
        }
        Ok(())
    }
}

/// Domain selector used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Planar {
        rho0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    Cylinder {
        #[serde(rename = "L")]
        circumference: f64,
        g_plus: FourierSeries,
        g_minus: FourierSeries,
    },
    StraightCylinder {
        r: f64,
        #[serde(rename = "L")]
        circumference: f64,
    },
    Rectangle {
        width: f64,
        height: f64,
    },
}

/// Resolved domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Planar(PlanarDomainSpec),
    Cylinder(CylinderDomainSpec),
    Rectangle(RectangleSpec),
}

impl DomainSpec {
    pub fn resolve(&self) -> Domain {
        match self.clone() {
            DomainSpec::Planar { rho0, cos, sin } => Domain::Planar(PlanarDomainSpec { rho0, cos, sin }),
            DomainSpec::Cylinder {
                circumference,
                g_plus,
                g_minus,
            } => Domain::Cylinder(CylinderDomainSpec {
                circumference,
                g_plus,
                g_minus,
            }),
            DomainSpec::StraightCylinder { r, circumference } => {
                Domain::Cylinder(CylinderDomainSpec::straight(r, circumference))
            }
            DomainSpec::Rectangle { width, height } => Domain::Rectangle(RectangleSpec { width, height }),
        }
    }
}

impl From<&Domain> for DomainSpec {
    fn from(d: &Domain) -> Self {
        match d.clone() {
            Domain::Planar(p) => DomainSpec::Planar {
                rho0: p.rho0,
                cos: p.cos,
                sin: p.sin,
            },
            Domain::Cylinder(c) => DomainSpec::Cylinder {
                circumference: c.circumference,
                g_plus: c.g_plus,
                g_minus: c.g_minus,
            },
            Domain::Rectangle(r) => DomainSpec::Rectangle {
                width: r.width,
                height: r.height,
            },
        }
    }
}

impl Domain {
    pub fn volume(&self) -> f64 {
        match self {
            Domain::Planar(p) => p.area(),
            Domain::Cylinder(c) => c.volume(),
            Domain::Rectangle(r) => r.area(),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            Domain::Planar(p) => p.validate(),
            Domain::Cylinder(c) => c.validate(),
            Domain::Rectangle(r) => r.validate(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_area() {
        assert!((PlanarDomainSpec::disk(1.0).area() - PI).abs() < 1e-15);
    }

    #[test]
    fn ellipse_like_area_matches_quadrature() {
        let s = PlanarDomainSpec {
            rho0: 1.0,
            cos: vec![0.0, 0.3],
            sin: vec![],
        };
        let n = 2000;
        let q: f64 = (0..n)
            .map(|i| {
                let r = s.radius(2.0 * PI * i as f64 / n as f64).0;
                0.5 * r * r * 2.0 * PI / n as f64
            })
            .sum();
        assert!((s.area() - q).abs() < 1e-12);
        assert!((s.min_radius() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn radius_derivative() {
        let s = PlanarDomainSpec {
            rho0: 1.3,
            cos: vec![0.1, 0.0, 0.15],
            sin: vec![0.05],
        };
        for i in 0..10 {
            let t = i as f64 * 0.6;
            let h = 1e-6;
            let fd = (s.radius(t + h).0 - s.radius(t - h).0) / (2.0 * h);
            assert!((fd - s.radius(t).1).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_nonpositive_radius() {
        let s = PlanarDomainSpec {
            rho0: 1.0,
            cos: vec![1.5],
            sin: vec![],
        };
        assert!(matches!(s.validate(), Err(GeometryError::NonPositiveRadius(_))));
    }

    #[test]
    fn cylinder_volume_and_derivative() {
        let c = CylinderDomainSpec {
            circumference: 2.0 * PI,
            g_plus: FourierSeries {
                mean: 2.0,
                cos: vec![0.3],
                sin: vec![],
            },
            g_minus: FourierSeries::constant(-2.0),
        };
        assert!((c.volume() - 8.0 * PI).abs() < 1e-14);
        let (g, dg) = c.upper(1.0);
        assert!((g - (2.0 + 0.3 * 1f64.cos())).abs() < 1e-15);
        assert!((dg + 0.3 * 1f64.sin()).abs() < 1e-15);
        assert!(!c.is_straight());
        assert!(CylinderDomainSpec::straight(2.0, 1.0).is_straight());
    }

    #[test]
    fn domain_spec_json_round_trip() {
        let js = r#"{"kind":"straight_cylinder","r":2.0,"L":6.283185307179586}"#;
        let d: DomainSpec = serde_json::from_str(js).unwrap();
        assert!(matches!(d.resolve(), Domain::Cylinder(_)));
        let bad = r#"{"kind":"planar","rho0":1.0,"extra":1}"#;
        assert!(serde_json::from_str::<DomainSpec>(bad).is_err());
    }
}
