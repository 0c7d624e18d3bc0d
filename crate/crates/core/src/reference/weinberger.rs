//! Weinberger-type upper bound for μ₂: centred radial test functions built
//! from the ball eigenfunction, integrated over a mesh.
//!
//! With `G(τ) = φ(τ/r)` for `τ ≤ r`, `G = 1` beyond, and
//! `H = G'² + (k−1)G²/τ²`, the functions `G(|x−y|)(x−y)_i/|x−y|` have
//! zero mean once `y` is centred, so `μ₂(Ω) ≤ ∫H/∫G²`. Monotonicity of
//! `G` and `H` then gives `∫H/∫G² ≤ μ₂(Bᵏ)/r²` when `|Ω| = |B_r|`.

use serde::Serialize;

use super::{ReferenceError, RadialProfile};
use crate::geometry::TriMesh;

/// Degree-5 Dunavant rule: barycentric `(a, b, b)` orbits and weights.
const DUNAVANT5: [(f64, f64, f64); 3] = [
    (1.0 / 3.0, 1.0 / 3.0, 0.225),
    (0.059_715_871_789_770, 0.470_142_064_105_115, 0.132_394_152_788_506),
    (0.797_426_985_353_087, 0.101_286_507_323_456, 0.125_939_180_544_827),
];

/// Radial ingredients `G` and `H` for a ball of radius `r` in `ℝᵏ`.
#[derive(Debug, Clone, Copy)]
pub struct WeinbergerProfile {
    pub r: f64,
    profile: RadialProfile,
}

impl WeinbergerProfile {
    pub fn new(k: u32, r: f64) -> Result<Self, ReferenceError> {
        if !(r > 0.0) {
            return Err(ReferenceError::NonPositiveRadius(r));
        }
        Ok(WeinbergerProfile {
            r,
            profile: RadialProfile::new(k)?,
        })
    }

    pub fn k(&self) -> u32 {
        self.profile.k
    }

    /// `μ₂(Bᵏ)/r²`.
    pub fn mu_r(&self) -> f64 {
        self.profile.mu / (self.r * self.r)
    }

    pub fn g(&self, tau: f64) -> f64 {
        if tau >= self.r {
            1.0
        } else {
            self.profile.value(tau / self.r)
        }
    }

    pub fn g_prime(&self, tau: f64) -> f64 {
        if tau >= self.r {
            0.0
        } else {
            self.profile.derivative(tau / self.r) / self.r
        }
    }

    pub fn h(&self, tau: f64) -> f64 {
        let k = self.k() as f64;
        let g = self.g(tau);
        let angular = if k > 1.0 {
            if tau == 0.0 {
                // G(τ)/τ → G'(0).
                (k - 1.0) * self.g_prime(0.0).powi(2)
            } else {
                (k - 1.0) * (g / tau).powi(2)
            }
        } else {
            0.0
        };
        self.g_prime(tau).powi(2) + angular
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeinbergerReport {
    /// Centring point: `y` (cylinder axis) or `(y₁, y₂)` (plane).
    pub center: Vec<f64>,
    pub g_integral: f64,
    pub h_integral: f64,
    /// `∫H / ∫G²`.
    pub rayleigh_bound: f64,
    pub mu_r: f64,
    pub mu2: f64,
    pub volume: f64,
    pub reference_volume: f64,
    /// `μ₂ ≤ ∫H/∫G²` within `tol`.
    pub lower_link_ok: bool,
    /// `∫H/∫G² ≤ μʳ` within `tol`.
    pub upper_link_ok: bool,
    pub chain_ok: bool,
    pub tol: f64,
}

/// Integrates `f(τ, unit direction)` over a triangle, splitting it
/// recursively where it straddles `τ = r` (up to `depth` levels).
fn integrate_triangle(
    p: [[f64; 2]; 3],
    center: [f64; 2],
    periodic_axis: bool,
    r: f64,
    depth: u32,
    f: &dyn Fn(f64, [f64; 2]) -> [f64; 4],
) -> [f64; 4] {
    let tau_dir = |q: [f64; 2]| -> (f64, [f64; 2]) {
        if periodic_axis {
            let d = q[0] - center[0];
            (d.abs(), [d.signum(), 0.0])
        } else {
            let d = [q[0] - center[0], q[1] - center[1]];
            let n = d[0].hypot(d[1]);
            if n == 0.0 {
                (0.0, [0.0, 0.0])
            } else {
                (n, [d[0] / n, d[1] / n])
            }
        }
    };
    let taus = p.map(|q| tau_dir(q).0);
    let lo = taus.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // For the plane the nearest point may be interior; a bounding margin
    // of the triangle diameter keeps the straddle test conservative.
    let diam = (0..3)
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % 3]);
            (a[0] - b[0]).hypot(a[1] - b[1])
        })
        .fold(0.0, f64::max);
    let margin = if periodic_axis { 0.0 } else { diam };
    let straddles = lo - margin < r && hi > r;
    // The k=1 test function is smooth across τ = 0; in the plane the
    // direction field is singular at the centre.
    let near_center = !periodic_axis && lo < diam;
    if (straddles || near_center) && depth > 0 {
        let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let (m01, m12, m20) = (mid(p[0], p[1]), mid(p[1], p[2]), mid(p[2], p[0]));
        let mut acc = [0.0; 4];
        for sub in [[p[0], m01, m20], [m01, p[1], m12], [m20, m12, p[2]], [m01, m12, m20]] {
            let v = integrate_triangle(sub, center, periodic_axis, r, depth - 1, f);
            (0..4).for_each(|i| acc[i] += v[i]);
        }
        return acc;
    }
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1])).abs();
    let mut acc = [0.0; 4];
    for &(a, b, w) in &DUNAVANT5 {
        let orbit: &[[f64; 3]] = if a == b { &[[a, a, a]] } else { &[[a, b, b], [b, a, b], [b, b, a]] };
        for l in orbit {
            let q = [
                l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
            ];
            let (tau, dir) = tau_dir(q);
            let v = f(tau, dir);
            (0..4).for_each(|i| acc[i] += w * area * v[i]);
        }
    }
    acc
}

/// `[∫G·e₁, ∫G·e₂, ∫G², ∫H]` for the centre `y`.
fn moments(mesh: &TriMesh, prof: &WeinbergerProfile, center: [f64; 2]) -> [f64; 4] {
    let axis = prof.k() == 1;
    // Subdivision only refines triangles cut by τ = r (and, in the plane,
    // those touching the centre).
    let depth = if axis { 6 } else { 5 };
    let f = |tau: f64, dir: [f64; 2]| {
        let g = prof.g(tau);
        [g * dir[0], g * dir[1], g * g, prof.h(tau)]
    };
    let parts = crate::par_map(&(0..mesh.triangles().len()).collect::<Vec<_>>(), |&t| {
        integrate_triangle(mesh.triangle_points(t), center, axis, prof.r, depth, &f)
    });
    parts.iter().fold([0.0; 4], |mut a, v| {
        (0..4).for_each(|i| a[i] += v[i]);
        a
    })
}

fn bbox(mesh: &TriMesh) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for v in mesh.vertices() {
        for i in 0..2 {
            lo[i] = lo[i].min(v[i]);
            hi[i] = hi[i].max(v[i]);
        }
    }
    (lo, hi)
}

/// Centring point: bisection along the cylinder axis (`k = 1`, where the
/// first moment decreases in `y`) or Newton with a finite-difference
/// Jacobian in the plane (`k = 2`).
pub fn weinberger_center(mesh: &TriMesh, prof: &WeinbergerProfile) -> Result<[f64; 2], ReferenceError> {
    let (lo, hi) = bbox(mesh);
    match prof.k() {
        1 => {
            let v = |y: f64| moments(mesh, prof, [y, 0.0])[0];
            let (mut a, mut b) = (lo[0], hi[0]);
            let (va, vb) = (v(a), v(b));
            if !(va > 0.0 && vb < 0.0) {
                return Err(ReferenceError::CenteringFailed(format!("no sign change on [{a}, {b}]: {va:e}, {vb:e}")));
            }
            while b - a > 1e-13 * (1.0 + hi[0].abs().max(lo[0].abs())) {
                let m = 0.5 * (a + b);
                if v(m) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            Ok([0.5 * (a + b), 0.0])
        }
        2 => {
            let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
            let mut y = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
            let norm0 = moments(mesh, prof, y)[2].sqrt() * mesh.area().sqrt();
            for _ in 0..30 {
                let m = moments(mesh, prof, y);
                if m[0].hypot(m[1]) <= 1e-12 * norm0 {
                    return Ok(y);
                }
                let d = 1e-6 * scale;
                let mx = moments(mesh, prof, [y[0] + d, y[1]]);
                let my = moments(mesh, prof, [y[0], y[1] + d]);
                let j = [[(mx[0] - m[0]) / d, (my[0] - m[0]) / d], [(mx[1] - m[1]) / d, (my[1] - m[1]) / d]];
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                if det.abs() < 1e-300 {
                    break;
                }
                let step = [(j[1][1] * m[0] - j[0][1] * m[1]) / det, (-j[1][0] * m[0] + j[0][0] * m[1]) / det];
                y = [y[0] - step[0], y[1] - step[1]];
                if step[0].hypot(step[1]) < 1e-13 * scale {
                    return Ok(y);
                }
            }
            Err(ReferenceError::CenteringFailed("Newton iteration did not converge".into()))
        }
        k => Err(ReferenceError::DomainError(format!("centring supports k ∈ {{1, 2}}, got {k}"))),
    }
}

/// Evaluates the bound chain `μ₂ ≤ ∫H/∫G² ≤ μʳ` for a mesh whose volume
/// matches the comparison domain: `2r·L` for a cylinder of circumference
/// `L` (`k = 1`), `πr²` for a planar mesh (`k = 2`).
///
/// `mu2` is the discrete eigenvalue of the mesh; `tol` is the absolute
/// slack allowed on each link (discretisation error of `mu2`).
pub fn weinberger_bound(mesh: &TriMesh, r: f64, mu2: f64, tol: f64) -> Result<WeinbergerReport, ReferenceError> {
    let k = if mesh.is_periodic() { 1 } else { 2 };
    let prof = WeinbergerProfile::new(k, r)?;
    let volume = mesh.area();
    let reference_volume = match mesh.period() {
        Some(l) => 2.0 * r * l,
        None => std::f64::consts::PI * r * r,
    };
    if ((volume - reference_volume) / reference_volume).abs() > 1e-3 {
        return Err(ReferenceError::VolumeMismatch {
            volume,
            expected: reference_volume,
        });
    }
    let center = weinberger_center(mesh, &prof)?;
    let m = moments(mesh, &prof, center);
    let rayleigh_bound = m[3] / m[2];
    let mu_r = prof.mu_r();
    let lower_link_ok = mu2 <= rayleigh_bound + tol;
    let upper_link_ok = rayleigh_bound <= mu_r + tol;
    Ok(WeinbergerReport {
        center: if k == 1 { vec![center[0]] } else { center.to_vec() },
        g_integral: m[2],
        h_integral: m[3],
        rayleigh_bound,
        mu_r,
        mu2,
        volume,
        reference_volume,
        lower_link_ok,
        upper_link_ok,
        chain_ok: lower_link_ok && upper_link_ok,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cylinder_mesh, build_planar_mesh, CylinderDomainSpec, PlanarDomainSpec};
    use std::f64::consts::PI;

    #[test]
    fn g_nondecreasing_h_decreasing() {
        for k in [1, 2] {
            let p = WeinbergerProfile::new(k, 1.5).unwrap();
            let n = 10_000;
            let grid: Vec<f64> = (1..=n).map(|i| 3.0 * i as f64 / n as f64).collect();
            for w in grid.windows(2) {
                assert!(p.g(w[1]) >= p.g(w[0]));
                let inside = w[1] < p.r;
                if k == 2 || inside {
                    assert!(p.h(w[1]) < p.h(w[0]), "k={k} τ={}", w[1]);
                } else {
                    assert!(p.h(w[1]) <= p.h(w[0]));
                }
            }
            assert!((p.g(p.r) - 1.0).abs() < 1e-12 && p.g_prime(p.r * (1.0 - 1e-12)).abs() < 1e-9);
        }
    }

    #[test]
    fn straight_cylinder_attains_the_bound() {
        let mesh = build_cylinder_mesh(&CylinderDomainSpec::straight(2.0, 2.0 * PI), 0.1).unwrap();
        let r = weinberger_bound(&mesh, 2.0, 0.0, 1e-9).unwrap();
        assert!(r.center[0].abs() < 1e-9);
        assert!((r.rayleigh_bound - PI * PI / 16.0).abs() < 1e-9, "{}", r.rayleigh_bound);
        // Closed form: ∫G² = L·2r·½ for the sine profile.
        assert!((r.g_integral - 2.0 * PI * 2.0).abs() < 1e-9 * r.g_integral);
    }

    #[test]
    fn translation_moves_the_center() {
        let mut spec = CylinderDomainSpec::straight(2.0, 2.0 * PI);
        spec.g_plus.cos = vec![0.3];
        let base = build_cylinder_mesh(&spec, 0.15).unwrap();
        let a = weinberger_bound(&base, 2.0, 0.0, 1e-9).unwrap();
        spec.g_plus.mean += 5.0;
        spec.g_minus.mean += 5.0;
        let moved = build_cylinder_mesh(&spec, 0.15).unwrap();
        let b = weinberger_bound(&moved, 2.0, 0.0, 1e-9).unwrap();
        assert!((b.center[0] - a.center[0] - 5.0).abs() < 1e-8);
        assert!((b.rayleigh_bound - a.rayleigh_bound).abs() < 1e-9 * a.rayleigh_bound);
    }

    #[test]
    fn volume_mismatch_is_refused() {
        let mesh = build_cylinder_mesh(&CylinderDomainSpec::straight(2.0, 2.0 * PI), 0.2).unwrap();
        assert!(matches!(weinberger_bound(&mesh, 2.1, 0.0, 0.0), Err(ReferenceError::VolumeMismatch { .. })));
    }

    #[test]
    fn disk_attains_the_planar_bound() {
        let mesh = build_planar_mesh(&PlanarDomainSpec::disk(1.0), 0.05).unwrap();
        let r = (mesh.area() / PI).sqrt();
        let rep = weinberger_bound(&mesh, r, 0.0, 0.0).unwrap();
        assert!(rep.center[0].hypot(rep.center[1]) < 1e-4, "{rep:?}");
        assert!((rep.rayleigh_bound / rep.mu_r - 1.0).abs() < 2e-3, "{rep:?}");
    }
}
