//! Domain descriptions, mesh generation and mesh I/O.

pub mod io;
mod mesh;
mod mesher;
mod spec;

use std::collections::HashMap;
use std::f64::consts::PI;

use thiserror::Error;

pub use mesh::{BoundaryEdge, TriMesh};
pub use spec::{CylinderDomainSpec, Domain, DomainSpec, FourierSeries, PlanarDomainSpec, RectangleSpec};

use mesher::{triangulate, CurveFn, LoopInput, LoopSegment, RefineParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("radius or height must stay positive (minimum {0})")]
    NonPositiveRadius(f64),
    #[error("invalid domain: {0}")]
    InvalidSpec(String),
    #[error("invalid mesh size h = {0}")]
    InvalidMeshSize(f64),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("mesh quality failure: {0}")]
    MeshQualityFailure(String),
    #[error("triangle {triangle} inverted (signed area {area:e})")]
    MeshFoldOver { triangle: usize, area: f64 },
    #[error("mesh I/O: {0}")]
    Io(String),
}

/// Refinement target: smallest angle and circumradius relative to `h`.
const MIN_ANGLE_TARGET: f64 = 26.0;
const MIN_ANGLE_ACCEPT: f64 = 20.0;
const CIRCUMRADIUS_FACTOR: f64 = 0.65;

fn params_for(h: f64, area: f64) -> RefineParams {
    RefineParams {
        max_circumradius: CIRCUMRADIUS_FACTOR * h,
        min_angle_deg: MIN_ANGLE_TARGET,
        max_vertices: (40.0 * area / (h * h)) as usize + 20_000,
    }
}

fn check_h(h: f64, scale: f64) -> Result<(), GeometryError> {
    if !(h > 0.0) || !h.is_finite() || h > 0.5 * scale {
        return Err(GeometryError::InvalidMeshSize(h));
    }
    Ok(())
}

fn check_quality(mesh: TriMesh) -> Result<TriMesh, GeometryError> {
    let a = mesh.min_angle_deg();
    if a < MIN_ANGLE_ACCEPT {
        return Err(GeometryError::MeshQualityFailure(format!(
            "minimum angle {a:.2} deg below {MIN_ANGLE_ACCEPT}"
        )));
    }
    Ok(mesh)
}

/// Parameters splitting a curve into pieces of equal arclength.
///
/// `speed` is `|γ'(s)|` on `[s0, s1]`.
fn equal_arclength(speed: impl Fn(f64) -> f64, s0: f64, s1: f64, h: f64, min_pieces: usize) -> Vec<f64> {
    let fine = 8192;
    let ds = (s1 - s0) / fine as f64;
    let mut cum = vec![0.0; fine + 1];
    let mut prev = speed(s0);
    for i in 1..=fine {
        let mid = speed(s0 + (i as f64 - 0.5) * ds);
        let cur = speed(s0 + i as f64 * ds);
        cum[i] = cum[i - 1] + ds * (prev + 4.0 * mid + cur) / 6.0;
        prev = cur;
    }
    let total = cum[fine];
    let n = ((total / h).round() as usize).max(min_pieces);
    let mut out = Vec::with_capacity(n + 1);
    out.push(s0);
    let mut j = 0;
    for i in 1..n {
        let target = total * i as f64 / n as f64;
        while cum[j + 1] < target {
            j += 1;
        }
        let w = (target - cum[j]) / (cum[j + 1] - cum[j]);
        out.push(s0 + (j as f64 + w) * ds);
    }
    out.push(s1);
    out
}

/// Boundary sampled at arclength spacing close to `h`, then Delaunay
/// refinement. Boundary vertices lie on the analytic curve.
pub fn build_planar_mesh(spec: &PlanarDomainSpec, h: f64) -> Result<TriMesh, GeometryError> {
    spec.validate()?;
    check_h(h, spec.min_radius())?;
    let thetas = equal_arclength(
        |t| {
            let (r, dr) = spec.radius(t);
            (r * r + dr * dr).sqrt()
        },
        0.0,
        2.0 * PI,
        h,
        12,
    );
    let n = thetas.len() - 1;
    let points: Vec<[f64; 2]> = thetas[..n].iter().map(|&t| spec.point(t)).collect();
    let segments = (0..n)
        .map(|i| LoopSegment {
            curve: 0,
            t0: thetas[i],
            t1: thetas[i + 1],
            mirror: None,
        })
        .collect();
    let s = spec.clone();
    let curves: Vec<CurveFn> = vec![Box::new(move |t| s.point(t))];
    let out = triangulate(
        LoopInput {
            points,
            segments,
            curves,
        },
        &params_for(h, spec.area()),
    )?;
    check_quality(TriMesh::new(out.vertices, out.triangles, None, None)?)
}

pub fn build_rectangle_mesh(spec: &RectangleSpec, h: f64) -> Result<TriMesh, GeometryError> {
    spec.validate()?;
    check_h(h, spec.width.min(spec.height))?;
    let corners = [
        [0.0, 0.0],
        [spec.width, 0.0],
        [spec.width, spec.height],
        [0.0, spec.height],
    ];
    let mut points = Vec::new();
    let mut segments = Vec::new();
    let mut curves: Vec<CurveFn> = Vec::new();
    for side in 0..4 {
        let p = corners[side];
        let q = corners[(side + 1) % 4];
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        let n = ((len / h).round() as usize).max(1);
        for i in 0..n {
            let s = i as f64 / n as f64;
            points.push(if i == 0 {
                p
            } else {
                [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
            });
            segments.push(LoopSegment {
                curve: side,
                t0: s,
                t1: (i + 1) as f64 / n as f64,
                mirror: None,
            });
        }
        curves.push(Box::new(move |s| [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]));
    }
    let out = triangulate(
        LoopInput {
            points,
            segments,
            curves,
        },
        &params_for(h, spec.area()),
    )?;
    check_quality(TriMesh::new(out.vertices, out.triangles, None, None)?)
}

/// Mesh of the chart `{(t, x) : g₋(x) < t < g₊(x), 0 ≤ x ≤ L}` with the
/// seams `x = 0` and `x = L` identified.
pub fn build_cylinder_mesh(spec: &CylinderDomainSpec, h: f64) -> Result<TriMesh, GeometryError> {
    spec.validate()?;
    let l = spec.circumference;
    check_h(h, spec.min_height().min(l))?;
    let up = |x: f64| (1.0 + spec.upper(x).1.powi(2)).sqrt();
    let lo = |x: f64| (1.0 + spec.lower(x).1.powi(2)).sqrt();
    let xu = equal_arclength(up, 0.0, l, h, 6);
    let xl = equal_arclength(lo, 0.0, l, h, 6);
    let t_bot = spec.lower(0.0).0;
    let t_top = spec.upper(0.0).0;
    let ns = (((t_top - t_bot) / h).round() as usize).max(2);
    let ts: Vec<f64> = (0..=ns)
        .map(|j| {
            if j == ns {
                t_top
            } else {
                t_bot + (t_top - t_bot) * j as f64 / ns as f64
            }
        })
        .collect();

    let mut points = Vec::new();
    let mut segments = Vec::new();
    let nu = xu.len() - 1;
    let nl = xl.len() - 1;
    // Seam x = 0, left to right in t.
    for j in 0..ns {
        points.push([ts[j], 0.0]);
        segments.push(LoopSegment {
            curve: 2,
            t0: ts[j],
            t1: ts[j + 1],
            mirror: Some(ns + nu + (ns - 1 - j)),
        });
    }
    // Upper graph, x increasing.
    for i in 0..nu {
        points.push(if i == 0 {
            [t_top, 0.0]
        } else {
            [spec.upper(xu[i]).0, xu[i]]
        });
        segments.push(LoopSegment {
            curve: 0,
            t0: xu[i],
            t1: xu[i + 1],
            mirror: None,
        });
    }
    // Seam x = L, right to left in t.
    for k in 0..ns {
        let j = ns - k;
        points.push([ts[j], l]);
        segments.push(LoopSegment {
            curve: 3,
            t0: ts[j],
            t1: ts[j - 1],
            mirror: Some(ns - 1 - k),
        });
    }
    // Lower graph, x decreasing.
    for i in (1..=nl).rev() {
        points.push(if i == nl {
            [t_bot, l]
        } else {
            [spec.lower(xl[i]).0, xl[i]]
        });
        segments.push(LoopSegment {
            curve: 1,
            t0: xl[i],
            t1: xl[i - 1],
            mirror: None,
        });
    }
    let s0 = spec.clone();
    let s1 = spec.clone();
    let curves: Vec<CurveFn> = vec![
        Box::new(move |x| [s0.upper(x).0, x]),
        Box::new(move |x| [s1.lower(x).0, x]),
        Box::new(|t| [t, 0.0]),
        Box::new(move |t| [t, l]),
    ];
    let out = triangulate(
        LoopInput {
            points,
            segments,
            curves,
        },
        &params_for(h, spec.volume()),
    )?;
    // Identify x = L copies with their x = 0 partners.
    let mut left: HashMap<u64, usize> = HashMap::new();
    for (v, p) in out.vertices.iter().enumerate() {
        if p[1] == 0.0 {
            left.insert(p[0].to_bits(), v);
        }
    }
    let mut dof = vec![usize::MAX; out.vertices.len()];
    let mut next = 0;
    for (v, p) in out.vertices.iter().enumerate() {
        if p[1] == l {
            continue;
        }
        dof[v] = next;
        next += 1;
    }
    for (v, p) in out.vertices.iter().enumerate() {
        if p[1] == l {
            let partner = left
                .get(&p[0].to_bits())
                .ok_or_else(|| GeometryError::InvalidMesh("unmatched seam vertex".into()))?;
            dof[v] = dof[*partner];
        }
    }
    check_quality(TriMesh::new(out.vertices, out.triangles, Some(dof), Some(l))?)
}

/// Mesh of the image of a planar or rectangular domain under `map`, a small
/// perturbation of the identity. Boundary vertices lie on the mapped
/// analytic boundary; rectangle corners stay corners.
pub fn build_mapped_mesh(domain: &Domain, h: f64, map: &dyn Fn([f64; 2]) -> [f64; 2]) -> Result<TriMesh, GeometryError> {
    domain.validate()?;
    let (curves, area, scale): (Vec<CurveFn>, f64, f64) = match domain {
        Domain::Planar(spec) => {
            let s = spec.clone();
            (vec![Box::new(move |t| map(s.point(t)))], spec.area(), spec.min_radius())
        }
        Domain::Rectangle(r) => {
            let c = [[0.0, 0.0], [r.width, 0.0], [r.width, r.height], [0.0, r.height]];
            let curves = (0..4)
                .map(|side| {
                    let p = c[side];
                    let q = c[(side + 1) % 4];
                    Box::new(move |s: f64| map([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])])) as CurveFn
                })
                .collect();
            (curves, r.area(), r.width.min(r.height))
        }
        Domain::Cylinder(_) => {
            return Err(GeometryError::InvalidSpec("mapped remeshing supports planar and rectangle domains".into()))
        }
    };
    check_h(h, scale)?;
    let (s0, s1) = match domain {
        Domain::Planar(_) => (0.0, 2.0 * PI),
        _ => (0.0, 1.0),
    };
    let mut points = Vec::new();
    let mut segments = Vec::new();
    for (ci, curve) in curves.iter().enumerate() {
        let d = 1e-6 * (s1 - s0);
        let speed = |t: f64| {
            let a = curve(t - d);
            let b = curve(t + d);
            ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt() / (2.0 * d)
        };
        let ts = equal_arclength(speed, s0, s1, h, if curves.len() == 1 { 12 } else { 1 });
        let n = ts.len() - 1;
        for i in 0..n {
            points.push(curve(ts[i]));
            segments.push(LoopSegment {
                curve: ci,
                t0: ts[i],
                t1: ts[i + 1],
                mirror: None,
            });
        }
    }
    let out = triangulate(
        LoopInput {
            points,
            segments,
            curves,
        },
        &params_for(h, area),
    )?;
    check_quality(TriMesh::new(out.vertices, out.triangles, None, None)?)
}

pub fn build_mesh(domain: &Domain, h: f64) -> Result<TriMesh, GeometryError> {
    match domain {
        Domain::Planar(p) => build_planar_mesh(p, h),
        Domain::Cylinder(c) => build_cylinder_mesh(c, h),
        Domain::Rectangle(r) => build_rectangle_mesh(r, h),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_mesh_quality_and_boundary() {
        let spec = PlanarDomainSpec::disk(1.0);
        let m = build_planar_mesh(&spec, 0.1).unwrap();
        assert!(m.min_angle_deg() >= 20.0);
        assert_eq!(m.components().len(), 1);
        for e in m.boundary() {
            let p = m.vertices()[e.a];
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
            // Outward normal points away from the origin.
            let mid = e.midpoint(&m);
            assert!(mid[0] * e.normal[0] + mid[1] * e.normal[1] > 0.0);
        }
        assert!((m.area() - PI).abs() < 0.02);
        assert!((m.boundary_length() - 2.0 * PI).abs() < 0.01);
    }

    #[test]
    fn area_converges_quadratically() {
        let spec = PlanarDomainSpec::disk(1.0);
        let e1 = (build_planar_mesh(&spec, 0.1).unwrap().area() - PI).abs();
        let e2 = (build_planar_mesh(&spec, 0.05).unwrap().area() - PI).abs();
        let e3 = (build_planar_mesh(&spec, 0.025).unwrap().area() - PI).abs();
        let o1 = (e1 / e2).log2();
        let o2 = (e2 / e3).log2();
        assert!(o1 > 1.9 && o2 > 1.9, "orders {o1} {o2}");
    }

    #[test]
    fn ellipse_like_mesh() {
        let spec = PlanarDomainSpec {
            rho0: 1.0,
            cos: vec![0.0, 0.3],
            sin: vec![],
        };
        let m = build_planar_mesh(&spec, 0.05).unwrap();
        assert!(m.min_angle_deg() >= 20.0);
        for e in m.boundary() {
            let p = m.vertices()[e.a];
            let th = p[1].atan2(p[0]);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((r - spec.radius(th).0).abs() < 1e-12);
        }
    }

    #[test]
    fn cylinder_mesh_identifies_seams() {
        let spec = CylinderDomainSpec::straight(1.0, 2.0 * PI);
        let m = build_cylinder_mesh(&spec, 0.1).unwrap();
        assert!(m.n_dofs() < m.n_vertices());
        assert_eq!(m.components().len(), 2);
        assert!((m.area() - 4.0 * PI).abs() < 1e-10);
        assert!((m.boundary_length() - 4.0 * PI).abs() < 1e-10);
        for e in m.boundary() {
            let t = m.vertices()[e.a][0];
            assert!((t.abs() - 1.0).abs() < 1e-14);
            assert!((e.normal[0] - t.signum()).abs() < 1e-14);
        }
        assert!(m.min_angle_deg() >= 20.0);
    }

    #[test]
    fn wavy_cylinder_mesh() {
        let spec = CylinderDomainSpec {
            circumference: 2.0 * PI,
            g_plus: FourierSeries {
                mean: 2.0,
                cos: vec![0.3],
                sin: vec![],
            },
            g_minus: FourierSeries {
                mean: -2.0,
                cos: vec![],
                sin: vec![0.0, 0.2],
            },
        };
        let m = build_cylinder_mesh(&spec, 0.1).unwrap();
        assert!(m.min_angle_deg() >= 20.0);
        assert!((m.area() - spec.volume()).abs() / spec.volume() < 1e-3);
        for e in m.boundary() {
            let p = m.vertices()[e.a];
            let g = if p[0] > 0.0 { spec.upper(p[1]).0 } else { spec.lower(p[1]).0 };
            assert!((p[0] - g).abs() < 1e-12);
        }
    }

    #[test]
    fn square_mesh() {
        let m = build_rectangle_mesh(&RectangleSpec { width: 1.0, height: 1.0 }, 0.05).unwrap();
        assert!((m.area() - 1.0).abs() < 1e-12);
        assert!(m.min_angle_deg() >= 20.0);
    }

    #[test]
    fn deterministic() {
        let spec = PlanarDomainSpec {
            rho0: 1.0,
            cos: vec![0.0, 0.0, 0.15],
            sin: vec![],
        };
        let a = build_planar_mesh(&spec, 0.07).unwrap();
        let b = build_planar_mesh(&spec, 0.07).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_h() {
        let spec = PlanarDomainSpec::disk(1.0);
        assert!(matches!(build_planar_mesh(&spec, 0.0), Err(GeometryError::InvalidMeshSize(_))));
        assert!(matches!(build_planar_mesh(&spec, 2.0), Err(GeometryError::InvalidMeshSize(_))));
    }

    #[test]
    fn mapped_mesh_of_identity_matches_analytic_area() {
        let d = Domain::Planar(PlanarDomainSpec::disk(1.0));
        let m = build_mapped_mesh(&d, 0.05, &|p| [1.1 * p[0] + 0.3, 1.1 * p[1]]).unwrap();
        assert!((m.area() - 1.21 * PI).abs() < 5e-3);
        let r = Domain::Rectangle(RectangleSpec { width: 1.0, height: 1.0 });
        let m = build_mapped_mesh(&r, 0.05, &|p| [2.0 * p[0], p[1]]).unwrap();
        assert!((m.area() - 2.0).abs() < 1e-12);
        assert_eq!(m.components().len(), 1);
    }
}
