//! Certificates for strong and weak criticality of μ₂, nodal domain counts
//! and the axial monotonicity of cylinder eigenfunctions.
//!
//! Boundary residuals `q_ij = ⟨∇u_i,∇u_j⟩ − μ₂ u_i u_j` scale with the
//! square of the eigenfunctions. The weak test normalises the basis so
//! that the boundary mean of `u²`, averaged over the cluster, is one; the
//! strong test normalises the tested combination itself, so a strongly
//! critical eigenfunction has `u² ≡ 1` and `λ = −μ₂` on `∂Ω`.

mod weak;

use serde::Serialize;
use thiserror::Error;

use crate::assembly::{triangle_gradient, GradientRecovery};
use crate::eigensolve::EigenCluster;
use crate::geometry::TriMesh;
use crate::shapecalc::ClusterTraces;

pub use weak::{project_spectraplex, weak_criticality_test, WeakOptions, WeakReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriticalityError {
    #[error("projected gradient stalled (residual {residual:e}, gradient mapping {mapping:e})")]
    OptimizerStall { residual: f64, mapping: f64 },
    #[error("function vanishes identically")]
    AllZeroFunction,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// 3-point Gauss–Legendre on `[0, 1]`: exact for the quartic `q²` on an
/// edge.
pub(crate) const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Boundary samples of the residual matrix `Q(s)` at Gauss points, with
/// quadrature weights summing to `|∂Ω|`.
#[derive(Debug, Clone)]
pub struct BoundaryResidual {
    pub m: usize,
    pub mu: f64,
    /// Scale applied to the basis (`u ↦ scale·u`).
    pub scale: f64,
    pub weights: Vec<f64>,
    /// `q[p][i*m + j]` at sample `p`.
    pub q: Vec<Vec<f64>>,
    /// `u_i u_j` at sample `p`, same layout.
    pub uu: Vec<Vec<f64>>,
    pub edge_of: Vec<usize>,
}

impl BoundaryResidual {
    pub fn new(mesh: &TriMesh, cluster: &EigenCluster, recovery: GradientRecovery) -> Self {
        let traces = ClusterTraces::new(mesh, &cluster.basis, recovery);
        let m = traces.len();
        let mu = cluster.mu();
        let mut weights = Vec::new();
        let mut q = Vec::new();
        let mut uu = Vec::new();
        let mut edge_of = Vec::new();
        for (e, edge) in mesh.boundary().iter().enumerate() {
            for &(s, w) in &GAUSS3 {
                weights.push(w * edge.length);
                edge_of.push(e);
                let mut qs = vec![0.0; m * m];
                let mut us = vec![0.0; m * m];
                for i in 0..m {
                    for j in 0..m {
                        qs[i * m + j] = traces.q(i, j, e, s, mu);
                        let lin = |v: [f64; 2]| (1.0 - s) * v[0] + s * v[1];
                        us[i * m + j] = lin(traces.values[i][e]) * lin(traces.values[j][e]);
                    }
                }
                q.push(qs);
                uu.push(us);
            }
        }
        let total: f64 = weights.iter().sum();
        let mean_sq: f64 = (0..m)
            .map(|i| weights.iter().zip(&uu).map(|(w, u)| w * u[i * m + i]).sum::<f64>())
            .sum::<f64>()
            / (m as f64 * total);
        let scale = 1.0 / mean_sq.sqrt();
        let s2 = scale * scale;
        for v in q.iter_mut().chain(uu.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= s2);
        }
        BoundaryResidual {
            m,
            mu,
            scale,
            weights,
            q,
            uu,
            edge_of,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `trace(Q(s) S)` at every sample.
    pub fn combine(&self, s: &[Vec<f64>]) -> Vec<f64> {
        let m = self.m;
        self.q
            .iter()
            .map(|qs| (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| qs[i * m + j] * s[i][j]).sum())
            .collect()
    }

    /// `Σ c_i c_j u_i u_j` at every sample.
    pub fn combine_uu(&self, c: &[f64]) -> Vec<f64> {
        let m = self.m;
        self.uu
            .iter()
            .map(|us| (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| us[i * m + j] * c[i] * c[j]).sum())
            .collect()
    }

    /// Weighted mean and variance of sampled values.
    pub fn mean_var(&self, f: &[f64]) -> (f64, f64) {
        let w = self.total_weight();
        let mean = self.weights.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() / w;
        let var = self.weights.iter().zip(f).map(|(a, b)| a * (b - mean).powi(2)).sum::<f64>() / w;
        (mean, var)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongReport {
    pub direction: Vec<f64>,
    /// Boundary mean of `q = |∇u|² − μ₂u²`.
    pub lambda_fit: f64,
    /// RMS of `q − λ` on `∂Ω`.
    pub deviation_l2: f64,
    pub deviation_sup: f64,
    /// `deviation_l2 / |λ|`.
    pub relative_deviation: f64,
    pub relative_deviation_sup: f64,
    /// Boundary mean of `u²` after normalisation (one up to rounding).
    pub u2_mean: f64,
    /// `−λ/μ₂`, the value `u²` must take on `∂Ω` for a critical point.
    pub u2_target: f64,
    /// `max |u² − u2_target| / u2_target` on `∂Ω`.
    pub u2_relative_deviation: f64,
}

/// Tests whether `u = Σ c_i u_i` solves the overdetermined problem
/// `|∇u|² − μ₂u² = λ` on `∂Ω`.
pub fn strong_criticality_test(
    mesh: &TriMesh,
    cluster: &EigenCluster,
    direction: &[f64],
    recovery: GradientRecovery,
) -> Result<StrongReport, CriticalityError> {
    let br = BoundaryResidual::new(mesh, cluster, recovery);
    strong_from_residual(&br, direction)
}

pub(crate) fn strong_from_residual(br: &BoundaryResidual, direction: &[f64]) -> Result<StrongReport, CriticalityError> {
    if direction.len() != br.m {
        return Err(CriticalityError::InvalidInput(format!("direction has {} entries, cluster {}", direction.len(), br.m)));
    }
    let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !((norm - 1.0).abs() < 1e-8) {
        return Err(CriticalityError::InvalidInput("direction must have unit length".into()));
    }
    let s: Vec<Vec<f64>> = direction.iter().map(|a| direction.iter().map(|b| a * b).collect()).collect();
    // Rescale the tested combination itself to boundary mean-square one.
    let u2_raw = br.combine_uu(direction);
    let (scale, _) = br.mean_var(&u2_raw);
    if !(scale > 0.0) {
        return Err(CriticalityError::AllZeroFunction);
    }
    let q: Vec<f64> = br.combine(&s).into_iter().map(|v| v / scale).collect();
    let u2: Vec<f64> = u2_raw.into_iter().map(|v| v / scale).collect();
    let (lambda, var) = br.mean_var(&q);
    let sup = q.iter().fold(0.0f64, |m, v| m.max((v - lambda).abs()));
    let (u2_mean, _) = br.mean_var(&u2);
    let u2_target = -lambda / br.mu;
    let u2_dev = u2.iter().fold(0.0f64, |m, v| m.max((v - u2_target).abs())) / u2_target.abs();
    Ok(StrongReport {
        direction: direction.to_vec(),
        lambda_fit: lambda,
        deviation_l2: var.sqrt(),
        deviation_sup: sup,
        relative_deviation: var.sqrt() / lambda.abs(),
        relative_deviation_sup: sup / lambda.abs(),
        u2_mean,
        u2_target,
        u2_relative_deviation: u2_dev,
    })
}

/// Unit directions covering the half-sphere of `ℝᵐ` (m ≤ 3), then refined
/// locally around the best candidate.
fn search_directions(m: usize, objective: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let unit = |v: Vec<f64>| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    match m {
        1 => vec![1.0],
        2 => {
            let at = |a: f64| vec![a.cos(), a.sin()];
            let n = 720;
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..n {
                let a = std::f64::consts::PI * k as f64 / n as f64;
                let v = objective(&at(a));
                if v < best.0 {
                    best = (v, a);
                }
            }
            let mut step = std::f64::consts::PI / n as f64;
            while step > 1e-10 {
                for a in [best.1 - step, best.1 + step] {
                    let v = objective(&at(a));
                    if v < best.0 {
                        best = (v, a);
                    }
                }
                step *= 0.5;
            }
            at(best.1)
        }
        _ => {
            // Fibonacci points on the sphere, then coordinate refinement in
            // spherical angles.
            let at = |th: f64, ph: f64| unit(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
            let n = 4000;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let mut best = (f64::INFINITY, 0.0, 0.0);
            for k in 0..n {
                let z = 1.0 - (k as f64 + 0.5) / n as f64;
                let (th, ph) = (z.acos(), golden * k as f64);
                let v = objective(&at(th, ph));
                if v < best.0 {
                    best = (v, th, ph);
                }
            }
            let mut step = 0.05;
            while step > 1e-9 {
                let mut moved = false;
                for (dt, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                    let v = objective(&at(best.1 + dt, best.2 + dp));
                    if v < best.0 {
                        best = (v, best.1 + dt, best.2 + dp);
                        moved = true;
                    }
                }
                if !moved {
                    step *= 0.5;
                }
            }
            at(best.1, best.2)
        }
    }
}

/// The unit combination of the cluster minimising the relative boundary
/// deviation, with its strong report. Supports clusters of size ≤ 3.
pub fn best_strong_direction(
    mesh: &TriMesh,
    cluster: &EigenCluster,
    recovery: GradientRecovery,
) -> Result<StrongReport, CriticalityError> {
    let br = BoundaryResidual::new(mesh, cluster, recovery);
    if br.m > 3 {
        return Err(CriticalityError::InvalidInput("direction search supports m ≤ 3".into()));
    }
    let objective = |c: &[f64]| strong_from_residual(&br, c).map_or(f64::INFINITY, |r| r.relative_deviation);
    let c = search_directions(br.m, objective);
    strong_from_residual(&br, &c)
}

/// Number of nodal domains of a P1 function.
///
/// Vertex signs use a zero threshold of `1e-12·max|u|`; a zero vertex takes
/// the majority sign of the triangle being classified. Triangles whose
/// signs still disagree lie on the nodal line and belong to no domain.
/// Domains are edge-connected sets of same-sign triangles.
pub fn nodal_domain_count(mesh: &TriMesh, u: &[f64]) -> Result<usize, CriticalityError> {
    let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if umax == 0.0 {
        return Err(CriticalityError::AllZeroFunction);
    }
    let sign = |v: f64| {
        if v.abs() <= 1e-12 * umax {
            0
        } else if v > 0.0 {
            1
        } else {
            -1
        }
    };
    let tri_sign: Vec<i32> = mesh
        .triangles()
        .iter()
        .map(|t| {
            let s = t.map(|v| sign(u[mesh.dof(v)]));
            let sum: i32 = s.iter().sum();
            let majority = sum.signum();
            let resolved = s.map(|x| if x == 0 { majority } else { x });
            if resolved.iter().all(|&x| x == resolved[0]) {
                resolved[0]
            } else {
                0
            }
        })
        .collect();
    let nt = tri_sign.len();
    let mut parent: Vec<usize> = (0..nt).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut by_edge = std::collections::HashMap::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if tri_sign[t] == 0 {
            continue;
        }
        for i in 0..3 {
            let a = mesh.dof(tri[i]);
            let b = mesh.dof(tri[(i + 1) % 3]);
            let key = (a.min(b), a.max(b));
            if let Some(&o) = by_edge.get(&key) {
                if tri_sign[o] == tri_sign[t] {
                    let (ra, rb) = (find(&mut parent, o), find(&mut parent, t));
                    parent[ra.max(rb)] = ra.min(rb);
                }
            } else {
                by_edge.insert(key, t);
            }
        }
    }
    Ok((0..nt).filter(|&t| tri_sign[t] != 0 && find(&mut parent, t) == t).count())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub min_ut: f64,
    pub max_ut: f64,
    /// `∂_t u` keeps one strict sign (beyond `1e-6·max|∇u|`) on every
    /// interior triangle.
    pub single_signed: bool,
    pub interior_triangles: usize,
}

/// Sign of `∂_t u` over triangles farther than `collar` from `∂Ω` on a
/// cylinder chart `(t, x)`.
pub fn cylinder_monotonicity_check(mesh: &TriMesh, u: &[f64], collar: f64) -> Result<MonotonicityReport, CriticalityError> {
    let period = mesh
        .period()
        .ok_or_else(|| CriticalityError::InvalidInput("not a cylinder mesh".into()))?;
    let bpts: Vec<[f64; 2]> = mesh.boundary().iter().map(|e| mesh.vertices()[e.a]).collect();
    let dist = |p: [f64; 2]| {
        bpts.iter()
            .map(|q| {
                let dx = (p[1] - q[1]).abs() % period;
                let dx = dx.min(period - dx);
                ((p[0] - q[0]).powi(2) + dx * dx).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let coords = mesh.dof_coords();
    let near: Vec<bool> = coords.iter().map(|&p| dist(p) < collar).collect();
    let (mut lo, mut hi, mut gmax, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0usize);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = triangle_gradient(mesh, t, u);
        gmax = gmax.max(g[0].hypot(g[1]));
        if tri.iter().any(|&v| near[mesh.dof(v)]) {
            continue;
        }
        lo = lo.min(g[0]);
        hi = hi.max(g[0]);
        count += 1;
    }
    let tol = 1e-6 * gmax;
    Ok(MonotonicityReport {
        min_ut: lo,
        max_ut: hi,
        single_signed: count > 0 && (lo > tol || hi < -tol),
        interior_triangles: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::{solve_mesh, SolverOptions};
    use crate::geometry::{build_cylinder_mesh, build_planar_mesh, build_rectangle_mesh, CylinderDomainSpec, PlanarDomainSpec, RectangleSpec};
    use std::f64::consts::PI;

    #[test]
    fn nodal_counts_on_square() {
        let mesh = build_rectangle_mesh(&RectangleSpec { width: 1.0, height: 1.0 }, 0.05).unwrap();
        let s = solve_mesh(&mesh, &SolverOptions::default()).unwrap();
        assert_eq!(nodal_domain_count(&mesh, &s.pairs[0].vector).unwrap(), 2);
        assert_eq!(nodal_domain_count(&mesh, &vec![1.0; mesh.n_dofs()]).unwrap(), 1);
        // cos πx cos πy interpolated directly: checkerboard.
        let u: Vec<f64> = mesh.dof_coords().iter().map(|p| (PI * p[0]).cos() * (PI * p[1]).cos()).collect();
        assert_eq!(nodal_domain_count(&mesh, &u).unwrap(), 4);
        assert_eq!(nodal_domain_count(&mesh, &vec![0.0; mesh.n_dofs()]), Err(CriticalityError::AllZeroFunction));
    }

    #[test]
    fn straight_cylinder_sin_mode_is_strongly_critical() {
        let mesh = build_cylinder_mesh(&CylinderDomainSpec::straight(2.0, 2.0 * PI), 0.08).unwrap();
        let s = solve_mesh(&mesh, &SolverOptions::default()).unwrap();
        assert_eq!(s.cluster.multiplicity(), 1);
        let r = strong_criticality_test(&mesh, &s.cluster, &[1.0], GradientRecovery::default()).unwrap();
        let target = -(PI / 4.0).powi(2);
        assert!((r.lambda_fit - target).abs() < 0.02 * target.abs(), "{r:?}");
        assert!(r.relative_deviation < 0.02);
        assert!(r.u2_relative_deviation < 0.02);
        let mono = cylinder_monotonicity_check(&mesh, &s.cluster.basis[0], 0.16).unwrap();
        assert!(mono.single_signed, "{mono:?}");
        let neg: Vec<f64> = s.cluster.basis[0].iter().map(|v| -v).collect();
        let mono_neg = cylinder_monotonicity_check(&mesh, &neg, 0.16).unwrap();
        assert!(mono_neg.single_signed && (mono_neg.max_ut < 0.0) != (mono.max_ut < 0.0));
    }

    #[test]
    fn disk_single_mode_is_not_strongly_critical() {
        let mesh = build_planar_mesh(&PlanarDomainSpec::disk(1.0), 0.08).unwrap();
        let s = solve_mesh(&mesh, &SolverOptions::default()).unwrap();
        let r = strong_criticality_test(&mesh, &s.cluster, &[1.0, 0.0], GradientRecovery::default()).unwrap();
        // Closed form with boundary-mean-square one: RMS deviation (1+μ)/√2.
        let expect = (1.0 + s.cluster.mu2) / 2f64.sqrt();
        assert!((r.deviation_l2 - expect).abs() < 0.05 * expect, "{} {}", r.deviation_l2, expect);
    }

    #[test]
    fn case_one_mode_is_not_monotone() {
        let mesh = build_cylinder_mesh(&CylinderDomainSpec::straight(1.0, 2.0 * PI), 0.1).unwrap();
        let u: Vec<f64> = mesh.dof_coords().iter().map(|p| p[1].cos()).collect();
        let r = cylinder_monotonicity_check(&mesh, &u, 0.2).unwrap();
        assert!(!r.single_signed);
        // Interpolation leaves an O(h) axial slope of either sign.
        assert!(r.min_ut < 0.0 && r.max_ut > 0.0 && r.max_ut.max(-r.min_ut) < 0.2);
    }
}
