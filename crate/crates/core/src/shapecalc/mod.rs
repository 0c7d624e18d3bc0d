//! Shape calculus for μ₂: deformation fields, mesh transport, the one-sided
//! shape derivative, a finite-difference oracle and the first-order volume
//! expansion.

mod fd;
mod field;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::assembly::{boundary_gradients, boundary_integrate, linear_triple_mean, AssemblyError, BoundaryTrace, GradientRecovery};
use crate::eigensolve::{EigenCluster, EigenError};
use crate::geometry::{GeometryError, TriMesh};
use crate::linalg::LinalgError;

pub use fd::{fd_derivative_oracle, fd_remesh_oracle, fd_slope, richardson, FdReport};
pub use field::{
    boundary_layers, certify, make_volume_preserving, DeformationField, Extension, Preservation, PreservationMode,
    COLLAR_LAYERS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("mesh has no boundary")]
    EmptyBoundary,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Moves every vertex by `eps` times the field displacement; connectivity
/// is kept, so boundary vertices move by `eps·h·η` in the sense of
/// [`DeformationField::from_normal_speed`].
pub fn transport_mesh(mesh: &TriMesh, field: &DeformationField, eps: f64) -> Result<TriMesh, ShapeError> {
    if field.displacement.len() != mesh.n_dofs() {
        return Err(ShapeError::InvalidInput("field belongs to another mesh".into()));
    }
    Ok(mesh.displaced(&field.displacement, eps)?)
}

/// Values and gradients of cluster basis functions at the endpoints of
/// every boundary edge.
#[derive(Debug, Clone)]
pub struct ClusterTraces {
    pub values: Vec<Vec<[f64; 2]>>,
    pub grads: Vec<Vec<[[f64; 2]; 2]>>,
}

impl ClusterTraces {
    pub fn new(mesh: &TriMesh, basis: &[Vec<f64>], recovery: GradientRecovery) -> Self {
        let values = basis
            .iter()
            .map(|u| mesh.boundary().iter().map(|e| [u[mesh.dof(e.a)], u[mesh.dof(e.b)]]).collect())
            .collect();
        let grads = basis.iter().map(|u| boundary_gradients(mesh, u, recovery)).collect();
        ClusterTraces { values, grads }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `q_ij = ⟨∇u_i, ∇u_j⟩ − μ u_i u_j` at parameter `s ∈ [0, 1]` of edge `e`.
    pub fn q(&self, i: usize, j: usize, e: usize, s: f64, mu: f64) -> f64 {
        let lin = |v: [f64; 2]| (1.0 - s) * v[0] + s * v[1];
        let gi = self.grads[i][e];
        let gj = self.grads[j][e];
        let gx = |g: [[f64; 2]; 2], k: usize| lin([g[0][k], g[1][k]]);
        gx(gi, 0) * gx(gj, 0) + gx(gi, 1) * gx(gj, 1) - mu * lin(self.values[i][e]) * lin(self.values[j][e])
    }
}

/// `A_ij = ∫_{∂Ω} (⟨∇u_i,∇u_j⟩ − μ u_i u_j) h dσ`, integrated exactly for
/// piecewise linear traces.
pub fn derivative_matrix(mesh: &TriMesh, traces: &ClusterTraces, mu: f64, speed: &BoundaryTrace) -> Vec<Vec<f64>> {
    let m = traces.len();
    let h = speed.to_edge_linear(mesh);
    let mut a = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let mut s = 0.0;
            for (e, edge) in mesh.boundary().iter().enumerate() {
                let gi = traces.grads[i][e];
                let gj = traces.grads[j][e];
                let mut v = 0.0;
                for k in 0..2 {
                    v += linear_triple_mean([gi[0][k], gi[1][k]], [gj[0][k], gj[1][k]], h[e]);
                }
                v -= mu * linear_triple_mean(traces.values[i][e], traces.values[j][e], h[e]);
                s += v * edge.length;
            }
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeDerivativeReport {
    pub a_matrix: Vec<Vec<f64>>,
    /// `λ_min(A)`: the right derivative of μ₂ along the field.
    pub one_sided_derivative: f64,
    /// `λ_max(A)`; the right derivative along `−V` is `−λ_max(A)`.
    pub max_eigenvalue: f64,
    /// Unit coefficients `c` of the minimising eigenfunction `Σ c_i u_i`.
    pub minimizing_direction: Vec<f64>,
    pub fd_estimate: Option<f64>,
}

/// Smallest and largest eigenpairs of a small symmetric matrix.
pub(crate) fn sym_extremes(a: &[Vec<f64>]) -> (f64, Vec<f64>, f64, Vec<f64>) {
    let m = a.len();
    let mat = DMatrix::from_fn(m, m, |i, j| a[i][j]);
    let eig = SymmetricEigen::new(mat);
    let (mut lo, mut hi) = (0usize, 0usize);
    for i in 1..m {
        if eig.eigenvalues[i] < eig.eigenvalues[lo] {
            lo = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[hi] {
            hi = i;
        }
    }
    let vec_of = |k: usize| {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let big = v.iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() + 1e-12 { x } else { b });
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    (eig.eigenvalues[lo], vec_of(lo), eig.eigenvalues[hi], vec_of(hi))
}

/// One-sided derivative of μ₂ along a deformation field.
///
/// The right derivative is the minimum over unit-L² eigenfunctions `u` of
/// `∫_{∂Ω} (|∇u|² − μ₂u²)⟨V,η⟩ dσ`. Writing `u = Σ c_i u_i` in an
/// orthonormal basis of the eigenspace turns the integral into `cᵀAc` with
/// `|c| = 1`, whose minimum is `λ_min(A)`.
pub fn one_sided_derivative(
    mesh: &TriMesh,
    cluster: &EigenCluster,
    field: &DeformationField,
    recovery: GradientRecovery,
) -> Result<ShapeDerivativeReport, ShapeError> {
    if field.speed.len() != mesh.boundary().len() {
        return Err(ShapeError::InvalidInput("field speed does not match the mesh boundary".into()));
    }
    let traces = ClusterTraces::new(mesh, &cluster.basis, recovery);
    let a = derivative_matrix(mesh, &traces, cluster.mu(), &field.speed);
    let (lmin, dir, lmax, _) = sym_extremes(&a);
    Ok(ShapeDerivativeReport {
        a_matrix: a,
        one_sided_derivative: lmin,
        max_eigenvalue: lmax,
        minimizing_direction: dir,
        fd_estimate: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeReport {
    /// `(|Ω_ε| − |Ω_{−ε}|) / 2ε` from transported meshes.
    pub fd_slope: f64,
    /// `∫_{∂Ω} ⟨V, η⟩ dσ`.
    pub analytic_slope: f64,
    pub abs_mismatch: f64,
    /// `abs_mismatch / |analytic_slope|` (infinite for a zero slope).
    pub rel_mismatch: f64,
    /// Per-component flux `∫_{Γ_k} ⟨V, η⟩ dσ`.
    pub component_slopes: Vec<f64>,
    /// Per-component FD slope of the area of triangles nearest to `Γ_k`.
    pub component_fd_slopes: Vec<f64>,
}

/// First-order volume expansion check: `d/dε |Ω_ε| = ∫_{∂Ω} ⟨V,η⟩ dσ`.
pub fn volume_expansion_check(mesh: &TriMesh, field: &DeformationField, eps: f64) -> Result<VolumeReport, ShapeError> {
    if !(eps > 0.0) {
        return Err(ShapeError::InvalidInput("eps must be positive".into()));
    }
    let plus = transport_mesh(mesh, field, eps)?;
    let minus = transport_mesh(mesh, field, -eps)?;
    let fd_slope = (plus.area() - minus.area()) / (2.0 * eps);
    let analytic_slope = boundary_integrate(mesh, &field.speed, None)?;
    let ncomp = mesh.components().len();
    let component_slopes = (0..ncomp)
        .map(|k| boundary_integrate(mesh, &field.speed, Some(k)))
        .collect::<Result<Vec<_>, _>>()?;
    let (_, comp) = boundary_layers(mesh);
    let mut component_fd_slopes = vec![0.0; ncomp];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        // Majority vote of the vertex owners.
        let owners = tri.map(|v| comp[mesh.dof(v)]);
        let k = if owners[1] == owners[2] { owners[1] } else { owners[0] };
        if k < ncomp {
            component_fd_slopes[k] += (plus.triangle_area(t) - minus.triangle_area(t)) / (2.0 * eps);
        }
    }
    let abs_mismatch = (fd_slope - analytic_slope).abs();
    Ok(VolumeReport {
        fd_slope,
        analytic_slope,
        abs_mismatch,
        rel_mismatch: abs_mismatch / analytic_slope.abs(),
        component_slopes,
        component_fd_slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::{solve_mesh, SolverOptions};
    use crate::geometry::{build_planar_mesh, PlanarDomainSpec};

    #[test]
    fn dilation_of_disk() {
        let mesh = build_planar_mesh(&PlanarDomainSpec::disk(1.0), 0.05).unwrap();
        let s = solve_mesh(&mesh, &SolverOptions::default()).unwrap();
        let f = DeformationField::from_vector_field(&mesh, |p| p);
        let r = one_sided_derivative(&mesh, &s.cluster, &f, GradientRecovery::default()).unwrap();
        let target = -2.0 * s.cluster.mu2;
        for i in 0..2 {
            assert!((r.a_matrix[i][i] - target).abs() < 0.02 * target.abs(), "{:?}", r.a_matrix);
        }
        assert!((r.one_sided_derivative - target).abs() < 0.02 * target.abs());
        assert!(r.one_sided_derivative <= r.a_matrix[0][0] + 1e-12);
    }

    #[test]
    fn derivative_matrix_is_linear_in_the_field() {
        let mesh = build_planar_mesh(&PlanarDomainSpec::disk(1.0), 0.1).unwrap();
        let s = solve_mesh(&mesh, &SolverOptions::default()).unwrap();
        let f1 = DeformationField::from_vector_field(&mesh, |p| [p[0] * p[1], 1.0]);
        let f2 = DeformationField::from_vector_field(&mesh, |p| [p[1].sin(), p[0]]);
        let traces = ClusterTraces::new(&mesh, &s.cluster.basis, GradientRecovery::default());
        let mu = s.cluster.mu();
        let a1 = derivative_matrix(&mesh, &traces, mu, &f1.speed);
        let a2 = derivative_matrix(&mesh, &traces, mu, &f2.speed);
        let comb = f1.scaled(2.0).add(&mesh, &f2.scaled(-0.5));
        let a = derivative_matrix(&mesh, &traces, mu, &comb.speed);
        for i in 0..2 {
            for j in 0..2 {
                let want = 2.0 * a1[i][j] - 0.5 * a2[i][j];
                assert!((a[i][j] - want).abs() <= 1e-10 * want.abs().max(1.0));
                assert_eq!(a[i][j], a[j][i]);
            }
        }
    }

    #[test]
    fn volume_expansion_of_dilation_and_translation() {
        let mesh = build_planar_mesh(&PlanarDomainSpec::disk(1.0), 0.05).unwrap();
        let dil = DeformationField::from_vector_field(&mesh, |p| p);
        let r = volume_expansion_check(&mesh, &dil, 1e-3).unwrap();
        assert!((r.analytic_slope - 2.0 * std::f64::consts::PI).abs() < 0.01 * 2.0 * std::f64::consts::PI);
        assert!(r.rel_mismatch < 1e-8);
        let tr = DeformationField::from_vector_field(&mesh, |_| [0.3, -0.8]);
        let r = volume_expansion_check(&mesh, &tr, 1e-3).unwrap();
        assert!(r.analytic_slope.abs() < 1e-10);
    }

    #[test]
    fn zero_step_transport_is_identity() {
        let mesh = build_planar_mesh(&PlanarDomainSpec::disk(1.0), 0.2).unwrap();
        let f = DeformationField::from_vector_field(&mesh, |p| [p[1], -p[0]]);
        assert_eq!(transport_mesh(&mesh, &f, 0.0).unwrap(), mesh);
    }
}
