//! P1 finite elements: stiffness and mass matrices, boundary traces and
//! boundary quadrature.

use thiserror::Error;

use crate::geometry::TriMesh;
use crate::linalg::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("triangle {triangle} is singular (area {area:e})")]
    SingularTriangle { triangle: usize, area: f64 },
    #[error("boundary component {0} does not exist")]
    ComponentNotFound(usize),
    #[error("trace has {got} entries, mesh has {expected} boundary edges")]
    TraceLength { expected: usize, got: usize },
}

/// Element stiffness `∫ ∇φᵢ·∇φⱼ` of a counter-clockwise triangle.
///
/// Off-diagonal entries are computed once and mirrored; the diagonal is minus
/// the sum of its row so constants are annihilated to rounding.
pub fn element_stiffness(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]));
    // Edge opposite vertex i, rotated: ∇φᵢ = rot(e_i) / (2A).
    let e = [
        [p[2][0] - p[1][0], p[2][1] - p[1][1]],
        [p[0][0] - p[2][0], p[0][1] - p[2][1]],
        [p[1][0] - p[0][0], p[1][1] - p[0][1]],
    ];
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i + 1..3 {
            let v = (e[i][0] * e[j][0] + e[i][1] * e[j][1]) / (4.0 * area);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    for i in 0..3 {
        k[i][i] = -(k[i][(i + 1) % 3] + k[i][(i + 2) % 3]);
    }
    k
}

/// Element mass: `area/12·[[2,1,1],[1,2,1],[1,1,2]]`, or `area/3·I` lumped.
pub fn element_mass(area: f64, lumped: bool) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if lumped {
                if i == j {
                    area / 3.0
                } else {
                    0.0
                }
            } else if i == j {
                area / 6.0
            } else {
                area / 12.0
            };
        }
    }
    m
}

fn check_triangles(mesh: &TriMesh) -> Result<(), AssemblyError> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in mesh.vertices() {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let scale2 = (hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2);
    for t in 0..mesh.triangles().len() {
        let area = mesh.triangle_area(t);
        if area < 1e-14 * scale2 {
            return Err(AssemblyError::SingularTriangle { triangle: t, area });
        }
    }
    Ok(())
}

fn assemble(mesh: &TriMesh, element: impl Fn(usize) -> [[f64; 3]; 3]) -> CsrMatrix {
    let mut trip = Vec::with_capacity(9 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let ke = element(t);
        let d = tri.map(|v| mesh.dof(v));
        for i in 0..3 {
            for j in 0..3 {
                if ke[i][j] != 0.0 || i == j {
                    trip.push((d[i], d[j], ke[i][j]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(mesh.n_dofs(), trip)
}

/// Stiffness matrix over the mesh dofs.
pub fn assemble_stiffness(mesh: &TriMesh) -> Result<CsrMatrix, AssemblyError> {
    check_triangles(mesh)?;
    Ok(assemble(mesh, |t| element_stiffness(mesh.triangle_points(t))))
}

/// Mass matrix over the mesh dofs, consistent or row-sum lumped.
pub fn assemble_mass(mesh: &TriMesh, lumped: bool) -> Result<CsrMatrix, AssemblyError> {
    check_triangles(mesh)?;
    Ok(assemble(mesh, |t| element_mass(mesh.triangle_area(t), lumped)))
}

/// Constant gradient of the P1 interpolant of `u` on triangle `t`.
pub fn triangle_gradient(mesh: &TriMesh, t: usize, u: &[f64]) -> [f64; 2] {
    let p = mesh.triangle_points(t);
    let tri = mesh.triangles()[t];
    let two_a = 2.0 * mesh.triangle_area(t);
    let mut g = [0.0; 2];
    for i in 0..3 {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        let ui = u[mesh.dof(tri[i])];
        g[0] += ui * (a[1] - b[1]) / two_a;
        g[1] += ui * (b[0] - a[0]) / two_a;
    }
    g
}

/// Scalar data on `∂Ω`.
///
/// `Vertex` values are indexed by boundary edge: entry `e` is the value at
/// the start vertex of edge `e`, the end value is entry `next_edge(e)`.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryTrace {
    Edge(Vec<f64>),
    Vertex(Vec<f64>),
    EdgeLinear(Vec<[f64; 2]>),
}

impl BoundaryTrace {
    pub fn len(&self) -> usize {
        match self {
            BoundaryTrace::Edge(v) | BoundaryTrace::Vertex(v) => v.len(),
            BoundaryTrace::EdgeLinear(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn constant(mesh: &TriMesh, c: f64) -> Self {
        BoundaryTrace::Edge(vec![c; mesh.boundary().len()])
    }

    /// Samples `f` at the boundary vertices.
    pub fn from_vertex_fn(mesh: &TriMesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        BoundaryTrace::Vertex(mesh.boundary().iter().map(|e| f(mesh.vertices()[e.a])).collect())
    }

    /// Nodal values of a dof vector restricted to the boundary.
    pub fn from_nodal(mesh: &TriMesh, u: &[f64]) -> Self {
        BoundaryTrace::Vertex(mesh.boundary().iter().map(|e| u[mesh.dof(e.a)]).collect())
    }

    /// Values at the two endpoints of edge `e`.
    pub fn endpoints(&self, mesh: &TriMesh, e: usize) -> [f64; 2] {
        match self {
            BoundaryTrace::Edge(v) => [v[e], v[e]],
            BoundaryTrace::Vertex(v) => [v[e], v[mesh.next_edge(e)]],
            BoundaryTrace::EdgeLinear(v) => v[e],
        }
    }

    /// The same data as endpoint pairs.
    pub fn to_edge_linear(&self, mesh: &TriMesh) -> Vec<[f64; 2]> {
        (0..self.len()).map(|e| self.endpoints(mesh, e)).collect()
    }

    /// Edge averages.
    pub fn edge_means(&self, mesh: &TriMesh) -> Vec<f64> {
        (0..self.len())
            .map(|e| {
                let [a, b] = self.endpoints(mesh, e);
                0.5 * (a + b)
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            BoundaryTrace::Edge(v) | BoundaryTrace::Vertex(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            BoundaryTrace::EdgeLinear(v) => v.iter().fold(0.0, |m, x| m.max(x[0].abs()).max(x[1].abs())),
        }
    }

    /// Adds `c` on the edges of `component` (all edges if `None`).
    pub fn shifted(&self, mesh: &TriMesh, c: f64, component: Option<usize>) -> Self {
        let hit = |e: usize| component.map_or(true, |k| mesh.component_of_edge(e) == k);
        match self {
            BoundaryTrace::Edge(v) => {
                BoundaryTrace::Edge(v.iter().enumerate().map(|(e, x)| if hit(e) { x + c } else { *x }).collect())
            }
            BoundaryTrace::Vertex(v) => {
                BoundaryTrace::Vertex(v.iter().enumerate().map(|(e, x)| if hit(e) { x + c } else { *x }).collect())
            }
            BoundaryTrace::EdgeLinear(v) => BoundaryTrace::EdgeLinear(
                v.iter()
                    .enumerate()
                    .map(|(e, x)| if hit(e) { [x[0] + c, x[1] + c] } else { *x })
                    .collect(),
            ),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            BoundaryTrace::Edge(v) => BoundaryTrace::Edge(v.iter().map(|x| s * x).collect()),
            BoundaryTrace::Vertex(v) => BoundaryTrace::Vertex(v.iter().map(|x| s * x).collect()),
            BoundaryTrace::EdgeLinear(v) => BoundaryTrace::EdgeLinear(v.iter().map(|x| [s * x[0], s * x[1]]).collect()),
        }
    }
}

fn edge_range(mesh: &TriMesh, component: Option<usize>) -> Result<std::ops::Range<usize>, AssemblyError> {
    match component {
        None => Ok(0..mesh.boundary().len()),
        Some(k) => mesh.components().get(k).cloned().ok_or(AssemblyError::ComponentNotFound(k)),
    }
}

fn check_len(mesh: &TriMesh, trace: &BoundaryTrace) -> Result<(), AssemblyError> {
    if trace.len() != mesh.boundary().len() {
        return Err(AssemblyError::TraceLength {
            expected: mesh.boundary().len(),
            got: trace.len(),
        });
    }
    Ok(())
}

/// `∫ trace dσ` over `∂Ω` or one of its components (midpoint rule, exact for
/// piecewise linear data).
pub fn boundary_integrate(mesh: &TriMesh, trace: &BoundaryTrace, component: Option<usize>) -> Result<f64, AssemblyError> {
    check_len(mesh, trace)?;
    let range = edge_range(mesh, component)?;
    Ok(range
        .map(|e| {
            let [a, b] = trace.endpoints(mesh, e);
            0.5 * (a + b) * mesh.boundary()[e].length
        })
        .sum())
}

/// Boundary measure of `∂Ω` or one component.
pub fn boundary_measure(mesh: &TriMesh, component: Option<usize>) -> Result<f64, AssemblyError> {
    Ok(edge_range(mesh, component)?.map(|e| mesh.boundary()[e].length).sum())
}

/// Mean of three functions linear on `[0, 1]`, given by endpoint values.
pub fn linear_triple_mean(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (3.0 * a[0] * b[0] * c[0]
        + a[0] * b[0] * c[1]
        + a[0] * b[1] * c[0]
        + a[1] * b[0] * c[0]
        + a[0] * b[1] * c[1]
        + a[1] * b[0] * c[1]
        + a[1] * b[1] * c[0]
        + 3.0 * a[1] * b[1] * c[1])
        / 12.0
}

/// Mean of the product of two functions linear on `[0, 1]`.
pub fn linear_pair_mean(a: [f64; 2], b: [f64; 2]) -> f64 {
    (2.0 * a[0] * b[0] + a[0] * b[1] + a[1] * b[0] + 2.0 * a[1] * b[1]) / 6.0
}

/// How the gradient of a P1 function is evaluated on `∂Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientRecovery {
    /// Gradient of the adjacent triangle with its normal part removed; the
    /// Neumann condition says the continuum normal derivative vanishes.
    #[default]
    Tangential,
    /// Full gradient of the unique adjacent triangle.
    AdjacentTriangle,
    /// Area-weighted average over the one-ring of each endpoint, linear
    /// along the edge.
    OneRingAverage,
}

/// Gradient of `u` at both endpoints of every boundary edge.
pub fn boundary_gradients(mesh: &TriMesh, u: &[f64], recovery: GradientRecovery) -> Vec<[[f64; 2]; 2]> {
    match recovery {
        GradientRecovery::Tangential => mesh
            .boundary()
            .iter()
            .map(|e| {
                let du = (u[mesh.dof(e.b)] - u[mesh.dof(e.a)]) / e.length;
                // Tangent is the normal rotated counter-clockwise.
                let g = [-e.normal[1] * du, e.normal[0] * du];
                [g, g]
            })
            .collect(),
        GradientRecovery::AdjacentTriangle => mesh
            .boundary()
            .iter()
            .map(|e| {
                let g = triangle_gradient(mesh, e.triangle, u);
                [g, g]
            })
            .collect(),
        GradientRecovery::OneRingAverage => {
            let on_boundary = mesh.boundary_dofs();
            let mut acc = vec![[0.0f64; 3]; mesh.n_dofs()];
            for (t, tri) in mesh.triangles().iter().enumerate() {
                if !tri.iter().any(|&v| on_boundary[mesh.dof(v)]) {
                    continue;
                }
                let g = triangle_gradient(mesh, t, u);
                let a = mesh.triangle_area(t);
                for &v in tri {
                    let d = mesh.dof(v);
                    acc[d][0] += a * g[0];
                    acc[d][1] += a * g[1];
                    acc[d][2] += a;
                }
            }
            let at = |v: usize| {
                let s = acc[mesh.dof(v)];
                [s[0] / s[2], s[1] / s[2]]
            };
            mesh.boundary().iter().map(|e| [at(e.a), at(e.b)]).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_planar_mesh, build_rectangle_mesh, PlanarDomainSpec, RectangleSpec};
    use crate::linalg::dot;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_triangle_stiffness() {
        let k = element_stiffness([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(k[i][j], expect[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn reference_triangle_stiffness_by_quadrature() {
        // Independent route: gradients from the barycentric basis by finite
        // differences of the hat functions.
        let p = [[0.3, -0.1], [1.4, 0.2], [0.5, 1.1]];
        let k = element_stiffness(p);
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
        let hat = |i: usize, x: [f64; 2]| {
            let q = [p[(i + 1) % 3], p[(i + 2) % 3]];
            ((q[0][0] - x[0]) * (q[1][1] - x[1]) - (q[0][1] - x[1]) * (q[1][0] - x[0])) / det
        };
        let h = 1e-6;
        let x0 = [0.7, 0.4];
        let grad = |i: usize| {
            [
                (hat(i, [x0[0] + h, x0[1]]) - hat(i, [x0[0] - h, x0[1]])) / (2.0 * h),
                (hat(i, [x0[0], x0[1] + h]) - hat(i, [x0[0], x0[1] - h])) / (2.0 * h),
            ]
        };
        let area = 0.5 * det;
        for i in 0..3 {
            for j in 0..3 {
                let (gi, gj) = (grad(i), grad(j));
                assert_abs_diff_eq!(k[i][j], area * (gi[0] * gj[0] + gi[1] * gj[1]), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn reference_triangle_mass() {
        let m = element_mass(0.5, false);
        assert_abs_diff_eq!(m[0][0], 2.0 / 24.0, epsilon = 1e-16);
        assert_abs_diff_eq!(m[0][1], 1.0 / 24.0, epsilon = 1e-16);
        let l = element_mass(0.5, true);
        assert_abs_diff_eq!(l[1][1], 1.0 / 6.0, epsilon = 1e-16);
        assert_eq!(l[0][2], 0.0);
    }

    #[test]
    fn disk_matrices() {
        let mesh = build_planar_mesh(&PlanarDomainSpec::disk(1.0), 0.1).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        let m = assemble_mass(&mesh, false).unwrap();
        assert_eq!(k.asymmetry(), 0.0);
        assert_eq!(m.asymmetry(), 0.0);
        let ones = vec![1.0; mesh.n_dofs()];
        let k1 = k.mul_vec(&ones);
        assert!(k1.iter().all(|v| v.abs() <= 1e-12 * k.max_abs()));
        let total = m.bilinear(&ones, &ones);
        assert!((total - mesh.area()).abs() <= 1e-12 * mesh.area());
        assert!((total - std::f64::consts::PI).abs() < 1e-2);
        let lumped = assemble_mass(&mesh, true).unwrap();
        assert!((lumped.bilinear(&ones, &ones) - mesh.area()).abs() <= 1e-12 * mesh.area());
    }

    #[test]
    fn square_rayleigh_quotient() {
        let mesh = build_rectangle_mesh(&RectangleSpec { width: 1.0, height: 1.0 }, 0.03).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        let m = assemble_mass(&mesh, false).unwrap();
        let u: Vec<f64> = mesh.dof_coords().iter().map(|p| (std::f64::consts::PI * p[0]).cos()).collect();
        let rq = k.bilinear(&u, &u) / m.bilinear(&u, &u);
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((rq - pi2).abs() / pi2 < 0.02, "{rq}");
    }

    #[test]
    fn rayleigh_quotient_converges_at_second_order() {
        let pi2 = std::f64::consts::PI.powi(2);
        let err = |h: f64| {
            let mesh = build_rectangle_mesh(&RectangleSpec { width: 1.0, height: 1.0 }, h).unwrap();
            let k = assemble_stiffness(&mesh).unwrap();
            let m = assemble_mass(&mesh, false).unwrap();
            let u: Vec<f64> = mesh.dof_coords().iter().map(|p| (std::f64::consts::PI * p[0]).cos()).collect();
            (k.bilinear(&u, &u) / m.bilinear(&u, &u) - pi2).abs()
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!((e1 / e2).log2() > 1.6, "{e1} {e2}");
    }

    #[test]
    fn boundary_integrals_on_circle() {
        let mesh = build_planar_mesh(&PlanarDomainSpec::disk(1.0), 0.05).unwrap();
        let pi = std::f64::consts::PI;
        let one = BoundaryTrace::constant(&mesh, 1.0);
        assert!((boundary_integrate(&mesh, &one, None).unwrap() - 2.0 * pi).abs() < 1e-2);
        let c = BoundaryTrace::from_vertex_fn(&mesh, |p| p[0]);
        assert!(boundary_integrate(&mesh, &c, None).unwrap().abs() < 1e-3);
        let c2 = BoundaryTrace::from_vertex_fn(&mesh, |p| p[1].atan2(p[0]).cos().powi(2));
        assert!((boundary_integrate(&mesh, &c2, None).unwrap() - pi).abs() < 1e-2);
        assert_eq!(
            boundary_integrate(&mesh, &one, Some(3)),
            Err(AssemblyError::ComponentNotFound(3))
        );
    }

    #[test]
    fn constant_field_flux_vanishes() {
        let spec = PlanarDomainSpec {
            rho0: 1.0,
            cos: vec![0.0, 0.3],
            sin: vec![0.1],
        };
        let mesh = build_planar_mesh(&spec, 0.08).unwrap();
        let v = [0.6, -1.3];
        let flux = BoundaryTrace::Edge(mesh.boundary().iter().map(|e| v[0] * e.normal[0] + v[1] * e.normal[1]).collect());
        assert!(boundary_integrate(&mesh, &flux, None).unwrap().abs() < 1e-10);
    }

    #[test]
    fn triple_mean_matches_quadrature() {
        let (a, b, c) = ([0.3, -1.2], [2.0, 0.5], [-0.7, 1.1]);
        let lin = |v: [f64; 2], s: f64| v[0] * (1.0 - s) + v[1] * s;
        // Gauss-Legendre, 2 points is exact for cubics.
        let g = 0.5 / 3f64.sqrt();
        let q: f64 = [0.5 - g, 0.5 + g].iter().map(|&s| 0.5 * lin(a, s) * lin(b, s) * lin(c, s)).sum();
        assert_abs_diff_eq!(linear_triple_mean(a, b, c), q, epsilon = 1e-14);
        let q2: f64 = [0.5 - g, 0.5 + g].iter().map(|&s| 0.5 * lin(a, s) * lin(b, s)).sum();
        assert_abs_diff_eq!(linear_pair_mean(a, b), q2, epsilon = 1e-14);
    }

    #[test]
    fn boundary_gradient_variants_agree_for_linear_functions() {
        let mesh = build_planar_mesh(&PlanarDomainSpec::disk(1.0), 0.1).unwrap();
        let u: Vec<f64> = mesh.dof_coords().iter().map(|p| 2.0 * p[0] - p[1]).collect();
        for rec in [GradientRecovery::AdjacentTriangle, GradientRecovery::OneRingAverage] {
            for g in boundary_gradients(&mesh, &u, rec) {
                for x in g {
                    assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-10);
                    assert_abs_diff_eq!(x[1], -1.0, epsilon = 1e-10);
                }
            }
        }
        // Tangential keeps only the tangential part.
        let gt = boundary_gradients(&mesh, &u, GradientRecovery::Tangential);
        for (e, g) in mesh.boundary().iter().zip(&gt) {
            let n = e.normal;
            assert_abs_diff_eq!(g[0][0] * n[0] + g[0][1] * n[1], 0.0, epsilon = 1e-12);
            let full_t = -2.0 * n[1] - n[0];
            assert_abs_diff_eq!(-g[0][0] * n[1] + g[0][1] * n[0], full_t, epsilon = 1e-10);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn galerkin_forms_are_semidefinite(seed in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let mesh = build_planar_mesh(&PlanarDomainSpec::disk(1.0), 0.2).unwrap();
            let k = assemble_stiffness(&mesh).unwrap();
            let m = assemble_mass(&mesh, false).unwrap();
            let u: Vec<f64> = mesh
                .dof_coords()
                .iter()
                .map(|p| seed.iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * (p[0] + 0.7 * p[1])).sin()).sum())
                .collect();
            proptest::prop_assert!(k.bilinear(&u, &u) >= -1e-12 * k.max_abs());
            if dot(&u, &u) > 0.0 {
                proptest::prop_assert!(m.bilinear(&u, &u) > 0.0);
            }
        }
    }
}
