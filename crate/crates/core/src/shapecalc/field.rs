//! Deformation fields: boundary normal speed plus interior displacement.

use serde::{Deserialize, Serialize};

use super::ShapeError;
use crate::assembly::{assemble_stiffness, boundary_integrate, boundary_measure, BoundaryTrace};
use crate::geometry::TriMesh;
use crate::linalg::{nested_dissection, Cholesky};

/// Which volume certificate a field carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preservation {
    None,
    GlobalMeanZero,
    PerComponentMeanZero,
}

/// Requested projection in [`make_volume_preserving`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreservationMode {
    Global,
    PerComponent,
}

/// How interior vertices follow the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// The displacement is an analytic field sampled at every vertex.
    Analytic,
    /// Discrete harmonic extension over the whole mesh.
    Harmonic,
    /// Harmonic inside a collar of this many vertex layers, zero beyond.
    Collar(usize),
}

/// Default collar depth for per-component fields.
pub const COLLAR_LAYERS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    /// `⟨V, η⟩` at the endpoints of every boundary edge.
    pub speed: BoundaryTrace,
    /// Displacement per dof for a unit step.
    pub displacement: Vec<[f64; 2]>,
    pub preservation: Preservation,
    pub extension: Extension,
}

impl DeformationField {
    /// Samples an analytic vector field `V` at every vertex.
    pub fn from_vector_field(mesh: &TriMesh, v: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let displacement: Vec<[f64; 2]> = mesh.dof_coords().into_iter().map(&v).collect();
        let speed = BoundaryTrace::EdgeLinear(
            mesh.boundary()
                .iter()
                .map(|e| {
                    let n = e.normal;
                    let va = v(mesh.vertices()[e.a]);
                    let vb = v(mesh.vertices()[e.b]);
                    [va[0] * n[0] + va[1] * n[1], vb[0] * n[0] + vb[1] * n[1]]
                })
                .collect(),
        );
        let preservation = certify(mesh, &speed);
        DeformationField {
            speed,
            displacement,
            preservation,
            extension: Extension::Analytic,
        }
    }

    /// Builds the field whose boundary vertices move so that the normal
    /// speed on both adjacent edges equals the vertex value of `h`.
    ///
    /// At a vertex with edge normals η₁, η₂ the displacement
    /// `h (η₁ + η₂) / (1 + η₁·η₂)` has normal component `h` on both edges.
    pub fn from_normal_speed(mesh: &TriMesh, h: &BoundaryTrace, extension: Extension) -> Result<Self, ShapeError> {
        let nb = mesh.boundary().len();
        if nb == 0 {
            return Err(ShapeError::EmptyBoundary);
        }
        let hv = to_vertex_values(mesh, h)?;
        let mut bdisp = vec![None; mesh.n_dofs()];
        for (e, edge) in mesh.boundary().iter().enumerate() {
            let next = mesh.next_edge(e);
            let n1 = edge.normal;
            let n2 = mesh.boundary()[next].normal;
            let c = 1.0 + n1[0] * n2[0] + n1[1] * n2[1];
            let s = hv[next] / c;
            bdisp[mesh.dof(edge.b)] = Some([s * (n1[0] + n2[0]), s * (n1[1] + n2[1])]);
        }
        let displacement = match extension {
            Extension::Analytic => {
                return Err(ShapeError::InvalidInput("normal-speed fields need a discrete extension".into()))
            }
            Extension::Harmonic => harmonic_extension(mesh, &bdisp, usize::MAX)?,
            Extension::Collar(layers) => harmonic_extension(mesh, &bdisp, layers)?,
        };
        let speed = BoundaryTrace::Vertex(hv);
        let preservation = certify(mesh, &speed);
        Ok(DeformationField {
            speed,
            displacement,
            preservation,
            extension,
        })
    }

    /// The field `s·V`.
    pub fn scaled(&self, s: f64) -> Self {
        DeformationField {
            speed: self.speed.scaled(s),
            displacement: self.displacement.iter().map(|d| [s * d[0], s * d[1]]).collect(),
            preservation: self.preservation,
            extension: self.extension,
        }
    }

    /// `V₁ + V₂` on the same mesh.
    pub fn add(&self, mesh: &TriMesh, other: &DeformationField) -> Self {
        let a = self.speed.to_edge_linear(mesh);
        let b = other.speed.to_edge_linear(mesh);
        let speed = BoundaryTrace::EdgeLinear(a.iter().zip(&b).map(|(x, y)| [x[0] + y[0], x[1] + y[1]]).collect());
        let preservation = certify(mesh, &speed);
        DeformationField {
            speed,
            displacement: self
                .displacement
                .iter()
                .zip(&other.displacement)
                .map(|(x, y)| [x[0] + y[0], x[1] + y[1]])
                .collect(),
            preservation,
            extension: if self.extension == other.extension {
                self.extension
            } else {
                Extension::Harmonic
            },
        }
    }
}

/// Vertex values of a trace (endpoint averages where data is per edge).
fn to_vertex_values(mesh: &TriMesh, h: &BoundaryTrace) -> Result<Vec<f64>, ShapeError> {
    let nb = mesh.boundary().len();
    if h.len() != nb {
        return Err(ShapeError::InvalidInput(format!("trace has {} entries for {} edges", h.len(), nb)));
    }
    Ok(match h {
        BoundaryTrace::Vertex(v) => v.clone(),
        _ => (0..nb)
            .map(|e| {
                let p = mesh.prev_edge(e);
                0.5 * (h.endpoints(mesh, p)[1] + h.endpoints(mesh, e)[0])
            })
            .collect(),
    })
}

/// Strongest certificate the speed satisfies at tolerance
/// `1e-10·|∂Ω|·‖h‖_∞`.
pub fn certify(mesh: &TriMesh, speed: &BoundaryTrace) -> Preservation {
    let scale = speed.max_abs();
    if scale == 0.0 {
        return Preservation::PerComponentMeanZero;
    }
    let tol = |len: f64| 1e-10 * len * scale;
    let total = boundary_integrate(mesh, speed, None).unwrap_or(f64::INFINITY);
    if total.abs() > tol(mesh.boundary_length()) {
        return Preservation::None;
    }
    let per = (0..mesh.components().len()).all(|k| {
        let len = boundary_measure(mesh, Some(k)).unwrap_or(0.0);
        boundary_integrate(mesh, speed, Some(k)).map_or(false, |v| v.abs() <= tol(len))
    });
    if per {
        Preservation::PerComponentMeanZero
    } else {
        Preservation::GlobalMeanZero
    }
}

/// Subtracts the boundary mean of `h_raw` globally or per component and
/// builds the field with a harmonic (global) or collar (per-component)
/// interior extension.
pub fn make_volume_preserving(h_raw: &BoundaryTrace, mesh: &TriMesh, mode: PreservationMode) -> Result<DeformationField, ShapeError> {
    if mesh.boundary().is_empty() {
        return Err(ShapeError::EmptyBoundary);
    }
    let mut h = BoundaryTrace::Vertex(to_vertex_values(mesh, h_raw)?);
    match mode {
        PreservationMode::Global => {
            let mean = boundary_integrate(mesh, &h, None)? / mesh.boundary_length();
            h = h.shifted(mesh, -mean, None);
        }
        PreservationMode::PerComponent => {
            for k in 0..mesh.components().len() {
                let mean = boundary_integrate(mesh, &h, Some(k))? / boundary_measure(mesh, Some(k))?;
                h = h.shifted(mesh, -mean, Some(k));
            }
        }
    }
    let extension = match mode {
        PreservationMode::Global => Extension::Harmonic,
        PreservationMode::PerComponent => Extension::Collar(COLLAR_LAYERS),
    };
    DeformationField::from_normal_speed(mesh, &h, extension)
}

/// Graph distance (in edges) of every dof from `∂Ω`, and the boundary
/// component it is closest to.
pub fn boundary_layers(mesh: &TriMesh) -> (Vec<usize>, Vec<usize>) {
    let n = mesh.n_dofs();
    let mut adj = vec![Vec::new(); n];
    for tri in mesh.triangles() {
        let d = tri.map(|v| mesh.dof(v));
        for i in 0..3 {
            adj[d[i]].push(d[(i + 1) % 3]);
            adj[d[(i + 1) % 3]].push(d[i]);
        }
    }
    let mut layer = vec![usize::MAX; n];
    let mut comp = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    for (e, edge) in mesh.boundary().iter().enumerate() {
        let d = mesh.dof(edge.a);
        if layer[d] == usize::MAX {
            layer[d] = 0;
            comp[d] = mesh.component_of_edge(e);
            queue.push_back(d);
        }
    }
    while let Some(d) = queue.pop_front() {
        for &nb in &adj[d] {
            if layer[nb] == usize::MAX {
                layer[nb] = layer[d] + 1;
                comp[nb] = comp[d];
                queue.push_back(nb);
            }
        }
    }
    (layer, comp)
}

/// Discrete harmonic extension of boundary displacements into the dofs
/// within `layers` of `∂Ω`; dofs farther in are held at zero.
fn harmonic_extension(mesh: &TriMesh, boundary: &[Option<[f64; 2]>], layers: usize) -> Result<Vec<[f64; 2]>, ShapeError> {
    let n = mesh.n_dofs();
    let (layer, _) = boundary_layers(mesh);
    let free: Vec<usize> = (0..n).filter(|&d| boundary[d].is_none() && layer[d] <= layers).collect();
    let mut out: Vec<[f64; 2]> = boundary.iter().map(|b| b.unwrap_or([0.0, 0.0])).collect();
    if free.is_empty() {
        return Ok(out);
    }
    let k = assemble_stiffness(mesh)?;
    let kff = k.principal_submatrix(&free);
    let coords = mesh.dof_coords();
    let fc: Vec<[f64; 2]> = free.iter().map(|&d| coords[d]).collect();
    let fac = Cholesky::factor(&kff, nested_dissection(&kff, &fc))?;
    let mut is_free = vec![usize::MAX; n];
    for (i, &d) in free.iter().enumerate() {
        is_free[d] = i;
    }
    for c in 0..2 {
        let mut rhs = vec![0.0; free.len()];
        for (i, &d) in free.iter().enumerate() {
            for (j, v) in k.row(d) {
                if is_free[j] == usize::MAX {
                    rhs[i] -= v * out[j][c];
                }
            }
        }
        let x = fac.solve(&rhs);
        for (i, &d) in free.iter().enumerate() {
            out[d][c] = x[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cylinder_mesh, build_planar_mesh, CylinderDomainSpec, PlanarDomainSpec};

    fn disk(h: f64) -> TriMesh {
        build_planar_mesh(&PlanarDomainSpec::disk(1.0), h).unwrap()
    }

    #[test]
    fn constant_speed_is_projected_out() {
        let mesh = disk(0.1);
        let f = make_volume_preserving(&BoundaryTrace::constant(&mesh, 1.0), &mesh, PreservationMode::Global).unwrap();
        assert!(f.speed.max_abs() < 1e-12);
        assert!(f.displacement.iter().all(|d| d[0].abs() + d[1].abs() < 1e-10));
    }

    #[test]
    fn odd_mode_is_unchanged() {
        let mesh = disk(0.1);
        let raw = BoundaryTrace::from_vertex_fn(&mesh, |p| p[0] / (p[0].hypot(p[1])));
        let f = make_volume_preserving(&raw, &mesh, PreservationMode::Global).unwrap();
        let before = match &raw {
            BoundaryTrace::Vertex(v) => v.clone(),
            _ => unreachable!(),
        };
        let after = match &f.speed {
            BoundaryTrace::Vertex(v) => v.clone(),
            _ => unreachable!(),
        };
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-3);
        }
        assert_ne!(f.preservation, Preservation::None);
    }

    #[test]
    fn translation_like_cylinder_field_is_only_global() {
        let mesh = build_cylinder_mesh(&CylinderDomainSpec::straight(2.0, 2.0 * std::f64::consts::PI), 0.2).unwrap();
        let raw = BoundaryTrace::Vertex(
            (0..mesh.boundary().len())
                .map(|e| if mesh.vertices()[mesh.boundary()[e].a][0] > 0.0 { 1.0 } else { -1.0 })
                .collect(),
        );
        let f = make_volume_preserving(&raw, &mesh, PreservationMode::Global).unwrap();
        for e in 0..mesh.boundary().len() {
            assert!((f.speed.endpoints(&mesh, e)[0] - raw.endpoints(&mesh, e)[0]).abs() < 1e-14);
        }
        assert_eq!(f.preservation, Preservation::GlobalMeanZero);
    }

    #[test]
    fn normal_speed_construction_reproduces_speed() {
        let mesh = disk(0.1);
        let raw = BoundaryTrace::from_vertex_fn(&mesh, |p| (3.0 * p[1].atan2(p[0])).cos());
        let f = DeformationField::from_normal_speed(&mesh, &raw, Extension::Harmonic).unwrap();
        for (e, edge) in mesh.boundary().iter().enumerate() {
            let [ha, hb] = f.speed.endpoints(&mesh, e);
            let da = f.displacement[mesh.dof(edge.a)];
            let db = f.displacement[mesh.dof(edge.b)];
            let n = edge.normal;
            assert!((da[0] * n[0] + da[1] * n[1] - ha).abs() < 1e-12);
            assert!((db[0] * n[0] + db[1] * n[1] - hb).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_extension_reproduces_affine_fields() {
        let mesh = disk(0.1);
        let exact = DeformationField::from_vector_field(&mesh, |p| [p[0], p[1]]);
        let mut bd = vec![None; mesh.n_dofs()];
        for e in mesh.boundary() {
            bd[mesh.dof(e.a)] = Some(exact.displacement[mesh.dof(e.a)]);
        }
        let ext = harmonic_extension(&mesh, &bd, usize::MAX).unwrap();
        for (a, b) in ext.iter().zip(&exact.displacement) {
            assert!((a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn collar_extension_vanishes_deep_inside() {
        let mesh = build_cylinder_mesh(&CylinderDomainSpec::straight(2.0, 2.0 * std::f64::consts::PI), 0.1).unwrap();
        let raw = BoundaryTrace::from_vertex_fn(&mesh, |p| if p[0] > 0.0 { 0.1 * p[1].cos() } else { 0.0 });
        let f = make_volume_preserving(&raw, &mesh, PreservationMode::PerComponent).unwrap();
        assert_eq!(f.preservation, Preservation::PerComponentMeanZero);
        let (layer, _) = boundary_layers(&mesh);
        for (d, disp) in f.displacement.iter().enumerate() {
            if layer[d] > COLLAR_LAYERS {
                assert_eq!(*disp, [0.0, 0.0]);
            }
        }
    }
}
