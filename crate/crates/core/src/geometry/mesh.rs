//! Triangle meshes of planar domains and of flat-cylinder charts.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::GeometryError;

/// One edge of `∂Ω`, oriented with the domain on its left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub triangle: usize,
    pub normal: [f64; 2],
    pub length: f64,
}

impl BoundaryEdge {
    pub fn midpoint(&self, mesh: &TriMesh) -> [f64; 2] {
        let p = mesh.vertices[self.a];
        let q = mesh.vertices[self.b];
        [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
    }
}

/// Triangle mesh.
///
/// For a flat cylinder the vertices live in the chart `(t, x)` with
/// `x ∈ [0, L]`; vertices on the seam `x = L` share their degree of freedom
/// with the matching vertex on `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    dof: Vec<usize>,
    n_dofs: usize,
    period: Option<f64>,
    boundary: Vec<BoundaryEdge>,
    components: Vec<Range<usize>>,
    areas: Vec<f64>,
}

fn signed_area(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
}

impl TriMesh {
    /// Builds a mesh from counter-clockwise triangles.
    ///
    /// `dof` identifies periodic copies; `None` means one dof per vertex.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        dof: Option<Vec<usize>>,
        period: Option<f64>,
    ) -> Result<Self, GeometryError> {
        let nv = vertices.len();
        let dof = dof.unwrap_or_else(|| (0..nv).collect());
        if dof.len() != nv {
            return Err(GeometryError::InvalidMesh("dof map length mismatch".into()));
        }
        let n_dofs = dof.iter().map(|d| d + 1).max().unwrap_or(0);
        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(GeometryError::InvalidMesh(format!("triangle {t} has bad index")));
            }
            let [a, b, c] = tri.map(|v| dof[v]);
            if a == b || b == c || a == c {
                return Err(GeometryError::InvalidMesh(format!("triangle {t} wraps onto itself")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(GeometryError::MeshFoldOver { triangle: t, area });
            }
            areas.push(area);
        }
        let (boundary, components) = boundary_loops(&vertices, &triangles, &dof)?;
        Ok(TriMesh {
            vertices,
            triangles,
            dof,
            n_dofs,
            period,
            boundary,
            components,
            areas,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn dof(&self, vertex: usize) -> usize {
        self.dof[vertex]
    }

    pub fn dof_map(&self) -> &[usize] {
        &self.dof
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn is_periodic(&self) -> bool {
        self.period.is_some()
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Ranges into [`Self::boundary`], one per closed boundary curve.
    pub fn components(&self) -> &[Range<usize>] {
        &self.components
    }

    pub fn component_of_edge(&self, e: usize) -> usize {
        self.components.iter().position(|r| r.contains(&e)).unwrap()
    }

    /// Boundary edge following `e` in its loop.
    pub fn next_edge(&self, e: usize) -> usize {
        let r = &self.components[self.component_of_edge(e)];
        if e + 1 == r.end {
            r.start
        } else {
            e + 1
        }
    }

    pub fn prev_edge(&self, e: usize) -> usize {
        let r = &self.components[self.component_of_edge(e)];
        if e == r.start {
            r.end - 1
        } else {
            e - 1
        }
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary.iter().map(|e| e.length).sum()
    }

    pub fn triangle_points(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Coordinates of the first vertex carrying each dof.
    pub fn dof_coords(&self) -> Vec<[f64; 2]> {
        let mut out = vec![[f64::NAN; 2]; self.n_dofs];
        for (v, &d) in self.dof.iter().enumerate().rev() {
            out[d] = self.vertices[v];
        }
        out
    }

    /// `true` for dofs on `∂Ω`.
    pub fn boundary_dofs(&self) -> Vec<bool> {
        let mut out = vec![false; self.n_dofs];
        for e in &self.boundary {
            out[self.dof[e.a]] = true;
            out[self.dof[e.b]] = true;
        }
        out
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut worst = 180.0f64;
        for t in 0..self.triangles.len() {
            let p = self.triangle_points(t);
            for i in 0..3 {
                let a = p[i];
                let b = p[(i + 1) % 3];
                let c = p[(i + 2) % 3];
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let cosang = (u[0] * v[0] + u[1] * v[1])
                    / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt());
                worst = worst.min(cosang.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        worst
    }

    /// Longest edge length.
    pub fn max_edge(&self) -> f64 {
        let mut m = 0.0f64;
        for t in 0..self.triangles.len() {
            let p = self.triangle_points(t);
            for i in 0..3 {
                let a = p[i];
                let b = p[(i + 1) % 3];
                m = m.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        m
    }

    /// Same connectivity with vertex `v` moved by `eps * displacement[dof(v)]`.
    pub fn displaced(&self, displacement: &[[f64; 2]], eps: f64) -> Result<TriMesh, GeometryError> {
        assert_eq!(displacement.len(), self.n_dofs);
        let vertices: Vec<[f64; 2]> = self
            .vertices
            .iter()
            .zip(&self.dof)
            .map(|(p, &d)| [p[0] + eps * displacement[d][0], p[1] + eps * displacement[d][1]])
            .collect();
        let mut areas = Vec::with_capacity(self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(GeometryError::MeshFoldOver { triangle: t, area });
            }
            areas.push(area);
        }
        let boundary = self
            .boundary
            .iter()
            .map(|e| edge_geometry(&vertices, e.a, e.b, e.triangle))
            .collect();
        Ok(TriMesh {
            vertices,
            triangles: self.triangles.clone(),
            dof: self.dof.clone(),
            n_dofs: self.n_dofs,
            period: self.period,
            boundary,
            components: self.components.clone(),
            areas,
        })
    }
}

fn edge_geometry(vertices: &[[f64; 2]], a: usize, b: usize, triangle: usize) -> BoundaryEdge {
    let p = vertices[a];
    let q = vertices[b];
    let d = [q[0] - p[0], q[1] - p[1]];
    let length = (d[0] * d[0] + d[1] * d[1]).sqrt();
    BoundaryEdge {
        a,
        b,
        triangle,
        normal: [d[1] / length, -d[0] / length],
        length,
    }
}

fn boundary_loops(
    vertices: &[[f64; 2]],
    triangles: &[[usize; 3]],
    dof: &[usize],
) -> Result<(Vec<BoundaryEdge>, Vec<Range<usize>>), GeometryError> {
    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for tri in triangles {
        for i in 0..3 {
            let a = dof[tri[i]];
            let b = dof[tri[(i + 1) % 3]];
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    if count.values().any(|&c| c > 2) {
        return Err(GeometryError::InvalidMesh("non-manifold edge".into()));
    }
    let mut edges = Vec::new();
    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            let a = tri[i];
            let b = tri[(i + 1) % 3];
            let (da, db) = (dof[a], dof[b]);
            if count[&(da.min(db), da.max(db))] == 1 {
                edges.push(edge_geometry(vertices, a, b, t));
            }
        }
    }
    let mut by_start: HashMap<usize, usize> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        if by_start.insert(dof[e.a], i).is_some() {
            return Err(GeometryError::InvalidMesh("boundary vertex with two outgoing edges".into()));
        }
    }
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&i| dof[edges[i].a]);
    let mut used = vec![false; edges.len()];
    let mut out = Vec::with_capacity(edges.len());
    let mut components = Vec::new();
    for &start in &order {
        if used[start] {
            continue;
        }
        let begin = out.len();
        let mut e = start;
        loop {
            used[e] = true;
            out.push(edges[e]);
            let next = *by_start
                .get(&dof[edges[e].b])
                .ok_or_else(|| GeometryError::InvalidMesh("open boundary loop".into()))?;
            if next == start {
                break;
            }
            if used[next] {
                return Err(GeometryError::InvalidMesh("tangled boundary loop".into()));
            }
            e = next;
        }
        components.push(begin..out.len());
    }
    Ok((out, components))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> TriMesh {
        TriMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn square_boundary_loop() {
        let m = two_triangles();
        assert_eq!(m.boundary().len(), 4);
        assert_eq!(m.components().len(), 1);
        assert!((m.area() - 1.0).abs() < 1e-15);
        assert!((m.boundary_length() - 4.0).abs() < 1e-15);
        let e = m.boundary()[0];
        assert_eq!((e.a, e.b), (0, 1));
        assert_eq!(e.normal, [0.0, -1.0]);
        for i in 0..4 {
            assert_eq!(m.boundary()[m.next_edge(i)].a, m.boundary()[i].b);
        }
    }

    #[test]
    fn fold_over_detected() {
        let m = two_triangles();
        let mut d = vec![[0.0; 2]; 4];
        d[2] = [-2.0, -2.0];
        assert!(matches!(m.displaced(&d, 1.0), Err(GeometryError::MeshFoldOver { .. })));
        assert!(m.displaced(&d, 0.1).is_ok());
    }

    #[test]
    fn periodic_strip_has_two_components() {
        // Chart (t, x): three cells of a strip of circumference 3.
        let mut v = Vec::new();
        for x in 0..4 {
            v.push([0.0, x as f64]);
            v.push([1.0, x as f64]);
        }
        let mut tris = Vec::new();
        for x in 0..3 {
            let (a, b, c, d) = (2 * x, 2 * x + 1, 2 * x + 2, 2 * x + 3);
            tris.push([a, b, d]);
            tris.push([a, d, c]);
        }
        let dof = vec![0, 1, 2, 3, 4, 5, 0, 1];
        let m = TriMesh::new(v, tris, Some(dof), Some(3.0)).unwrap();
        assert_eq!(m.n_dofs(), 6);
        assert_eq!(m.components().len(), 2);
        assert_eq!(m.boundary().len(), 6);
        assert!((m.boundary_length() - 6.0).abs() < 1e-15);
    }
}
