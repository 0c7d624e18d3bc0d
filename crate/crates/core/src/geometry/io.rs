//! Mesh serialisation: JSON round trip and legacy ASCII VTK export.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{GeometryError, TriMesh};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshJson {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    dof: Vec<usize>,
    period: Option<f64>,
}

pub fn mesh_to_json(mesh: &TriMesh) -> String {
    let m = MeshJson {
        vertices: mesh.vertices().to_vec(),
        triangles: mesh.triangles().to_vec(),
        dof: mesh.dof_map().to_vec(),
        period: mesh.period(),
    };
    serde_json::to_string(&m).expect("mesh serialises")
}

pub fn mesh_from_json(s: &str) -> Result<TriMesh, GeometryError> {
    let m: MeshJson = serde_json::from_str(s).map_err(|e| GeometryError::Io(e.to_string()))?;
    TriMesh::new(m.vertices, m.triangles, Some(m.dof), m.period)
}

/// Per-dof scalar field attached to a VTK export.
pub struct PointField<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

/// Legacy ASCII VTK unstructured grid; point fields are indexed by dof.
pub fn mesh_to_vtk(mesh: &TriMesh, title: &str, fields: &[PointField]) -> String {
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "{}", title.replace('\n', " ")).unwrap();
    writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {} double", mesh.n_vertices()).unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{:.17e} {:.17e} 0", p[0], p[1]).unwrap();
    }
    let nt = mesh.triangles().len();
    writeln!(s, "CELLS {} {}", nt, 4 * nt).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        writeln!(s, "5").unwrap();
    }
    if !fields.is_empty() {
        writeln!(s, "POINT_DATA {}", mesh.n_vertices()).unwrap();
        for f in fields {
            assert_eq!(f.values.len(), mesh.n_dofs(), "field {} length", f.name);
            writeln!(s, "SCALARS {} double 1\nLOOKUP_TABLE default", f.name).unwrap();
            for v in 0..mesh.n_vertices() {
                writeln!(s, "{:.17e}", f.values[mesh.dof(v)]).unwrap();
            }
        }
    }
    s
}

/// Reads the geometry of a file written by [`mesh_to_vtk`].
///
/// Periodic identification is not stored in VTK, so the result has one dof
/// per vertex.
pub fn mesh_from_vtk(s: &str) -> Result<TriMesh, GeometryError> {
    let bad = |m: &str| GeometryError::Io(format!("vtk: {m}"));
    let tokens: Vec<&str> = s.lines().skip(4).flat_map(|l| l.split_whitespace()).collect();
    if tokens.first() != Some(&"POINTS") {
        return Err(bad("POINTS expected"));
    }
    let mut it = tokens.into_iter().skip(1);
    let parse_usize = |t: Option<&str>| -> Result<usize, GeometryError> {
        t.ok_or_else(|| bad("truncated"))?
            .parse()
            .map_err(|_| bad("integer expected"))
    };
    let parse_f64 = |t: Option<&str>| -> Result<f64, GeometryError> {
        t.ok_or_else(|| bad("truncated"))?.parse().map_err(|_| bad("number expected"))
    };
    let np = parse_usize(it.next())?;
    it.next();
    let mut vertices = Vec::with_capacity(np);
    for _ in 0..np {
        let x = parse_f64(it.next())?;
        let y = parse_f64(it.next())?;
        parse_f64(it.next())?;
        vertices.push([x, y]);
    }
    if it.next() != Some("CELLS") {
        return Err(bad("CELLS expected"));
    }
    let nt = parse_usize(it.next())?;
    it.next();
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        if parse_usize(it.next())? != 3 {
            return Err(bad("only triangles supported"));
        }
        triangles.push([parse_usize(it.next())?, parse_usize(it.next())?, parse_usize(it.next())?]);
    }
    TriMesh::new(vertices, triangles, None, None)
}
