//! Constrained Delaunay refinement with boundary splits on analytic curves.
//!
//! Input is a single closed loop of segments, each tied to a parametrised
//! curve. Segments may be paired with a mirror (periodic seams); paired
//! segments are always split together at the same parameter.

use std::collections::{HashMap, HashSet, VecDeque};

use robust::{incircle, orient2d, Coord};

use super::GeometryError;

const NONE: usize = usize::MAX;

pub(crate) type CurveFn<'a> = Box<dyn Fn(f64) -> [f64; 2] + 'a>;

#[derive(Debug, Clone, Copy)]
pub(crate) struct LoopSegment {
    pub curve: usize,
    pub t0: f64,
    pub t1: f64,
    pub mirror: Option<usize>,
}

pub(crate) struct LoopInput<'a> {
    /// Loop vertices in counter-clockwise order.
    pub points: Vec<[f64; 2]>,
    /// `segments[i]` joins `points[i]` to `points[(i + 1) % n]`.
    pub segments: Vec<LoopSegment>,
    pub curves: Vec<CurveFn<'a>>,
}

pub(crate) struct RefineParams {
    pub max_circumradius: f64,
    pub min_angle_deg: f64,
    pub max_vertices: usize,
}

pub(crate) struct MesherOutput {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

#[derive(Debug, Clone)]
struct Tri {
    v: [usize; 3],
    n: [usize; 3],
    alive: bool,
    inside: bool,
}

#[derive(Debug, Clone, Copy)]
struct Seg {
    a: usize,
    b: usize,
    curve: usize,
    t0: f64,
    t1: f64,
    mirror: Option<usize>,
    alive: bool,
}

struct Mesher<'a> {
    pts: Vec<[f64; 2]>,
    curve_of: Vec<Option<usize>>,
    tris: Vec<Tri>,
    free: Vec<usize>,
    segs: Vec<Seg>,
    seg_of_edge: HashMap<(usize, usize), usize>,
    curves: Vec<CurveFn<'a>>,
    hint: usize,
    n_super: usize,
}

fn c(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn circumcenter(a: [f64; 2], b: [f64; 2], cc: [f64; 2]) -> [f64; 2] {
    let bx = b[0] - a[0];
    let by = b[1] - a[1];
    let cx = cc[0] - a[0];
    let cy = cc[1] - a[1];
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}

fn dist2(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
}

impl<'a> Mesher<'a> {
    fn new(input: &LoopInput, curves: Vec<CurveFn<'a>>) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &input.points {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-3);
        let big = 20.0 * span;
        let pts = vec![
            [cx - 2.0 * big, cy - big],
            [cx + 2.0 * big, cy - big],
            [cx, cy + 2.0 * big],
        ];
        let tris = vec![Tri {
            v: [0, 1, 2],
            n: [NONE; 3],
            alive: true,
            inside: false,
        }];
        Mesher {
            pts,
            curve_of: vec![None; 3],
            tris,
            free: Vec::new(),
            segs: Vec::new(),
            seg_of_edge: HashMap::new(),
            curves,
            hint: 0,
            n_super: 3,
        }
    }

    fn orient(&self, a: usize, b: usize, p: [f64; 2]) -> f64 {
        orient2d(c(self.pts[a]), c(self.pts[b]), c(p))
    }

    fn locate(&self, p: [f64; 2]) -> Option<usize> {
        let mut t = self.hint;
        if !self.tris[t].alive {
            t = self.tris.iter().position(|t| t.alive)?;
        }
        let limit = 4 * self.tris.len() + 100;
        'walk: for _ in 0..limit {
            let tri = &self.tris[t];
            for i in 0..3 {
                let a = tri.v[(i + 1) % 3];
                let b = tri.v[(i + 2) % 3];
                if self.orient(a, b, p) < 0.0 {
                    let nb = tri.n[i];
                    if nb == NONE {
                        return None;
                    }
                    t = nb;
                    continue 'walk;
                }
            }
            return Some(t);
        }
        // Fall back to exhaustive search.
        self.tris.iter().enumerate().position(|(_, tri)| {
            tri.alive && (0..3).all(|i| self.orient(tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], p) >= 0.0)
        })
    }

    fn in_circle(&self, t: usize, p: [f64; 2]) -> bool {
        let v = self.tris[t].v;
        incircle(c(self.pts[v[0]]), c(self.pts[v[1]]), c(self.pts[v[2]]), c(p)) > 0.0
    }

    fn alloc(&mut self, tri: Tri) -> usize {
        if let Some(i) = self.free.pop() {
            self.tris[i] = tri;
            i
        } else {
            self.tris.push(tri);
            self.tris.len() - 1
        }
    }

    /// Bowyer–Watson insertion that never crosses live segments except `cross`.
    fn insert(&mut self, p: [f64; 2], curve: Option<usize>, cross: Option<(usize, usize)>) -> Result<usize, ()> {
        let t0 = self.locate(p).ok_or(())?;
        let mut cavity = vec![t0];
        let mut in_cav = HashSet::new();
        in_cav.insert(t0);
        let mut k = 0;
        while k < cavity.len() {
            let t = cavity[k];
            k += 1;
            for i in 0..3 {
                let nb = self.tris[t].n[i];
                if nb == NONE || in_cav.contains(&nb) {
                    continue;
                }
                let v = self.tris[t].v;
                let e = key(v[(i + 1) % 3], v[(i + 2) % 3]);
                if self.seg_of_edge.contains_key(&e) && Some(e) != cross {
                    continue;
                }
                if self.in_circle(nb, p) {
                    in_cav.insert(nb);
                    cavity.push(nb);
                }
            }
        }
        // Cavity boundary edges (a, b) with outer neighbour and inside flag.
        let mut boundary = Vec::new();
        for &t in &cavity {
            let tri = &self.tris[t];
            for i in 0..3 {
                let nb = tri.n[i];
                if nb != NONE && in_cav.contains(&nb) {
                    continue;
                }
                let a = tri.v[(i + 1) % 3];
                let b = tri.v[(i + 2) % 3];
                if self.orient(a, b, p) <= 0.0 {
                    return Err(());
                }
                boundary.push((a, b, nb, tri.inside));
            }
        }
        let idx = self.pts.len();
        self.pts.push(p);
        self.curve_of.push(curve);
        for &t in &cavity {
            self.tris[t].alive = false;
        }
        let mut dead: Vec<usize> = cavity.clone();
        dead.sort_unstable_by(|a, b| b.cmp(a));
        self.free.extend(dead);
        let mut starting_at = HashMap::new();
        let mut created = Vec::with_capacity(boundary.len());
        for &(a, b, outer, inside) in &boundary {
            let t = self.alloc(Tri {
                v: [a, b, idx],
                n: [NONE, NONE, outer],
                alive: true,
                inside,
            });
            if outer != NONE {
                let o = &mut self.tris[outer];
                for j in 0..3 {
                    let oa = o.v[(j + 1) % 3];
                    let ob = o.v[(j + 2) % 3];
                    if oa == b && ob == a {
                        o.n[j] = t;
                    }
                }
            }
            starting_at.insert(a, t);
            created.push(t);
        }
        for &t in &created {
            let [a, b, _] = self.tris[t].v;
            let next = *starting_at.get(&b).ok_or(())?;
            self.tris[t].n[0] = next;
            self.tris[next].n[1] = t;
            let _ = a;
        }
        self.hint = created[0];
        Ok(idx)
    }

    fn edge_set(&self) -> HashSet<(usize, usize)> {
        let mut s = HashSet::new();
        for t in self.tris.iter().filter(|t| t.alive) {
            for i in 0..3 {
                s.insert(key(t.v[i], t.v[(i + 1) % 3]));
            }
        }
        s
    }

    fn add_segment(&mut self, seg: Seg) -> usize {
        let id = self.segs.len();
        self.seg_of_edge.insert(key(seg.a, seg.b), id);
        self.segs.push(seg);
        id
    }

    /// Splits a live segment (and its mirror) at the parameter midpoint.
    fn split_segment(&mut self, id: usize) -> Result<(), GeometryError> {
        let mut ids = vec![id];
        if let Some(m) = self.segs[id].mirror {
            ids.push(m);
        }
        let mut halves = Vec::new();
        for &s in &ids {
            let seg = self.segs[s];
            let tm = 0.5 * (seg.t0 + seg.t1);
            let p = (self.curves[seg.curve])(tm);
            let e = key(seg.a, seg.b);
            let v = self
                .insert(p, Some(seg.curve), Some(e))
                .map_err(|_| GeometryError::MeshQualityFailure("segment split failed".into()))?;
            self.seg_of_edge.remove(&e);
            self.segs[s].alive = false;
            let first = self.add_segment(Seg {
                a: seg.a,
                b: v,
                t1: tm,
                mirror: None,
                alive: true,
                ..seg
            });
            let second = self.add_segment(Seg {
                a: v,
                b: seg.b,
                t0: tm,
                mirror: None,
                alive: true,
                ..seg
            });
            halves.push((first, second));
        }
        if halves.len() == 2 {
            let (a0, b0) = halves[0];
            let (a1, b1) = halves[1];
            self.segs[a0].mirror = Some(a1);
            self.segs[a1].mirror = Some(a0);
            self.segs[b0].mirror = Some(b1);
            self.segs[b1].mirror = Some(b0);
        }
        Ok(())
    }

    /// Marks triangles reachable from the super-triangle without crossing
    /// segments as outside.
    fn flood(&mut self) {
        for t in self.tris.iter_mut() {
            t.inside = true;
        }
        let mut queue = VecDeque::new();
        for (i, t) in self.tris.iter().enumerate() {
            if t.alive && t.v.iter().any(|&v| v < self.n_super) {
                queue.push_back(i);
            }
        }
        for &i in &queue {
            self.tris[i].inside = false;
        }
        while let Some(t) = queue.pop_front() {
            for i in 0..3 {
                let nb = self.tris[t].n[i];
                if nb == NONE || !self.tris[nb].inside {
                    continue;
                }
                let v = self.tris[t].v;
                if self.seg_of_edge.contains_key(&key(v[(i + 1) % 3], v[(i + 2) % 3])) {
                    continue;
                }
                self.tris[nb].inside = false;
                queue.push_back(nb);
            }
        }
    }

    fn quality(&self, t: usize) -> (f64, f64, [f64; 2]) {
        let [a, b, cc] = self.tris[t].v.map(|v| self.pts[v]);
        let center = circumcenter(a, b, cc);
        let r = dist2(center, a).sqrt();
        let shortest = dist2(a, b).min(dist2(b, cc)).min(dist2(cc, a)).sqrt();
        (r, r / shortest, center)
    }

    fn encroached(&self, p: [f64; 2]) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, s) in self.segs.iter().enumerate() {
            if !s.alive {
                continue;
            }
            let a = self.pts[s.a];
            let b = self.pts[s.b];
            let d = (p[0] - a[0]) * (p[0] - b[0]) + (p[1] - a[1]) * (p[1] - b[1]);
            if d < 0.0 {
                out.push(i);
            }
        }
        out
    }
}

pub(crate) fn triangulate(input: LoopInput, params: &RefineParams) -> Result<MesherOutput, GeometryError> {
    let n = input.points.len();
    if n < 3 || input.segments.len() != n {
        return Err(GeometryError::InvalidSpec("boundary loop needs at least 3 segments".into()));
    }
    let LoopInput {
        points,
        segments,
        curves,
    } = input;
    let shell = LoopInput {
        points: points.clone(),
        segments: Vec::new(),
        curves: Vec::new(),
    };
    let mut m = Mesher::new(&shell, curves);
    let mut ids = Vec::with_capacity(n);
    for (i, p) in points.iter().enumerate() {
        let curve = Some(segments[i].curve);
        let v = m
            .insert(*p, curve, None)
            .map_err(|_| GeometryError::MeshQualityFailure("boundary insertion failed".into()))?;
        ids.push(v);
    }
    // Segment ids follow loop order so mirrors can refer to loop indices.
    for (i, s) in segments.iter().enumerate() {
        m.add_segment(Seg {
            a: ids[i],
            b: ids[(i + 1) % n],
            curve: s.curve,
            t0: s.t0,
            t1: s.t1,
            mirror: s.mirror,
            alive: true,
        });
    }
    // Conforming phase: split segments missing from the triangulation.
    for _ in 0..60 {
        let edges = m.edge_set();
        let missing: Vec<usize> = (0..m.segs.len())
            .filter(|&i| m.segs[i].alive && !edges.contains(&key(m.segs[i].a, m.segs[i].b)))
            .collect();
        if missing.is_empty() {
            break;
        }
        for id in missing {
            if m.segs[id].alive {
                split_unconstrained(&mut m, id)?;
            }
        }
    }
    let edges = m.edge_set();
    if m.segs.iter().any(|s| s.alive && !edges.contains(&key(s.a, s.b))) {
        return Err(GeometryError::MeshQualityFailure("could not recover boundary".into()));
    }
    m.flood();

    let ratio_bound = 1.0 / (2.0 * params.min_angle_deg.to_radians().sin());
    let mut rejected: HashSet<[usize; 3]> = HashSet::new();
    loop {
        let bad: Vec<(usize, [usize; 3])> = m
            .tris
            .iter()
            .enumerate()
            .filter(|(i, t)| {
                t.alive && t.inside && !rejected.contains(&t.v) && {
                    let (r, ratio, _) = m.quality(*i);
                    r > params.max_circumradius || ratio > ratio_bound
                }
            })
            .map(|(i, t)| (i, t.v))
            .collect();
        if bad.is_empty() {
            break;
        }
        let mut progress = false;
        for (t, verts) in bad {
            if !m.tris[t].alive || m.tris[t].v != verts {
                continue;
            }
            let (r, ratio, center) = m.quality(t);
            if !(r > params.max_circumradius || ratio > ratio_bound) {
                continue;
            }
            let enc = m.encroached(center);
            if !enc.is_empty() {
                for id in enc {
                    if m.segs[id].alive {
                        m.split_segment(id)?;
                    }
                }
                m.flood();
                progress = true;
                continue;
            }
            match m.locate(center) {
                Some(loc) if m.tris[loc].inside => {
                    if m.insert(center, None, None).is_ok() {
                        progress = true;
                    } else {
                        rejected.insert(verts);
                    }
                }
                _ => {
                    rejected.insert(verts);
                }
            }
            if m.pts.len() > params.max_vertices {
                return Err(GeometryError::MeshQualityFailure(format!(
                    "vertex budget {} exceeded",
                    params.max_vertices
                )));
            }
        }
        if !progress {
            break;
        }
    }

    // Compact: drop the super-triangle and outside faces.
    let mut remap = vec![NONE; m.pts.len()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for t in m.tris.iter().filter(|t| t.alive && t.inside) {
        let mut tri = [0usize; 3];
        for (k, &v) in t.v.iter().enumerate() {
            if v < m.n_super {
                return Err(GeometryError::MeshQualityFailure("domain touches bounding triangle".into()));
            }
            if remap[v] == NONE {
                remap[v] = vertices.len();
                vertices.push(m.pts[v]);
            }
            tri[k] = remap[v];
        }
        triangles.push(tri);
    }
    Ok(MesherOutput {
        vertices,
        triangles,
    })
}

/// Conforming-phase split: the segment is not an edge yet, so the new
/// vertex is inserted without crossing permission.
fn split_unconstrained(m: &mut Mesher, id: usize) -> Result<(), GeometryError> {
    let mut ids = vec![id];
    if let Some(mi) = m.segs[id].mirror {
        ids.push(mi);
    }
    let mut halves = Vec::new();
    for &s in &ids {
        let seg = m.segs[s];
        let tm = 0.5 * (seg.t0 + seg.t1);
        let p = (m.curves[seg.curve])(tm);
        // Allow crossing any recovered segment edge being split.
        let e = key(seg.a, seg.b);
        let cross = if m.seg_of_edge.contains_key(&e) { Some(e) } else { None };
        let saved: Vec<((usize, usize), usize)> = m.seg_of_edge.drain().collect();
        let result = m.insert(p, Some(seg.curve), cross);
        m.seg_of_edge.extend(saved);
        let v = result.map_err(|_| GeometryError::MeshQualityFailure("segment split failed".into()))?;
        m.seg_of_edge.remove(&e);
        m.segs[s].alive = false;
        let first = m.add_segment(Seg {
            a: seg.a,
            b: v,
            t1: tm,
            mirror: None,
            alive: true,
            ..seg
        });
        let second = m.add_segment(Seg {
            a: v,
            b: seg.b,
            t0: tm,
            mirror: None,
            alive: true,
            ..seg
        });
        halves.push((first, second));
    }
    if halves.len() == 2 {
        let (a0, b0) = halves[0];
        let (a1, b1) = halves[1];
        m.segs[a0].mirror = Some(a1);
        m.segs[a1].mirror = Some(a0);
        m.segs[b0].mirror = Some(b1);
        m.segs[b1].mirror = Some(b0);
    }
    Ok(())
}
