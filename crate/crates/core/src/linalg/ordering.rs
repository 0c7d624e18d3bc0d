//! Geometric nested dissection for matrices whose unknowns carry coordinates.

use super::CsrMatrix;

const LEAF: usize = 48;

/// Fill-reducing permutation (new position → old index).
///
/// Splits at the coordinate median along the wider bounding-box axis and
/// orders the graph separator last, recursively.
pub fn nested_dissection(a: &CsrMatrix, coords: &[[f64; 2]]) -> Vec<usize> {
    let n = a.dim();
    assert_eq!(coords.len(), n);
    let mut label = vec![0u32; n];
    let mut next_label = 1u32;
    let mut out = Vec::with_capacity(n);
    let all: Vec<usize> = (0..n).collect();
    dissect(a, coords, all, &mut label, &mut next_label, &mut out);
    debug_assert_eq!(out.len(), n);
    out
}

fn dissect(
    a: &CsrMatrix,
    coords: &[[f64; 2]],
    mut set: Vec<usize>,
    label: &mut [u32],
    next_label: &mut u32,
    out: &mut Vec<usize>,
) {
    if set.len() <= LEAF {
        out.extend_from_slice(&set);
        return;
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for &v in &set {
        for d in 0..2 {
            lo[d] = lo[d].min(coords[v][d]);
            hi[d] = hi[d].max(coords[v][d]);
        }
    }
    let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
    set.sort_by(|&p, &q| {
        coords[p][axis]
            .total_cmp(&coords[q][axis])
            .then(coords[p][1 - axis].total_cmp(&coords[q][1 - axis]))
            .then(p.cmp(&q))
    });
    let half = set.len() / 2;
    let right_label = *next_label;
    *next_label += 1;
    for &v in &set[half..] {
        label[v] = right_label;
    }
    let mut left = Vec::with_capacity(half);
    let mut sep = Vec::new();
    for &v in &set[..half] {
        if a.row(v).any(|(j, _)| j != v && label[j] == right_label) {
            sep.push(v);
        } else {
            left.push(v);
        }
    }
    let right: Vec<usize> = set[half..].to_vec();
    for &v in &right {
        label[v] = 0;
    }
    if left.is_empty() || right.is_empty() {
        out.extend_from_slice(&set);
        return;
    }
    dissect(a, coords, left, label, next_label, out);
    dissect(a, coords, right, label, next_label, out);
    out.extend_from_slice(&sep);
}
