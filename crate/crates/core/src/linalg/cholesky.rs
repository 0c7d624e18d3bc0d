//! Up-looking sparse Cholesky factorisation `P A Pᵀ = L Lᵀ`.

use super::{CsrMatrix, LinalgError};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric positive definite matrix with the given ordering
    /// (`perm[new] = old`).
    pub fn factor(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self, LinalgError> {
        let n = a.dim();
        if perm.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let mut pinv = vec![0usize; n];
        for (k, &o) in perm.iter().enumerate() {
            pinv[o] = k;
        }
        // Upper triangle of the permuted matrix, by column.
        let mut cptr = vec![0usize; n + 1];
        for k in 0..n {
            cptr[k + 1] = cptr[k] + a.row(perm[k]).filter(|&(j, _)| pinv[j] <= k).count();
        }
        let mut crow = vec![0usize; cptr[n]];
        let mut cval = vec![0.0; cptr[n]];
        for k in 0..n {
            let mut p = cptr[k];
            for (j, v) in a.row(perm[k]) {
                let i = pinv[j];
                if i <= k {
                    crow[p] = i;
                    cval[p] = v;
                    p += 1;
                }
            }
        }

        let parent = etree(n, &cptr, &crow);

        let mut flag = vec![NONE; n];
        let mut stack = vec![0usize; n];
        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(k, &cptr, &crow, &parent, &mut flag, &mut stack);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let nnz = col_ptr[n];
        let mut row_idx = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next: Vec<usize> = col_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        flag.iter_mut().for_each(|f| *f = NONE);

        for k in 0..n {
            let top = ereach(k, &cptr, &crow, &parent, &mut flag, &mut stack);
            for p in cptr[k]..cptr[k + 1] {
                x[crow[p]] += cval[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &i in &stack[top..] {
                let lki = x[i] / values[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..next[i] {
                    x[row_idx[p]] -= values[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                row_idx[p] = k;
                values[p] = lki;
            }
            if !(d > 0.0) {
                return Err(LinalgError::NotPositiveDefinite {
                    column: perm[k],
                    pivot: d,
                });
            }
            let p = next[k];
            next[k] += 1;
            row_idx[p] = k;
            values[p] = d.sqrt();
        }
        Ok(Cholesky {
            n,
            perm,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        x
    }

    pub fn solve_into(&self, b: &[f64], out: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..self.n {
            let cp = self.col_ptr[j];
            y[j] /= self.values[cp];
            let yj = y[j];
            for p in cp + 1..self.col_ptr[j + 1] {
                y[self.row_idx[p]] -= self.values[p] * yj;
            }
        }
        for j in (0..self.n).rev() {
            let cp = self.col_ptr[j];
            let mut s = y[j];
            for p in cp + 1..self.col_ptr[j + 1] {
                s -= self.values[p] * y[self.row_idx[p]];
            }
            y[j] = s / self.values[cp];
        }
        for (k, &o) in self.perm.iter().enumerate() {
            out[o] = y[k];
        }
    }
}

fn etree(n: usize, cptr: &[usize], crow: &[usize]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for p in cptr[k]..cptr[k + 1] {
            let mut i = crow[p];
            while i != NONE && i < k {
                let inext = ancestor[i];
                ancestor[i] = k;
                if inext == NONE {
                    parent[i] = k;
                }
                i = inext;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` in topological order, as `stack[top..]`.
fn ereach(
    k: usize,
    cptr: &[usize],
    crow: &[usize],
    parent: &[usize],
    flag: &mut [usize],
    stack: &mut [usize],
) -> usize {
    let n = parent.len();
    let mut top = n;
    flag[k] = k;
    let mut path = Vec::new();
    for p in cptr[k]..cptr[k + 1] {
        let mut i = crow[p];
        if i > k {
            continue;
        }
        path.clear();
        while flag[i] != k {
            path.push(i);
            flag[i] = k;
            i = parent[i];
        }
        while let Some(v) = path.pop() {
            top -= 1;
            stack[top] = v;
        }
    }
    top
}

#[cfg(test)]
mod tests {
    use super::super::nested_dissection;
    use super::*;
    use proptest::prelude::*;

    fn grid_laplacian(m: usize, shift: f64) -> (CsrMatrix, Vec<[f64; 2]>) {
        let n = m * m;
        let mut t = Vec::new();
        let mut coords = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let v = i * m + j;
                coords.push([i as f64, j as f64]);
                t.push((v, v, 4.0 + shift));
                if i + 1 < m {
                    t.push((v, v + m, -1.0));
                    t.push((v + m, v, -1.0));
                }
                if j + 1 < m {
                    t.push((v, v + 1, -1.0));
                    t.push((v + 1, v, -1.0));
                }
            }
        }
        (CsrMatrix::from_triplets(n, t), coords)
    }

    #[test]
    fn solves_grid_system() {
        let (a, coords) = grid_laplacian(30, 0.1);
        let perm = nested_dissection(&a, &coords);
        let mut seen = perm.clone();
        seen.sort();
        assert_eq!(seen, (0..900).collect::<Vec<_>>());
        let f = Cholesky::factor(&a, perm).unwrap();
        let b: Vec<f64> = (0..900).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let x = f.solve(&b);
        let r = a.mul_vec(&x);
        let err = r.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn nested_dissection_reduces_fill() {
        let (a, coords) = grid_laplacian(40, 0.1);
        let natural = Cholesky::factor(&a, (0..1600).collect()).unwrap();
        let nd = Cholesky::factor(&a, nested_dissection(&a, &coords)).unwrap();
        assert!(nd.nnz() < natural.nnz(), "{} vs {}", nd.nnz(), natural.nnz());
    }

    #[test]
    fn detects_indefinite() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            Cholesky::factor(&a, vec![0, 1]),
            Err(LinalgError::NotPositiveDefinite { .. })
        ));
    }

    proptest! {
        #[test]
        fn random_spd_solves(seed in 0u64..1000, n in 2usize..40) {
            // Diagonally dominant random sparse symmetric matrix.
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let mut rnd = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 33) as f64) / (1u64 << 31) as f64
            };
            let mut t = Vec::new();
            let mut diag = vec![1.0; n];
            for i in 0..n {
                for j in 0..i {
                    if rnd() < 0.2 {
                        let v = rnd() - 0.5;
                        t.push((i, j, v));
                        t.push((j, i, v));
                        diag[i] += v.abs();
                        diag[j] += v.abs();
                    }
                }
            }
            for (i, d) in diag.iter().enumerate() {
                t.push((i, i, *d));
            }
            let a = CsrMatrix::from_triplets(n, t);
            let coords: Vec<[f64; 2]> = (0..n).map(|i| [rnd(), i as f64]).collect();
            let f = Cholesky::factor(&a, nested_dissection(&a, &coords)).unwrap();
            let b: Vec<f64> = (0..n).map(|_| rnd()).collect();
            let x = f.solve(&b);
            let r = a.mul_vec(&x);
            for (p, q) in r.iter().zip(&b) {
                prop_assert!((p - q).abs() < 1e-10);
            }
        }
    }
}
