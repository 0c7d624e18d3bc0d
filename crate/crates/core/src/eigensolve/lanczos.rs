//! Thick-restart Lanczos on `T = (K + σM)⁻¹M`, which is self-adjoint in
//! the M inner product. Largest θ of T are the smallest μ = 1/θ − σ.

use nalgebra::{DMatrix, SymmetricEigen};

use super::EigenError;
use crate::linalg::{axpy, dot, Cholesky, CsrMatrix};

/// The shift-invert operator with constants (and optionally some locked
/// eigenvectors) projected out M-orthogonally after every application.
pub struct ShiftInvert<'a> {
    kfac: &'a Cholesky,
    m: &'a CsrMatrix,
    sigma: f64,
    m_ones: Vec<f64>,
    total_mass: f64,
    locked: Vec<(Vec<f64>, Vec<f64>)>,
}

impl<'a> ShiftInvert<'a> {
    pub fn new(kfac: &'a Cholesky, m: &'a CsrMatrix, sigma: f64) -> Self {
        let m_ones = m.mul_vec(&vec![1.0; m.dim()]);
        let total_mass = m_ones.iter().sum();
        ShiftInvert {
            kfac,
            m,
            sigma,
            m_ones,
            total_mass,
            locked: Vec::new(),
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Vectors to deflate in addition to constants; must be M-orthonormal.
    pub fn set_locked(&mut self, vs: Vec<Vec<f64>>) {
        self.locked = vs
            .into_iter()
            .map(|v| {
                let mv = self.m.mul_vec(&v);
                (v, mv)
            })
            .collect();
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    fn n_deflated(&self) -> usize {
        1 + self.locked.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for _ in 0..2 {
            let c = dot(&self.m_ones, x) / self.total_mass;
            x.iter_mut().for_each(|v| *v -= c);
            for (v, mv) in &self.locked {
                let c = dot(mv, x);
                axpy(-c, v, x);
            }
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mx = self.m.mul_vec(x);
        self.kfac.solve_into(&mx, out);
        self.project(out);
    }

    fn m_mul(&self, x: &[f64]) -> Vec<f64> {
        self.m.mul_vec(x)
    }
}

/// Deterministic pseudo-random start vector (additive recurrence).
fn start_vector(n: usize, seed: usize) -> Vec<f64> {
    let a = 0.754_877_666_246_692_7;
    let b = 0.569_840_290_998_053_3;
    (0..n)
        .map(|i| {
            let s = (i as f64 + 1.0) * a + (seed as f64 + 1.0) * b;
            s.fract() - 0.5
        })
        .collect()
}

/// Returns the `nev` largest Ritz pairs `(θ, x)` of the operator, `x`
/// M-normalised, with Ritz residual `‖Tx − θx‖_M ≤ tol·θ`.
pub(super) fn run(op: &ShiftInvert, nev: usize, tol: f64, max_restarts: usize, seed: usize) -> Result<Vec<(f64, Vec<f64>)>, EigenError> {
    let n = op.dim();
    let avail = n.saturating_sub(op.n_deflated());
    if nev > avail {
        return Err(EigenError::InvalidInput(format!("only {avail} nontrivial modes available")));
    }
    let ncv = (2 * nev + 16).max(24).min(avail);
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(ncv + 1);
    let mut mv: Vec<Vec<f64>> = Vec::with_capacity(ncv + 1);
    let mut h = DMatrix::<f64>::zeros(ncv, ncv);
    let mut fresh = seed * 7919;

    let push_new = |v: &mut Vec<Vec<f64>>, mv: &mut Vec<Vec<f64>>, mut w: Vec<f64>, fresh: &mut usize| {
        // Normalise w against the current basis; replace it with a fresh
        // start vector on breakdown.
        loop {
            op.project(&mut w);
            for _ in 0..2 {
                for (vi, mvi) in v.iter().zip(mv.iter()) {
                    let c = dot(mvi, &w);
                    axpy(-c, vi, &mut w);
                }
            }
            let mw = op.m_mul(&w);
            let nrm = dot(&mw, &w).max(0.0).sqrt();
            if nrm > 1e-10 {
                v.push(w.iter().map(|x| x / nrm).collect());
                mv.push(mw.iter().map(|x| x / nrm).collect());
                return;
            }
            *fresh += 1;
            w = start_vector(n, *fresh);
        }
    };
    push_new(&mut v, &mut mv, start_vector(n, seed), &mut fresh);

    let mut k = 0usize;
    let mut steps = 0usize;
    let mut w = vec![0.0; n];
    for _restart in 0..=max_restarts {
        let mut beta = 0.0;
        let mut f = Vec::new();
        for j in k..ncv {
            op.apply(&v[j], &mut w);
            steps += 1;
            let mut coef = vec![0.0; j + 1];
            for _ in 0..2 {
                for i in 0..=j {
                    let c = dot(&mv[i], &w);
                    coef[i] += c;
                    axpy(-c, &v[i], &mut w);
                }
            }
            for i in 0..=j {
                // Rows below the thick-restart block are exactly zero in
                // exact arithmetic; keep only the symmetric part.
                if i < k && j > k {
                    continue;
                }
                h[(i, j)] = coef[i];
                h[(j, i)] = coef[i];
            }
            let mw = op.m_mul(&w);
            beta = dot(&mw, &w).max(0.0).sqrt();
            if j + 1 < ncv {
                if beta > 1e-12 * coef[j].abs().max(f64::MIN_POSITIVE) {
                    v.push(w.iter().map(|x| x / beta).collect());
                    mv.push(mw.iter().map(|x| x / beta).collect());
                } else {
                    // Invariant subspace: continue with an unrelated vector.
                    beta = 0.0;
                    fresh += 1;
                    push_new(&mut v, &mut mv, start_vector(n, fresh), &mut fresh);
                }
            } else {
                f = w.clone();
            }
        }

        let eig = SymmetricEigen::new(h.clone());
        let mut idx: Vec<usize> = (0..ncv).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let converged = idx[..nev]
            .iter()
            .all(|&i| (beta * eig.eigenvectors[(ncv - 1, i)]).abs() <= tol * eig.eigenvalues[i].abs());
        let keep = if converged { nev } else { (nev + (ncv - nev) / 2).min(ncv - 1) };
        let mut nv: Vec<Vec<f64>> = vec![vec![0.0; n]; keep];
        let mut nmv: Vec<Vec<f64>> = vec![vec![0.0; n]; keep];
        for (c, &i) in idx[..keep].iter().enumerate() {
            for r in 0..ncv {
                let y = eig.eigenvectors[(r, i)];
                axpy(y, &v[r], &mut nv[c]);
                axpy(y, &mv[r], &mut nmv[c]);
            }
        }
        if converged {
            return Ok(idx[..nev].iter().map(|&i| eig.eigenvalues[i]).zip(nv).collect());
        }
        h.fill(0.0);
        for (c, &i) in idx[..keep].iter().enumerate() {
            h[(c, c)] = eig.eigenvalues[i];
        }
        v = nv;
        mv = nmv;
        k = keep;
        if beta > 0.0 {
            // Reorthogonalise the residual against the rotated basis.
            push_new(&mut v, &mut mv, f.iter().map(|x| x / beta).collect(), &mut fresh);
        } else {
            fresh += 1;
            push_new(&mut v, &mut mv, start_vector(n, fresh), &mut fresh);
        }
    }
    Err(EigenError::NoConvergence { iterations: steps })
}
