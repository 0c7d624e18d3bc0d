//! Smallest nonzero eigenpairs of the Neumann pencil `K u = μ M u` and
//! detection of the (possibly degenerate) cluster at μ₂.

mod lanczos;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{assemble_mass, assemble_stiffness, AssemblyError};
use crate::geometry::TriMesh;
use crate::linalg::{dot, nested_dissection, Cholesky, CsrMatrix, LinalgError};

pub use lanczos::ShiftInvert;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("no convergence after {iterations} Lanczos steps")]
    NoConvergence { iterations: usize },
    #[error("mass matrix is not positive definite")]
    IndefiniteMass,
    #[error("shifted stiffness factorisation failed: {0}")]
    Factorization(LinalgError),
    #[error("ambiguous cluster: relative gap {gap:e} below {threshold:e}")]
    AmbiguousCluster { gap: f64, threshold: f64 },
    #[error("all {0} computed eigenvalues fall in the cluster; request more pairs")]
    UnboundedCluster(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Relative residual target `‖Ku − μMu‖_{M⁻¹} / μ`.
    pub tol: f64,
    /// Number of nonzero eigenpairs to compute.
    pub count: usize,
    /// Eigenvalues within `μ₂(1 + cluster_rtol)` form the cluster.
    pub cluster_rtol: f64,
    /// Shift σ of `K + σM`; `None` picks `1e-3·tr(K)/(n·tr(M))`.
    pub shift: Option<f64>,
    pub lumped_mass: bool,
    /// Restart budget per Lanczos run; `None` means `50·count`.
    pub max_restarts: Option<usize>,
    /// Extra deflated pass that catches exactly degenerate copies a single
    /// Krylov sequence cannot see.
    pub verify_multiplicity: bool,
    /// Selects the deterministic Lanczos start vectors. Set from the
    /// run seed, not from the solver section of a config.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            count: 4,
            cluster_rtol: 1e-3,
            shift: None,
            lumped_mass: false,
            max_restarts: None,
            verify_multiplicity: true,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), EigenError> {
        if !(self.tol > 0.0) || !(self.cluster_rtol > 0.0) {
            return Err(EigenError::InvalidInput("tolerances must be positive".into()));
        }
        if self.count == 0 {
            return Err(EigenError::InvalidInput("count must be at least 1".into()));
        }
        if let Some(s) = self.shift {
            if !(s > 0.0) {
                return Err(EigenError::InvalidInput("shift must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub mu: f64,
    /// M-normalised, M-orthogonal to constants.
    pub vector: Vec<f64>,
    pub residual: f64,
}

/// μ₂ and an M-orthonormal basis of its numerically detected eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCluster {
    pub mu2: f64,
    /// Eigenvalues of the members, ascending.
    pub values: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub residual_norms: Vec<f64>,
    /// `μ_{m+2} − μ_{m+1}`: distance from the cluster to the next eigenvalue.
    pub cluster_gap: f64,
}

impl EigenCluster {
    pub fn multiplicity(&self) -> usize {
        self.basis.len()
    }

    /// Common eigenvalue used in boundary residuals: the cluster mean.
    pub fn mu(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Default shift: a thousandth of the mean diagonal ratio per dof, which
/// scales like 1/area and sits well below μ₂.
pub fn default_shift(k: &CsrMatrix, m: &CsrMatrix) -> f64 {
    let tk: f64 = k.diagonal().iter().sum();
    let tm: f64 = m.diagonal().iter().sum();
    1e-3 * tk / (tm * k.dim() as f64)
}

/// The `count` smallest eigenpairs of `K u = μ M u` on the M-orthogonal
/// complement of constants, ascending.
///
/// `ordering` is a fill-reducing permutation (`perm[new] = old`).
pub fn smallest_nonzero_eigenpairs(
    k: &CsrMatrix,
    m: &CsrMatrix,
    ordering: &[usize],
    opts: &SolverOptions,
) -> Result<Vec<EigenPair>, EigenError> {
    Ok(solve_pencil(k, m, ordering, opts)?.0)
}

/// Eigenpairs plus a lower estimate of the next eigenvalue when the
/// multiplicity pass ran.
fn solve_pencil(
    k: &CsrMatrix,
    m: &CsrMatrix,
    ordering: &[usize],
    opts: &SolverOptions,
) -> Result<(Vec<EigenPair>, Option<f64>), EigenError> {
    opts.validate()?;
    let n = k.dim();
    if m.dim() != n || ordering.len() != n {
        return Err(EigenError::InvalidInput("dimension mismatch".into()));
    }
    if opts.count + 1 >= n {
        return Err(EigenError::InvalidInput(format!("{} pairs requested from {} dofs", opts.count, n)));
    }
    let mfac = Cholesky::factor(m, ordering.to_vec()).map_err(|_| EigenError::IndefiniteMass)?;
    let sigma = opts.shift.unwrap_or_else(|| default_shift(k, m));
    let shifted = k.add_scaled(sigma, m);
    let kfac = Cholesky::factor(&shifted, ordering.to_vec()).map_err(EigenError::Factorization)?;
    let restarts = opts.max_restarts.unwrap_or(50 * opts.count);

    let mut op = ShiftInvert::new(&kfac, m, sigma);
    let residual = |x: &[f64], mu: f64| -> f64 {
        let kx = k.mul_vec(x);
        let mx = m.mul_vec(x);
        let r: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - mu * b).collect();
        dot(&r, &mfac.solve(&r)).max(0.0).sqrt() / mu
    };
    let finish = |x: Vec<f64>| -> EigenPair {
        let mut x = x;
        let mx = m.mul_vec(&x);
        let nrm = dot(&x, &mx).sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
        fix_sign(&mut x);
        let mu = k.bilinear(&x, &x);
        let residual = residual(&x, mu);
        EigenPair { mu, vector: x, residual }
    };

    let mut ritz_tol = 1e-2 * opts.tol;
    let mut pairs = Vec::new();
    for attempt in 0..4 {
        let found = lanczos::run(&op, opts.count, ritz_tol, restarts, opts.seed as usize)?;
        pairs = found.into_iter().map(|(_, x)| finish(x)).collect::<Vec<_>>();
        if pairs.iter().all(|p| p.residual <= opts.tol) {
            break;
        }
        if attempt == 3 {
            return Err(EigenError::NoConvergence { iterations: restarts });
        }
        ritz_tol *= 1e-2;
    }
    pairs.sort_by(|a, b| a.mu.total_cmp(&b.mu));

    let mut next = None;
    if opts.verify_multiplicity {
        for pass in 1..=opts.count + 1 {
            op.set_locked(pairs.iter().map(|p| p.vector.clone()).collect());
            let extra = lanczos::run(&op, 1, ritz_tol, restarts, opts.seed as usize + pass)?;
            let cand = finish(extra.into_iter().next().expect("one pair").1);
            let top = pairs.last().unwrap().mu;
            if cand.mu < top * (1.0 - opts.tol.sqrt()) {
                pairs.pop();
                pairs.push(cand);
                pairs.sort_by(|a, b| a.mu.total_cmp(&b.mu));
                // Re-orthonormalise the set after the swap.
                let vs: Vec<Vec<f64>> = pairs.iter().map(|p| p.vector.clone()).collect();
                let vs = m_orthonormalize(m, vs);
                pairs = vs.into_iter().map(finish).collect();
                pairs.sort_by(|a, b| a.mu.total_cmp(&b.mu));
            } else {
                next = Some(cand.mu);
                break;
            }
        }
    }
    Ok((pairs, next))
}

/// Makes the entry of largest magnitude positive (first one on ties).
fn fix_sign(x: &mut [f64]) {
    let mut best = 0usize;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if x.get(best).is_some_and(|v| *v < 0.0) {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Modified Gram–Schmidt in the M inner product, applied twice.
pub fn m_orthonormalize(m: &CsrMatrix, mut vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for i in 0..vs.len() {
        for _ in 0..2 {
            for j in 0..i {
                let mj = m.mul_vec(&vs[j]);
                let c = dot(&mj, &vs[i]);
                let (head, tail) = vs.split_at_mut(i);
                tail[0].iter_mut().zip(&head[j]).for_each(|(a, b)| *a -= c * b);
            }
        }
        let mi = m.mul_vec(&vs[i]);
        let nrm = dot(&mi, &vs[i]).sqrt();
        vs[i].iter_mut().for_each(|v| *v /= nrm);
    }
    vs
}

/// Groups the leading eigenvalues within `μ₂(1 + rtol)`.
///
/// `next` is an eigenvalue known to lie above all of `pairs` (from the
/// multiplicity pass), used when every computed pair falls in the cluster.
pub fn detect_cluster(pairs: &[EigenPair], next: Option<f64>, rtol: f64, tol: f64) -> Result<EigenCluster, EigenError> {
    let first = pairs.first().ok_or_else(|| EigenError::InvalidInput("no eigenpairs".into()))?;
    let mu2 = first.mu;
    if !(mu2 > 0.0) {
        return Err(EigenError::InvalidInput(format!("μ₂ = {mu2} is not positive")));
    }
    let m = pairs.iter().take_while(|p| p.mu <= mu2 * (1.0 + rtol)).count();
    let top = pairs[m - 1].mu;
    let following = pairs.get(m).map(|p| p.mu).or(next).ok_or(EigenError::UnboundedCluster(pairs.len()))?;
    let gap = following - top;
    let threshold = 2.0 * tol;
    if gap / mu2 < threshold {
        return Err(EigenError::AmbiguousCluster { gap: gap / mu2, threshold });
    }
    Ok(EigenCluster {
        mu2,
        values: pairs[..m].iter().map(|p| p.mu).collect(),
        basis: pairs[..m].iter().map(|p| p.vector.clone()).collect(),
        residual_norms: pairs[..m].iter().map(|p| p.residual).collect(),
        cluster_gap: gap,
    })
}

/// Assembled pencil with its fill-reducing ordering.
pub struct Pencil {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub ordering: Vec<usize>,
}

impl Pencil {
    pub fn new(mesh: &TriMesh, lumped: bool) -> Result<Self, EigenError> {
        let stiffness = assemble_stiffness(mesh)?;
        let mass = assemble_mass(mesh, lumped)?;
        let ordering = nested_dissection(&stiffness, &mesh.dof_coords());
        Ok(Pencil {
            stiffness,
            mass,
            ordering,
        })
    }
}

/// Everything [`solve_mesh`] computes.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub pairs: Vec<EigenPair>,
    pub next: Option<f64>,
    pub cluster: EigenCluster,
}

/// Assembles, solves and detects the μ₂ cluster on a mesh.
pub fn solve_mesh(mesh: &TriMesh, opts: &SolverOptions) -> Result<Spectrum, EigenError> {
    let pencil = Pencil::new(mesh, opts.lumped_mass)?;
    let (pairs, next) = solve_pencil(&pencil.stiffness, &pencil.mass, &pencil.ordering, opts)?;
    let cluster = detect_cluster(&pairs, next, opts.cluster_rtol, opts.tol)?;
    Ok(Spectrum { pairs, next, cluster })
}

/// μ₂ alone, for finite-difference and line-search evaluations.
pub fn mu2_of(mesh: &TriMesh, opts: &SolverOptions) -> Result<f64, EigenError> {
    let pencil = Pencil::new(mesh, opts.lumped_mass)?;
    let o = SolverOptions {
        count: opts.count.min(3),
        verify_multiplicity: false,
        ..opts.clone()
    };
    Ok(solve_pencil(&pencil.stiffness, &pencil.mass, &pencil.ordering, &o)?.0[0].mu)
}
