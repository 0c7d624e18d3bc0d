//! Volume-constrained gradient ascent of μ₂ over analytic domain specs.
//!
//! The state is the spec itself (planar radial Fourier coefficients or
//! cylinder height series). Each step fits the ascent normal speed into
//! the spec's tangent space by least squares, line-searches with remeshing
//! and projects back to the target volume.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{boundary_integrate, boundary_measure, linear_pair_mean, BoundaryTrace, GradientRecovery};
use crate::criticality::{weak_criticality_test, CriticalityError, WeakOptions};
use crate::eigensolve::{mu2_of, solve_mesh, EigenCluster, EigenError, SolverOptions};
use crate::geometry::{build_mesh, CylinderDomainSpec, Domain, DomainSpec, FourierSeries, GeometryError, PlanarDomainSpec, RectangleSpec, TriMesh};
use crate::shapecalc::{derivative_matrix, sym_extremes, ClusterTraces};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("boundary residual is constant to relative deviation {deviation:e}")]
    ZeroGradient { deviation: f64 },
    #[error("volume projection did not converge (volume {volume}, target {target})")]
    ProjectionDiverged { volume: f64, target: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<OptimizerError>,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    Criticality(#[from] CriticalityError),
}

impl OptimizerError {
    /// The underlying failure, with step context removed.
    pub fn root(&self) -> &OptimizerError {
        match self {
            OptimizerError::Step { source, .. } => source.root(),
            e => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowOptions {
    /// Mesh size used for every remesh.
    pub h: f64,
    pub max_steps: usize,
    /// Stop once the weak residual falls below this; `None` means
    /// `1e-2·μ₂²` at the current step.
    pub tol_crit: Option<f64>,
    /// Stop when `q` is constant to this relative RMS deviation.
    pub zero_gradient_tol: f64,
    /// Initial largest boundary displacement of a step.
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub armijo: f64,
    /// Fourier modes per boundary series in the tangent-space fit.
    pub fourier_modes: usize,
    pub recovery: GradientRecovery,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            h: 0.05,
            max_steps: 60,
            tol_crit: None,
            zero_gradient_tol: 1e-3,
            initial_step: 0.05,
            max_step: 0.2,
            min_step: 1e-6,
            armijo: 1e-4,
            fourier_modes: 8,
            recovery: GradientRecovery::default(),
        }
    }
}

impl FlowOptions {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let pos = [self.h, self.zero_gradient_tol, self.initial_step, self.max_step, self.min_step, self.armijo];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.tol_crit.is_some_and(|t| !(t > 0.0)) {
            return Err(OptimizerError::InvalidInput("flow tolerances and steps must be positive".into()));
        }
        if self.fourier_modes == 0 || self.armijo >= 1.0 || self.min_step > self.initial_step {
            return Err(OptimizerError::InvalidInput("inconsistent flow parameters".into()));
        }
        Ok(())
    }
}

/// Boundary residual of the unit combination `c`, as an edge-linear trace.
fn residual_trace(mesh: &TriMesh, traces: &ClusterTraces, mu: f64, c: &[f64]) -> BoundaryTrace {
    let m = traces.len();
    BoundaryTrace::EdgeLinear(
        (0..mesh.boundary().len())
            .map(|e| {
                [0.0, 1.0].map(|s| {
                    let mut v = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            v += c[i] * c[j] * traces.q(i, j, e, s, mu);
                        }
                    }
                    v
                })
            })
            .collect(),
    )
}

fn l2_norm(mesh: &TriMesh, h: &BoundaryTrace) -> f64 {
    let v = h.to_edge_linear(mesh);
    mesh.boundary()
        .iter()
        .zip(&v)
        .map(|(e, x)| e.length * linear_pair_mean(*x, *x))
        .sum::<f64>()
        .sqrt()
}

/// Steepest ascent normal speed for μ₂, mean-zero and of unit L² norm.
///
/// For a simple eigenvalue this is `q − mean(q)`. For a cluster, the
/// averaged residual `h₀ = tr(Q)/m − mean` and the subgradient candidate
/// `h = q_c − mean(q_c)`, with `c` minimising `A(h₀)`, are compared and the
/// one with the larger `λ_min(A)` is returned. Under a symmetry that keeps
/// the cluster degenerate `A(h₀)` is a multiple of the identity and `h₀`
/// is the right choice; otherwise the subgradient step usually wins.
pub fn ascent_direction(
    mesh: &TriMesh,
    cluster: &EigenCluster,
    recovery: GradientRecovery,
    zero_tol: f64,
) -> Result<BoundaryTrace, OptimizerError> {
    let traces = ClusterTraces::new(mesh, &cluster.basis, recovery);
    let m = traces.len();
    let mu = cluster.mu();
    let len = boundary_measure(mesh, None).map_err(|e| OptimizerError::InvalidInput(e.to_string()))?;
    let centred = |q: BoundaryTrace| -> (BoundaryTrace, f64) {
        let mean = boundary_integrate(mesh, &q, None).unwrap_or(0.0) / len;
        (q.shifted(mesh, -mean, None), mean)
    };
    let unit = |h: BoundaryTrace, mean: f64| -> Result<BoundaryTrace, OptimizerError> {
        let norm = l2_norm(mesh, &h);
        let deviation = norm / (len.sqrt() * mean.abs().max(f64::MIN_POSITIVE));
        if deviation <= zero_tol {
            return Err(OptimizerError::ZeroGradient { deviation });
        }
        Ok(h.scaled(1.0 / norm))
    };
    if m == 1 {
        let (h, mean) = centred(residual_trace(mesh, &traces, mu, &[1.0]));
        return unit(h, mean);
    }
    let q0 = BoundaryTrace::EdgeLinear(
        (0..mesh.boundary().len())
            .map(|e| [0.0, 1.0].map(|s| (0..m).map(|i| traces.q(i, i, e, s, mu)).sum::<f64>() / m as f64))
            .collect(),
    );
    let (h0, mean0) = centred(q0);
    let c = sym_extremes(&derivative_matrix(mesh, &traces, mu, &h0)).1;
    let (hc, mean_c) = centred(residual_trace(mesh, &traces, mu, &c));
    let score = |h: &BoundaryTrace| sym_extremes(&derivative_matrix(mesh, &traces, mu, h)).0;
    [unit(h0, mean0), unit(hc, mean_c)]
        .into_iter()
        .filter_map(Result::ok)
        .map(|h| (score(&h), h))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, h)| h)
        .ok_or(OptimizerError::ZeroGradient { deviation: 0.0 })
}

/// Coefficient vector of a spec in its tangent-space coordinates.
///
/// Planar: `R(θ) = R₀ + Σ A_k cos kθ + B_k sin kθ` as `[R₀, A.., B..]`.
/// Cylinder: `[g₊ mean, cos.., sin.., g₋ mean, cos.., sin..]`.
fn params(domain: &Domain, modes: usize) -> Result<Vec<f64>, OptimizerError> {
    let pad = |v: &[f64], s: f64| (0..modes).map(|k| v.get(k).copied().unwrap_or(0.0) * s).collect::<Vec<_>>();
    match domain {
        Domain::Planar(p) => {
            let mut out = vec![p.rho0];
            out.extend(pad(&p.cos, p.rho0));
            out.extend(pad(&p.sin, p.rho0));
            Ok(out)
        }
        Domain::Cylinder(c) => {
            let mut out = Vec::new();
            for g in [&c.g_plus, &c.g_minus] {
                out.push(g.mean);
                out.extend(pad(&g.cos, 1.0));
                out.extend(pad(&g.sin, 1.0));
            }
            Ok(out)
        }
        Domain::Rectangle(_) => Err(OptimizerError::InvalidInput("rectangles have no shape parameters".into())),
    }
}

fn from_params(template: &Domain, p: &[f64], modes: usize) -> Domain {
    match template {
        Domain::Planar(_) => {
            let rho0 = p[0];
            Domain::Planar(PlanarDomainSpec {
                rho0,
                cos: p[1..=modes].iter().map(|a| a / rho0).collect(),
                sin: p[modes + 1..=2 * modes].iter().map(|a| a / rho0).collect(),
            })
        }
        Domain::Cylinder(c) => {
            let series = |q: &[f64]| FourierSeries {
                mean: q[0],
                cos: q[1..=modes].to_vec(),
                sin: q[modes + 1..=2 * modes].to_vec(),
            };
            Domain::Cylinder(CylinderDomainSpec {
                circumference: c.circumference,
                g_plus: series(&p[..2 * modes + 1]),
                g_minus: series(&p[2 * modes + 1..]),
            })
        }
        Domain::Rectangle(r) => Domain::Rectangle(r.clone()),
    }
}

/// Normal speed at chart point `x` on the boundary induced by a unit change
/// of each parameter.
fn speed_row(domain: &Domain, modes: usize, x: [f64; 2]) -> Vec<f64> {
    let fourier = |w: f64| {
        let mut row = vec![1.0];
        row.extend((1..=modes).map(|k| (k as f64 * w).cos()));
        row.extend((1..=modes).map(|k| (k as f64 * w).sin()));
        row
    };
    match domain {
        Domain::Planar(p) => {
            let th = x[1].atan2(x[0]);
            let (r, dr) = p.radius(th);
            let w = r / r.hypot(dr);
            fourier(th).into_iter().map(|b| b * w).collect()
        }
        Domain::Cylinder(c) => {
            let (up, dup) = c.upper(x[1]);
            let (lo, dlo) = c.lower(x[1]);
            let top = x[0] > 0.5 * (up + lo);
            let phase = c.omega() * x[1];
            let f = fourier(phase);
            let zeros = vec![0.0; f.len()];
            if top {
                let w = 1.0 / (1.0 + dup * dup).sqrt();
                f.iter().map(|b| b * w).chain(zeros).collect()
            } else {
                let w = -1.0 / (1.0 + dlo * dlo).sqrt();
                zeros.into_iter().chain(f.iter().map(|b| b * w)).collect()
            }
        }
        Domain::Rectangle(_) => Vec::new(),
    }
}

/// Parameter direction whose normal speed best fits `h` (edge-length
/// weighted least squares at edge midpoints), made volume-neutral to first
/// order and scaled to unit sup-norm speed. Returns the direction and its
/// speed as a trace.
fn fit_direction(mesh: &TriMesh, domain: &Domain, modes: usize, h: &BoundaryTrace) -> Result<(Vec<f64>, BoundaryTrace), OptimizerError> {
    let hv = h.to_edge_linear(mesh);
    let bnd = mesh.boundary();
    let verts = mesh.vertices();
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = bnd
        .iter()
        .map(|e| {
            let (a, b) = (verts[e.a], verts[e.b]);
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            // Endpoint rows use the midpoint's side so seam-free cylinder
            // edges never mix components.
            let ra = speed_row(domain, modes, a);
            let rb = speed_row(domain, modes, b);
            let rm = speed_row(domain, modes, mid);
            let same = |r: Vec<f64>| {
                if domain_is_cylinder(domain) && (r.iter().zip(&rm).any(|(x, y)| (*x == 0.0) != (*y == 0.0))) {
                    rm.clone()
                } else {
                    r
                }
            };
            (same(ra), same(rb), rm)
        })
        .collect();
    let np = rows[0].2.len();
    let mut a = DMatrix::zeros(bnd.len(), np);
    let mut rhs = DVector::zeros(bnd.len());
    for (i, (e, r)) in bnd.iter().zip(&rows).enumerate() {
        let w = e.length.sqrt();
        for j in 0..np {
            a[(i, j)] = w * r.2[j];
        }
        rhs[i] = w * 0.5 * (hv[i][0] + hv[i][1]);
    }
    let sol = a
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| OptimizerError::InvalidInput(e.to_string()))?;
    let mut dp: Vec<f64> = sol.iter().copied().collect();
    // Remove the first-order volume change along the uniform offset.
    let offset: Vec<f64> = match domain {
        Domain::Cylinder(_) => {
            let mut v = vec![0.0; np];
            v[0] = 1.0;
            v[np / 2] = -1.0;
            v
        }
        _ => {
            let mut v = vec![0.0; np];
            v[0] = 1.0;
            v
        }
    };
    let flux = |d: &[f64]| -> f64 {
        bnd.iter()
            .zip(&rows)
            .map(|(e, r)| e.length * 0.5 * (dot(&r.0, d) + dot(&r.1, d)))
            .sum()
    };
    let c = flux(&dp) / flux(&offset);
    dp.iter_mut().zip(&offset).for_each(|(d, o)| *d -= c * o);
    let speed: Vec<[f64; 2]> = rows.iter().map(|r| [dot(&r.0, &dp), dot(&r.1, &dp)]).collect();
    let sup = speed.iter().flat_map(|s| s.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    if !(sup > 0.0) {
        return Err(OptimizerError::ZeroGradient { deviation: 0.0 });
    }
    dp.iter_mut().for_each(|d| *d /= sup);
    Ok((dp, BoundaryTrace::EdgeLinear(speed.iter().map(|s| [s[0] / sup, s[1] / sup]).collect())))
}

fn domain_is_cylinder(d: &Domain) -> bool {
    matches!(d, Domain::Cylinder(_))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Restores the target volume with a uniform boundary offset: additive
/// radial offset in the plane, symmetric height offset on the cylinder,
/// uniform scaling for rectangles. Newton, at most 10 iterations, to
/// `1e-10·target`.
pub fn project_volume(domain: &Domain, target: f64) -> Result<Domain, OptimizerError> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(OptimizerError::InvalidInput(format!("target volume {target} must be positive")));
    }
    let tol = 1e-10 * target;
    if (domain.volume() - target).abs() <= tol {
        return Ok(domain.clone());
    }
    let apply = |d: f64| -> Domain {
        match domain {
            Domain::Planar(p) => {
                let rho0 = p.rho0 + d;
                let s = p.rho0 / rho0;
                Domain::Planar(PlanarDomainSpec {
                    rho0,
                    cos: p.cos.iter().map(|a| a * s).collect(),
                    sin: p.sin.iter().map(|a| a * s).collect(),
                })
            }
            Domain::Cylinder(c) => {
                let mut c = c.clone();
                c.g_plus.mean += d;
                c.g_minus.mean -= d;
                Domain::Cylinder(c)
            }
            Domain::Rectangle(r) => {
                let s = 1.0 + d;
                Domain::Rectangle(RectangleSpec {
                    width: r.width * s,
                    height: r.height * s,
                })
            }
        }
    };
    let slope = |d: f64| -> f64 {
        match domain {
            Domain::Planar(p) => 2.0 * std::f64::consts::PI * (p.rho0 + d),
            Domain::Cylinder(c) => 2.0 * c.circumference,
            Domain::Rectangle(r) => 2.0 * r.area() * (1.0 + d),
        }
    };
    let mut d = 0.0;
    for _ in 0..10 {
        let v = apply(d).volume();
        if (v - target).abs() <= tol {
            let out = apply(d);
            out.validate()?;
            return Ok(out);
        }
        d -= (v - target) / slope(d);
    }
    let out = apply(d);
    if (out.volume() - target).abs() <= tol {
        out.validate()?;
        return Ok(out);
    }
    Err(OptimizerError::ProjectionDiverged {
        volume: out.volume(),
        target,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    WeaklyCritical,
    ZeroGradient,
    NoAscent,
    StepUnderflow,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRecord {
    pub step: usize,
    pub mu2: f64,
    pub multiplicity: usize,
    pub volume: f64,
    pub volume_drift: f64,
    pub weak_residual: f64,
    /// Step taken to reach this state (0 for the start).
    pub step_size: f64,
    pub spec_coeffs: DomainSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowResult {
    pub records: Vec<FlowRecord>,
    pub termination: Termination,
    pub final_spec: DomainSpec,
}

struct Evaluated {
    domain: Domain,
    mesh: TriMesh,
    cluster: EigenCluster,
    weak_residual: f64,
}

fn evaluate(domain: Domain, opts: &FlowOptions, solver: &SolverOptions) -> Result<Evaluated, OptimizerError> {
    let mesh = build_mesh(&domain, opts.h)?;
    let cluster = solve_mesh(&mesh, solver)?.cluster;
    let weak = weak_criticality_test(&mesh, &cluster, opts.recovery, &WeakOptions::default())?;
    Ok(Evaluated {
        domain,
        mesh,
        cluster,
        weak_residual: weak.weak_residual,
    })
}

/// Projected gradient ascent with Armijo backtracking. Three step sizes
/// `ε, ε/2, ε/4` are evaluated concurrently and the largest acceptable
/// one is taken.
pub fn run_flow(start: &Domain, target_volume: f64, opts: &FlowOptions, solver: &SolverOptions) -> Result<FlowResult, OptimizerError> {
    opts.validate()?;
    solver.validate()?;
    let ctx = |step: usize| move |e: OptimizerError| OptimizerError::Step { step, source: Box::new(e) };
    let modes = match start {
        Domain::Planar(p) => p.cos.len().max(p.sin.len()),
        Domain::Cylinder(c) => c.g_plus.modes().max(c.g_minus.modes()),
        Domain::Rectangle(_) => 0,
    }
    .max(opts.fourier_modes);
    params(start, modes)?;
    let d0 = project_volume(start, target_volume).map_err(ctx(0))?;
    let mut cur = evaluate(d0, opts, solver).map_err(ctx(0))?;
    let record = |s: usize, ev: &Evaluated, step_size: f64| {
        let v = ev.domain.volume();
        FlowRecord {
            step: s,
            mu2: ev.cluster.mu2,
            multiplicity: ev.cluster.multiplicity(),
            volume: v,
            volume_drift: (v - target_volume).abs() / target_volume,
            weak_residual: ev.weak_residual,
            step_size,
            spec_coeffs: DomainSpec::from(&ev.domain),
        }
    };
    let mut records = vec![record(0, &cur, 0.0)];
    let mut eps = opts.initial_step;
    let mut step = 0;
    let termination = loop {
        let mu = cur.cluster.mu2;
        let tol_crit = opts.tol_crit.unwrap_or(1e-2 * mu * mu);
        if cur.weak_residual <= tol_crit {
            break Termination::WeaklyCritical;
        }
        if step >= opts.max_steps {
            break Termination::Budget;
        }
        step += 1;
        let h = match ascent_direction(&cur.mesh, &cur.cluster, opts.recovery, opts.zero_gradient_tol) {
            Ok(h) => h,
            Err(OptimizerError::ZeroGradient { .. }) => break Termination::ZeroGradient,
            Err(e) => return Err(ctx(step)(e)),
        };
        let (dp, speed) = fit_direction(&cur.mesh, &cur.domain, modes, &h).map_err(ctx(step))?;
        let traces = ClusterTraces::new(&cur.mesh, &cur.cluster.basis, opts.recovery);
        let slope = sym_extremes(&derivative_matrix(&cur.mesh, &traces, cur.cluster.mu(), &speed)).0;
        if !(slope > 0.0) {
            break Termination::NoAscent;
        }
        let p0 = params(&cur.domain, modes).map_err(ctx(step))?;
        let mut accepted = None;
        while eps >= opts.min_step {
            let trials = [eps, eps / 2.0, eps / 4.0];
            let results = crate::par_map(&trials, |&e| -> Result<f64, OptimizerError> {
                let p: Vec<f64> = p0.iter().zip(&dp).map(|(a, d)| a + e * d).collect();
                let d = project_volume(&from_params(&cur.domain, &p, modes), target_volume)?;
                Ok(mu2_of(&build_mesh(&d, opts.h)?, solver)?)
            });
            // A trial that fails to mesh (too large a step) is a rejection.
            let ok = trials
                .iter()
                .zip(&results)
                .find(|(e, r)| matches!(r, Ok(m) if *m >= mu + opts.armijo * **e * slope));
            if let Some((&e, _)) = ok {
                accepted = Some(e);
                break;
            }
            eps /= 8.0;
        }
        let Some(e) = accepted else {
            break Termination::StepUnderflow;
        };
        let p: Vec<f64> = p0.iter().zip(&dp).map(|(a, d)| a + e * d).collect();
        let d = project_volume(&from_params(&cur.domain, &p, modes), target_volume).map_err(ctx(step))?;
        cur = evaluate(d, opts, solver).map_err(ctx(step))?;
        records.push(record(step, &cur, e));
        eps = (2.0 * e).min(opts.max_step);
    };
    Ok(FlowResult {
        records,
        termination,
        final_spec: DomainSpec::from(&cur.domain),
    })
}

/// Writes one JSON object per record, each tagged with `config_hash`.
pub fn write_ledger(w: &mut impl Write, records: &[FlowRecord], config_hash: &str) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        config_hash: &'a str,
        #[serde(flatten)]
        record: &'a FlowRecord,
    }
    for record in records {
        serde_json::to_writer(&mut *w, &Line { config_hash, record })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
