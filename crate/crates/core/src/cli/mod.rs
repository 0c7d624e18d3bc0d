//! Commands behind the `shapelab` binary. Each command reads an
//! [`ExperimentConfig`], writes its results into an output directory and
//! stamps every file with the config hash.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

pub use config::{build_field, hash_hex, ConfigError, ExperimentConfig, FieldSpec, WeinbergerConfig, CONFIG_VERSION};

use crate::assembly::{boundary_measure, AssemblyError};
use crate::criticality::{best_strong_direction, nodal_domain_count, CriticalityError};
use crate::eigensolve::{solve_mesh, EigenError, Pencil, Spectrum};
use crate::geometry::io::{mesh_to_json, mesh_to_vtk, PointField};
use crate::geometry::{build_mesh, Domain, DomainSpec, GeometryError, TriMesh};
use crate::linalg::CsrMatrix;
use crate::optimizer::{run_flow, write_ledger, OptimizerError};
use crate::reference::{cylinder_exact, mu2_ball, weinberger_bound, CylinderCase, ReferenceError, WeinbergerProfile};
use crate::shapecalc::{certify, fd_derivative_oracle, one_sided_derivative, volume_expansion_check, DeformationField, Preservation, ShapeError};

/// Exit-code classes of the command-line contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 1,
    Solver = 2,
    Mesh = 3,
    /// A precondition of the requested operation does not hold, or a
    /// verification check failed.
    Precondition = 4,
    Internal = 5,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(ExitKind::Config, e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        let kind = match e {
            GeometryError::Io(_) => ExitKind::Internal,
            _ => ExitKind::Mesh,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<AssemblyError> for CliError {
    fn from(e: AssemblyError) -> Self {
        let kind = match e {
            AssemblyError::SingularTriangle { .. } => ExitKind::Mesh,
            _ => ExitKind::Precondition,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<EigenError> for CliError {
    fn from(e: EigenError) -> Self {
        match e {
            EigenError::InvalidInput(_) => CliError::new(ExitKind::Config, e.to_string()),
            EigenError::Assembly(a) => a.into(),
            _ => CliError::new(ExitKind::Solver, e.to_string()),
        }
    }
}

impl From<ShapeError> for CliError {
    fn from(e: ShapeError) -> Self {
        match e {
            ShapeError::Geometry(g) => g.into(),
            ShapeError::Assembly(a) => a.into(),
            ShapeError::Eigen(x) => x.into(),
            ShapeError::Linalg(_) => CliError::new(ExitKind::Solver, e.to_string()),
            _ => CliError::new(ExitKind::Precondition, e.to_string()),
        }
    }
}

impl From<CriticalityError> for CliError {
    fn from(e: CriticalityError) -> Self {
        let kind = match e {
            CriticalityError::OptimizerStall { .. } => ExitKind::Solver,
            CriticalityError::AllZeroFunction => ExitKind::Internal,
            CriticalityError::InvalidInput(_) => ExitKind::Precondition,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<ReferenceError> for CliError {
    fn from(e: ReferenceError) -> Self {
        let kind = match e {
            ReferenceError::VolumeMismatch { .. } => ExitKind::Precondition,
            ReferenceError::CenteringFailed(_) => ExitKind::Internal,
            _ => ExitKind::Config,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<OptimizerError> for CliError {
    fn from(e: OptimizerError) -> Self {
        let message = e.to_string();
        let kind = match e.root() {
            OptimizerError::Geometry(g) => CliError::from(g.clone()).kind,
            OptimizerError::Eigen(x) => CliError::from(x.clone()).kind,
            OptimizerError::Criticality(c) => CliError::from(c.clone()).kind,
            OptimizerError::InvalidInput(_) => ExitKind::Config,
            OptimizerError::ProjectionDiverged { .. } | OptimizerError::ZeroGradient { .. } => ExitKind::Precondition,
            OptimizerError::Step { .. } => ExitKind::Internal,
        };
        CliError::new(kind, message)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(ExitKind::Internal, e.to_string())
    }
}

/// Default finite-difference steps.
pub const DEFAULT_EPS: [f64; 3] = [4e-3, 2e-3, 1e-3];

/// Shared state of one command invocation.
pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub out: PathBuf,
    pub hash: String,
    pub quiet: bool,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a ExperimentConfig, out: Option<&Path>, quiet: bool) -> Self {
        Context {
            config,
            out: out.map_or_else(|| PathBuf::from(&config.output_dir), Path::to_path_buf),
            hash: config.hash(),
            quiet,
        }
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn path(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }

    /// Writes `body` as pretty JSON with `config_hash` as its first key.
    fn write_json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        let p = self.path(name)?;
        fs::write(&p, stamped_json(&self.hash, body) + "\n")?;
        Ok(p)
    }

    fn mesh(&self) -> Result<TriMesh, CliError> {
        let mesh = build_mesh(&self.config.domain(), self.config.h)?;
        self.note(format!(
            "mesh: {} vertices, {} triangles, min angle {:.1}°",
            mesh.n_vertices(),
            mesh.triangles().len(),
            mesh.min_angle_deg()
        ));
        Ok(mesh)
    }

    fn field(&self, mesh: &TriMesh) -> Result<(FieldSpec, DeformationField), CliError> {
        let spec = self.config.field.clone().unwrap_or(FieldSpec::Dilation);
        let f = build_field(&spec, &self.config.domain(), mesh)?;
        Ok((spec, f))
    }
}

pub fn stamped_json<T: Serialize>(hash: &str, body: &T) -> String {
    #[derive(Serialize)]
    struct Stamped<'a, T: Serialize> {
        config_hash: &'a str,
        #[serde(flatten)]
        body: &'a T,
    }
    serde_json::to_string_pretty(&Stamped { config_hash: hash, body }).expect("report serialises")
}

/// Wall-clock information lives apart from the results so those stay
/// byte-identical across runs.
pub fn write_metadata(out: &Path, hash: &str, command: &str, started: SystemTime) -> Result<(), CliError> {
    let secs = |t: SystemTime| t.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let finished = SystemTime::now();
    fs::create_dir_all(out)?;
    let body = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": crate::threads(),
        "started_unix": secs(started),
        "finished_unix": secs(finished),
    });
    fs::write(out.join("metadata.json"), stamped_json(hash, &body) + "\n")?;
    Ok(())
}

fn write_mtx(ctx: &Context, name: &str, a: &CsrMatrix) -> Result<PathBuf, CliError> {
    let p = ctx.path(name)?;
    let mut buf = Vec::new();
    a.write_matrix_market(&mut buf, &format!("config_hash {}", ctx.hash))?;
    fs::write(&p, buf)?;
    Ok(p)
}

pub fn cmd_mesh(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let mesh = ctx.mesh()?;
    let p = ctx.path("mesh.json")?;
    // The mesh file must stay loadable by `mesh_from_json`, so the hash
    // goes into the summary and the VTK title instead.
    fs::write(&p, mesh_to_json(&mesh))?;
    let v = ctx.path("mesh.vtk")?;
    fs::write(&v, mesh_to_vtk(&mesh, &format!("shapelab mesh config_hash {}", ctx.hash), &[]))?;
    let s = ctx.write_json(
        "mesh_summary.json",
        &json!({
            "n_vertices": mesh.n_vertices(),
            "n_dofs": mesh.n_dofs(),
            "n_triangles": mesh.triangles().len(),
            "boundary_components": mesh.components().len(),
            "area": mesh.area(),
            "boundary_length": mesh.boundary_length(),
            "min_angle_deg": mesh.min_angle_deg(),
            "max_edge": mesh.max_edge(),
        }),
    )?;
    Ok(vec![p, v, s])
}

/// Closed-form μ₂ where one is known: disks, rectangles, straight
/// cylinders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceValue {
    pub mu2: f64,
    pub case: Option<CylinderCase>,
    pub source: &'static str,
}

pub fn closed_form_mu2(domain: &Domain) -> Option<ReferenceValue> {
    match domain {
        Domain::Planar(p) if p.cos.iter().chain(&p.sin).all(|a| *a == 0.0) => Some(ReferenceValue {
            mu2: mu2_ball(2).ok()?.mu2 / (p.rho0 * p.rho0),
            case: None,
            source: "disk",
        }),
        Domain::Rectangle(r) => Some(ReferenceValue {
            mu2: (std::f64::consts::PI / r.width.max(r.height)).powi(2),
            case: None,
            source: "rectangle",
        }),
        Domain::Cylinder(c) if c.is_straight() => {
            let ex = cylinder_exact((c.g_plus.mean - c.g_minus.mean) / 2.0, c.circumference).ok()?;
            Some(ReferenceValue {
                mu2: ex.mu2,
                case: Some(ex.case),
                source: "straight_cylinder",
            })
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub domain: DomainSpec,
    pub h: f64,
    pub n_vertices: usize,
    pub n_dofs: usize,
    pub n_triangles: usize,
    pub min_angle_deg: f64,
    pub mu2: f64,
    pub multiplicity: usize,
    pub cluster_values: Vec<f64>,
    pub cluster_gap: f64,
    pub next: Option<f64>,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub reference: Option<ReferenceValue>,
    pub relative_error: Option<f64>,
}

fn solve(ctx: &Context, mesh: &TriMesh) -> Result<Spectrum, CliError> {
    let s = solve_mesh(mesh, &ctx.config.solver_options())?;
    ctx.note(format!("μ₂ = {:.10} (multiplicity {})", s.cluster.mu2, s.cluster.multiplicity()));
    Ok(s)
}

pub fn cmd_solve(ctx: &Context) -> Result<SolveReport, CliError> {
    let mesh = ctx.mesh()?;
    let s = solve(ctx, &mesh)?;
    let reference = closed_form_mu2(&ctx.config.domain());
    let report = SolveReport {
        domain: ctx.config.domain.clone(),
        h: ctx.config.h,
        n_vertices: mesh.n_vertices(),
        n_dofs: mesh.n_dofs(),
        n_triangles: mesh.triangles().len(),
        min_angle_deg: mesh.min_angle_deg(),
        mu2: s.cluster.mu2,
        multiplicity: s.cluster.multiplicity(),
        cluster_values: s.cluster.values.clone(),
        cluster_gap: s.cluster.cluster_gap,
        next: s.next,
        eigenvalues: s.pairs.iter().map(|p| p.mu).collect(),
        residuals: s.pairs.iter().map(|p| p.residual).collect(),
        relative_error: reference.as_ref().map(|r| (s.cluster.mu2 - r.mu2).abs() / r.mu2),
        reference,
    };
    ctx.write_json("eigen.json", &report)?;
    let names: Vec<String> = (1..=s.cluster.multiplicity()).map(|i| format!("u{i}")).collect();
    let fields: Vec<PointField> = names
        .iter()
        .zip(&s.cluster.basis)
        .map(|(name, v)| PointField { name, values: v })
        .collect();
    fs::write(ctx.path("modes.vtk")?, mesh_to_vtk(&mesh, &format!("shapelab modes config_hash {}", ctx.hash), &fields))?;
    let pencil = Pencil::new(&mesh, ctx.config.solver.lumped_mass)?;
    write_mtx(ctx, "stiffness.mtx", &pencil.stiffness)?;
    write_mtx(ctx, "mass.mtx", &pencil.mass)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdReport {
    pub field: FieldSpec,
    pub preservation: Preservation,
    pub mu2: f64,
    pub multiplicity: usize,
    pub a_matrix: Vec<Vec<f64>>,
    pub one_sided_derivative: f64,
    pub max_eigenvalue: f64,
    pub minimizing_direction: Vec<f64>,
    pub fd_estimate: f64,
    pub fd_error_estimate: f64,
    pub fd_samples: Vec<(f64, f64)>,
    pub abs_difference: f64,
    /// `max(5% of |fd|, 1e-2·μ₂)`.
    pub tolerance: f64,
}

fn derivative(ctx: &Context, mesh: &TriMesh, spectrum: &Spectrum, eps: &[f64]) -> Result<SdReport, CliError> {
    let (spec, field) = ctx.field(mesh)?;
    let rep = one_sided_derivative(mesh, &spectrum.cluster, &field, ctx.config.recovery)?;
    let fd = fd_derivative_oracle(mesh, &field, eps, &ctx.config.solver_options())?;
    let mu2 = spectrum.cluster.mu2;
    ctx.note(format!("derivative {:.6e}, finite difference {:.6e}", rep.one_sided_derivative, fd.slope));
    Ok(SdReport {
        field: spec,
        preservation: field.preservation,
        mu2,
        multiplicity: spectrum.cluster.multiplicity(),
        a_matrix: rep.a_matrix,
        one_sided_derivative: rep.one_sided_derivative,
        max_eigenvalue: rep.max_eigenvalue,
        minimizing_direction: rep.minimizing_direction,
        fd_estimate: fd.slope,
        fd_error_estimate: fd.error_estimate,
        fd_samples: fd.samples,
        abs_difference: (rep.one_sided_derivative - fd.slope).abs(),
        tolerance: (0.05 * fd.slope.abs()).max(1e-2 * mu2),
    })
}

pub fn cmd_sd(ctx: &Context, eps: &[f64]) -> Result<SdReport, CliError> {
    let mesh = ctx.mesh()?;
    let s = solve(ctx, &mesh)?;
    let report = derivative(ctx, &mesh, &s, eps)?;
    ctx.write_json("sd.json", &report)?;
    let m = report.a_matrix.len();
    let triplets = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| (i, j, report.a_matrix[i][j])).collect();
    write_mtx(ctx, "a_matrix.mtx", &CsrMatrix::from_triplets(m, triplets))?;
    Ok(report)
}

/// Runs the flow; returns the ledger path.
pub fn cmd_optimize(ctx: &Context) -> Result<PathBuf, CliError> {
    let domain = ctx.config.domain();
    let target = ctx.config.target_volume.unwrap_or_else(|| domain.volume());
    let result = run_flow(&domain, target, &ctx.config.flow, &ctx.config.solver_options())?;
    let ledger = ctx.path("ledger.jsonl")?;
    let mut buf = Vec::new();
    write_ledger(&mut buf, &result.records, &ctx.hash)?;
    fs::write(&ledger, buf)?;
    let last = result.records.last().expect("flow records its start");
    ctx.note(format!(
        "{} steps, μ₂ {:.8} → {:.8}, stopped: {:?}",
        last.step, result.records[0].mu2, last.mu2, result.termination
    ));
    ctx.write_json(
        "final_spec.json",
        &json!({ "termination": result.termination, "target_volume": target, "domain": result.final_spec }),
    )?;
    Ok(ledger)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Derivative,
    Weinberger,
    Overdetermined,
    Expansion,
    Nodal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: Check,
    pub passed: bool,
    pub measured: serde_json::Value,
    pub thresholds: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub mu2: f64,
    pub multiplicity: usize,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

fn run_check(ctx: &Context, mesh: &TriMesh, s: &Spectrum, check: Check, eps: &[f64]) -> Result<CheckResult, CliError> {
    let mu2 = s.cluster.mu2;
    let (passed, measured, thresholds) = match check {
        Check::Derivative => {
            let r = derivative(ctx, mesh, s, eps)?;
            let passed = r.abs_difference <= r.tolerance;
            (passed, serde_json::to_value(&r).unwrap(), json!({ "abs_difference": r.tolerance }))
        }
        Check::Weinberger => {
            let domain = ctx.config.domain();
            let r = match (&ctx.config.weinberger, &domain) {
                (Some(w), _) => w.r,
                (None, Domain::Cylinder(c)) => c.volume() / (2.0 * c.circumference),
                (None, _) => (domain.volume() / std::f64::consts::PI).sqrt(),
            };
            let k = if mesh.is_periodic() { 1 } else { 2 };
            let mu_r = WeinbergerProfile::new(k, r)?.mu_r();
            let h = ctx.config.h;
            let link_tol = ctx.config.weinberger.as_ref().and_then(|w| w.link_tol).unwrap_or(0.1 * mu_r * h * h);
            let tol = link_tol * mu_r;
            let rep = weinberger_bound(mesh, r, mu2, tol)?;
            (rep.chain_ok, serde_json::to_value(&rep).unwrap(), json!({ "link_tol": tol }))
        }
        Check::Overdetermined => {
            let r = best_strong_direction(mesh, &s.cluster, ctx.config.recovery)?;
            let passed = r.relative_deviation <= 0.02 && r.u2_relative_deviation <= 0.02;
            let expected = match ctx.config.domain() {
                Domain::Cylinder(c) if c.is_straight() => {
                    let half = (c.g_plus.mean - c.g_minus.mean) / 2.0;
                    Some(-(std::f64::consts::PI / (2.0 * half)).powi(2))
                }
                _ => None,
            };
            let mut m = serde_json::to_value(&r).unwrap();
            m["expected_lambda"] = json!(expected);
            (passed, m, json!({ "relative_deviation": 0.02, "u2_relative_deviation": 0.02 }))
        }
        Check::Expansion => {
            let (_, field) = ctx.field(mesh)?;
            let step = eps.last().copied().unwrap_or(1e-3);
            let r = volume_expansion_check(mesh, &field, step)?;
            let mean_zero = certify(mesh, &field.speed) != Preservation::None;
            let len = boundary_measure(mesh, None)?;
            let (passed, limit) = if mean_zero {
                let limit = 1e-3 * len * field.speed.max_abs();
                (r.fd_slope.abs() <= limit, json!({ "abs_fd_slope": limit }))
            } else {
                (r.rel_mismatch <= 0.01, json!({ "rel_mismatch": 0.01 }))
            };
            let mut m = serde_json::to_value(&r).unwrap();
            m["mean_zero"] = json!(mean_zero);
            (passed, m, limit)
        }
        Check::Nodal => {
            let counts = s
                .cluster
                .basis
                .iter()
                .map(|u| nodal_domain_count(mesh, u))
                .collect::<Result<Vec<_>, _>>()?;
            (counts.iter().all(|&c| c == 2), json!({ "nodal_domains": counts }), json!({ "expected": 2 }))
        }
    };
    ctx.note(format!("{:?}: {}", check, if passed { "pass" } else { "FAIL" }));
    Ok(CheckResult {
        check,
        passed,
        measured,
        thresholds,
    })
}

/// Runs the requested checks and writes `verify.json`. Failed checks are
/// reported in the result, not as an error.
pub fn cmd_verify(ctx: &Context, checks: &[Check], eps: &[f64]) -> Result<VerifyReport, CliError> {
    if checks.is_empty() {
        return Err(CliError::new(ExitKind::Config, "no --check given"));
    }
    let mesh = ctx.mesh()?;
    let s = solve(ctx, &mesh)?;
    let results = checks
        .iter()
        .map(|&c| run_check(ctx, &mesh, &s, c, eps))
        .collect::<Result<Vec<_>, _>>()?;
    let report = VerifyReport {
        mu2: s.cluster.mu2,
        multiplicity: s.cluster.multiplicity(),
        all_passed: results.iter().all(|r| r.passed),
        checks: results,
    };
    ctx.write_json("verify.json", &report)?;
    Ok(report)
}

/// `reference --k K` or `reference --r R --L L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceRequest {
    Ball { k: u32 },
    Cylinder { r: f64, circumference: f64 },
}

pub fn cmd_reference(req: ReferenceRequest) -> Result<serde_json::Value, CliError> {
    Ok(match req {
        ReferenceRequest::Ball { k } => {
            let b = mu2_ball(k)?;
            json!({ "k": b.k, "mu2_ball": b.mu2, "zero_location": b.zero_location })
        }
        ReferenceRequest::Cylinder { r, circumference } => serde_json::to_value(cylinder_exact(r, circumference)?).unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(domain: &str, h: f64) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(r#"{{"version": 1, "domain": {domain}, "h": {h}}}"#)).unwrap()
    }

    #[test]
    fn reference_values() {
        let v = cmd_reference(ReferenceRequest::Ball { k: 1 }).unwrap();
        assert_eq!(v["mu2_ball"].as_f64().unwrap(), std::f64::consts::PI.powi(2) / 4.0);
        let c = cmd_reference(ReferenceRequest::Cylinder { r: 2.0, circumference: 2.0 * std::f64::consts::PI }).unwrap();
        assert_eq!(c["case"], "Case2");
        assert!((c["v_c"].as_f64().unwrap() - 19.7392088).abs() < 1e-6);
    }

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(CliError::from(GeometryError::InvalidSpec("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(EigenError::NoConvergence { iterations: 1 }).exit_code(), 2);
        assert_eq!(CliError::from(ReferenceError::VolumeMismatch { volume: 1.0, expected: 2.0 }).exit_code(), 4);
        assert_eq!(CliError::from(ConfigError::Parse("x".into())).exit_code(), 1);
        assert_eq!(CliError::from(std::io::Error::other("x")).exit_code(), 5);
    }

    #[test]
    fn solve_writes_stamped_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(r#"{"kind": "planar", "rho0": 1.0}"#, 0.1);
        let ctx = Context::new(&c, Some(dir.path()), true);
        let r = cmd_solve(&ctx).unwrap();
        assert_eq!(r.multiplicity, 2);
        assert!(r.relative_error.unwrap() < 0.02);
        let text = fs::read_to_string(dir.path().join("eigen.json")).unwrap();
        assert!(text.contains(&c.hash()));
        assert!(fs::read_to_string(dir.path().join("stiffness.mtx")).unwrap().contains(&c.hash()));
        assert!(fs::read_to_string(dir.path().join("modes.vtk")).unwrap().contains(&c.hash()));
    }

    #[test]
    fn weinberger_on_unmatched_volume_is_a_precondition_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(r#"{"kind": "straight_cylinder", "r": 2.0, "L": 6.283185307179586}"#, 0.2);
        c.weinberger = Some(WeinbergerConfig { r: 2.5, link_tol: None });
        let ctx = Context::new(&c, Some(dir.path()), true);
        let e = cmd_verify(&ctx, &[Check::Weinberger], &DEFAULT_EPS).unwrap_err();
        assert_eq!(e.exit_code(), 4, "{e}");
    }
}
