//! C ABI for shapelab.
//!
//! Meshes and spectra cross the boundary as opaque handles that the caller
//! releases with the matching `_free` function. Every fallible call returns
//! a [`ShapelabStatus`]; on failure a message is available from
//! [`shapelab_last_error`] until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use shapelab::assembly::GradientRecovery;
use shapelab::cli::{build_field, CliError, ExitKind, FieldSpec};
use shapelab::eigensolve::{solve_mesh, SolverOptions, Spectrum};
use shapelab::geometry::io::{mesh_from_json, mesh_to_json};
use shapelab::geometry::{build_mesh, Domain, DomainSpec, TriMesh};
use shapelab::reference::{cylinder_exact, mu2_ball, weinberger_bound};
use shapelab::shapecalc::one_sided_derivative;

/// Result codes. The non-zero values below `NullPointer` match the exit
/// codes of the `shapelab` binary.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapelabStatus {
    Ok = 0,
    /// Malformed JSON or an out-of-range parameter.
    Config = 1,
    Solver = 2,
    Mesh = 3,
    /// The operation's precondition does not hold.
    Precondition = 4,
    Internal = 5,
    NullPointer = 6,
    /// A caller-supplied buffer is too small; the required length is
    /// written to the length out-parameter.
    BufferTooSmall = 7,
    Panic = 8,
}

impl From<ExitKind> for ShapelabStatus {
    fn from(k: ExitKind) -> Self {
        match k {
            ExitKind::Config => ShapelabStatus::Config,
            ExitKind::Solver => ShapelabStatus::Solver,
            ExitKind::Mesh => ShapelabStatus::Mesh,
            ExitKind::Precondition => ShapelabStatus::Precondition,
            ExitKind::Internal => ShapelabStatus::Internal,
        }
    }
}

/// A triangulated domain. The domain description is kept when the mesh was
/// built from one, since boundary-parameterised fields need it.
pub struct ShapelabMesh {
    mesh: TriMesh,
    domain: Option<Domain>,
}

/// The μ₂ cluster of a mesh together with the lowest computed eigenpairs.
pub struct ShapelabSpectrum {
    spectrum: Spectrum,
}

struct Failure(ShapelabStatus, String);

impl<E: Into<CliError>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e: CliError = e.into();
        Failure(e.kind.into(), e.message)
    }
}

fn fail(status: ShapelabStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, records its error message and converts panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ShapelabStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ShapelabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {msg}"));
            ShapelabStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(ShapelabStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(ShapelabStatus::Config, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(ShapelabStatus::NullPointer, format!("{what} is null")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(ShapelabStatus::NullPointer, format!("{what} is null")))
}

fn json_err(e: serde_json::Error) -> Failure {
    fail(ShapelabStatus::Config, e.to_string())
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn shapelab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn shapelab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Meshes a domain given as JSON (the `domain` object of an experiment
/// config) with target size `h`.
///
/// # Safety
/// `domain_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shapelab_mesh_build(domain_json: *const c_char, h: f64, out: *mut *mut ShapelabMesh) -> ShapelabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec: DomainSpec = serde_json::from_str(str_arg(domain_json, "domain_json")?).map_err(json_err)?;
        let domain = spec.resolve();
        domain.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(fail(ShapelabStatus::Config, "h must be positive"));
        }
        let mesh = build_mesh(&domain, h)?;
        *out = Box::into_raw(Box::new(ShapelabMesh { mesh, domain: Some(domain) }));
        Ok(())
    })
}

/// Loads a mesh previously written by `shapelab mesh` (mesh.json).
///
/// # Safety
/// `mesh_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shapelab_mesh_from_json(mesh_json: *const c_char, out: *mut *mut ShapelabMesh) -> ShapelabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let mesh = mesh_from_json(str_arg(mesh_json, "mesh_json")?)?;
        *out = Box::into_raw(Box::new(ShapelabMesh { mesh, domain: None }));
        Ok(())
    })
}

/// Writes the mesh as JSON into `buf` (NUL-terminated). `len` holds the
/// buffer size on entry and the required size, including the NUL, on exit.
/// Pass a null `buf` to query the size.
///
/// # Safety
/// `mesh` must be a live handle, `len` a valid pointer and `buf` either null
/// or writable for `*len` bytes.
#[no_mangle]
pub unsafe extern "C" fn shapelab_mesh_to_json(mesh: *const ShapelabMesh, buf: *mut c_char, len: *mut usize) -> ShapelabStatus {
    guard(|| {
        let mesh = ref_arg(mesh, "mesh")?;
        let len = out_arg(len, "len")?;
        let text = mesh_to_json(&mesh.mesh);
        let need = text.len() + 1;
        let room = *len;
        *len = need;
        if buf.is_null() {
            return Ok(());
        }
        if room < need {
            return Err(fail(ShapelabStatus::BufferTooSmall, format!("need {need} bytes")));
        }
        std::ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
        *buf.add(text.len()) = 0;
        Ok(())
    })
}

/// Vertex, triangle and boundary-edge counts. Any out-pointer may be null.
///
/// # Safety
/// `mesh` must be a live handle; non-null out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn shapelab_mesh_counts(
    mesh: *const ShapelabMesh,
    vertices: *mut usize,
    triangles: *mut usize,
    boundary_edges: *mut usize,
) -> ShapelabStatus {
    guard(|| {
        let m = &ref_arg(mesh, "mesh")?.mesh;
        for (p, v) in [(vertices, m.n_vertices()), (triangles, m.triangles().len()), (boundary_edges, m.boundary().len())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Area (plane) or volume (cylinder) of the mesh.
///
/// # Safety
/// `mesh` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shapelab_mesh_volume(mesh: *const ShapelabMesh, out: *mut f64) -> ShapelabStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(mesh, "mesh")?.mesh.area();
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shapelab_mesh_free(mesh: *mut ShapelabMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Solves for μ₂ and its eigenspace. `solver_json` holds solver options
/// (the `solver` object of an experiment config) or is null for defaults.
///
/// # Safety
/// `mesh` must be a live handle, `solver_json` null or NUL-terminated, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shapelab_solve(
    mesh: *const ShapelabMesh,
    solver_json: *const c_char,
    out: *mut *mut ShapelabSpectrum,
) -> ShapelabStatus {
    guard(|| {
        let mesh = ref_arg(mesh, "mesh")?;
        let out = out_arg(out, "out")?;
        let opts: SolverOptions = if solver_json.is_null() {
            SolverOptions::default()
        } else {
            serde_json::from_str(str_arg(solver_json, "solver_json")?).map_err(json_err)?
        };
        opts.validate()?;
        let spectrum = solve_mesh(&mesh.mesh, &opts)?;
        *out = Box::into_raw(Box::new(ShapelabSpectrum { spectrum }));
        Ok(())
    })
}

/// μ₂ and the detected multiplicity. Either out-pointer may be null.
///
/// # Safety
/// `spectrum` must be a live handle; non-null out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn shapelab_spectrum_mu2(
    spectrum: *const ShapelabSpectrum,
    mu2: *mut f64,
    multiplicity: *mut usize,
) -> ShapelabStatus {
    guard(|| {
        let c = &ref_arg(spectrum, "spectrum")?.spectrum.cluster;
        if let Some(p) = mu2.as_mut() {
            *p = c.mu2;
        }
        if let Some(p) = multiplicity.as_mut() {
            *p = c.multiplicity();
        }
        Ok(())
    })
}

/// Copies basis vector `index` of the μ₂ eigenspace (M-normalised, one value
/// per mesh dof) into `buf`. `len` holds the capacity on entry and the dof
/// count on exit.
///
/// # Safety
/// `spectrum` must be a live handle, `len` a valid pointer and `buf` either
/// null or writable for `*len` doubles.
#[no_mangle]
pub unsafe extern "C" fn shapelab_spectrum_mode(
    spectrum: *const ShapelabSpectrum,
    index: usize,
    buf: *mut f64,
    len: *mut usize,
) -> ShapelabStatus {
    guard(|| {
        let c = &ref_arg(spectrum, "spectrum")?.spectrum.cluster;
        let len = out_arg(len, "len")?;
        let v = c
            .basis
            .get(index)
            .ok_or_else(|| fail(ShapelabStatus::Config, format!("mode {index} out of range (multiplicity {})", c.multiplicity())))?;
        let room = *len;
        *len = v.len();
        if buf.is_null() {
            return Ok(());
        }
        if room < v.len() {
            return Err(fail(ShapelabStatus::BufferTooSmall, format!("need {} doubles", v.len())));
        }
        std::ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// # Safety
/// `spectrum` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shapelab_spectrum_free(spectrum: *mut ShapelabSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Right derivative of μ₂ along a deformation field given as JSON (the
/// `field` object of an experiment config). Normal-speed fields need a mesh
/// built by [`shapelab_mesh_build`].
///
/// # Safety
/// Handles must be live and belong together, `field_json` NUL-terminated and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shapelab_shape_derivative(
    mesh: *const ShapelabMesh,
    spectrum: *const ShapelabSpectrum,
    field_json: *const c_char,
    out: *mut f64,
) -> ShapelabStatus {
    guard(|| {
        let mesh = ref_arg(mesh, "mesh")?;
        let s = ref_arg(spectrum, "spectrum")?;
        let out = out_arg(out, "out")?;
        let spec: FieldSpec = serde_json::from_str(str_arg(field_json, "field_json")?).map_err(json_err)?;
        if s.spectrum.cluster.basis.first().map(Vec::len) != Some(mesh.mesh.n_dofs()) {
            return Err(fail(ShapelabStatus::Precondition, "spectrum was not computed on this mesh"));
        }
        let domain = match (&spec, &mesh.domain) {
            (_, Some(d)) => d.clone(),
            (FieldSpec::Normal { .. }, None) => {
                return Err(fail(ShapelabStatus::Precondition, "normal-speed fields need a mesh built from a domain"))
            }
            // Translation and dilation only consult the domain kind.
            (_, None) if mesh.mesh.is_periodic() => DomainSpec::StraightCylinder { r: 1.0, circumference: 1.0 }.resolve(),
            (_, None) => DomainSpec::Planar { rho0: 1.0, cos: vec![], sin: vec![] }.resolve(),
        };
        let field = build_field(&spec, &domain, &mesh.mesh)?;
        *out = one_sided_derivative(&mesh.mesh, &s.spectrum.cluster, &field, GradientRecovery::default())?.one_sided_derivative;
        Ok(())
    })
}

/// μ₂ of the unit ball in ℝᵏ.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shapelab_mu2_ball(k: u32, out: *mut f64) -> ShapelabStatus {
    guard(|| {
        *out_arg(out, "out")? = mu2_ball(k)?.mu2;
        Ok(())
    })
}

/// μ₂ of the flat cylinder [−r, r] × S¹ of circumference `l`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shapelab_cylinder_mu2(r: f64, l: f64, out: *mut f64) -> ShapelabStatus {
    guard(|| {
        *out_arg(out, "out")? = cylinder_exact(r, l)?.mu2;
        Ok(())
    })
}

/// Rayleigh-quotient bound of the comparison profile with parameter `r` on
/// the mesh, and whether the chain μ₂ ≤ bound ≤ μʳ holds within `tol`.
///
/// # Safety
/// `mesh` must be a live handle; `bound` and `chain_ok` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn shapelab_weinberger_bound(
    mesh: *const ShapelabMesh,
    r: f64,
    mu2: f64,
    tol: f64,
    bound: *mut f64,
    chain_ok: *mut bool,
) -> ShapelabStatus {
    guard(|| {
        let mesh = ref_arg(mesh, "mesh")?;
        let bound = out_arg(bound, "bound")?;
        let chain_ok = out_arg(chain_ok, "chain_ok")?;
        let rep = weinberger_bound(&mesh.mesh, r, mu2, tol)?;
        *bound = rep.rayleigh_bound;
        *chain_ok = rep.chain_ok;
        Ok(())
    })
}
