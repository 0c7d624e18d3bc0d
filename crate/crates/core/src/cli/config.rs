//! Experiment configuration: one JSON document per run.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{BoundaryTrace, GradientRecovery};
use crate::eigensolve::SolverOptions;
use crate::geometry::{Domain, DomainSpec, FourierSeries, TriMesh};
use crate::optimizer::FlowOptions;
use crate::shapecalc::{make_volume_preserving, DeformationField, Extension, PreservationMode, ShapeError};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub domain: DomainSpec,
    /// Target mesh size.
    pub h: f64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub recovery: GradientRecovery,
    #[serde(default)]
    pub flow: FlowOptions,
    /// Deformation field for `sd` and the derivative/expansion checks.
    #[serde(default)]
    pub field: Option<FieldSpec>,
    /// Volume constraint for `optimize`; defaults to the start volume.
    #[serde(default)]
    pub target_volume: Option<f64>,
    #[serde(default)]
    pub weinberger: Option<WeinbergerConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeinbergerConfig {
    /// Half-length (cylinder) or radius (plane) of the comparison domain.
    pub r: f64,
    /// Slack on each link, relative to `μʳ`. Defaults to `0.1·μʳh²`,
    /// the size of the O(h²) overestimate of μ₂ by linear elements.
    #[serde(default)]
    pub link_tol: Option<f64>,
}

/// Deformation fields addressable from a config.
///
/// `normal` prescribes `⟨V,η⟩` as a Fourier series in the boundary
/// parameter `w ∈ [0, 2π)`: the polar angle in the plane, `2πx/L` on a
/// cylinder, `2π s/P` for arclength `s` from the corner `(0, 0)` on a
/// rectangle of perimeter `P`. On a cylinder `bottom` (if given) replaces
/// `speed` on the lower boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Translation {
        direction: [f64; 2],
    },
    /// `V = x` in the plane (about the centre for rectangles), `V = (t, 0)`
    /// on a cylinder.
    Dilation,
    Normal {
        speed: FourierSeries,
        #[serde(default)]
        bottom: Option<FourierSeries>,
        #[serde(default)]
        preserve: Option<PreservationMode>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, ConfigError> {
        let c: ExperimentConfig = serde_json::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        hash_hex(serde_json::to_string(self).expect("config serialises").as_bytes())
    }

    pub fn domain(&self) -> Domain {
        self.domain.resolve()
    }

    /// Solver options with the run seed applied.
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            seed: self.seed,
            ..self.solver.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported version {} (expected {CONFIG_VERSION})", self.version));
        }
        let domain = self.domain();
        domain.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let extent = match &domain {
            Domain::Planar(p) => p.min_radius(),
            Domain::Cylinder(c) => c.min_height().min(c.circumference),
            Domain::Rectangle(r) => r.width.min(r.height),
        };
        if !(self.h > 0.0 && self.h <= 0.25 * extent && self.h >= 1e-4 * extent) {
            return bad(format!("h = {} outside the meshable range for this domain (0.25·extent = {})", self.h, 0.25 * extent));
        }
        self.solver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.flow.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(v) = self.target_volume {
            if !(v > 0.0) {
                return bad("target_volume must be positive".into());
            }
        }
        if let Some(w) = &self.weinberger {
            if !(w.r > 0.0 && w.link_tol.map_or(true, |t| t > 0.0)) {
                return bad("weinberger.r and weinberger.link_tol must be positive".into());
            }
        }
        if let Some(FieldSpec::Translation { direction }) = &self.field {
            if !direction.iter().all(|d| d.is_finite()) {
                return bad("translation direction must be finite".into());
            }
        }
        Ok(())
    }
}

pub fn hash_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Boundary parameter `w ∈ [0, 2π)` of a boundary point (see
/// [`FieldSpec`]).
fn boundary_phase(domain: &Domain, p: [f64; 2]) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    match domain {
        Domain::Planar(_) => p[1].atan2(p[0]).rem_euclid(tau),
        Domain::Cylinder(c) => c.omega() * p[1],
        Domain::Rectangle(r) => {
            let (w, h) = (r.width, r.height);
            let tol = 1e-9 * w.max(h);
            let s = if p[1].abs() <= tol {
                p[0]
            } else if (p[0] - w).abs() <= tol {
                w + p[1]
            } else if (p[1] - h).abs() <= tol {
                w + h + (w - p[0])
            } else {
                2.0 * w + h + (h - p[1])
            };
            tau * s / (2.0 * (w + h))
        }
    }
}

pub fn build_field(spec: &FieldSpec, domain: &Domain, mesh: &TriMesh) -> Result<DeformationField, ShapeError> {
    match spec {
        FieldSpec::Translation { direction } => {
            let d = *direction;
            Ok(DeformationField::from_vector_field(mesh, move |_| d))
        }
        FieldSpec::Dilation => Ok(match domain {
            Domain::Cylinder(_) => DeformationField::from_vector_field(mesh, |p| [p[0], 0.0]),
            Domain::Rectangle(r) => {
                let c = [r.width / 2.0, r.height / 2.0];
                DeformationField::from_vector_field(mesh, move |p| [p[0] - c[0], p[1] - c[1]])
            }
            Domain::Planar(_) => DeformationField::from_vector_field(mesh, |p| p),
        }),
        FieldSpec::Normal { speed, bottom, preserve } => {
            let value = |p: [f64; 2]| {
                let w = boundary_phase(domain, p);
                let series = match (domain, bottom) {
                    (Domain::Cylinder(c), Some(b)) => {
                        let mid = 0.5 * (c.upper(p[1]).0 + c.lower(p[1]).0);
                        if p[0] < mid {
                            b
                        } else {
                            speed
                        }
                    }
                    _ => speed,
                };
                series.eval(w).0
            };
            let h = BoundaryTrace::from_vertex_fn(mesh, value);
            match preserve {
                Some(mode) => make_volume_preserving(&h, mesh, *mode),
                None => DeformationField::from_normal_speed(mesh, &h, Extension::Harmonic),
            }
        }
    }
}
