use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::SystemTime;

use clap::{Parser, Subcommand};

use shapelab::cli::{
    cmd_mesh, cmd_optimize, cmd_reference, cmd_sd, cmd_solve, cmd_verify, hash_hex, stamped_json, write_metadata, Check,
    CliError, Context, ExitKind, ExperimentConfig, ReferenceRequest, DEFAULT_EPS,
};

/// First nontrivial Neumann eigenvalue toolkit: meshing, eigenvalues,
/// shape derivatives, criticality certificates and volume-constrained
/// optimisation.
#[derive(Parser)]
#[command(name = "shapelab", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// No progress messages on standard error.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh the configured domain (mesh.json, mesh.vtk).
    Mesh,
    /// Solve for the μ₂ cluster (eigen.json, modes.vtk, stiffness/mass .mtx).
    Solve,
    /// Shape derivative along the configured field, with a finite-difference check.
    Sd {
        /// Finite-difference steps, decreasing.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Volume-constrained ascent of μ₂ (ledger.jsonl, final_spec.json).
    Optimize,
    /// Pass/fail checks (verify.json); exit code 4 if any check fails.
    Verify {
        #[arg(long, value_enum, value_delimiter = ',', required = true)]
        check: Vec<Check>,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Closed-form reference values.
    Reference {
        /// Ball dimension for μ₂(Bᵏ).
        #[arg(long, conflicts_with_all = ["r", "circumference"])]
        k: Option<u32>,
        /// Cylinder half-length.
        #[arg(long, requires = "circumference")]
        r: Option<f64>,
        /// Cylinder circumference.
        #[arg(long = "L", id = "circumference", requires = "r")]
        circumference: Option<f64>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    let path = path.as_ref().ok_or_else(|| CliError::new(ExitKind::Config, "--config is required"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(ExitKind::Config, format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text).map_err(|e| CliError::new(ExitKind::Config, format!("{}: {e}", path.display())))
}

fn eps_or_default(eps: Option<Vec<f64>>) -> Vec<f64> {
    eps.unwrap_or_else(|| DEFAULT_EPS.to_vec())
}

fn run(args: Args) -> Result<(), CliError> {
    let started = SystemTime::now();
    if let Command::Reference { k, r, circumference } = args.command {
        let req = match (k, r, circumference) {
            (Some(k), None, None) => ReferenceRequest::Ball { k },
            (None, Some(r), Some(circumference)) => ReferenceRequest::Cylinder { r, circumference },
            _ => return Err(CliError::new(ExitKind::Config, "give either --k or both --r and --L")),
        };
        let value = cmd_reference(req)?;
        let hash = hash_hex(value.to_string().as_bytes());
        let text = stamped_json(&hash, &value);
        if let Some(out) = &args.out {
            std::fs::create_dir_all(out)?;
            std::fs::write(out.join("reference.json"), format!("{text}\n"))?;
        }
        // A closed pipe (`| head`) is not an error worth a panic.
        let _ = writeln!(std::io::stdout(), "{text}");
        return Ok(());
    }
    let config = load_config(&args.config)?;
    let ctx = Context::new(&config, args.out.as_deref(), args.quiet);
    let name = match &args.command {
        Command::Mesh => "mesh",
        Command::Solve => "solve",
        Command::Sd { .. } => "sd",
        Command::Optimize => "optimize",
        Command::Verify { .. } => "verify",
        Command::Reference { .. } => unreachable!(),
    };
    let result = match args.command {
        Command::Mesh => cmd_mesh(&ctx).map(|_| ()),
        Command::Solve => cmd_solve(&ctx).map(|_| ()),
        Command::Sd { eps } => cmd_sd(&ctx, &eps_or_default(eps)).map(|_| ()),
        Command::Optimize => cmd_optimize(&ctx).map(|ledger| {
            let _ = writeln!(std::io::stdout(), "{}", ledger.display());
        }),
        Command::Verify { check, eps } => cmd_verify(&ctx, &check, &eps_or_default(eps)).and_then(|r| {
            if r.all_passed {
                Ok(())
            } else {
                let failed: Vec<String> = r.checks.iter().filter(|c| !c.passed).map(|c| format!("{:?}", c.check)).collect();
                Err(CliError::new(ExitKind::Precondition, format!("checks failed: {}", failed.join(", "))))
            }
        }),
        Command::Reference { .. } => unreachable!(),
    };
    write_metadata(&ctx.out, &ctx.hash, name, started)?;
    result
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
