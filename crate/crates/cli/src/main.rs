//! `psvf` — simulate and analyze 3D piecewise-smooth vector fields across
//! the switching plane z = 0.
//!
//! Exit codes: 0 success, 1 failed checks or classification errors,
//! 2 argument/manifest/parse errors.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    cmd_classify, cmd_return_map, cmd_simulate, cmd_sweep, cmd_verify, ClassifyRun, ReturnMapRun,
    SimulateRun, Suite, SweepRun, VerifyRun,
};
use manifest::{parse_point2, parse_point3, parse_range, ConfigArgs, SystemArgs};

#[derive(Parser)]
#[command(
    name = "psvf",
    version,
    about = "Piecewise-smooth (Filippov) vector field lab: classification, \
             hybrid simulation, first-return maps, stability verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Classify a switching-plane point (or grid) into Filippov regions and
    /// tangency classes.
    Classify {
        #[command(flatten)]
        system: SystemArgs,

        /// Point `x,y,z` on the switching plane.
        #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
        point: Option<String>,

        /// Grid `x0:x1:nx,y0:y1:ny` of plane points.
        #[arg(long, value_name = "SPEC", conflicts_with = "point", allow_hyphen_values = true)]
        grid: Option<String>,

        /// Write a CSV of the classifications.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Simulate the forward Filippov trajectory from a point.
    Simulate {
        #[command(flatten)]
        system: SystemArgs,

        /// Initial point `x,y,z`.
        #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
        p0: String,

        #[command(flatten)]
        config: ConfigArgs,

        /// Trajectory CSV (`t,x,y,z,mode,event`); escape splits write
        /// additional `.branchN` files.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,

        /// JSON summary (events, terminal status, files).
        #[arg(long, value_name = "PATH")]
        summary: Option<PathBuf>,
    },

    /// Evaluate the first-return map, iterate it, and report its
    /// eigen-structure at the origin.
    #[command(name = "return-map")]
    ReturnMap {
        #[command(flatten)]
        system: SystemArgs,

        /// Plane point `x,y`.
        #[arg(long, value_name = "X,Y", allow_hyphen_values = true)]
        point: Option<String>,

        /// Iterate the map this many times from `--point`.
        #[arg(long, default_value_t = 0)]
        iterate: usize,

        /// Print the eigen-structure at the origin.
        #[arg(long)]
        eigen: bool,

        /// Write orbit rows as CSV.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Run verification suites; exit 0 iff all selected checks pass.
    Verify {
        #[command(flatten)]
        system: SystemArgs,

        /// theorem-a | curve-images | containment | monotone |
        /// reach-sliding | eigen | all
        #[arg(long, value_parser = Suite::parse, default_value = "all")]
        suite: Suite,

        /// Trajectory samples per sampling-based check.
        #[arg(long, default_value_t = 500)]
        samples: usize,

        /// RNG seed recorded in the report.
        #[arg(long, default_value_t = 42)]
        seed: u64,

        /// Convergence distance for the stability classifier.
        #[arg(long, default_value_t = 1e-3)]
        dist_tol: f64,

        #[command(flatten)]
        config: ConfigArgs,

        /// Machine-readable JSON report.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Sweep the unfolding parameter and stream one verdict row per cell.
    Sweep {
        #[command(flatten)]
        system: SystemArgs,

        /// Lambda grid `lo:hi:step`.
        #[arg(long, value_name = "LO:HI:STEP", allow_hyphen_values = true)]
        lambda_range: String,

        /// Trajectory samples per cell.
        #[arg(long, default_value_t = 120)]
        samples: usize,

        #[arg(long, default_value_t = 42)]
        seed: u64,

        #[arg(long, default_value_t = 1e-3)]
        dist_tol: f64,

        #[command(flatten)]
        config: ConfigArgs,

        /// Output CSV.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,

        /// Skip cells whose key already exists in the output file.
        #[arg(long)]
        resume: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            // Manifest/parse problems.
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Commands::Classify {
            system,
            point,
            grid,
            out,
        } => {
            let source = system.resolve()?;
            let point = point.as_deref().map(parse_point3).transpose()?;
            let grid = grid.as_deref().map(parse_grid).transpose()?;
            cmd_classify(ClassifyRun {
                source,
                point,
                grid,
                out,
            })
        }
        Commands::Simulate {
            system,
            p0,
            config,
            out,
            summary,
        } => cmd_simulate(SimulateRun {
            source: system.resolve()?,
            p0: parse_point3(&p0)?,
            config_args: config,
            out,
            summary,
        }),
        Commands::ReturnMap {
            system,
            point,
            iterate,
            eigen,
            out,
        } => cmd_return_map(ReturnMapRun {
            params: system.resolve_builtin()?,
            point: point.as_deref().map(parse_point2).transpose()?,
            iterate,
            eigen,
            out,
        }),
        Commands::Verify {
            system,
            suite,
            samples,
            seed,
            dist_tol,
            config,
            out,
        } => cmd_verify(VerifyRun {
            params: system.resolve_builtin()?,
            suite,
            samples,
            seed,
            dist_tol,
            config_args: config,
            out,
        }),
        Commands::Sweep {
            system,
            lambda_range,
            samples,
            seed,
            dist_tol,
            config,
            out,
            resume,
        } => cmd_sweep(SweepRun {
            base: system.resolve_builtin()?,
            lambda_range: parse_range(&lambda_range)?,
            samples,
            seed,
            dist_tol,
            config_args: config,
            out,
            resume,
        }),
    }
}

/// Parses `x0:x1:nx,y0:y1:ny` into the two grid axes.
fn parse_grid(s: &str) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let (xs, ys) = s
        .split_once(',')
        .ok_or_else(|| anyhow::anyhow!("expected `x0:x1:nx,y0:y1:ny`"))?;
    Ok((parse_axis(xs)?, parse_axis(ys)?))
}

fn parse_axis(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        anyhow::bail!("expected `lo:hi:n`, got `{s}`");
    }
    let lo: f64 = parts[0].trim().parse()?;
    let hi: f64 = parts[1].trim().parse()?;
    let n: usize = parts[2].trim().parse()?;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}
