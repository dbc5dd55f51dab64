//! Run manifests: which system, which configuration, which outputs.

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use psvf::dsl::{parse_system, DslSystem};
use psvf::sim::{EscapePolicy, SimConfig};
use psvf::Params;

/// The system a command operates on: the built-in normal form with explicit
/// parameters, or a parsed system file.
pub enum SystemSource {
    Builtin(Params),
    File { path: PathBuf, system: DslSystem },
}

impl SystemSource {
    pub fn describe(&self) -> String {
        match self {
            SystemSource::Builtin(p) => format!(
                "builtin a={} b={} c={} d={} lambda={}",
                p.a, p.b, p.c, p.d, p.lambda
            ),
            SystemSource::File { path, .. } => format!("file {}", path.display()),
        }
    }
}

/// Common system-selection flags shared by the subcommands.
#[derive(Clone, Debug, clap::Args)]
pub struct SystemArgs {
    /// Built-in normal-form parameters, e.g. `a=-1,b=-1,c=1,d=-2,lambda=0`.
    #[arg(long, value_name = "LIST")]
    pub builtin: Option<String>,

    /// System definition file (.psvf format).
    #[arg(long, value_name = "PATH", conflicts_with = "builtin")]
    pub system: Option<PathBuf>,

    /// Override the builtin `lambda` parameter.
    #[arg(long, value_name = "REAL", conflicts_with = "system", allow_negative_numbers = true)]
    pub lambda: Option<f64>,
}

impl SystemArgs {
    /// Resolves the flags to a system source. Defaults to the canonical
    /// built-in parameters when no flag is given.
    pub fn resolve(&self) -> Result<SystemSource> {
        if let Some(path) = &self.system {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let spec = parse_system(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
            return Ok(SystemSource::File {
                path: path.clone(),
                system: DslSystem::new(spec),
            });
        }
        let mut params = match &self.builtin {
            Some(list) => parse_builtin(list)?,
            None => Params::canonical(0.0),
        };
        if let Some(lambda) = self.lambda {
            params = params.with_lambda(lambda);
        }
        Ok(SystemSource::Builtin(params))
    }

    /// Like [`resolve`](Self::resolve) but restricted to the built-in
    /// family (closed-form commands).
    pub fn resolve_builtin(&self) -> Result<Params> {
        match self.resolve()? {
            SystemSource::Builtin(p) => Ok(p),
            SystemSource::File { path, .. } => bail!(
                "this command uses closed forms of the built-in family; \
                 `--system {}` is not supported here",
                path.display()
            ),
        }
    }

}

fn parse_builtin(list: &str) -> Result<Params> {
    let (mut a, mut b, mut c, mut d, mut lambda) = (-1.0, -1.0, 1.0, -2.0, 0.0);
    for item in list.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("expected `name=value`, got `{item}`"))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| anyhow!("`{value}` is not a number"))?;
        match key.trim() {
            "a" => a = v,
            "b" => b = v,
            "c" => c = v,
            "d" => d = v,
            "lambda" => lambda = v,
            other => bail!("unknown parameter `{other}` (expected a, b, c, d, lambda)"),
        }
    }
    Params::new(a, b, c, d, lambda).map_err(|e| anyhow!("{e}"))
}

/// Simulation-config overrides shared by the trajectory commands.
#[derive(Clone, Debug, clap::Args, Serialize)]
pub struct ConfigArgs {
    /// Stop trajectories at this time.
    #[arg(long, default_value_t = 200.0)]
    pub t_max: f64,

    /// Domain guard: terminate when the state leaves this ball.
    #[arg(long, default_value_t = 1e3)]
    pub ball_radius: f64,

    /// Time tolerance for event bisection.
    #[arg(long, default_value_t = 1e-12)]
    pub event_tol: f64,

    /// Cap on recorded events per trajectory.
    #[arg(long, default_value_t = 100_000)]
    pub max_events: usize,

    /// Relative integrator tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,

    /// Absolute integrator tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub abs_tol: f64,

    /// Escape-region policy: both | x | y.
    #[arg(long, default_value = "both", value_parser = parse_escape_policy)]
    #[serde(skip)]
    pub escape_policy: EscapePolicy,
}

fn parse_escape_policy(s: &str) -> Result<EscapePolicy, String> {
    match s {
        "both" => Ok(EscapePolicy::Both),
        "x" => Ok(EscapePolicy::BranchX),
        "y" => Ok(EscapePolicy::BranchY),
        other => Err(format!("unknown escape policy `{other}` (both|x|y)")),
    }
}

impl ConfigArgs {
    pub fn to_config(&self) -> SimConfig<f64> {
        SimConfig {
            t_max: self.t_max,
            ball_radius: self.ball_radius,
            event_tol: self.event_tol,
            max_events: self.max_events,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            escape_policy: self.escape_policy,
            ..SimConfig::default()
        }
    }

    pub fn policy_name(&self) -> &'static str {
        match self.escape_policy {
            EscapePolicy::Both => "both",
            EscapePolicy::BranchX => "x",
            EscapePolicy::BranchY => "y",
        }
    }
}

/// Parses `x,y,z`.
pub fn parse_point3(s: &str) -> Result<psvf::Point3d> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        bail!("expected `x,y,z`, got `{s}`");
    }
    let mut v = [0.0; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| anyhow!("`{part}` is not a number"))?;
    }
    Ok(psvf::Point3d::new(v[0], v[1], v[2]))
}

/// Parses `x,y`.
pub fn parse_point2(s: &str) -> Result<psvf::Point2d> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        bail!("expected `x,y`, got `{s}`");
    }
    let x: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| anyhow!("`{}` is not a number", parts[0]))?;
    let y: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| anyhow!("`{}` is not a number", parts[1]))?;
    Ok(psvf::Point2d::new(x, y))
}

/// Parses `lo:hi:step` into a deterministic grid (inclusive of `hi` up to a
/// half-step slack).
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("expected `lo:hi:step`, got `{s}`");
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| anyhow!("bad lo"))?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| anyhow!("bad hi"))?;
    let step: f64 = parts[2].trim().parse().map_err(|_| anyhow!("bad step"))?;
    if step <= 0.0 {
        bail!("step must be positive");
    }
    if hi < lo {
        return Ok(Vec::new());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

/// FNV-1a digest of a manifest's canonical serialization, hex-encoded.
pub fn digest(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}
