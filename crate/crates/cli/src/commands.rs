//! Subcommand implementations. Each returns the process exit code:
//! 0 success, 1 failed checks/classification, 2 manifest errors (raised as
//! `anyhow` errors by the caller).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use psvf::region::{classify_region, classify_tangency, RegionLabel};
use psvf::return_map::{first_return_map, iterate_return_map, return_map_eigen_origin};
use psvf::sim::{simulate, HybridTrajectory, SimConfig};
use psvf::stability::{
    classify_stability, sweep, verify_curve_images, verify_monotone_growth, verify_reach_sliding,
    verify_strip_containment, SampleSpec, StabilityVerdict, SweepRow,
};
use psvf::system::NormalForm;
use psvf::{OriginLine, Params, Point2d, Point3d};

use crate::manifest::{digest, ConfigArgs, SystemSource};

const CLASSIFY_TOL: f64 = 1e-9;

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

// ---------------------------------------------------------------------------
// classify

pub struct ClassifyRun {
    pub source: SystemSource,
    pub point: Option<Point3d>,
    pub grid: Option<(Vec<f64>, Vec<f64>)>,
    pub out: Option<PathBuf>,
}

pub fn cmd_classify(run: ClassifyRun) -> Result<i32> {
    let mut rows = String::from("x,y,region,contact_upper,contact_lower,combined\n");
    let mut print_one = |p: Point3d| -> Result<(), psvf::region::RegionError> {
        let (region, tangency) = match &run.source {
            SystemSource::Builtin(params) => {
                let s = NormalForm::new(*params);
                (
                    classify_region(&s, p, CLASSIFY_TOL)?,
                    classify_tangency(&s, p, CLASSIFY_TOL)?,
                )
            }
            SystemSource::File { system, .. } => (
                classify_region(system, p, CLASSIFY_TOL)?,
                classify_tangency(system, p, CLASSIFY_TOL)?,
            ),
        };
        if region == RegionLabel::Tangential {
            println!("({}, {}, {}) -> Tangential: {:?}", p.x, p.y, p.z, tangency.combined);
        } else {
            println!("({}, {}, {}) -> {:?}", p.x, p.y, p.z, region);
        }
        writeln!(
            rows,
            "{},{},{:?},{:?},{:?},{:?}",
            p.x, p.y, region, tangency.upper, tangency.lower, tangency.combined
        )
        .unwrap();
        Ok(())
    };

    let outcome = match (&run.point, &run.grid) {
        (Some(p), None) => print_one(*p),
        (None, Some((xs, ys))) => {
            let mut r = Ok(());
            'grid: for &y in ys {
                for &x in xs {
                    r = print_one(Point3d::new(x, y, 0.0));
                    if r.is_err() {
                        break 'grid;
                    }
                }
            }
            r
        }
        _ => bail!("exactly one of --point or --grid is required"),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        return Ok(1);
    }

    if let Some(path) = &run.out {
        write_atomic(path, &rows)?;
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// simulate

pub struct SimulateRun {
    pub source: SystemSource,
    pub p0: Point3d,
    pub config_args: ConfigArgs,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

pub fn cmd_simulate(run: SimulateRun) -> Result<i32> {
    let config = run.config_args.to_config();
    let trajs = match &run.source {
        SystemSource::Builtin(params) => simulate(&NormalForm::new(*params), run.p0, &config),
        SystemSource::File { system, .. } => simulate(system, run.p0, &config),
    };

    let mut files = Vec::new();
    if let Some(path) = &run.out {
        for (i, traj) in trajs.iter().enumerate() {
            let branch_path = branch_file(path, i);
            write_atomic(&branch_path, &trajectory_csv(traj))?;
            files.push(branch_path.display().to_string());
        }
    }

    for (i, traj) in trajs.iter().enumerate() {
        let end = traj.final_point();
        println!(
            "branch {i}: {} segments, {} events, terminal {:?}, final {:?} at t={}",
            traj.segments.len(),
            traj.events.len(),
            traj.terminal,
            end.map(|p| (p.x, p.y, p.z)),
            traj.final_time()
        );
    }

    if let Some(path) = &run.summary {
        let manifest = json!({
            "command": "simulate",
            "system": run.source.describe(),
            "p0": [run.p0.x, run.p0.y, run.p0.z],
            "config": {
                "t_max": config.t_max,
                "ball_radius": config.ball_radius,
                "event_tol": config.event_tol,
                "max_events": config.max_events,
                "rel_tol": config.rel_tol,
                "abs_tol": config.abs_tol,
                "escape_policy": run.config_args.policy_name(),
            },
            // Continuations at region boundaries are decided from the sign
            // of the leading Lie derivative at tolerance, i.e. one-sided
            // limits of the neighboring definitions.
            "boundary_resolution": "leading-lie-derivative-sign",
        });
        let summary = json!({
            "manifest": manifest,
            "config_digest": digest(manifest.to_string().as_bytes()),
            "trajectory_files": files,
            "branches": trajs.iter().map(|t| json!({
                "segments": t.segments.len(),
                "events": t.events.iter().map(|e| json!({
                    "t": e.t,
                    "point": [e.point.x, e.point.y, e.point.z],
                    "kind": format!("{:?}", e.kind),
                })).collect::<Vec<_>>(),
                "terminal": format!("{:?}", t.terminal),
                "final_time": t.final_time(),
                "final_point": t.final_point().map(|p| [p.x, p.y, p.z]),
            })).collect::<Vec<_>>(),
        });
        write_atomic(path, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    }
    Ok(0)
}

fn branch_file(base: &Path, index: usize) -> PathBuf {
    if index == 0 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("traj");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}.branch{index}.{ext}"))
}

/// CSV with header `t,x,y,z,mode,event`; the event column is filled only on
/// the row where the event fires.
fn trajectory_csv(traj: &HybridTrajectory<f64>) -> String {
    let mut out = String::from("t,x,y,z,mode,event\n");
    let mut events = traj.events.iter().peekable();
    let mut last_t: Option<f64> = None;
    for seg in &traj.segments {
        for (t, p) in &seg.samples {
            if last_t == Some(*t) {
                continue; // segment junction sample already emitted
            }
            last_t = Some(*t);
            let mut label = "";
            if let Some(e) = events.peek() {
                if e.t <= *t {
                    label = kind_str(e.kind);
                    events.next();
                }
            }
            writeln!(out, "{},{},{},{},{},{}", t, p.x, p.y, p.z, seg.mode.letter(), label)
                .unwrap();
        }
    }
    // Events past the last sample (terminal guards).
    for e in events {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.t,
            e.point.x,
            e.point.y,
            e.point.z,
            "",
            kind_str(e.kind)
        )
        .unwrap();
    }
    out
}

fn kind_str(kind: psvf::sim::EventKind) -> &'static str {
    use psvf::sim::EventKind::*;
    match kind {
        CrossSigma => "CrossSigma",
        EnterSliding => "EnterSliding",
        ExitSliding => "ExitSliding",
        TangencyHit => "TangencyHit",
        EscapeSplit => "EscapeSplit",
        DomainExit => "DomainExit",
        ZenoGuard => "ZenoGuard",
    }
}

// ---------------------------------------------------------------------------
// return-map

pub struct ReturnMapRun {
    pub params: Params,
    pub point: Option<Point2d>,
    pub iterate: usize,
    pub eigen: bool,
    pub out: Option<PathBuf>,
}

pub fn cmd_return_map(run: ReturnMapRun) -> Result<i32> {
    let mut csv = String::from("n,x,y,status\n");
    if let Some(q0) = run.point {
        match first_return_map(&run.params, q0) {
            Ok(r) => {
                println!(
                    "phi({}, {}) = ({}, {})  delta1={} radicand={} realizable={}",
                    q0.x, q0.y, r.image.x, r.image.y, r.delta1, r.radicand, r.realizable
                );
                writeln!(csv, "0,{},{},start", q0.x, q0.y).unwrap();
                writeln!(csv, "1,{},{},ok", r.image.x, r.image.y).unwrap();
            }
            Err(e) => {
                println!("phi({}, {}): {e}", q0.x, q0.y);
                writeln!(csv, "0,{},{},{e}", q0.x, q0.y).unwrap();
            }
        }
        if run.iterate > 0 {
            let orbit = iterate_return_map(&run.params, q0, run.iterate, 1e9, |_| false);
            for (n, p) in orbit.points.iter().enumerate() {
                println!("  n={n}: ({}, {})", p.x, p.y);
                if n > 1 {
                    writeln!(csv, "{n},{},{},ok", p.x, p.y).unwrap();
                }
            }
            println!("orbit status: {:?}", orbit.status);
            writeln!(csv, "{},,,{:?}", orbit.points.len(), orbit.status).unwrap();
        }
    }

    if run.eigen {
        match return_map_eigen_origin(&run.params) {
            Ok(e) => {
                println!(
                    "eigenvalues at origin: xi+ = {}, xi- = {} (product {}), delta2 = {}",
                    e.xi_plus,
                    e.xi_minus,
                    e.xi_plus * e.xi_minus,
                    e.delta2
                );
                println!(
                    "invariant lines: S+ {} ({:?}/{:?}), S- {} ({:?}/{:?})",
                    line_str(&e.line_plus),
                    e.location_plus.pos,
                    e.location_plus.neg,
                    line_str(&e.line_minus),
                    e.location_minus.pos,
                    e.location_minus.neg
                );
            }
            Err(e) => println!("eigen analysis: {e}"),
        }
    }

    if let Some(path) = &run.out {
        write_atomic(path, &csv)?;
    }
    Ok(0)
}

fn line_str(line: &OriginLine<f64>) -> String {
    match line {
        OriginLine::Slope(m) => format!("y = {m} x"),
        OriginLine::Vertical => "x = 0".to_string(),
    }
}

// ---------------------------------------------------------------------------
// verify

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    TheoremA,
    CurveImages,
    Containment,
    Monotone,
    ReachSliding,
    Eigen,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Self, String> {
        Ok(match s {
            "theorem-a" => Suite::TheoremA,
            "curve-images" => Suite::CurveImages,
            "containment" => Suite::Containment,
            "monotone" => Suite::Monotone,
            "reach-sliding" => Suite::ReachSliding,
            "eigen" => Suite::Eigen,
            "all" => Suite::All,
            other => {
                return Err(format!(
                    "unknown suite `{other}` (theorem-a|curve-images|containment|monotone|reach-sliding|eigen|all)"
                ))
            }
        })
    }

    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::TheoremA,
                Suite::CurveImages,
                Suite::Containment,
                Suite::Monotone,
                Suite::ReachSliding,
                Suite::Eigen,
            ],
            s => vec![s],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Suite::TheoremA => "theorem-a",
            Suite::CurveImages => "curve-images",
            Suite::Containment => "containment",
            Suite::Monotone => "monotone",
            Suite::ReachSliding => "reach-sliding",
            Suite::Eigen => "eigen",
            Suite::All => "all",
        }
    }
}

pub struct VerifyRun {
    pub params: Params,
    pub suite: Suite,
    pub samples: usize,
    pub seed: u64,
    pub dist_tol: f64,
    pub config_args: ConfigArgs,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SuiteResult {
    name: &'static str,
    passed: bool,
    details: serde_json::Value,
}

pub fn cmd_verify(run: VerifyRun) -> Result<i32> {
    let members = run.suite.members();
    // Gate: the lambda=0 lemma suites refuse other parameters outright.
    for m in &members {
        if matches!(m, Suite::CurveImages | Suite::Containment | Suite::Monotone)
            && run.params.lambda != 0.0
            && run.suite != Suite::All
        {
            bail!(
                "suite {} requires lambda = 0 (got {})",
                m.name(),
                run.params.lambda
            );
        }
    }

    let config = run.config_args.to_config();
    let spec = SampleSpec {
        count: run.samples,
        radius: 0.2,
        seed: run.seed,
    };

    let mut results: Vec<SuiteResult> = Vec::new();
    for m in members {
        if matches!(m, Suite::CurveImages | Suite::Containment | Suite::Monotone)
            && run.params.lambda != 0.0
        {
            // Inside `all`, skip rather than refuse.
            continue;
        }
        let r = run_suite(m, &run, &config, &spec)?;
        println!(
            "suite {}: {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" }
        );
        results.push(r);
    }

    let all_passed = results.iter().all(|r| r.passed);
    if let Some(path) = &run.out {
        let manifest = json!({
            "command": "verify",
            "suite": run.suite.name(),
            "params": run.params,
            "samples": run.samples,
            "seed": run.seed,
            "dist_tol": run.dist_tol,
            "config": {
                "t_max": config.t_max,
                "ball_radius": config.ball_radius,
                "event_tol": config.event_tol,
                "max_events": config.max_events,
                "escape_policy": run.config_args.policy_name(),
            },
        });
        let report = json!({
            "manifest": manifest,
            "config_digest": digest(manifest.to_string().as_bytes()),
            "passed": all_passed,
            "suites": results,
        });
        write_atomic(path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    }
    Ok(if all_passed { 0 } else { 1 })
}

fn run_suite(
    suite: Suite,
    run: &VerifyRun,
    config: &SimConfig<f64>,
    spec: &SampleSpec<f64>,
) -> Result<SuiteResult> {
    let r = match suite {
        Suite::TheoremA => {
            let report = classify_stability(&run.params, spec, config, run.dist_tol)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let expected = if run.params.lambda >= 0.0 {
                StabilityVerdict::AsymptoticallyStable
            } else {
                StabilityVerdict::NotLyapunovStable
            };
            let converged = report
                .samples
                .iter()
                .filter(|s| s.final_distance <= run.dist_tol)
                .count();
            SuiteResult {
                name: "theorem-a",
                passed: report.verdict == expected,
                details: json!({
                    "verdict": report.verdict,
                    "expected": expected,
                    "sample_count": report.samples.len(),
                    "converged": converged,
                    "samples": report.samples,
                    "certificate": report.certificate.map(|c| json!({
                        "p0": c.p0, "p1": c.p1, "p2": c.p2,
                        "margin": c.d_out - c.d0,
                        "simulation_gap": c.simulation_gap,
                    })),
                    "certificate_error": report.certificate_error,
                }),
            }
        }
        Suite::CurveImages => {
            let r = verify_curve_images(&run.params, 100).map_err(|e| anyhow::anyhow!("{e}"))?;
            SuiteResult {
                name: "curve-images",
                passed: r.max_residual_parabola <= 1e-12 && r.max_residual_axis <= 1e-12,
                details: serde_json::to_value(&r)?,
            }
        }
        Suite::Containment => {
            let r = verify_strip_containment(&run.params, 1000, run.seed)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            SuiteResult {
                name: "containment",
                passed: r.violations == 0,
                details: serde_json::to_value(&r)?,
            }
        }
        Suite::Monotone => {
            let starts = [Point2d::new(0.1, -0.05), Point2d::new(0.2, -0.04), Point2d::new(0.3, -0.5)];
            let mut all = true;
            let mut details = Vec::new();
            for q0 in starts {
                let r = verify_monotone_growth(&run.params, q0, 500)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                all &= r.monotone && r.reached_sliding;
                details.push(serde_json::to_value(&r)?);
            }
            SuiteResult {
                name: "monotone",
                passed: all,
                details: serde_json::Value::Array(details),
            }
        }
        Suite::ReachSliding => {
            let r = verify_reach_sliding(&run.params, spec, config)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            SuiteResult {
                name: "reach-sliding",
                passed: r.reached == r.total,
                details: json!({"reached": r.reached, "total": r.total}),
            }
        }
        Suite::Eigen => {
            let sliding = psvf::sliding::sliding_eigen_origin(&run.params);
            let ret = return_map_eigen_origin(&run.params);
            let mut passed = sliding.is_ok();
            if let Ok(e) = &ret {
                passed &= (e.xi_plus * e.xi_minus - 1.0).abs() <= 1e-10;
            }
            // The return-map eigenformulas are singular at lambda = 0; that
            // is expected, not a failure.
            SuiteResult {
                name: "eigen",
                passed,
                details: json!({
                    "sliding": sliding.ok(),
                    "return_map": ret.ok(),
                }),
            }
        }
        Suite::All => unreachable!("expanded before dispatch"),
    };
    Ok(r)
}

// ---------------------------------------------------------------------------
// sweep

pub struct SweepRun {
    pub base: Params,
    pub lambda_range: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub dist_tol: f64,
    pub config_args: ConfigArgs,
    pub out: PathBuf,
    pub resume: bool,
}

const SWEEP_HEADER: &str =
    "lambda,a,b,c,d,verdict,delta3,sliding_eig1,sliding_eig2,delta2,xi_plus,xi_minus,error\n";

pub fn cmd_sweep(run: SweepRun) -> Result<i32> {
    let config = run.config_args.to_config();
    let spec = SampleSpec {
        count: run.samples,
        radius: 0.2,
        seed: run.seed,
    };

    // Resume: keep rows whose lambda key already exists in the output file.
    let mut existing: Vec<(String, String)> = Vec::new();
    if run.resume && run.out.exists() {
        let text = fs::read_to_string(&run.out)?;
        for line in text.lines().skip(1) {
            if let Some((key, _)) = line.split_once(',') {
                existing.push((key.to_string(), line.to_string()));
            }
        }
    }

    let mut rows: Vec<(String, String)> = Vec::new();
    for lambda in &run.lambda_range {
        let key = format!("{lambda}");
        if let Some((_, line)) = existing.iter().find(|(k, _)| *k == key) {
            rows.push((key, line.clone()));
            continue;
        }
        let params = run.base.with_lambda(*lambda);
        let row = sweep(&[params], &spec, &config, run.dist_tol)
            .pop()
            .expect("one row per cell");
        rows.push((key.clone(), sweep_row_csv(&key, &row)));
        println!("lambda={key}: {}", rows.last().unwrap().1);
    }

    // Deterministic output: sorted by the numeric grid key.
    rows.sort_by(|a, b| {
        let ka: f64 = a.0.parse().unwrap_or(f64::NAN);
        let kb: f64 = b.0.parse().unwrap_or(f64::NAN);
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = String::from(SWEEP_HEADER);
    for (_, line) in &rows {
        out.push_str(line);
        out.push('\n');
    }
    write_atomic(&run.out, &out)?;
    Ok(0)
}

fn sweep_row_csv(key: &str, row: &SweepRow<f64>) -> String {
    let verdict = row
        .verdict
        .map(|v| format!("{v:?}"))
        .unwrap_or_else(|| "".to_string());
    let (d3, e1, e2) = row
        .sliding_eigen
        .as_ref()
        .map(|e| (fmt_f(e.delta3), fmt_f(e.eig1), fmt_f(e.eig2)))
        .unwrap_or_default();
    let (d2, xp, xm) = row
        .return_eigen
        .as_ref()
        .map(|e| (fmt_f(e.delta2), fmt_f(e.xi_plus), fmt_f(e.xi_minus)))
        .unwrap_or_default();
    let err = row.error.clone().unwrap_or_default().replace(',', ";");
    format!(
        "{key},{},{},{},{},{verdict},{d3},{e1},{e2},{d2},{xp},{xm},{err}",
        fmt_f(row.params.a),
        fmt_f(row.params.b),
        fmt_f(row.params.c),
        fmt_f(row.params.d),
    )
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}
