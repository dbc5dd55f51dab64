//! Executable verification of the stability dichotomy at the cusp-fold
//! origin.
//!
//! The checks mirror the analytic structure of the problem: closed-form
//! curve-image identities of the first-return map, containment of
//! first-return images in the strip between those curves, monotone growth
//! of the x-coordinate along return-map orbits, reach-sliding of simulated
//! trajectories, and — for negative unfolding parameters — an escape
//! certificate built from the tangent-line construction at the parabola.
//!
//! The sampling-based classifier runs seeded-deterministic batches of
//! trajectories and reports per-sample evidence alongside the verdict.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

use crate::geom::{Point2, Point3, Vec2};
use crate::params::ParamSet;
use crate::real::Real;
use crate::return_map::{
    first_return_map, iterate_return_map, parabola_image, return_map_eigen_origin, OrbitStatus,
    ReturnMapEigen,
};
use crate::sim::{simulate, EventKind, SimConfig, TerminalStatus};
use crate::sliding::{sliding_eigen_origin, SlidingEigen};
use crate::system::NormalForm;

/// Outcome of the sampling-based stability classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StabilityVerdict {
    AsymptoticallyStable,
    NotLyapunovStable,
    Inconclusive,
}

/// Deterministic sampling specification; the seed is recorded in every
/// report so runs replay exactly.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SampleSpec<T> {
    pub count: usize,
    pub radius: T,
    pub seed: u64,
}

impl<T: Real> Default for SampleSpec<T> {
    fn default() -> Self {
        SampleSpec {
            count: 500,
            radius: T::of(0.2),
            seed: 42,
        }
    }
}

/// Seeded points of the closed ball of `spec.radius`, by rejection from the
/// enclosing cube.
pub fn sample_ball<T: Real>(spec: &SampleSpec<T>) -> Vec<Point3<T>> {
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    while out.len() < spec.count {
        let x: f64 = rng.gen_range(-1.0..=1.0);
        let y: f64 = rng.gen_range(-1.0..=1.0);
        let z: f64 = rng.gen_range(-1.0..=1.0);
        if x * x + y * y + z * z > 1.0 {
            continue;
        }
        out.push(Point3::new(
            T::of(x) * spec.radius,
            T::of(y) * spec.radius,
            T::of(z) * spec.radius,
        ));
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum StabilityError {
    #[error("parameters violate the stability regime (need a<0, b<0, c>0, d<0, bd>0, a+bd>0)")]
    RegimeViolation,
    #[error("this check requires lambda = 0 (got {lambda})")]
    LambdaNotZero { lambda: f64 },
    #[error("this check requires lambda >= 0 (got {lambda})")]
    LambdaNegative { lambda: f64 },
}

/// Residuals of the closed-form curve-image identities of the first-return
/// map at `lambda = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct CurveImageReport<T> {
    /// Max residual of images of the parabola `y = -x^2` (x in (0, 0.5])
    /// against `y = -x^2/4 + 2(d/c) x`.
    pub max_residual_parabola: T,
    /// Max residual of images of `x = 0, y < 0` against
    /// `y = -x^2/3 + 2(d/c) x`.
    pub max_residual_axis: T,
    pub samples_per_curve: usize,
}

pub fn verify_curve_images<T: Real>(
    params: &ParamSet<T>,
    sample_count: usize,
) -> Result<CurveImageReport<T>, StabilityError> {
    require_lambda_zero(params)?;
    let two_dc = T::of(2.0) * params.d / params.c;
    let mut max_parabola = T::zero();
    let mut max_axis = T::zero();
    for i in 1..=sample_count {
        let s = T::of(i as f64 / sample_count as f64);
        // Parabola points (x0, -x0^2), x0 in (0, 0.5].
        let x0 = s * T::of(0.5);
        let img = first_return_map(params, Point2::new(x0, -x0 * x0))
            .expect("parabola images are real")
            .image;
        let target = -img.x * img.x / T::of(4.0) + two_dc * img.x;
        max_parabola = max_parabola.max((img.y - target).abs());
        // Negative-y axis points (0, y0), y0 in [-3, 0).
        let y0 = -s * T::of(3.0);
        let img = first_return_map(params, Point2::new(T::zero(), y0))
            .expect("axis images are real")
            .image;
        let target = -img.x * img.x / T::of(3.0) + two_dc * img.x;
        max_axis = max_axis.max((img.y - target).abs());
    }
    Ok(CurveImageReport {
        max_residual_parabola: max_parabola,
        max_residual_axis: max_axis,
        samples_per_curve: sample_count,
    })
}

/// Containment of first-return images of the upward crossing region in the
/// open strip between the two image curves.
#[derive(Clone, Debug, Serialize)]
pub struct ContainmentReport<T> {
    pub checked: usize,
    pub violations: usize,
    pub seed: u64,
    /// Worst signed clearance to the strip boundary (positive = inside).
    pub min_clearance: T,
}

pub fn verify_strip_containment<T: Real>(
    params: &ParamSet<T>,
    sample_count: usize,
    seed: u64,
) -> Result<ContainmentReport<T>, StabilityError> {
    require_lambda_zero(params)?;
    let two_dc = T::of(2.0) * params.d / params.c;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut min_clearance = T::infinity();
    for _ in 0..sample_count {
        // Upward crossing region sample: 0 < x <= 0.5, -x^2-0.5 <= y < -x^2.
        let x = T::of(rng.gen_range(1e-6..=0.5));
        let y = -x * x - T::of(rng.gen_range(1e-9..0.5));
        let img = match first_return_map(params, Point2::new(x, y)) {
            Ok(r) => r.image,
            Err(_) => {
                violations += 1;
                continue;
            }
        };
        let lower = -img.x * img.x / T::of(3.0) + two_dc * img.x;
        let upper = -img.x * img.x / T::of(4.0) + two_dc * img.x;
        let clearance = (img.y - lower).min(upper - img.y);
        min_clearance = min_clearance.min(clearance);
        if !(img.y > lower && img.y < upper) {
            violations += 1;
        }
    }
    Ok(ContainmentReport {
        checked: sample_count,
        violations,
        seed,
        min_clearance,
    })
}

/// Monotone growth of the x-coordinate along a return-map orbit.
#[derive(Clone, Debug, Serialize)]
pub struct MonotoneReport<T> {
    pub start: Point2<T>,
    pub steps: usize,
    pub monotone: bool,
    pub reached_sliding: bool,
    pub status: OrbitStatus,
}

pub fn verify_monotone_growth<T: Real>(
    params: &ParamSet<T>,
    q0: Point2<T>,
    max_iter: usize,
) -> Result<MonotoneReport<T>, StabilityError> {
    require_lambda_zero(params)?;
    let orbit = iterate_return_map(params, q0, max_iter, T::of(1e9), |_| false);
    let monotone = orbit.points.windows(2).all(|w| w[1].x > w[0].x);
    Ok(MonotoneReport {
        start: q0,
        steps: orbit.points.len() - 1,
        monotone,
        reached_sliding: orbit.status == OrbitStatus::ReachedSliding,
        status: orbit.status,
    })
}

/// Per-sample record of a simulated trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct SampleOutcome<T> {
    pub p0: Point3<T>,
    pub terminal: TerminalStatus,
    pub reached_sliding: bool,
    pub final_point: Point3<T>,
    pub final_distance: T,
    pub t_end: T,
}

/// Reach-sliding check: every sampled trajectory must record an
/// `EnterSliding` event or terminate at the origin.
#[derive(Clone, Debug, Serialize)]
pub struct ReachSlidingReport<T> {
    pub total: usize,
    pub reached: usize,
    pub sample_spec: SampleSpec<T>,
    pub failures: Vec<SampleOutcome<T>>,
}

pub fn verify_reach_sliding<T: Real, >(
    params: &ParamSet<T>,
    spec: &SampleSpec<T>,
    config: &SimConfig<T>,
) -> Result<ReachSlidingReport<T>, StabilityError> {
    if params.lambda < T::zero() {
        return Err(StabilityError::LambdaNegative {
            lambda: params.lambda.to_f64().unwrap_or(f64::NAN),
        });
    }
    if !params.satisfies_h1_to_h4() {
        return Err(StabilityError::RegimeViolation);
    }
    let system = NormalForm::new(*params);
    let mut reached = 0;
    let mut failures = Vec::new();
    for p0 in sample_ball(spec) {
        let outcomes = run_sample(&system, p0, config);
        let ok = outcomes.iter().all(sample_reached_sliding);
        if ok {
            reached += 1;
        } else {
            failures.extend(outcomes.into_iter().filter(|o| !sample_reached_sliding(o)));
        }
    }
    Ok(ReachSlidingReport {
        total: spec.count,
        reached,
        sample_spec: *spec,
        failures,
    })
}

fn sample_reached_sliding<T: Real>(o: &SampleOutcome<T>) -> bool {
    o.reached_sliding
        || (matches!(
            o.terminal,
            TerminalStatus::PseudoEquilibrium | TerminalStatus::StuckAtSingularPoint
        ) && o.final_distance <= T::of(1e-3))
}

fn run_sample<T: Real>(
    system: &NormalForm<T>,
    p0: Point3<T>,
    config: &SimConfig<T>,
) -> Vec<SampleOutcome<T>> {
    simulate(system, p0, config)
        .into_iter()
        .map(|traj| {
            let final_point = traj.final_point().unwrap_or(p0);
            SampleOutcome {
                p0,
                terminal: traj.terminal,
                reached_sliding: traj.has_event(EventKind::EnterSliding),
                final_point,
                final_distance: final_point.norm(),
                t_end: traj.final_time(),
            }
        })
        .collect()
}

/// The tangent-line escape certificate for `lambda < 0`.
///
/// `p0 = (x0, -x0^2)` sits on the tangency parabola; `p1` is its
/// first-return image in closed form; `r` is the line through `p0` tangent
/// to the sliding orbit (direction `(a x0, lambda x0)`); `s` is the
/// vertical line through `p1` and `p3 = r ∩ s`. Validity requires `p1`
/// strictly below `r` (`y1 < y3`) and the certified out-distance to exceed
/// the start distance.
#[derive(Clone, Debug, Serialize)]
pub struct EscapeCertificate<T> {
    pub p0: Point2<T>,
    pub p1: Point2<T>,
    /// Where the trajectory re-meets the parabola: the sliding exit point
    /// when `p1` slides, otherwise `p1` itself (it landed in the upward
    /// crossing region, where the saddle expansion applies).
    pub p2: Point2<T>,
    pub p2_via_sliding: bool,
    /// Direction of the tangent line `r` at `p0`.
    pub tangent_dir: Vec2<T>,
    /// Intersection of `r` with the vertical line through `p1`.
    pub p3: Point2<T>,
    /// `y1 < y3`: `p1` lies below `r`, in the outward region.
    pub p1_below_r: bool,
    pub d0: T,
    pub d_out: T,
    /// First plane return of `p0` under full hybrid simulation.
    pub simulated_p1: Point2<T>,
    /// Distance between the simulated and closed-form returns.
    pub simulation_gap: T,
}

#[derive(Debug, Error, PartialEq)]
pub enum CertificateError {
    #[error("escape certificate requires lambda < 0 (got {lambda})")]
    LambdaNotNegative { lambda: f64 },
    #[error("parameters violate the stability regime")]
    RegimeViolation,
    #[error("x0 must be positive and small")]
    BadStartingAbscissa,
    #[error("certificate failed: {reason}")]
    Failed { reason: String },
}

pub fn escape_certificate<T: Real>(
    params: &ParamSet<T>,
    x0: T,
) -> Result<EscapeCertificate<T>, CertificateError> {
    if !params.satisfies_h1_to_h4() {
        return Err(CertificateError::RegimeViolation);
    }
    if params.lambda >= T::zero() {
        return Err(CertificateError::LambdaNotNegative {
            lambda: params.lambda.to_f64().unwrap_or(f64::NAN),
        });
    }
    if x0 <= T::zero() {
        return Err(CertificateError::BadStartingAbscissa);
    }
    let (a, lam) = (params.a, params.lambda);
    let p0 = Point2::new(x0, -x0 * x0);
    let p1 = parabola_image(params, x0);

    // Tangent line r at p0 and the vertical line s through p1.
    let tangent_dir = Vec2::new(a * x0, lam * x0);
    let two = T::of(2.0);
    let y3 = -x0 * x0 + (lam / a) * (T::of(3.0) * lam / (two * a) + x0);
    let p3 = Point2::new(p1.x, y3);
    let p1_below_r = p1.y < y3;
    if !p1_below_r {
        return Err(CertificateError::Failed {
            reason: format!("p1 is not below the tangent line: y1 = {} >= y3 = {}", p1.y, y3),
        });
    }

    // p2: slide back to the parabola when p1 is a sliding point; otherwise
    // p1 itself witnesses the outward step.
    let system = NormalForm::new(*params);
    let config = SimConfig::default();
    let w1 = p1.y + p1.x * p1.x;
    let in_sliding = params.b * w1 < T::zero() && p1.x > T::zero();
    let (p2, p2_via_sliding) = if in_sliding {
        let (seg, _end) = match crate::sim::slide(&system, p1.lift(), T::zero(), &config) {
            Ok(r) => r,
            Err(e) => {
                return Err(CertificateError::Failed {
                    reason: format!("sliding from p1 failed: {e}"),
                })
            }
        };
        let exit = seg.samples.last().map(|(_, p)| p.planar()).unwrap_or(p1);
        (exit, true)
    } else {
        (p1, false)
    };

    let d0 = p0.norm();
    let d_out = p2.norm();
    if d_out <= d0 {
        return Err(CertificateError::Failed {
            reason: format!("distance did not grow: d(p2) = {d_out} <= d(p0) = {d0}"),
        });
    }

    // Confirm the closed-form return against the hybrid simulation: the
    // second plane hit of the trajectory from p0 is p1.
    let trajs = simulate(&system, p0.lift(), &config);
    let simulated_p1 = trajs
        .first()
        .and_then(|t| {
            t.events
                .iter()
                .filter(|e| e.kind == EventKind::CrossSigma || e.kind == EventKind::EnterSliding)
                .nth(1)
                .map(|e| e.point.planar())
        })
        .ok_or_else(|| CertificateError::Failed {
            reason: "simulation recorded no second plane return".into(),
        })?;
    let simulation_gap = simulated_p1.dist(&p1);
    if simulation_gap > T::of(1e-6) * (T::one() + p1.norm()) {
        return Err(CertificateError::Failed {
            reason: format!(
                "simulated return {simulated_p1:?} disagrees with closed form {p1:?}"
            ),
        });
    }

    Ok(EscapeCertificate {
        p0,
        p1,
        p2,
        p2_via_sliding,
        tangent_dir,
        p3,
        p1_below_r,
        d0,
        d_out,
        simulated_p1,
        simulation_gap,
    })
}

/// Full classification report.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport<T> {
    pub params: ParamSet<T>,
    pub verdict: StabilityVerdict,
    pub sample_spec: SampleSpec<T>,
    pub dist_tol: T,
    pub samples: Vec<SampleOutcome<T>>,
    pub certificate: Option<EscapeCertificate<T>>,
    pub certificate_error: Option<String>,
}

/// Classifies the stability of the origin by seeded sampling.
///
/// For `lambda >= 0` the verdict is `AsymptoticallyStable` only if every
/// sampled trajectory reaches the sliding closure (or dies at the origin)
/// AND ends within `dist_tol` of the origin; otherwise `Inconclusive` with
/// the evidence attached. For `lambda < 0` a valid escape certificate (or,
/// failing that, an explicitly escaping sample) yields `NotLyapunovStable`.
pub fn classify_stability<T: Real>(
    params: &ParamSet<T>,
    spec: &SampleSpec<T>,
    config: &SimConfig<T>,
    dist_tol: T,
) -> Result<StabilityReport<T>, StabilityError> {
    if !params.satisfies_h1_to_h4() {
        return Err(StabilityError::RegimeViolation);
    }
    let system = NormalForm::new(*params);

    if params.lambda >= T::zero() {
        let mut samples = Vec::with_capacity(spec.count);
        for p0 in sample_ball(spec) {
            samples.extend(run_sample(&system, p0, config));
        }
        let all_reach = samples.iter().all(sample_reached_sliding);
        let all_converge = samples.iter().all(|o| o.final_distance <= dist_tol);
        let verdict = if all_reach && all_converge {
            StabilityVerdict::AsymptoticallyStable
        } else {
            StabilityVerdict::Inconclusive
        };
        return Ok(StabilityReport {
            params: *params,
            verdict,
            sample_spec: *spec,
            dist_tol,
            samples,
            certificate: None,
            certificate_error: None,
        });
    }

    // lambda < 0: certificate first, escaping sample as fallback.
    let x0 = spec.radius / T::of(2.0);
    let (certificate, certificate_error, mut verdict) = match escape_certificate(params, x0) {
        Ok(c) => (Some(c), None, StabilityVerdict::NotLyapunovStable),
        Err(e) => (None, Some(e.to_string()), StabilityVerdict::Inconclusive),
    };
    let mut samples = Vec::new();
    if verdict == StabilityVerdict::Inconclusive {
        // Look for an explicitly escaping sample: one that leaves a ball an
        // order of magnitude wider than the sampling radius.
        for p0 in sample_ball(spec) {
            let outcomes = run_sample(&system, p0, config);
            let escaping = outcomes
                .iter()
                .any(|o| o.final_distance > spec.radius * T::of(10.0));
            samples.extend(outcomes);
            if escaping {
                verdict = StabilityVerdict::NotLyapunovStable;
                break;
            }
        }
    }
    Ok(StabilityReport {
        params: *params,
        verdict,
        sample_spec: *spec,
        dist_tol,
        samples,
        certificate,
        certificate_error,
    })
}

/// One row of a parameter sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow<T> {
    pub params: ParamSet<T>,
    pub verdict: Option<StabilityVerdict>,
    pub sliding_eigen: Option<SlidingEigen<T>>,
    pub return_eigen: Option<ReturnMapEigen<T>>,
    pub error: Option<String>,
}

/// Classifies every grid cell, attaching eigen summaries; per-cell errors
/// are recorded in the row and never abort the sweep.
pub fn sweep<T: Real>(
    grid: &[ParamSet<T>],
    spec: &SampleSpec<T>,
    config: &SimConfig<T>,
    dist_tol: T,
) -> Vec<SweepRow<T>> {
    grid.iter()
        .map(|params| {
            let sliding_eigen = sliding_eigen_origin(params).ok();
            let return_eigen = return_map_eigen_origin(params).ok();
            match classify_stability(params, spec, config, dist_tol) {
                Ok(report) => SweepRow {
                    params: *params,
                    verdict: Some(report.verdict),
                    sliding_eigen,
                    return_eigen,
                    error: None,
                },
                Err(e) => SweepRow {
                    params: *params,
                    verdict: None,
                    sliding_eigen,
                    return_eigen,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

fn require_lambda_zero<T: Real>(params: &ParamSet<T>) -> Result<(), StabilityError> {
    if params.lambda != T::zero() {
        return Err(StabilityError::LambdaNotZero {
            lambda: params.lambda.to_f64().unwrap_or(f64::NAN),
        });
    }
    if !params.satisfies_h1_to_h4() {
        return Err(StabilityError::RegimeViolation);
    }
    Ok(())
}
