//! Closed-form flows and the first-return map of the normal-form family.
//!
//! Both half-system flows integrate in closed form: `x` and `y` are affine
//! in time and `z` is a cubic (upper field) or quadratic (lower field)
//! polynomial. Flight times to the switching plane are therefore polynomial
//! roots, the half-return maps are involutions pairing the endpoints of
//! orbit arcs, and their composition has the explicit expression
//!
//! ```text
//! phi(x, y) = ( (2ax + D1)/(4a),
//!               y + d(2ax + D1)/(2ac) + lambda(-6ax - D1)/(4a^2) )
//! D1 = 3 lambda - sqrt(9 lambda^2 + 36 a lambda x - 12 a^2 (x^2 + 4y))
//! ```
//!
//! with the principal (non-negative) square root. Note that under this
//! branch the origin is a fixed point for `lambda >= 0` only: for
//! `lambda < 0` the upper field's contact at the origin is a visible fold,
//! its orbit genuinely returns to the plane at distance `O(lambda)`, and
//! `phi(0,0) = (3 lambda/(2a), ...)` — which is what both the geometric
//! composition and this formula produce.

use serde::Serialize;
use thiserror::Error;

use crate::geom::{OriginLine, Point2, Point3};
use crate::params::ParamSet;
use crate::real::Real;
use crate::roots::{smallest_root_above, solve_quadratic};
use crate::sliding::{locate_line, LineLocation};
use crate::system::{FieldSide, NormalForm};

#[derive(Debug, Error, PartialEq)]
pub enum ReturnMapError {
    #[error("no further intersection of the orbit with the switching plane")]
    NoReturn,
    #[error("orbit lies in the switching plane (degenerate contact)")]
    DegenerateContact,
    #[error("complex branch: radicand {radicand} < 0")]
    ComplexBranch { radicand: f64 },
    #[error("eigen-formulas of the first-return map are singular at lambda = 0")]
    LambdaZero,
    #[error("first-return eigenvalues are complex (delta2 = {delta2})")]
    ComplexEigenvalues { delta2: f64 },
}

/// Closed-form flow of one half-system from an initial point: coefficients
/// of `x(t)`, `y(t)` (affine) and `z(t)` (degree <= 3).
#[derive(Clone, Copy, Debug)]
pub struct PolyFlow<T> {
    pub x: [T; 2],
    pub y: [T; 2],
    pub z: [T; 4],
}

impl<T: Real> PolyFlow<T> {
    /// Flow of the upper field `(a, lambda, b(y + x^2))`.
    pub fn upper(params: &ParamSet<T>, p0: Point3<T>) -> Self {
        let q = params;
        let two = T::of(2.0);
        let three = T::of(3.0);
        PolyFlow {
            x: [p0.x, q.a],
            y: [p0.y, q.lambda],
            z: [
                p0.z,
                q.b * (p0.y + p0.x * p0.x),
                q.b * (q.lambda / two + q.a * p0.x),
                q.a * q.a * q.b / three,
            ],
        }
    }

    /// Flow of the lower field `(c, d, x)`.
    pub fn lower(params: &ParamSet<T>, p0: Point3<T>) -> Self {
        let q = params;
        PolyFlow {
            x: [p0.x, q.c],
            y: [p0.y, q.d],
            z: [p0.z, p0.x, q.c / T::of(2.0), T::zero()],
        }
    }

    pub fn for_side(side: FieldSide, params: &ParamSet<T>, p0: Point3<T>) -> Self {
        match side {
            FieldSide::X => Self::upper(params, p0),
            FieldSide::Y => Self::lower(params, p0),
        }
    }

    pub fn at(&self, t: T) -> Point3<T> {
        Point3::new(
            self.x[0] + self.x[1] * t,
            self.y[0] + self.y[1] * t,
            self.z_at(t),
        )
    }

    pub fn z_at(&self, t: T) -> T {
        ((self.z[3] * t + self.z[2]) * t + self.z[1]) * t + self.z[0]
    }
}

/// Evaluates the closed-form upper flow at time `t`.
pub fn flow_x<T: Real>(params: &ParamSet<T>, p0: Point3<T>, t: T) -> Point3<T> {
    PolyFlow::upper(params, p0).at(t)
}

/// Evaluates the closed-form lower flow at time `t`.
pub fn flow_y<T: Real>(params: &ParamSet<T>, p0: Point3<T>, t: T) -> Point3<T> {
    PolyFlow::lower(params, p0).at(t)
}

/// Smallest flight time `t > t_min` at which the orbit from a
/// switching-plane point meets the plane again.
///
/// The known root at `t = 0` is deflated analytically, leaving a quadratic
/// (upper field) or linear (lower field) factor.
pub fn return_time<T: Real>(
    params: &ParamSet<T>,
    side: FieldSide,
    p0: Point3<T>,
    t_min: T,
) -> Result<Option<T>, ReturnMapError> {
    let roots = nonzero_flight_roots(params, side, p0)?;
    Ok(smallest_root_above(&roots, t_min))
}

/// Nonzero real roots of the flight polynomial from a plane point, i.e. of
/// `z(t)/t` with the `t = 0` root removed.
fn nonzero_flight_roots<T: Real>(
    params: &ParamSet<T>,
    side: FieldSide,
    p0: Point3<T>,
) -> Result<Vec<T>, ReturnMapError> {
    let flow = PolyFlow::for_side(side, params, Point3::on_sigma(p0.x, p0.y));
    let [_, c1, c2, c3] = flow.z;
    let scale = T::one() + c1.abs().max(c2.abs()).max(c3.abs());
    if c1.abs() + c2.abs() + c3.abs() <= T::epsilon() * scale {
        return Err(ReturnMapError::DegenerateContact);
    }
    // Deflated factor: c3 t^2 + c2 t + c1 = 0 (c3 = 0 for the lower field).
    let mut roots = solve_quadratic(c3, c2, c1);
    // A vanishing c1 makes t = 0 a double root of z; drop the duplicate.
    roots.retain(|t| *t != T::zero());
    Ok(roots)
}

/// Signed pairing time of the half-return involution, or `None` when the
/// orbit arc through `p` does not meet the plane a second time within the
/// field's own half-space.
///
/// Transversal points pair forward when the field enters its half-space
/// (`L^1 z` of the correct sign) and backward otherwise; tangency points
/// pair through the global arc when it is visible and are fixed when it is
/// invisible (`Some(0)`).
pub fn pairing_time<T: Real>(
    params: &ParamSet<T>,
    side: FieldSide,
    p: Point3<T>,
) -> Result<Option<T>, ReturnMapError> {
    let flow = PolyFlow::for_side(side, params, Point3::on_sigma(p.x, p.y));
    let roots = nonzero_flight_roots(params, side, p)?;
    let l1 = flow.z[1];
    let own = T::of(side.half_space_sign());
    let band = T::of(1e-12) * (T::one() + l1.abs());

    if l1 * own > band {
        // Entering the half-space: forward arc to the smallest positive root.
        return Ok(smallest_root_above(&roots, T::zero()));
    }
    if l1 * own < -band {
        // Leaving: the arc in the half-space is backward.
        return Ok(roots
            .iter()
            .copied()
            .filter(|t| *t < T::zero())
            .max_by(|a, b| a.partial_cmp(b).unwrap()));
    }
    // Tangency: the arc to the nearest root must stay in the half-space.
    let valid = roots
        .iter()
        .copied()
        .filter(|t| {
            let mid = flow.z_at(*t / T::of(2.0));
            mid * own >= -T::of(1e-12) * (T::one() + mid.abs())
        })
        .min_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    Ok(Some(valid.unwrap_or(T::zero())))
}

/// Half-return involution of the upper field: the other endpoint of the
/// orbit arc of `X` through `p` in `z >= 0`.
pub fn half_return_x<T: Real>(
    params: &ParamSet<T>,
    p: Point3<T>,
) -> Result<Point3<T>, ReturnMapError> {
    half_return(params, FieldSide::X, p)
}

/// Half-return involution of the lower field.
pub fn half_return_y<T: Real>(
    params: &ParamSet<T>,
    p: Point3<T>,
) -> Result<Point3<T>, ReturnMapError> {
    half_return(params, FieldSide::Y, p)
}

pub fn half_return<T: Real>(
    params: &ParamSet<T>,
    side: FieldSide,
    p: Point3<T>,
) -> Result<Point3<T>, ReturnMapError> {
    let t = pairing_time(params, side, p)?.ok_or(ReturnMapError::NoReturn)?;
    let q = PolyFlow::for_side(side, params, Point3::on_sigma(p.x, p.y)).at(t);
    Ok(Point3::on_sigma(q.x, q.y))
}

/// Result of one application of the first-return map.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReturnMapResult<T> {
    pub image: Point2<T>,
    /// `3 lambda - sqrt(radicand)`.
    pub delta1: T,
    /// `9 lambda^2 + 36 a lambda x - 12 a^2 (x^2 + 4y)`.
    pub radicand: T,
    /// Flight times of the two half-returns when the geometric composition
    /// realizes the formula.
    pub flight_times: Option<(T, T)>,
    /// True when both half-returns exist with those times and the
    /// intermediate point lies in the downward crossing region.
    pub realizable: bool,
}

/// The first-return map `phi = gamma_Y . gamma_X` in closed form.
pub fn first_return_map<T: Real>(
    params: &ParamSet<T>,
    q: Point2<T>,
) -> Result<ReturnMapResult<T>, ReturnMapError> {
    let pr = params;
    let (a, c, d, lam) = (pr.a, pr.c, pr.d, pr.lambda);
    let (x, y) = (q.x, q.y);
    let four = T::of(4.0);

    let mut radicand = T::of(9.0) * lam * lam + T::of(36.0) * a * lam * x
        - T::of(12.0) * a * a * (x * x + four * y);
    // Points on the tangency parabola make the radicand an exact square;
    // clamp roundoff-negative values there.
    let scale = T::of(9.0) * lam * lam
        + (T::of(36.0) * a * lam * x).abs()
        + T::of(12.0) * a * a * (x * x + four * y.abs());
    if radicand < T::zero() {
        if radicand >= -T::epsilon() * T::of(64.0) * (T::one() + scale) {
            radicand = T::zero();
        } else {
            return Err(ReturnMapError::ComplexBranch {
                radicand: radicand.to_f64().unwrap_or(f64::NAN),
            });
        }
    }

    let delta1 = T::of(3.0) * lam - radicand.sqrt();
    let two_ax = T::of(2.0) * a * x;
    let image = Point2::new(
        (two_ax + delta1) / (four * a),
        y + d * (two_ax + delta1) / (T::of(2.0) * a * c)
            + lam * (-T::of(6.0) * a * x - delta1) / (four * a * a),
    );

    // Geometric realizability: the X-flight encoded by the formula is
    // t_x = -(delta1 + 6ax)/(4a^2); it must be the actual pairing time and
    // the intermediate point must cross downward.
    let t_x = -(delta1 + T::of(6.0) * a * x) / (four * a * a);
    let mid = flow_x(params, Point3::on_sigma(x, y), t_x);
    let mid = Point3::on_sigma(mid.x, mid.y);
    let t_y = -T::of(2.0) * mid.x / c;
    let tol = T::of(1e-9);
    let realizable = match pairing_time(params, FieldSide::X, Point3::on_sigma(x, y)) {
        Ok(Some(t)) => {
            let x3 = pr.b * (mid.y + mid.x * mid.x);
            let y3 = mid.x;
            (t - t_x).abs() <= tol * (T::one() + t_x.abs())
                && x3 <= tol
                && y3 <= tol
        }
        _ => false,
    };

    Ok(ReturnMapResult {
        image,
        delta1,
        radicand,
        flight_times: if realizable { Some((t_x, t_y)) } else { None },
        realizable,
    })
}

/// Image of a point of the tangency parabola `(x0, -x0^2)` under the
/// first-return map, in closed form:
///
/// ```text
/// ( 2 x0 + 3 lambda/(2a),
///   -x0^2 - 3 lambda (lambda + 2 a x0)/(2 a^2) + d (3 lambda + 4 a x0)/(a c) )
/// ```
pub fn parabola_image<T: Real>(params: &ParamSet<T>, x0: T) -> Point2<T> {
    let q = params;
    let (a, c, d, lam) = (q.a, q.c, q.d, q.lambda);
    let two = T::of(2.0);
    let three = T::of(3.0);
    Point2::new(
        two * x0 + three * lam / (two * a),
        -x0 * x0 - three * lam * (lam + two * a * x0) / (two * a * a)
            + d * (three * lam + T::of(4.0) * a * x0) / (a * c),
    )
}

/// Eigen-structure of the first-return map at the origin (`lambda != 0`).
#[derive(Clone, Debug, Serialize)]
pub struct ReturnMapEigen<T> {
    /// `(ad)^2 - a d c lambda`.
    pub delta2: T,
    pub xi_plus: T,
    pub xi_minus: T,
    pub omega_plus: T,
    pub omega_minus: T,
    pub line_plus: OriginLine<T>,
    pub line_minus: OriginLine<T>,
    pub location_plus: LineLocation,
    pub location_minus: LineLocation,
}

/// Closed-form eigenvalues `xi = (2ad - c lambda +- 2 sqrt(delta2))/(c lambda)`,
/// eigenvector slopes `omega = ac/(ad +- sqrt(delta2))` and invariant lines
/// `x = omega * y`, with region locations sampled at `|x| = 1e-3`.
pub fn return_map_eigen_origin<T: Real>(
    params: &ParamSet<T>,
) -> Result<ReturnMapEigen<T>, ReturnMapError> {
    let q = params;
    if q.lambda == T::zero() {
        return Err(ReturnMapError::LambdaZero);
    }
    let ad = q.a * q.d;
    let delta2 = ad * ad - ad * q.c * q.lambda;
    if delta2 < T::zero() {
        return Err(ReturnMapError::ComplexEigenvalues {
            delta2: delta2.to_f64().unwrap_or(f64::NAN),
        });
    }
    let sq = delta2.sqrt();
    let two = T::of(2.0);
    let cl = q.c * q.lambda;
    let xi_plus = (two * ad - cl + two * sq) / cl;
    let xi_minus = (two * ad - cl - two * sq) / cl;
    let omega_plus = q.a * q.c / (ad + sq);
    let omega_minus = q.a * q.c / (ad - sq);
    // The line x = omega * y has direction (omega, 1).
    let line_plus = OriginLine::from_direction(omega_plus, T::one());
    let line_minus = OriginLine::from_direction(omega_minus, T::one());
    let system = NormalForm::new(*params);
    Ok(ReturnMapEigen {
        delta2,
        xi_plus,
        xi_minus,
        omega_plus,
        omega_minus,
        location_plus: locate_line(&system, &line_plus),
        location_minus: locate_line(&system, &line_minus),
        line_plus,
        line_minus,
    })
}

/// Why an orbit of the first-return map stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OrbitStatus {
    /// Entered the closure of the sliding region.
    ReachedSliding,
    /// Mapped onto itself to tolerance.
    FixedPoint,
    /// Left the radius bound.
    LeftBound,
    /// The radicand went negative.
    ComplexBranch,
    MaxIter,
    /// The caller's predicate fired.
    Stopped,
}

#[derive(Clone, Debug, Serialize)]
pub struct Orbit<T> {
    /// Visited points, starting with the initial one.
    pub points: Vec<Point2<T>>,
    pub status: OrbitStatus,
}

/// Iterates the first-return map from `q0` until a terminal condition:
/// entering the closure of the sliding region, leaving `|q| > bound`,
/// hitting a complex branch, `max_iter`, a fixed point, or the caller's
/// `stop` predicate.
pub fn iterate_return_map<T: Real, F: FnMut(Point2<T>) -> bool>(
    params: &ParamSet<T>,
    q0: Point2<T>,
    max_iter: usize,
    bound: T,
    mut stop: F,
) -> Orbit<T> {
    let mut points = vec![q0];
    let mut q = q0;
    for _ in 0..max_iter {
        if stop(q) {
            return Orbit {
                points,
                status: OrbitStatus::Stopped,
            };
        }
        if in_sliding_closure(params, q) {
            return Orbit {
                points,
                status: OrbitStatus::ReachedSliding,
            };
        }
        let next = match first_return_map(params, q) {
            Ok(r) => r.image,
            Err(_) => {
                return Orbit {
                    points,
                    status: OrbitStatus::ComplexBranch,
                }
            }
        };
        if next.dist(&q) <= T::of(1e-14) * (T::one() + q.norm()) {
            return Orbit {
                points,
                status: OrbitStatus::FixedPoint,
            };
        }
        points.push(next);
        q = next;
        if q.norm() > bound {
            return Orbit {
                points,
                status: OrbitStatus::LeftBound,
            };
        }
    }
    Orbit {
        points,
        status: OrbitStatus::MaxIter,
    }
}

/// Closure of the sliding region for the normal family:
/// `X3 <= 0 and Y3 >= 0`.
pub fn in_sliding_closure<T: Real>(params: &ParamSet<T>, q: Point2<T>) -> bool {
    let x3 = params.b * (q.y + q.x * q.x);
    x3 <= T::zero() && q.x >= T::zero()
}
