//! Real roots of low-degree polynomials.
//!
//! Flight times of the closed-form flows are roots of a cubic (upper field)
//! or a quadratic (lower field) in time. Roots are computed in closed form
//! (stable quadratic formula, depressed-cubic discriminant analysis) and
//! polished with a Newton step against the original coefficients.

use crate::real::Real;

/// Roots of `c2*t^2 + c1*t + c0`, ascending. Degenerate leading coefficients
/// fall back to the linear/constant case.
pub fn solve_quadratic<T: Real>(c2: T, c1: T, c0: T) -> Vec<T> {
    let zero = T::zero();
    if c2 == zero {
        if c1 == zero {
            return Vec::new();
        }
        return vec![-c0 / c1];
    }
    let disc = c1 * c1 - T::of(4.0) * c2 * c0;
    if disc < zero {
        return Vec::new();
    }
    if disc == zero {
        return vec![-c1 / (T::of(2.0) * c2)];
    }
    // q = -(c1 + sgn(c1)*sqrt(disc))/2 avoids cancellation.
    let sq = disc.sqrt();
    let q = if c1 >= zero {
        -(c1 + sq) / T::of(2.0)
    } else {
        -(c1 - sq) / T::of(2.0)
    };
    let mut r = vec![q / c2, c0 / q];
    r.sort_by(|a, b| a.partial_cmp(b).unwrap());
    r
}

/// Real roots of `c3*t^3 + c2*t^2 + c1*t + c0`, ascending.
pub fn solve_cubic<T: Real>(c3: T, c2: T, c1: T, c0: T) -> Vec<T> {
    let zero = T::zero();
    if c3 == zero {
        return solve_quadratic(c2, c1, c0);
    }
    // Normalize and depress: t = s - b/3 turns t^3 + b t^2 + c t + d into
    // s^3 + p s + q.
    let b = c2 / c3;
    let c = c1 / c3;
    let d = c0 / c3;
    let third = T::of(1.0 / 3.0);
    let shift = b * third;
    let p = c - b * b * third;
    let q = d - b * c * third + T::of(2.0 / 27.0) * b * b * b;

    let half_q = q / T::of(2.0);
    let p3 = p * third;
    let disc = half_q * half_q + p3 * p3 * p3;

    let mut roots = if disc > zero {
        // One real root (Cardano).
        let sq = disc.sqrt();
        let u = cbrt(-half_q + sq);
        let v = cbrt(-half_q - sq);
        vec![u + v - shift]
    } else if disc == zero {
        if half_q == zero {
            vec![-shift]
        } else {
            let u = cbrt(-half_q);
            vec![T::of(2.0) * u - shift, -u - shift]
        }
    } else {
        // Three real roots (trigonometric form); p < 0 here.
        let m = (-p3).sqrt();
        let arg = (-half_q / (m * m * m)).max(T::of(-1.0)).min(T::of(1.0));
        let theta = arg.acos() * third;
        let two = T::of(2.0);
        let tau = T::of(2.0 * std::f64::consts::PI / 3.0);
        vec![
            two * m * theta.cos() - shift,
            two * m * (theta - tau).cos() - shift,
            two * m * (theta + tau).cos() - shift,
        ]
    };

    for r in roots.iter_mut() {
        *r = polish_cubic(c3, c2, c1, c0, *r);
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| {
        let scale = T::one() + a.abs().max(b.abs());
        (*a - *b).abs() <= T::epsilon() * T::of(16.0) * scale
    });
    roots
}

/// Smallest root strictly greater than `t_min`, or `None`.
pub fn smallest_root_above<T: Real>(roots: &[T], t_min: T) -> Option<T> {
    roots
        .iter()
        .copied()
        .filter(|t| *t > t_min)
        .min_by(|a, b| a.partial_cmp(b).unwrap())
}

fn cbrt<T: Real>(v: T) -> T {
    let third = T::of(1.0 / 3.0);
    if v >= T::zero() {
        v.powf(third)
    } else {
        -(-v).powf(third)
    }
}

fn polish_cubic<T: Real>(c3: T, c2: T, c1: T, c0: T, mut t: T) -> T {
    for _ in 0..2 {
        let f = ((c3 * t + c2) * t + c1) * t + c0;
        let df = (T::of(3.0) * c3 * t + T::of(2.0) * c2) * t + c1;
        if df == T::zero() {
            break;
        }
        let step = f / df;
        if !step.is_finite() {
            break;
        }
        t = t - step;
    }
    t
}
