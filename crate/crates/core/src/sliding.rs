//! Filippov sliding dynamics on the switching plane.
//!
//! On the sliding region the motion follows the unique convex combination of
//! the two fields that is tangent to the plane. The planar "normalized"
//! field drops the denominator of that combination; it is a positive
//! multiple of the true sliding field wherever `Y3 - X3 > 0` and extends
//! polynomially to the closure of the sliding region.

use serde::Serialize;
use thiserror::Error;

use crate::geom::{OriginLine, Point3, Vec2, Vec3};
use crate::params::ParamSet;
use crate::real::Real;
use crate::region::{classify_region, RegionLabel};
use crate::system::{NormalForm, System};

#[derive(Debug, Error, PartialEq)]
pub enum SlidingError {
    #[error("degenerate denominator Y3 - X3 = {denominator} (both fields near tangency)")]
    DegenerateDenominator { denominator: f64 },
    #[error("sliding Jacobian has complex eigenvalues (delta3 = {delta3})")]
    ComplexEigenvalues { delta3: f64 },
}

/// The Filippov sliding field `((X1 Y3 - Y1 X3), (X2 Y3 - Y2 X3), 0) / (Y3 - X3)`.
pub fn sliding_field<T: Real, S: System<T>>(
    system: &S,
    p: Point3<T>,
) -> Result<Vec3<T>, SlidingError> {
    let fx = system.upper(p);
    let fy = system.lower(p);
    let den = fy.v3 - fx.v3;
    let scale = T::one() + fx.v3.abs() + fy.v3.abs();
    if den.abs() <= T::epsilon() * T::of(64.0) * scale {
        return Err(SlidingError::DegenerateDenominator {
            denominator: den.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(Vec3 {
        v1: (fx.v1 * fy.v3 - fy.v1 * fx.v3) / den,
        v2: (fx.v2 * fy.v3 - fy.v2 * fx.v3) / den,
        v3: T::zero(),
    })
}

/// The planar normalized sliding field `(X1 Y3 - Y1 X3, X2 Y3 - Y2 X3)`.
///
/// For the normal family this equals
/// `(a x - b c (y + x^2), lambda x - d b (y + x^2))`.
pub fn normalized_sliding_field<T: Real, S: System<T>>(system: &S, p: Point3<T>) -> Vec2<T> {
    let fx = system.upper(p);
    let fy = system.lower(p);
    Vec2::new(
        fx.v1 * fy.v3 - fy.v1 * fx.v3,
        fx.v2 * fy.v3 - fy.v2 * fx.v3,
    )
}

/// True iff the normalized sliding field vanishes at `p` to tolerance.
pub fn is_pseudo_equilibrium<T: Real, S: System<T>>(system: &S, p: Point3<T>, tol: T) -> bool {
    normalized_sliding_field(system, p).inf_norm() <= tol
}

/// Where a line through the origin sits relative to the Filippov regions,
/// sampled two-sided at a small offset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LineLocation {
    /// Region at positive offset along the line.
    pub pos: RegionLabel,
    /// Region at negative offset.
    pub neg: RegionLabel,
}

impl LineLocation {
    pub fn within_crossing(&self) -> bool {
        let c = |r: RegionLabel| {
            matches!(r, RegionLabel::CrossingPlus | RegionLabel::CrossingMinus)
        };
        c(self.pos) && c(self.neg)
    }

    pub fn within_sliding_or_escaping(&self) -> bool {
        let se = |r: RegionLabel| matches!(r, RegionLabel::Sliding | RegionLabel::Escaping);
        se(self.pos) && se(self.neg)
    }
}

/// Eigen-structure of the normalized sliding field's Jacobian at the origin
/// of the normal family.
#[derive(Clone, Debug, Serialize)]
pub struct SlidingEigen<T> {
    /// Discriminant `(a + b d)^2 - 4 b c lambda`.
    pub delta3: T,
    /// Smaller eigenvalue (the `-sqrt` branch).
    pub eig1: T,
    /// Larger eigenvalue.
    pub eig2: T,
    pub vec1: Vec2<T>,
    pub vec2: Vec2<T>,
    pub line1: OriginLine<T>,
    pub line2: OriginLine<T>,
    pub region1: LineLocation,
    pub region2: LineLocation,
}

/// Closed-form eigenvalues, eigenvectors and invariant lines of the sliding
/// Jacobian `[[a, -bc], [lambda, -db]]` at the origin, with region location
/// of each eigenline sampled at `|x| = 1e-3`.
pub fn sliding_eigen_origin<T: Real>(params: &ParamSet<T>) -> Result<SlidingEigen<T>, SlidingError> {
    let q = params;
    let delta3 = (q.a + q.b * q.d) * (q.a + q.b * q.d) - T::of(4.0) * q.b * q.c * q.lambda;
    if delta3 < T::zero() {
        return Err(SlidingError::ComplexEigenvalues {
            delta3: delta3.to_f64().unwrap_or(f64::NAN),
        });
    }
    let half = T::of(0.5);
    let sq = delta3.sqrt();
    let eig1 = (q.a - q.b * q.d - sq) * half;
    let eig2 = (q.a - q.b * q.d + sq) * half;

    let j = [[q.a, -q.b * q.c], [q.lambda, -q.d * q.b]];
    let vec1 = eigenvector_2x2(&j, eig1);
    let vec2 = eigenvector_2x2(&j, eig2);
    let line1 = OriginLine::from_direction(vec1.v1, vec1.v2);
    let line2 = OriginLine::from_direction(vec2.v1, vec2.v2);

    let system = NormalForm::new(*params);
    let region1 = locate_line(&system, &line1);
    let region2 = locate_line(&system, &line2);

    Ok(SlidingEigen {
        delta3,
        eig1,
        eig2,
        vec1,
        vec2,
        line1,
        line2,
        region1,
        region2,
    })
}

/// Unit null vector of `J - mu I`, from whichever row is better conditioned.
pub(crate) fn eigenvector_2x2<T: Real>(j: &[[T; 2]; 2], mu: T) -> Vec2<T> {
    // (j11-mu) v1 + j12 v2 = 0  ->  v = (j12, -(j11-mu))
    let v_a = Vec2::new(j[0][1], -(j[0][0] - mu));
    // j21 v1 + (j22-mu) v2 = 0  ->  v = (j22-mu, -j21)
    let v_b = Vec2::new(j[1][1] - mu, -j[1][0]);
    let v = if v_a.norm() >= v_b.norm() { v_a } else { v_b };
    let n = v.norm();
    let v = Vec2::new(v.v1 / n, v.v2 / n);
    // Deterministic orientation: first significant component positive.
    let flip = if v.v1.abs() > T::of(1e-12) {
        v.v1 < T::zero()
    } else {
        v.v2 < T::zero()
    };
    if flip {
        Vec2::new(-v.v1, -v.v2)
    } else {
        v
    }
}

pub(crate) fn locate_line<T: Real, S: System<T>>(system: &S, line: &OriginLine<T>) -> LineLocation {
    let offset = T::of(1e-3);
    let tol = T::of(1e-9);
    let classify = |s: T| {
        classify_region(system, line.point_at(s).lift(), tol)
            .unwrap_or(RegionLabel::Tangential)
    };
    LineLocation {
        pos: classify(offset),
        neg: classify(-offset),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(lambda: f64) -> NormalForm<f64> {
        NormalForm::new(ParamSet::canonical(lambda))
    }

    #[test]
    fn sliding_field_example() {
        let s = sys(0.0);
        let v = sliding_field(&s, Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!((v.v1, v.v2, v.v3), (0.0, -1.0, 0.0));
    }

    #[test]
    fn degenerate_at_two_fold() {
        let s = sys(0.0);
        assert!(matches!(
            sliding_field(&s, Point3::new(0.0, 0.0, 0.0)),
            Err(SlidingError::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn normalized_examples() {
        let s = sys(0.0);
        let v = normalized_sliding_field(&s, Point3::new(1.0, 0.0, 0.0));
        assert_eq!((v.v1, v.v2), (0.0, -2.0));
        let v = normalized_sliding_field(&s, Point3::new(0.0, 0.0, 0.0));
        assert_eq!((v.v1, v.v2), (0.0, 0.0));
        let s = sys(0.1);
        let v = normalized_sliding_field(&s, Point3::new(1.0, 0.0, 0.0));
        assert!((v.v1 - 0.0).abs() < 1e-15 && (v.v2 + 1.9).abs() < 1e-15);
    }

    #[test]
    fn normalized_matches_closed_form() {
        let params = ParamSet::new(-1.3f64, -0.7, 0.9, -1.8, 0.07).unwrap();
        let s = NormalForm::new(params);
        let mut state = 3u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..200 {
            let (x, y) = (next(), next());
            let v = normalized_sliding_field(&s, Point3::new(x, y, 0.0));
            let w = y + x * x;
            let want1 = params.a * x - params.b * params.c * w;
            let want2 = params.lambda * x - params.d * params.b * w;
            assert!((v.v1 - want1).abs() <= 1e-13 * (1.0 + want1.abs()));
            assert!((v.v2 - want2).abs() <= 1e-13 * (1.0 + want2.abs()));
        }
    }

    #[test]
    fn pseudo_equilibrium_examples() {
        let s = sys(0.0);
        assert!(is_pseudo_equilibrium(&s, Point3::new(0.0, 0.0, 0.0), 1e-12));
        assert!(!is_pseudo_equilibrium(&s, Point3::new(1.0, 0.0, 0.0), 1e-6));
        assert!(!is_pseudo_equilibrium(&s, Point3::new(0.0, 0.3, 0.0), 1e-6));
    }

    #[test]
    fn convex_combination_on_sliding_region() {
        let s = sys(0.0);
        let mut state = 42u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut checked = 0;
        while checked < 1000 {
            // Sliding region of the canonical set: x > 0, y + x^2 > 0.
            let x = next() * 2.0 + 1e-3;
            let y = -x * x + next() * 2.0 + 1e-6;
            let p = Point3::new(x, y, 0.0);
            let fx = s.upper(p);
            let fy = s.lower(p);
            if (fy.v3 - fx.v3).abs() < 1e-6 {
                continue;
            }
            let alpha = fy.v3 / (fy.v3 - fx.v3);
            assert!((0.0..=1.0).contains(&alpha), "alpha = {alpha}");
            let slide = sliding_field(&s, p).unwrap();
            let combo = fx.scale(alpha).add(&fy.scale(1.0 - alpha));
            for (a, b) in [
                (slide.v1, combo.v1),
                (slide.v2, combo.v2),
                (slide.v3, combo.v3),
            ] {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
            }
            // Same orientation as the normalized field, positive factor.
            assert!(fy.v3 - fx.v3 > 0.0);
            checked += 1;
        }
    }

    #[test]
    fn eigen_origin_lambda_zero() {
        let e = sliding_eigen_origin(&ParamSet::<f64>::canonical(0.0)).unwrap();
        // Eigenvalues are exactly {-bd, a} = {-2, -1}.
        assert_eq!((e.eig1, e.eig2), (-2.0, -1.0));
        // eig2 = a has eigenline y = 0; eig1 = -bd has y = ((a+bd)/(bc)) x = -x.
        match e.line2 {
            OriginLine::Slope(m) => assert!(m.abs() < 1e-12),
            _ => panic!("expected horizontal line"),
        }
        match e.line1 {
            OriginLine::Slope(m) => assert!((m + 1.0).abs() < 1e-12),
            _ => panic!("expected slope -1"),
        }
        // The steep eigenline avoids the sliding region entirely.
        assert!(!matches!(e.region1.pos, RegionLabel::Sliding));
        assert!(!matches!(e.region1.neg, RegionLabel::Sliding));
    }

    #[test]
    fn eigen_origin_lambda_positive() {
        let e = sliding_eigen_origin(&ParamSet::<f64>::canonical(0.1)).unwrap();
        assert!((e.delta3 - 1.4).abs() < 1e-15);
        assert!((e.eig1 + 2.091_607_978_309_961_6).abs() < 1e-9, "{}", e.eig1);
        assert!((e.eig2 + 0.908_392_021_690_038_4).abs() < 1e-9, "{}", e.eig2);
        // Eigenvectors actually satisfy J v = mu v.
        let q = ParamSet::<f64>::canonical(0.1);
        let j = [[q.a, -q.b * q.c], [q.lambda, -q.d * q.b]];
        for (mu, v) in [(e.eig1, e.vec1), (e.eig2, e.vec2)] {
            let jv = Vec2::new(
                j[0][0] * v.v1 + j[0][1] * v.v2,
                j[1][0] * v.v1 + j[1][1] * v.v2,
            );
            assert!((jv.v1 - mu * v.v1).abs() <= 1e-10 * (1.0 + mu.abs()));
            assert!((jv.v2 - mu * v.v2).abs() <= 1e-10 * (1.0 + mu.abs()));
        }
        // Weak eigenline sits in sliding/escaping, strong one in crossing.
        assert!(e.region2.within_sliding_or_escaping());
        assert!(e.region1.within_crossing());
    }

    #[test]
    fn eigen_origin_lambda_negative_lines_cross() {
        let e = sliding_eigen_origin(&ParamSet::<f64>::canonical(-0.05)).unwrap();
        assert!(e.region1.within_crossing());
        assert!(e.region2.within_crossing());
    }

    #[test]
    fn complex_eigen_reported() {
        // Large positive lambda with bc < 0 drives delta3 negative:
        // delta3 = (a+bd)^2 - 4 bc lambda = 1 + 4 lambda needs lambda < -0.25.
        let err = sliding_eigen_origin(&ParamSet::<f64>::canonical(-0.3)).unwrap_err();
        assert!(matches!(err, SlidingError::ComplexEigenvalues { .. }));
    }

    #[test]
    fn eigen_matches_finite_difference_jacobian() {
        let params = ParamSet::new(-1.1f64, -0.9, 1.2, -1.7, 0.08).unwrap();
        let s = NormalForm::new(params);
        let h = 1e-6;
        let fd = |i: usize, j: usize| {
            let mut plus = [0.0, 0.0];
            let mut minus = [0.0, 0.0];
            plus[j] = h;
            minus[j] = -h;
            let vp = normalized_sliding_field(&s, Point3::new(plus[0], plus[1], 0.0));
            let vm = normalized_sliding_field(&s, Point3::new(minus[0], minus[1], 0.0));
            ([vp.v1, vp.v2][i] - [vm.v1, vm.v2][i]) / (2.0 * h)
        };
        let tr = fd(0, 0) + fd(1, 1);
        let det = fd(0, 0) * fd(1, 1) - fd(0, 1) * fd(1, 0);
        let disc = (tr * tr - 4.0 * det).sqrt();
        let (lo, hi) = ((tr - disc) / 2.0, (tr + disc) / 2.0);
        let e = sliding_eigen_origin(&params).unwrap();
        assert!((e.eig1 - lo).abs() <= 1e-6 * (1.0 + lo.abs()));
        assert!((e.eig2 - hi).abs() <= 1e-6 * (1.0 + hi.abs()));
    }
}
