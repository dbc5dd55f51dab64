//! Pointwise classification of switching-plane points.
//!
//! The plane splits into crossing, sliding and escaping regions according to
//! the signs of the normal components of the two fields, with tangency
//! points (where either normal component vanishes) classified further by
//! contact order.

use serde::Serialize;
use thiserror::Error;

use crate::geom::Point3;
use crate::real::Real;
use crate::system::{FieldSide, System};

/// Filippov region of a switching-plane point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RegionLabel {
    /// Both normal components positive: orbits cross upwards.
    CrossingPlus,
    /// Both negative: orbits cross downwards.
    CrossingMinus,
    /// Upper field points down, lower field points up.
    Sliding,
    /// Upper field points up, lower field points down.
    Escaping,
    /// At least one normal component vanishes at tolerance.
    Tangential,
}

/// Contact of one field's orbit with the switching plane at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Contact {
    Transversal,
    /// Quadratic contact whose arc lies in the field's own half-space.
    FoldVisible,
    /// Quadratic contact whose arc leaves the field's half-space.
    FoldInvisible,
    /// Cubic contact.
    Cusp,
    /// First three Lie derivatives all below tolerance.
    HigherOrder,
}

impl Contact {
    pub fn is_fold(self) -> bool {
        matches!(self, Contact::FoldVisible | Contact::FoldInvisible)
    }

    pub fn is_tangent(self) -> bool {
        !matches!(self, Contact::Transversal)
    }
}

/// Combined two-field tangency label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TangencyKind {
    /// Both fields transversal.
    None,
    /// Exactly one field has a fold, the other is transversal.
    Fold,
    /// Both fields have folds.
    TwoFold,
    /// One field has a cusp, the other a fold.
    CuspFold,
    /// Any other combination (lone cusp, higher-order contact, ...).
    Other,
}

/// Per-field contact records plus the combined label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TangencyClass {
    pub upper: Contact,
    pub lower: Contact,
    pub combined: TangencyKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum RegionError {
    #[error("point is off the switching plane: |z| = {z} exceeds tolerance {tol}")]
    OffSigma { z: f64, tol: f64 },
}

/// Classifies a point of the switching plane into a Filippov region.
///
/// `tol` bounds both the admissible `|z|` of the input and the band around
/// zero (scaled by the local field magnitude) inside which a normal
/// component counts as vanishing.
pub fn classify_region<T: Real, S: System<T>>(
    system: &S,
    p: Point3<T>,
    tol: T,
) -> Result<RegionLabel, RegionError> {
    if p.z.abs() > tol {
        return Err(RegionError::OffSigma {
            z: p.z.abs().to_f64().unwrap_or(f64::NAN),
            tol: tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    let fx = system.upper(p);
    let fy = system.lower(p);
    let scale_x = T::one() + fx.inf_norm();
    let scale_y = T::one() + fy.inf_norm();
    if fx.v3.abs() <= tol * scale_x || fy.v3.abs() <= tol * scale_y {
        return Ok(RegionLabel::Tangential);
    }
    Ok(region_from_signs(fx.v3 > T::zero(), fy.v3 > T::zero()))
}

/// Sign-pair lookup: `(sign X3, sign Y3)` to region.
pub fn region_from_signs(x3_pos: bool, y3_pos: bool) -> RegionLabel {
    match (x3_pos, y3_pos) {
        (true, true) => RegionLabel::CrossingPlus,
        (false, false) => RegionLabel::CrossingMinus,
        (false, true) => RegionLabel::Sliding,
        (true, false) => RegionLabel::Escaping,
    }
}

/// Classifies the contact order of each field at a switching-plane point and
/// combines the two records.
///
/// Contact order is read off the Lie derivatives of `z` along the field:
/// transversal if the first does not vanish, fold if the second decides,
/// cusp if the third does. A fold of the upper field is visible iff
/// `L^2 z > 0` (the tangent arc bends into `z > 0`); for the lower field the
/// test mirrors to `L^2 z < 0`.
pub fn classify_tangency<T: Real, S: System<T>>(
    system: &S,
    p: Point3<T>,
    tol: T,
) -> Result<TangencyClass, RegionError> {
    if p.z.abs() > tol {
        return Err(RegionError::OffSigma {
            z: p.z.abs().to_f64().unwrap_or(f64::NAN),
            tol: tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    let upper = field_contact(system, FieldSide::X, p, tol);
    let lower = field_contact(system, FieldSide::Y, p, tol);
    Ok(TangencyClass {
        upper,
        lower,
        combined: combine(upper, lower),
    })
}

fn field_contact<T: Real, S: System<T>>(
    system: &S,
    side: FieldSide,
    p: Point3<T>,
    tol: T,
) -> Contact {
    let [l1, l2, l3] = system.lie_derivatives(side, p);
    let scale = T::one() + system.field(side, p).inf_norm();
    let band = tol * scale;
    if l1.abs() > band {
        return Contact::Transversal;
    }
    if l2.abs() > band {
        let visible = match side {
            FieldSide::X => l2 > T::zero(),
            FieldSide::Y => l2 < T::zero(),
        };
        return if visible {
            Contact::FoldVisible
        } else {
            Contact::FoldInvisible
        };
    }
    if l3.abs() > band {
        return Contact::Cusp;
    }
    Contact::HigherOrder
}

fn combine(upper: Contact, lower: Contact) -> TangencyKind {
    use Contact::*;
    match (upper, lower) {
        (Transversal, Transversal) => TangencyKind::None,
        (a, Transversal) | (Transversal, a) if a.is_fold() => TangencyKind::Fold,
        (a, b) if a.is_fold() && b.is_fold() => TangencyKind::TwoFold,
        (Cusp, b) if b.is_fold() => TangencyKind::CuspFold,
        (a, Cusp) if a.is_fold() => TangencyKind::CuspFold,
        _ => TangencyKind::Other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamSet;
    use crate::system::NormalForm;

    const TOL: f64 = 1e-9;

    fn sys(lambda: f64) -> NormalForm<f64> {
        NormalForm::new(ParamSet::canonical(lambda))
    }

    #[test]
    fn region_examples() {
        let s = sys(0.0);
        assert_eq!(
            classify_region(&s, Point3::new(1.0, 0.0, 0.0), TOL),
            Ok(RegionLabel::Sliding)
        );
        assert_eq!(
            classify_region(&s, Point3::new(-1.0, -2.0, 0.0), TOL),
            Ok(RegionLabel::Escaping)
        );
        assert_eq!(
            classify_region(&s, Point3::new(1.0, -1.0, 0.0), TOL),
            Ok(RegionLabel::Tangential)
        );
    }

    #[test]
    fn off_sigma_rejected() {
        let s = sys(0.0);
        assert!(classify_region(&s, Point3::new(0.0, 0.0, 0.5), TOL).is_err());
        assert!(classify_tangency(&s, Point3::new(0.0, 0.0, 0.5), TOL).is_err());
    }

    #[test]
    fn cusp_fold_at_origin_lambda_zero() {
        let s = sys(0.0);
        let t = classify_tangency(&s, Point3::new(0.0, 0.0, 0.0), TOL).unwrap();
        assert_eq!(t.upper, Contact::Cusp);
        assert_eq!(t.lower, Contact::FoldInvisible);
        assert_eq!(t.combined, TangencyKind::CuspFold);
    }

    #[test]
    fn two_fold_at_origin_lambda_nonzero() {
        // For lambda != 0 the upper field's contact at the origin drops to
        // quadratic (L^2 z = b*lambda there), so the origin is a two-fold.
        for lambda in [0.1, -0.1] {
            let s = sys(lambda);
            let t = classify_tangency(&s, Point3::new(0.0, 0.0, 0.0), TOL).unwrap();
            assert!(t.upper.is_fold(), "lambda={lambda}: {:?}", t.upper);
            assert_eq!(t.lower, Contact::FoldInvisible);
            assert_eq!(t.combined, TangencyKind::TwoFold);
        }
    }

    #[test]
    fn fold_on_parabola_away_from_origin() {
        let s = sys(0.0);
        let t = classify_tangency(&s, Point3::new(1.0, -1.0, 0.0), TOL).unwrap();
        assert_eq!(t.upper, Contact::FoldVisible);
        assert_eq!(t.lower, Contact::Transversal);
        assert_eq!(t.combined, TangencyKind::Fold);
        // Negative-x branch of the parabola is invisible.
        let t = classify_tangency(&s, Point3::new(-1.0, -1.0, 0.0), TOL).unwrap();
        assert_eq!(t.upper, Contact::FoldInvisible);
    }

    #[test]
    fn lower_fold_on_x_axis() {
        let s = sys(0.0);
        let t = classify_tangency(&s, Point3::new(0.0, 1.0, 0.0), TOL).unwrap();
        assert_eq!(t.lower, Contact::FoldInvisible);
        assert_eq!(t.upper, Contact::Transversal);
    }

    #[test]
    fn tangency_loci_are_exactly_the_curves() {
        // Upper field tangent iff |y + x^2| <= tol-band, lower iff |x| small.
        let s = sys(0.0);
        let mut state = 12345u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..1000 {
            let (x, y) = (next(), next());
            let p = Point3::new(x, y, 0.0);
            let t = classify_tangency(&s, p, TOL).unwrap();
            let on_sx = (y + x * x).abs() <= TOL * (1.0 + s.upper(p).inf_norm());
            let on_sy = x.abs() <= TOL * (1.0 + s.lower(p).inf_norm());
            assert_eq!(t.upper.is_tangent(), on_sx, "at ({x},{y})");
            assert_eq!(t.lower.is_tangent(), on_sy, "at ({x},{y})");
        }
    }

    #[test]
    fn partition_matches_sign_table() {
        let s = sys(0.0);
        let mut state = 999u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut counted = 0;
        for _ in 0..10_000 {
            let p = Point3::new(next(), next(), 0.0);
            let x3 = -(p.y + p.x * p.x);
            let y3 = p.x;
            if (x3 * y3).abs() <= 1e-6 {
                continue;
            }
            counted += 1;
            let got = classify_region(&s, p, TOL).unwrap();
            assert_eq!(got, region_from_signs(x3 > 0.0, y3 > 0.0));
        }
        assert!(counted > 9000);
    }
}
