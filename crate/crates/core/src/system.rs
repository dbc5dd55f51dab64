//! Piecewise system handles.
//!
//! A piecewise-smooth system is a pair of smooth vector fields separated by
//! the plane `z = 0`: the upper field governs `z >= 0`, the lower field
//! `z <= 0`. Classification of tangency points needs the first three Lie
//! derivatives of `z` along each field, so a [`System`] exposes those next
//! to plain evaluation. The built-in normal form provides them in closed
//! form; DSL-defined systems derive them symbolically.

use serde::Serialize;

use crate::geom::{Point3, Vec3};
use crate::params::ParamSet;
use crate::real::Real;

/// Which of the two smooth fields is meant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FieldSide {
    /// The field governing `z >= 0`.
    X,
    /// The field governing `z <= 0`.
    Y,
}

impl FieldSide {
    /// Sign of the half-space the field owns: `+1` for X, `-1` for Y.
    pub fn half_space_sign(self) -> f64 {
        match self {
            FieldSide::X => 1.0,
            FieldSide::Y => -1.0,
        }
    }
}

pub trait System<T: Real> {
    fn field(&self, side: FieldSide, p: Point3<T>) -> Vec3<T>;

    /// First three Lie derivatives of `z` along the chosen field at `p`:
    /// `[L^1 z, L^2 z, L^3 z]` where `L^1 z` is the normal component itself.
    fn lie_derivatives(&self, side: FieldSide, p: Point3<T>) -> [T; 3];

    fn upper(&self, p: Point3<T>) -> Vec3<T> {
        self.field(FieldSide::X, p)
    }

    fn lower(&self, p: Point3<T>) -> Vec3<T> {
        self.field(FieldSide::Y, p)
    }
}

/// The built-in family `X = (a, lambda, b(y+x^2))`, `Y = (c, d, x)`.
#[derive(Clone, Copy, Debug)]
pub struct NormalForm<T> {
    pub params: ParamSet<T>,
}

impl<T: Real> NormalForm<T> {
    pub fn new(params: ParamSet<T>) -> Self {
        Self { params }
    }
}

/// Evaluates the upper field of the normal family: `(a, lambda, b(y+x^2))`.
pub fn eval_normal_form_x<T: Real>(params: &ParamSet<T>, p: Point3<T>) -> Vec3<T> {
    Vec3::new(params.a, params.lambda, params.b * (p.y + p.x * p.x))
}

/// Evaluates the lower field of the normal family: `(c, d, x)`.
pub fn eval_normal_form_y<T: Real>(params: &ParamSet<T>, p: Point3<T>) -> Vec3<T> {
    Vec3::new(params.c, params.d, p.x)
}

impl<T: Real> System<T> for NormalForm<T> {
    fn field(&self, side: FieldSide, p: Point3<T>) -> Vec3<T> {
        match side {
            FieldSide::X => eval_normal_form_x(&self.params, p),
            FieldSide::Y => eval_normal_form_y(&self.params, p),
        }
    }

    fn lie_derivatives(&self, side: FieldSide, p: Point3<T>) -> [T; 3] {
        let q = &self.params;
        match side {
            // L1 = b(y+x^2), L2 = b(2ax + lambda), L3 = 2 a^2 b
            FieldSide::X => [
                q.b * (p.y + p.x * p.x),
                q.b * (T::of(2.0) * q.a * p.x + q.lambda),
                T::of(2.0) * q.a * q.a * q.b,
            ],
            // L1 = x, L2 = c, L3 = 0
            FieldSide::Y => [p.x, q.c, T::zero()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> NormalForm<f64> {
        NormalForm::new(ParamSet::canonical(0.0))
    }

    #[test]
    fn upper_field_values() {
        let s = canonical();
        // Tangency at the origin: y + x^2 = 0.
        assert_eq!(s.upper(Point3::new(0.0, 0.0, 0.0)), Vec3::new(-1.0, 0.0, 0.0));
        // On the parabola y = -x^2 the normal component vanishes.
        assert_eq!(s.upper(Point3::new(1.0, -1.0, 0.0)), Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(s.upper(Point3::new(1.0, 0.0, 0.0)), Vec3::new(-1.0, 0.0, -1.0));
    }

    #[test]
    fn lower_field_values() {
        let s = canonical();
        assert_eq!(s.lower(Point3::new(0.0, 0.0, 0.0)), Vec3::new(1.0, -2.0, 0.0));
        assert_eq!(s.lower(Point3::new(1.0, 0.0, 0.0)), Vec3::new(1.0, -2.0, 1.0));
        assert_eq!(s.lower(Point3::new(-2.0, -1.0, 0.0)), Vec3::new(1.0, -2.0, -2.0));
    }

    #[test]
    fn lie_derivatives_match_closed_forms() {
        let s = canonical();
        let p = Point3::new(1.0, -1.0, 0.0);
        let lx = s.lie_derivatives(FieldSide::X, p);
        assert_eq!(lx, [0.0, 2.0, -2.0]);
        let ly = s.lie_derivatives(FieldSide::Y, p);
        assert_eq!(ly, [1.0, 1.0, 0.0]);
    }
}
