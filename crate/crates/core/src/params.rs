//! Parameters of the built-in normal-form family.
//!
//! The family is
//!
//! ```text
//! X(x,y,z) = ( a, lambda, b*(y + x^2) )   on z >= 0
//! Y(x,y,z) = ( c, d,      x          )   on z <= 0
//! ```
//!
//! with `b != 0` and `c != 0`. The stability regime of interest additionally
//! requires `a < 0`, `b < 0`, `c > 0`, `d < 0`, `b*d > 0` and `a + b*d > 0`.

use serde::Serialize;
use thiserror::Error;

use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParamSet<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub lambda: T,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("normal form is degenerate: b and c must be nonzero (b={b}, c={c})")]
    Degenerate { b: f64, c: f64 },
    #[error("parameter {name} must be finite")]
    NonFinite { name: &'static str },
}

impl<T: Real> ParamSet<T> {
    pub fn new(a: T, b: T, c: T, d: T, lambda: T) -> Result<Self, ParamError> {
        for (name, v) in [("a", a), ("b", b), ("c", c), ("d", d), ("lambda", lambda)] {
            if !v.is_finite() {
                return Err(ParamError::NonFinite { name });
            }
        }
        if b == T::zero() || c == T::zero() {
            return Err(ParamError::Degenerate {
                b: b.to_f64().unwrap_or(f64::NAN),
                c: c.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { a, b, c, d, lambda })
    }

    /// The reference parameter set `(a,b,c,d) = (-1,-1,1,-2)` at the given `lambda`.
    pub fn canonical(lambda: T) -> Self {
        Self::new(T::of(-1.0), T::of(-1.0), T::of(1.0), T::of(-2.0), lambda)
            .expect("canonical parameters are nondegenerate")
    }

    pub fn with_lambda(&self, lambda: T) -> Self {
        Self { lambda, ..*self }
    }

    /// True iff the parameters sit in the stability regime:
    /// `a<0, b<0, c>0, d<0, b*d>0, a+b*d>0`.
    pub fn satisfies_h1_to_h4(&self) -> bool {
        let zero = T::zero();
        self.a < zero
            && self.b < zero
            && self.c > zero
            && self.d < zero
            && self.b * self.d > zero
            && self.a + self.b * self.d > zero
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_satisfies_regime() {
        let p = ParamSet::<f64>::canonical(0.0);
        assert!(p.satisfies_h1_to_h4());
        assert!(p.with_lambda(-0.05).satisfies_h1_to_h4());
    }

    #[test]
    fn degenerate_rejected() {
        assert_eq!(
            ParamSet::new(-1.0, 0.0, 1.0, -2.0, 0.0),
            Err(ParamError::Degenerate { b: 0.0, c: 1.0 })
        );
        assert!(ParamSet::new(-1.0, -1.0, 0.0, -2.0, 0.0).is_err());
    }

    #[test]
    fn regime_boundaries() {
        // d > 0 breaks the regime even with the other signs right.
        let p = ParamSet::new(-1.0f64, -1.0, 1.0, 2.0, 0.0).unwrap();
        assert!(!p.satisfies_h1_to_h4());
        // a + b*d <= 0 breaks it.
        let p = ParamSet::new(-3.0f64, -1.0, 1.0, -2.0, 0.0).unwrap();
        assert!(!p.satisfies_h1_to_h4());
    }
}
