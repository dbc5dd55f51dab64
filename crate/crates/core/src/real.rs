//! Scalar abstraction for the whole crate.
//!
//! All of the geometry, closed forms and integrators are generic over a
//! floating-point scalar. `f64` is what the CLI and the verification suites
//! use; `f32` works for the closed forms at correspondingly looser
//! tolerances.

use std::fmt;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar: `f32` or `f64` (or any type exposing the same
/// surface through `num_traits`).
pub trait Real: Float + FromPrimitive + fmt::Debug + fmt::Display + 'static {
    /// Converts an `f64` literal into the scalar type.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("scalar type must represent f64 literals")
    }
}

impl<T> Real for T where T: Float + FromPrimitive + fmt::Debug + fmt::Display + 'static {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_conversion_round_trips() {
        assert_eq!(f64::of(1.5), 1.5);
        assert_eq!(f32::of(0.25), 0.25f32);
    }
}
