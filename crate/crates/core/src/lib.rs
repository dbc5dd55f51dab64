//! Simulation and analysis of 3D piecewise-smooth (Filippov) vector fields
//! with the switching plane `z = 0`.
//!
//! The crate combines:
//!
//! - pointwise classification of switching-plane points into crossing,
//!   sliding and escaping regions, with fold/cusp tangency taxonomy
//!   ([`region`]);
//! - a small expression DSL for defining piecewise systems in text files,
//!   with symbolic differentiation so tangency analysis works for arbitrary
//!   fields ([`dsl`]);
//! - Filippov sliding dynamics and eigen-analysis of the sliding field at
//!   the origin ([`sliding`]);
//! - closed-form flows, half-return involutions and the first-return map of
//!   the built-in normal-form family, with its eigenstructure
//!   ([`return_map`]);
//! - an event-detecting hybrid simulator assembling full forward
//!   trajectories across crossings, sliding arcs and escapes ([`sim`]);
//! - executable verification of the stability dichotomy of the cusp-fold
//!   origin, driven by curve-image identities, monotone-growth and
//!   reach-sliding checks, and escape certificates ([`stability`]).
//!
//! Everything is generic over the scalar type through [`real::Real`];
//! the aliases at the crate root fix `f64`, which is what the CLI and the
//! acceptance tests use.

pub mod dsl;
pub mod geom;
pub mod params;
pub mod real;
pub mod region;
pub mod return_map;
pub mod roots;
pub mod sim;
pub mod sliding;
pub mod stability;
pub mod system;

pub use geom::{OriginLine, Point2, Point3, Vec2, Vec3};
pub use params::{ParamError, ParamSet};
pub use real::Real;
pub use region::{classify_region, classify_tangency, Contact, RegionLabel, TangencyClass, TangencyKind};
pub use system::{eval_normal_form_x, eval_normal_form_y, FieldSide, NormalForm, System};

/// Double-precision instantiations used by the CLI and most tests.
pub type Point3d = Point3<f64>;
pub type Point2d = Point2<f64>;
pub type Vec3d = Vec3<f64>;
pub type Vec2d = Vec2<f64>;
pub type Params = ParamSet<f64>;
