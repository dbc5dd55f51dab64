//! Phase-space points and field values.
//!
//! The switching plane is always `z = 0`; the third component of a
//! [`Vec3`] is the normal component relative to it.

use serde::Serialize;

use crate::real::Real;

/// A point in phase space. Constructors reject non-finite coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        assert!(
            x.is_finite() && y.is_finite() && z.is_finite(),
            "point coordinates must be finite"
        );
        Self { x, y, z }
    }

    /// Point on the switching plane `z = 0`.
    pub fn on_sigma(x: T, y: T) -> Self {
        Self::new(x, y, T::zero())
    }

    pub fn planar(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }

    /// Euclidean distance to the origin.
    pub fn norm(&self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dist(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Value of a vector field at a point; `v3` is the component normal to the
/// switching plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Vec3<T> {
    pub v1: T,
    pub v2: T,
    pub v3: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(v1: T, v2: T, v3: T) -> Self {
        assert!(
            v1.is_finite() && v2.is_finite() && v3.is_finite(),
            "field components must be finite"
        );
        Self { v1, v2, v3 }
    }

    pub fn inf_norm(&self) -> T {
        self.v1.abs().max(self.v2.abs()).max(self.v3.abs())
    }

    pub fn norm(&self) -> T {
        (self.v1 * self.v1 + self.v2 * self.v2 + self.v3 * self.v3).sqrt()
    }

    pub fn scale(&self, k: T) -> Self {
        Vec3 {
            v1: self.v1 * k,
            v2: self.v2 * k,
            v3: self.v3 * k,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Vec3 {
            v1: self.v1 + other.v1,
            v2: self.v2 + other.v2,
            v3: self.v3 + other.v3,
        }
    }
}

/// A point of the switching plane in its own planar coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        assert!(x.is_finite() && y.is_finite(), "coordinates must be finite");
        Self { x, y }
    }

    pub fn norm(&self) -> T {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn dist(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    /// Embeds the planar point back into phase space on `z = 0`.
    pub fn lift(&self) -> Point3<T> {
        Point3::on_sigma(self.x, self.y)
    }
}

/// A planar vector (sliding-field values, eigenvectors).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Vec2<T> {
    pub v1: T,
    pub v2: T,
}

impl<T: Real> Vec2<T> {
    pub fn new(v1: T, v2: T) -> Self {
        Self { v1, v2 }
    }

    pub fn inf_norm(&self) -> T {
        self.v1.abs().max(self.v2.abs())
    }

    pub fn norm(&self) -> T {
        (self.v1 * self.v1 + self.v2 * self.v2).sqrt()
    }
}

/// A line through the origin of the switching plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum OriginLine<T> {
    /// `y = slope * x`.
    Slope(T),
    /// `x = 0`.
    Vertical,
}

impl<T: Real> OriginLine<T> {
    /// Line through the origin with direction `(dx, dy)`.
    pub fn from_direction(dx: T, dy: T) -> Self {
        if dx.abs() <= T::epsilon() * dy.abs() {
            OriginLine::Vertical
        } else {
            OriginLine::Slope(dy / dx)
        }
    }

    /// A point on the line at signed abscissa `s` (ordinate for vertical lines).
    pub fn point_at(&self, s: T) -> Point2<T> {
        match self {
            OriginLine::Slope(m) => Point2::new(s, *m * s),
            OriginLine::Vertical => Point2::new(T::zero(), s),
        }
    }
}
