//! Planar locations in kilometres and the Euclidean metric.

use serde::{Deserialize, Serialize};

use crate::Scalar;

/// A point in the service region, coordinates in km relative to the region center.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Location<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Location<T> {
    pub const fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Point at `radius` from `center` in direction `angle` (radians).
    pub fn polar(center: Self, radius: T, angle: T) -> Self {
        Self::new(center.x + radius * angle.cos(), center.y + radius * angle.sin())
    }

    pub fn scaled(self, factor: T) -> Self {
        Self::new(self.x * factor, self.y * factor)
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(self, other: Self) -> T {
        distance(self, other)
    }
}

/// Euclidean distance between two locations.
#[inline]
pub fn distance<T: Scalar>(a: Location<T>, b: Location<T>) -> T {
    (a.x - b.x).hypot(a.y - b.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        assert_eq!(distance(Location::new(0.0, 0.0), Location::new(3.0, 4.0)), 5.0);
        assert_eq!(distance(Location::new(1.0, 1.0), Location::new(1.0, 1.0)), 0.0);
        assert_eq!(distance(Location::new(-2.0, 0.0), Location::new(2.0, 0.0)), 4.0);
        assert_eq!(distance(Location::new(0.0f32, 0.0), Location::new(3.0, 4.0)), 5.0f32);
    }

    fn loc() -> impl Strategy<Value = Location<f64>> {
        (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y)| Location::new(x, y))
    }

    proptest! {
        #[test]
        fn symmetric_and_triangle(a in loc(), b in loc(), c in loc()) {
            prop_assert_eq!(distance(a, b), distance(b, a));
            prop_assert_eq!(distance(a, a), 0.0);
            prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-12);
        }
    }
}
