use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Scalar;

/// Planar coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance_sq(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Mirror image of `self` across the line through `a` and `b`.
    /// Returns `None` when `a` and `b` coincide.
    pub fn reflect_across(&self, a: &Self, b: &Self) -> Option<Self> {
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        let len_sq = dx * dx + dy * dy;
        if len_sq <= T::zero() {
            return None;
        }
        let t = ((self.x - a.x) * dx + (self.y - a.y) * dy) / len_sq;
        let foot = Point::new(a.x + t * dx, a.y + t * dy);
        let two = T::lit(2.0);
        Some(Point::new(two * foot.x - self.x, two * foot.y - self.y))
    }
}

/// Axis-aligned deployment rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawRegion<T>",
    bound(deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct Region<T> {
    pub x_min: T,
    pub x_max: T,
    pub y_min: T,
    pub y_max: T,
}

#[derive(Deserialize)]
struct RawRegion<T> {
    x_min: T,
    x_max: T,
    y_min: T,
    y_max: T,
}

impl<T: Scalar> TryFrom<RawRegion<T>> for Region<T> {
    type Error = crate::Error;

    fn try_from(r: RawRegion<T>) -> Result<Self> {
        Region::new(r.x_min, r.x_max, r.y_min, r.y_max)
    }
}

impl<T: Scalar> Region<T> {
    pub fn new(x_min: T, x_max: T, y_min: T, y_max: T) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || !(x_min < x_max) || !(y_min < y_max) {
            return Err(domain(format!(
                "degenerate region [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    /// Square `[0, side] x [0, side]`.
    pub fn square(side: T) -> Result<Self> {
        Self::new(T::zero(), side, T::zero(), side)
    }

    pub fn width(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> T {
        self.y_max - self.y_min
    }

    pub fn diagonal(&self) -> T {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: &Point<T>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn corners(&self) -> [Point<T>; 4] {
        [
            Point::new(self.x_min, self.y_min),
            Point::new(self.x_max, self.y_min),
            Point::new(self.x_min, self.y_max),
            Point::new(self.x_max, self.y_max),
        ]
    }

    pub fn clamp(&self, p: Point<T>) -> Point<T> {
        Point::new(
            p.x.max(self.x_min).min(self.x_max),
            p.y.max(self.y_min).min(self.y_max),
        )
    }

    /// Maps a pair of unit-interval variates onto the region.
    pub fn lerp(&self, u: T, v: T) -> Point<T> {
        Point::new(
            self.x_min + u * self.width(),
            self.y_min + v * self.height(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_preserves_distances_to_both_anchors() {
        let a: Point<f64> = Point::new(1.0, 2.0);
        let b: Point<f64> = Point::new(7.0, -3.0);
        let p: Point<f64> = Point::new(4.0, 5.0);
        let m = p.reflect_across(&a, &b).unwrap();
        assert!((m.distance(&a) - p.distance(&a)).abs() < 1e-12);
        assert!((m.distance(&b) - p.distance(&b)).abs() < 1e-12);
        assert!(m.distance(&p) > 1.0);
        assert!(p.reflect_across(&a, &a).is_none());
    }

    #[test]
    fn region_validation() {
        assert!(Region::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(Region::new(0.0, 1.0, 2.0, 1.0).is_err());
        assert!(Region::new(0.0, f64::NAN, 0.0, 1.0).is_err());
        let r = Region::square(100.0).unwrap();
        assert!((r.diagonal() - 100.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(r.contains(&Point::new(100.0, 0.0)));
        assert!(!r.contains(&Point::new(100.1, 0.0)));
    }

    #[test]
    fn region_json_is_validated() {
        let bad = r#"{"x_min":1.0,"x_max":0.0,"y_min":0.0,"y_max":1.0}"#;
        assert!(serde_json::from_str::<Region<f64>>(bad).is_err());
        let good = r#"{"x_min":0.0,"x_max":2.0,"y_min":0.0,"y_max":1.0}"#;
        let r: Region<f64> = serde_json::from_str(good).unwrap();
        assert_eq!(r.width(), 2.0);
    }
}
