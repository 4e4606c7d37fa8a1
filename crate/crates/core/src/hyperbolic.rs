//! Upper half-plane geometry.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPoint {
    pub x: f64,
    pub y: f64,
}

/// Below this horizontal separation the apex is taken from the vertical case.
const VERTICAL_EPS: f64 = 1e-12;

impl HPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "half-plane point needs finite x and y > 0, got ({x}, {y})"
            )));
        }
        Ok(HPoint { x, y })
    }

    pub fn i() -> Self {
        HPoint { x: 0.0, y: 1.0 }
    }

    pub fn distance(&self, other: &HPoint) -> f64 {
        distance(self, other)
    }
}

/// Hyperbolic distance, `acosh(1 + |z1-z2|²/(2 y1 y2))`, evaluated as
/// `2 asinh(|z1-z2| / (2 sqrt(y1 y2)))` which stays accurate near zero.
pub fn distance(a: &HPoint, b: &HPoint) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let chord = dx.hypot(dy);
    2.0 * (chord / (2.0 * (a.y * b.y).sqrt())).asinh()
}

/// Highest point of the geodesic through `a` and `b`.
pub fn apex(a: &HPoint, b: &HPoint) -> HPoint {
    let dx = a.x - b.x;
    if dx.abs() < VERTICAL_EPS {
        return if a.y >= b.y { *a } else { *b };
    }
    let c = ((a.x * a.x + a.y * a.y) - (b.x * b.x + b.y * b.y)) / (2.0 * dx);
    let r = (a.x - c).hypot(a.y);
    // the apex lies above the segment only if the geodesic arc passes c
    let (lo, hi) = if a.x < b.x { (a.x, b.x) } else { (b.x, a.x) };
    if c > lo && c < hi {
        HPoint { x: c, y: r }
    } else if a.y >= b.y {
        *a
    } else {
        *b
    }
}

/// `log_q(Im z)`.
pub fn busemann(z: &HPoint, q: f64) -> f64 {
    z.y.ln() / q.ln()
}
