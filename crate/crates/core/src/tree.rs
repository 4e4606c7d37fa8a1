//! The homogeneous tree `T_p` with a fixed reference end `ω`.
//!
//! Vertices at horocycle level `m` are the closed p-adic balls of radius
//! `p^-m`, so moving *up* the tree (towards `∂*T = Q_p`) shrinks the ball and
//! the predecessor of a vertex is the ball of radius `p^(1-m)` containing it.
//! The root `o` is the unit ball around `0`.

use std::fmt;

use crate::error::{Error, Result};
use crate::padic::{PadicRational, Valuation};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TreeVertex {
    level: i64,
    center: PadicRational,
}

impl TreeVertex {
    /// The ball of radius `p^-level` containing `point`.
    pub fn new(point: &PadicRational, level: i64) -> Self {
        TreeVertex {
            level,
            center: point.canonical_ball_center(level),
        }
    }

    pub fn root(base: u32) -> Self {
        TreeVertex::new(&PadicRational::zero(base), 0)
    }

    pub fn base(&self) -> u32 {
        self.center.base()
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    /// Busemann function; equals the level for vertices.
    pub fn hor(&self) -> i64 {
        self.level
    }

    pub fn center(&self) -> &PadicRational {
        &self.center
    }

    pub fn predecessor(&self) -> TreeVertex {
        TreeVertex::new(&self.center, self.level - 1)
    }

    /// The `j`-th successor, `0 <= j < p`.
    pub fn successor(&self, j: u32) -> TreeVertex {
        let p = self.base();
        assert!(j < p, "successor index {j} out of range for p = {p}");
        let shift = PadicRational::from_int(p, j as i64).mul_pow(self.level);
        TreeVertex {
            level: self.level + 1,
            center: &self.center + &shift,
        }
    }

    pub fn successors(&self) -> Vec<TreeVertex> {
        (0..self.base()).map(|j| self.successor(j)).collect()
    }

    /// Maximal common ancestor with respect to `ω`.
    pub fn confluent(&self, other: &TreeVertex) -> TreeVertex {
        assert_eq!(self.base(), other.base(), "vertices of different trees");
        let mut level = self.level.min(other.level);
        if let Valuation::Finite(v) = (&self.center - &other.center).valuation() {
            level = level.min(v);
        }
        TreeVertex::new(&self.center, level)
    }

    /// Graph distance.
    pub fn distance(&self, other: &TreeVertex) -> i64 {
        let c = self.confluent(other);
        self.level + other.level - 2 * c.level
    }

    /// `self` lies on the geodesic from `ω` to `other` (inclusive).
    pub fn is_ancestor_of(&self, other: &TreeVertex) -> bool {
        self.level <= other.level && self.center.within_ball(&other.center, self.level)
    }

    /// Cone membership for a vertex.
    pub fn cone_contains(&self, other: &TreeVertex) -> bool {
        self.is_ancestor_of(other)
    }

    pub fn cone_contains_end(&self, end: &TreeEnd) -> bool {
        match end {
            TreeEnd::Omega => false,
            TreeEnd::Rational(u) => self.center.within_ball(u, self.level),
        }
    }

    /// `λ*` mass of the boundary arc above this vertex.
    pub fn boundary_mass(&self) -> f64 {
        (self.base() as f64).powi(-(self.level as i32))
    }

    /// Index `j` such that `self == self.predecessor().successor(j)`.
    pub fn child_index(&self) -> u32 {
        self.center.digits(self.level - 1, self.level)[0]
    }
}

impl fmt::Display for TreeVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})@{}", self.center, self.level)
    }
}

/// A point of the metric tree: `offset` in `(0, 1]` along the edge
/// `[v⁻, v]` measured from `v⁻`; `offset == 1` is the vertex `v` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePoint {
    upper: TreeVertex,
    offset: f64,
}

impl TreePoint {
    pub fn new(upper: TreeVertex, offset: f64) -> Result<Self> {
        if !(offset > 0.0 && offset <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "edge offset must lie in (0, 1], got {offset}"
            )));
        }
        Ok(TreePoint { upper, offset })
    }

    pub fn vertex(v: TreeVertex) -> Self {
        TreePoint { upper: v, offset: 1.0 }
    }

    /// The point of the closed edge `[v⁻, v]` at height `hor`; the lower end
    /// is reported as the vertex `v⁻`.
    pub fn on_edge(v: &TreeVertex, hor: f64) -> Self {
        let t = hor - (v.level() - 1) as f64;
        if t <= 0.0 {
            TreePoint::vertex(v.predecessor())
        } else {
            TreePoint {
                upper: v.clone(),
                offset: t.min(1.0),
            }
        }
    }

    pub fn upper(&self) -> &TreeVertex {
        &self.upper
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn is_vertex(&self) -> bool {
        self.offset == 1.0
    }

    pub fn hor(&self) -> f64 {
        (self.upper.level - 1) as f64 + self.offset
    }

    /// Confluent of two tree points, as a point.
    pub fn confluent(&self, other: &TreePoint) -> TreePoint {
        match self.relation(other) {
            PointRelation::Ancestor { lower_is_self: true } => self.clone(),
            PointRelation::Ancestor { lower_is_self: false } => other.clone(),
            PointRelation::Branching(c) => TreePoint::vertex(c),
        }
    }

    pub fn distance(&self, other: &TreePoint) -> f64 {
        let c = self.confluent(other);
        self.hor() + other.hor() - 2.0 * c.hor()
    }

    /// Either one point lies on the ray from the other to `ω`, or the
    /// confluent is a vertex strictly below both.
    pub fn relation(&self, other: &TreePoint) -> PointRelation {
        if self.upper == other.upper {
            return PointRelation::Ancestor {
                lower_is_self: self.offset <= other.offset,
            };
        }
        let c = self.upper.confluent(&other.upper);
        if c == self.upper {
            PointRelation::Ancestor { lower_is_self: true }
        } else if c == other.upper {
            PointRelation::Ancestor { lower_is_self: false }
        } else {
            PointRelation::Branching(c)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointRelation {
    Ancestor { lower_is_self: bool },
    Branching(TreeVertex),
}

/// The reference end `ω` or a rational end in `∂*T = Q_p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeEnd {
    Omega,
    Rational(PadicRational),
}

/// Serialize a vertex through its `Display` form.
pub fn serialize_vertex<S: serde::Serializer>(v: &TreeVertex, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}
