//! Points, metric and reference densities of treebolic space `HT(q, p)`.
//!
//! A point is stored non-redundantly as its real part `x` and its tree
//! point `w`; the imaginary part is `q^hor(w)`.

use crate::error::{Error, Result};
use crate::hyperbolic::{self, HPoint};
use crate::tree::{PointRelation, TreePoint, TreeVertex};

/// `log(1 + √2)`, the half-width of the metric sandwich.
pub const SANDWICH_DELTA: f64 = 0.881_373_587_019_543;

/// Default absolute tolerance on the crossing abscissa.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HTParams {
    q: f64,
    p: u32,
}

impl HTParams {
    pub fn new(q: f64, p: u32) -> Result<Self> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("q must exceed 1, got {q}")));
        }
        if p < 1 {
            return Err(Error::InvalidParameter("p must be at least 1".into()));
        }
        Ok(HTParams { q, p })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Base used for the p-adic vertex encoding. The sliced plane (`p = 1`)
    /// has a single successor per vertex, so only the level matters there and
    /// any base works; base 2 restricted to successor 0 is used.
    pub fn tree_base(&self) -> u32 {
        self.p.max(2)
    }

    pub fn origin(&self) -> HTPoint {
        HTPoint {
            x: 0.0,
            w: TreePoint::vertex(TreeVertex::root(self.tree_base())),
        }
    }

    /// Half-plane projection.
    pub fn project(&self, z: &HTPoint) -> HPoint {
        HPoint {
            x: z.x,
            y: self.q.powf(z.w.hor()),
        }
    }

    pub fn distance(&self, a: &HTPoint, b: &HTPoint) -> f64 {
        self.distance_with_tol(a, b, DEFAULT_TOL)
    }

    pub fn distance_with_tol(&self, a: &HTPoint, b: &HTPoint, tol: f64) -> f64 {
        let (za, zb) = (self.project(a), self.project(b));
        match a.w.relation(&b.w) {
            PointRelation::Ancestor { .. } => hyperbolic::distance(&za, &zb),
            PointRelation::Branching(c) => {
                let height = self.q.powi(c.level() as i32);
                crossing_minimum(&za, &zb, height, tol).1
            }
        }
    }

    /// `d_H + log q · d_T - |log Im z1 - log Im z2|`, bracketing the metric:
    /// `d <= mid <= d + 2δ`.
    pub fn sandwich(&self, a: &HTPoint, b: &HTPoint) -> Sandwich {
        let (za, zb) = (self.project(a), self.project(b));
        let lq = self.q.ln();
        let mid = hyperbolic::distance(&za, &zb) + lq * a.w.distance(&b.w)
            - lq * (a.w.hor() - b.w.hor()).abs();
        Sandwich {
            mid,
            lower: mid - 2.0 * SANDWICH_DELTA,
            upper: mid,
        }
    }

    /// `β^hor(v) y^α` for the strip `S_v \ L_{v⁻}` containing the point.
    pub fn measure_density(&self, z: &HTPoint, alpha: f64, beta: f64) -> f64 {
        let y = self.q.powf(z.w.hor());
        beta.powi(z.w.upper().level() as i32) * y.powf(alpha)
    }
}

/// Tree density `β^hor(v) q^((α-1) hor(w))` for `w ∈ (v⁻, v]`.
pub fn tree_measure_density(w: &TreePoint, alpha: f64, beta: f64, q: f64) -> f64 {
    beta.powi(w.upper().level() as i32) * q.powf((alpha - 1.0) * w.hor())
}

/// Bounds on the distance obtained from the sandwich inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub mid: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HTPoint {
    pub x: f64,
    pub w: TreePoint,
}

impl HTPoint {
    pub fn new(x: f64, w: TreePoint) -> Self {
        HTPoint { x, w }
    }
}

/// Number of uniform grid cells used to locate the basin of the global
/// minimum before golden-section refinement.
const GRID_CELLS: usize = 64;
/// Geometric refinement of the grid towards both endpoints, where narrow
/// basins sit when the two points are far apart horizontally.
const END_REFINEMENTS: i32 = 48;

/// Minimize `d(z1, x + i h) + d(x + i h, z2)` over `x`, for two points on or
/// above the horizontal line at height `h`. Returns `(x*, value)`.
///
/// The objective decreases to the left of `min(x1, x2)` and increases to the
/// right of `max(x1, x2)`, so the minimizer lies between the abscissae. It
/// is not unimodal in general (far-apart points produce one basin near each
/// endpoint), so a global grid scan picks the best basin first.
pub fn crossing_minimum(z1: &HPoint, z2: &HPoint, h: f64, tol: f64) -> (f64, f64) {
    let f = |x: f64| {
        let z = HPoint { x, y: h };
        hyperbolic::distance(z1, &z) + hyperbolic::distance(&z, z2)
    };
    let (lo, hi) = if z1.x <= z2.x { (z1.x, z2.x) } else { (z2.x, z1.x) };
    let width = hi - lo;
    if width <= tol {
        let x = 0.5 * (lo + hi);
        return (x, f(x));
    }
    let mut grid: Vec<f64> = (0..=GRID_CELLS)
        .map(|i| lo + width * i as f64 / GRID_CELLS as f64)
        .collect();
    for k in 1..=END_REFINEMENTS {
        let off = width * 2f64.powi(-k) / GRID_CELLS as f64;
        grid.push(lo + off);
        grid.push(hi - off);
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();

    let mut best = (grid[0], values[0]);
    // refine every discrete local minimum; usually one or two
    for i in 0..grid.len() {
        let left_ok = i == 0 || values[i] <= values[i - 1];
        let right_ok = i + 1 == grid.len() || values[i] <= values[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let a = grid[i.saturating_sub(1)];
        let b = grid[(i + 1).min(grid.len() - 1)];
        let cand = golden_section(&f, a, b, tol);
        if cand.1 < best.1 {
            best = cand;
        }
        if values[i] < best.1 {
            best = (grid[i], values[i]);
        }
    }
    best
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iter = 0;
    while (b - a).abs() > tol && iter < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|u, v| u.1.total_cmp(&v.1))
        .unwrap()
}
