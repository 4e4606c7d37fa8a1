//! The isometry group `A(q, p)` of treebolic space.
//!
//! An element pairs an affine map `z ↦ q^n z + b` of the half-plane with a
//! p-adic affine map `u ↦ p^k u + c` acting on tree vertices as balls, under
//! the matching constraint `n = k` (the level shift `Φ`).

use std::fmt;

use crate::error::{Error, Result};
use crate::padic::PadicRational;
use crate::tree::{TreePoint, TreeVertex};
use crate::treebolic::HTPoint;

/// `z ↦ q^n z + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffH {
    pub q: f64,
    pub n: i64,
    pub b: f64,
}

impl AffH {
    pub fn compose(&self, other: &AffH) -> AffH {
        assert_eq!(self.q, other.q, "affine maps over different q");
        AffH {
            q: self.q,
            n: self.n + other.n,
            b: self.b + self.q.powi(self.n as i32) * other.b,
        }
    }

    pub fn inverse(&self) -> AffH {
        let s = self.q.powi(-self.n as i32);
        AffH { q: self.q, n: -self.n, b: -s * self.b }
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.q.powi(self.n as i32) * x + self.b
    }

    pub fn modular(&self) -> f64 {
        self.q.powi(-self.n as i32)
    }
}

/// `u ↦ p^k u + c` on `Z[1/p]`, extended to balls.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AffT {
    pub k: i64,
    pub c: PadicRational,
}

impl AffT {
    pub fn identity(base: u32) -> Self {
        AffT { k: 0, c: PadicRational::zero(base) }
    }

    pub fn base(&self) -> u32 {
        self.c.base()
    }

    pub fn compose(&self, other: &AffT) -> AffT {
        AffT {
            k: self.k + other.k,
            c: &self.c + &other.c.mul_pow(self.k),
        }
    }

    pub fn inverse(&self) -> AffT {
        AffT { k: -self.k, c: -&self.c.mul_pow(-self.k) }
    }

    pub fn apply(&self, u: &PadicRational) -> PadicRational {
        &u.mul_pow(self.k) + &self.c
    }

    pub fn apply_vertex(&self, v: &TreeVertex) -> TreeVertex {
        TreeVertex::new(&self.apply(v.center()), v.level() + self.k)
    }

    /// Level shift `hor(γw) - hor(w)`.
    pub fn phi(&self) -> i64 {
        self.k
    }

    pub fn modular(&self) -> f64 {
        (self.base() as f64).powi(self.k as i32)
    }
}

/// An element of the fibered product `A(q, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AfElement {
    h: AffH,
    t: AffT,
}

impl AfElement {
    pub fn new(h: AffH, t: AffT) -> Result<Self> {
        if h.n != t.k {
            return Err(Error::InvalidParameter(format!(
                "level shifts disagree: plane n = {}, tree Φ = {}",
                h.n, t.k
            )));
        }
        Ok(AfElement { h, t })
    }

    pub fn identity(q: f64, base: u32) -> Self {
        AfElement {
            h: AffH { q, n: 0, b: 0.0 },
            t: AffT::identity(base),
        }
    }

    /// `[b, γ]` coordinates of the semidirect product.
    pub fn from_parts(q: f64, b: f64, t: AffT) -> Self {
        AfElement { h: AffH { q, n: t.k, b }, t }
    }

    pub fn plane(&self) -> &AffH {
        &self.h
    }

    pub fn tree(&self) -> &AffT {
        &self.t
    }

    pub fn phi(&self) -> i64 {
        self.t.k
    }

    pub fn compose(&self, other: &AfElement) -> AfElement {
        AfElement {
            h: self.h.compose(&other.h),
            t: self.t.compose(&other.t),
        }
    }

    pub fn inverse(&self) -> AfElement {
        AfElement { h: self.h.inverse(), t: self.t.inverse() }
    }

    pub fn act(&self, z: &HTPoint) -> HTPoint {
        let upper = self.t.apply_vertex(z.w.upper());
        let w = TreePoint::new(upper, z.w.offset()).expect("offset preserved");
        HTPoint::new(self.h.apply(z.x), w)
    }

    /// `Δ_A = (p/q)^Φ`.
    pub fn modular(&self) -> f64 {
        (self.t.base() as f64 / self.h.q).powi(self.phi() as i32)
    }

    pub fn modular_plane(&self) -> f64 {
        self.h.modular()
    }

    pub fn modular_tree(&self) -> f64 {
        self.t.modular()
    }

    /// Left Haar density `q^-Φ` in `[b, γ]` coordinates.
    pub fn haar_density(&self) -> f64 {
        self.h.q.powi(-self.phi() as i32)
    }
}

/// The reflection `(x + iy, w) ↦ (-x + iy, w)`.
pub fn reflect(z: &HTPoint) -> HTPoint {
    HTPoint::new(-z.x, z.w.clone())
}

/// An element of `BS(p)` in its exact matrix form `(p^n, t)`, `t ∈ Z[1/p]`,
/// acting by `u ↦ p^n u + t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BsElement {
    pub n: i64,
    pub t: PadicRational,
}

impl BsElement {
    pub fn identity(p: u32) -> Self {
        BsElement { n: 0, t: PadicRational::zero(p) }
    }

    pub fn a(p: u32) -> Self {
        BsElement { n: 1, t: PadicRational::zero(p) }
    }

    pub fn b(p: u32) -> Self {
        BsElement { n: 0, t: PadicRational::from_int(p, 1) }
    }

    pub fn mul(&self, other: &BsElement) -> BsElement {
        BsElement {
            n: self.n + other.n,
            t: &self.t + &other.t.mul_pow(self.n),
        }
    }

    pub fn inverse(&self) -> BsElement {
        BsElement { n: -self.n, t: -&self.t.mul_pow(-self.n) }
    }

    fn pow(&self, e: i64) -> BsElement {
        let base = if e < 0 { self.inverse() } else { self.clone() };
        let mut acc = BsElement::identity(self.t.base());
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        acc
    }

    /// Diagonal embedding into `A(p, p)`.
    pub fn to_af(&self) -> AfElement {
        let p = self.t.base();
        AfElement::from_parts(p as f64, self.t.to_f64(), AffT { k: self.n, c: self.t.clone() })
    }
}

impl fmt::Display for BsElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}^{}, {}], [0, 1]]", self.t.base(), self.n, self.t)
    }
}

/// Evaluate a word such as `"a b a^-1 b^-1"` or `"ab^3"` in `BS(p)`.
///
/// Letters are `a`, `b` and their inverses `A`, `B`; each letter may carry
/// an integer exponent `^k`. Whitespace is ignored.
pub fn bs_word(word: &str, p: u32) -> Result<BsElement> {
    if p < 2 {
        return Err(Error::InvalidParameter("BS(p) needs p >= 2".into()));
    }
    let chars: Vec<char> = word.chars().filter(|c| !c.is_whitespace()).collect();
    let mut acc = BsElement::identity(p);
    let mut i = 0;
    while i < chars.len() {
        let (gen, sign) = match chars[i] {
            'a' => (BsElement::a(p), 1),
            'b' => (BsElement::b(p), 1),
            'A' => (BsElement::a(p), -1),
            'B' => (BsElement::b(p), -1),
            c => return Err(Error::Parse(format!("unexpected letter '{c}' in word"))),
        };
        i += 1;
        let mut exp = 1i64;
        if i < chars.len() && chars[i] == '^' {
            i += 1;
            let start = i;
            if i < chars.len() && (chars[i] == '-' || chars[i] == '+') {
                i += 1;
            }
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            exp = digits
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent '{digits}'")))?;
        }
        acc = acc.mul(&gen.pow(sign * exp));
    }
    Ok(acc)
}
