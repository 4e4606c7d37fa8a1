//! Exact arithmetic in the ring `Z[1/p]`, viewed inside the p-adic numbers.
//!
//! Every value is stored as `numerator / p^l` with `l >= 0` and, unless
//! `l == 0`, a numerator that is not divisible by `p`. This is the subring on
//! which all affine tree maps used in this crate operate, so no precision
//! parameter is ever needed. The base may be composite; the norm is then
//! only sub-multiplicative.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// p-adic valuation: `v_p(u)`, infinite for zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }

    /// `|u|_p = p^(-v)`; zero for the infinite valuation.
    pub fn norm(self, base: u32) -> f64 {
        match self {
            Valuation::Finite(v) => (base as f64).powi(-(v as i32)),
            Valuation::Infinite => 0.0,
        }
    }
}

impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Valuation {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Valuation::Infinite, Valuation::Infinite) => Ordering::Equal,
            (Valuation::Infinite, _) => Ordering::Greater,
            (_, Valuation::Infinite) => Ordering::Less,
            (Valuation::Finite(a), Valuation::Finite(b)) => a.cmp(b),
        }
    }
}

/// An element `numerator / p^denom_exp` of `Z[1/p]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PadicRational {
    base: u32,
    numerator: BigInt,
    denom_exp: u32,
}

fn pow(base: u32, exp: u32) -> BigInt {
    num_traits::pow(BigInt::from(base), exp as usize)
}

/// Largest `k` with `base^k | n`; `n` must be nonzero.
fn int_valuation(n: &BigInt, base: u32) -> u64 {
    let b = BigInt::from(base);
    let mut n = n.clone();
    let mut k = 0;
    loop {
        let (q, r) = n.div_rem(&b);
        if !r.is_zero() {
            return k;
        }
        n = q;
        k += 1;
    }
}

impl PadicRational {
    pub fn new(base: u32, numerator: impl Into<BigInt>, denom_exp: u32) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidParameter(format!(
                "p-adic base must be at least 2, got {base}"
            )));
        }
        Ok(Self::normalized(base, numerator.into(), denom_exp))
    }

    pub fn zero(base: u32) -> Self {
        Self::normalized(base, BigInt::zero(), 0)
    }

    pub fn from_int(base: u32, n: i64) -> Self {
        Self::normalized(base, BigInt::from(n), 0)
    }

    fn normalized(base: u32, mut numerator: BigInt, mut denom_exp: u32) -> Self {
        assert!(base >= 2, "p-adic base must be at least 2");
        if numerator.is_zero() {
            return PadicRational { base, numerator, denom_exp: 0 };
        }
        let b = BigInt::from(base);
        while denom_exp > 0 {
            let (q, r) = numerator.div_rem(&b);
            if !r.is_zero() {
                break;
            }
            numerator = q;
            denom_exp -= 1;
        }
        PadicRational { base, numerator, denom_exp }
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn numerator(&self) -> &BigInt {
        &self.numerator
    }

    pub fn denom_exp(&self) -> u32 {
        self.denom_exp
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn valuation(&self) -> Valuation {
        if self.numerator.is_zero() {
            return Valuation::Infinite;
        }
        Valuation::Finite(int_valuation(&self.numerator, self.base) as i64 - self.denom_exp as i64)
    }

    pub fn norm(&self) -> f64 {
        self.valuation().norm(self.base)
    }

    /// Real value, for embedding into the horizontal coordinate.
    pub fn to_f64(&self) -> f64 {
        let num = self.numerator.to_f64().unwrap_or(f64::NAN);
        num / (self.base as f64).powi(self.denom_exp as i32)
    }

    /// Multiply by `p^k`, `k` of either sign.
    pub fn mul_pow(&self, k: i64) -> Self {
        if k >= 0 {
            let k = u32::try_from(k).expect("exponent overflow");
            if self.denom_exp >= k {
                Self::normalized(self.base, self.numerator.clone(), self.denom_exp - k)
            } else {
                Self::normalized(
                    self.base,
                    &self.numerator * pow(self.base, k - self.denom_exp),
                    0,
                )
            }
        } else {
            let k = u32::try_from(-k).expect("exponent overflow");
            Self::normalized(self.base, self.numerator.clone(), self.denom_exp + k)
        }
    }

    fn check_base(&self, other: &Self) {
        assert_eq!(
            self.base, other.base,
            "p-adic operands must share the same base"
        );
    }

    /// Digits `a_k`, `lo <= k < hi`, of the p-adic expansion.
    ///
    /// Negative values have infinite expansions; the window is read off
    /// residues, so every window is well defined.
    pub fn digits(&self, lo: i64, hi: i64) -> Vec<u32> {
        assert!(lo <= hi, "empty or reversed digit window");
        let width = u32::try_from(hi - lo).expect("digit window too wide");
        // integer part (indices >= 0) of u * p^-lo
        let e = self.denom_exp as i64 + lo;
        let int_part = if e <= 0 {
            &self.numerator * pow(self.base, (-e) as u32)
        } else {
            let m = pow(self.base, e as u32);
            let r = self.numerator.mod_floor(&m);
            (&self.numerator - r) / m
        };
        let modulus = pow(self.base, width);
        let mut rest = int_part.mod_floor(&modulus);
        let b = BigInt::from(self.base);
        let mut out = Vec::with_capacity(width as usize);
        for _ in 0..width {
            let (q, r) = rest.div_rem(&b);
            out.push(r.to_u32().expect("digit fits in u32"));
            rest = q;
        }
        out
    }

    /// Canonical center of the closed ball of radius `p^-m` around `self`:
    /// the unique point of the ball whose digits vanish at indices `>= m`.
    pub fn canonical_ball_center(&self, m: i64) -> Self {
        let e = self.denom_exp as i64 + m;
        if e <= 0 {
            return Self::zero(self.base);
        }
        let modulus = pow(self.base, u32::try_from(e).expect("level overflow"));
        let r = self.numerator.mod_floor(&modulus);
        Self::normalized(self.base, r, self.denom_exp)
    }

    /// True iff `|self - other|_p <= p^-m`.
    pub fn within_ball(&self, other: &Self, m: i64) -> bool {
        match (self - other).valuation() {
            Valuation::Infinite => true,
            Valuation::Finite(v) => v >= m,
        }
    }

    pub fn is_negative(&self) -> bool {
        self.numerator.is_negative()
    }
}

impl Add for &PadicRational {
    type Output = PadicRational;

    fn add(self, rhs: &PadicRational) -> PadicRational {
        self.check_base(rhs);
        let l = self.denom_exp.max(rhs.denom_exp);
        let a = &self.numerator * pow(self.base, l - self.denom_exp);
        let b = &rhs.numerator * pow(self.base, l - rhs.denom_exp);
        PadicRational::normalized(self.base, a + b, l)
    }
}

impl Sub for &PadicRational {
    type Output = PadicRational;

    fn sub(self, rhs: &PadicRational) -> PadicRational {
        self + &(-rhs)
    }
}

impl Neg for &PadicRational {
    type Output = PadicRational;

    fn neg(self) -> PadicRational {
        PadicRational {
            base: self.base,
            numerator: -&self.numerator,
            denom_exp: self.denom_exp,
        }
    }
}

impl Mul for &PadicRational {
    type Output = PadicRational;

    fn mul(self, rhs: &PadicRational) -> PadicRational {
        self.check_base(rhs);
        PadicRational::normalized(
            self.base,
            &self.numerator * &rhs.numerator,
            self.denom_exp + rhs.denom_exp,
        )
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr for PadicRational {
            type Output = PadicRational;
            fn $f(self, rhs: PadicRational) -> PadicRational {
                (&self).$f(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for PadicRational {
    type Output = PadicRational;
    fn neg(self) -> PadicRational {
        -&self
    }
}

impl fmt::Display for PadicRational {
    /// `num/p^l`, or just `num` when `l == 0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom_exp == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/{}^{}", self.numerator, self.base, self.denom_exp)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pr(base: u32, n: i64, l: u32) -> PadicRational {
        PadicRational::new(base, n, l).unwrap()
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(pr(2, 2, 0).valuation(), Valuation::Finite(1));
        assert_eq!(pr(2, 2, 0).norm(), 0.5);
        assert_eq!(PadicRational::zero(5).valuation(), Valuation::Infinite);
        assert_eq!(PadicRational::zero(5).norm(), 0.0);
        // 3/4 in base 2
        assert_eq!(pr(2, 3, 2).valuation(), Valuation::Finite(-2));
    }

    #[test]
    fn normalization_and_carries() {
        assert_eq!(pr(2, 1, 0) + pr(2, 1, 0), pr(2, 2, 0));
        let half = pr(2, 1, 1);
        let one = &half + &half;
        assert_eq!(one.denom_exp(), 0);
        assert_eq!(one, PadicRational::from_int(2, 1));
        // 2/3 * 3 = 2 in base 3
        assert_eq!(pr(3, 2, 1) * pr(3, 3, 0), pr(3, 2, 0));
        // zero forces l = 0
        assert_eq!(pr(7, 0, 5).denom_exp(), 0);
        assert_eq!(pr(2, 12, 3), pr(2, 3, 1));
    }

    #[test]
    fn rejects_small_base() {
        assert!(PadicRational::new(1, 3, 0).is_err());
    }

    #[test]
    fn digit_examples() {
        assert_eq!(pr(2, 1, 0).digits(0, 3), vec![1, 0, 0]);
        assert_eq!(pr(2, -1, 0).digits(0, 4), vec![1, 1, 1, 1]);
        assert_eq!(pr(3, 5, 0).digits(0, 2), vec![2, 1]);
        // 3/4 = 1*2^-2 + 1*2^-1
        assert_eq!(pr(2, 3, 2).digits(-3, 2), vec![0, 1, 1, 0, 0]);
        // -1/2 = 2^-1 + sum_{k>=0} 2^k
        assert_eq!(pr(2, -1, 1).digits(-1, 3), vec![1, 1, 1, 1]);
    }

    #[test]
    fn ball_center_examples() {
        assert_eq!(pr(2, 1, 0).canonical_ball_center(0), PadicRational::zero(2));
        assert_eq!(pr(2, 3, 0).canonical_ball_center(1), pr(2, 1, 0));
        assert_eq!(pr(2, 3, 0).canonical_ball_center(2), pr(2, 3, 0));
        // -1 at level 2: digits 1,1 -> 3
        assert_eq!(pr(2, -1, 0).canonical_ball_center(2), pr(2, 3, 0));
        // 5/4 at level -1: digits at -2 only -> 1/4
        assert_eq!(pr(2, 5, 2).canonical_ball_center(-1), pr(2, 1, 2));
    }

    #[test]
    fn display_form() {
        assert_eq!(pr(2, 3, 2).to_string(), "3/2^2");
        assert_eq!(pr(3, -7, 0).to_string(), "-7");
    }

    fn arb_padic(base: u32) -> impl Strategy<Value = PadicRational> {
        (-100_000i64..100_000, 0u32..6).prop_map(move |(n, l)| pr(base, n, l))
    }

    fn arb_base() -> impl Strategy<Value = u32> {
        prop_oneof![Just(2u32), Just(3), Just(4), Just(5), Just(6), Just(10)]
    }

    proptest! {
        #[test]
        fn ultrametric_inequality(
            (u, v) in arb_base().prop_flat_map(|b| (arb_padic(b), arb_padic(b)))
        ) {
            let s = &u + &v;
            prop_assert!(s.valuation() >= u.valuation().min(v.valuation()));
            prop_assert_eq!(u.is_zero(), u.norm() == 0.0);
        }

        #[test]
        fn norm_submultiplicative(
            (u, v) in arb_base().prop_flat_map(|b| (arb_padic(b), arb_padic(b)))
        ) {
            let prod = &u * &v;
            let (pv, uv, vv) = (prod.valuation(), u.valuation(), v.valuation());
            match (uv, vv) {
                (Valuation::Finite(a), Valuation::Finite(b)) => {
                    let c = pv.finite().unwrap();
                    prop_assert!(c >= a + b);
                    if [2u32, 3, 5].contains(&u.base()) {
                        prop_assert_eq!(c, a + b);
                    }
                }
                _ => prop_assert_eq!(pv, Valuation::Infinite),
            }
        }

        #[test]
        fn scaling_by_powers(u in arb_padic(3), m in -8i64..8) {
            let scaled = u.mul_pow(m);
            match u.valuation() {
                Valuation::Finite(v) => prop_assert_eq!(scaled.valuation(), Valuation::Finite(v + m)),
                Valuation::Infinite => prop_assert!(scaled.is_zero()),
            }
            prop_assert_eq!(scaled.mul_pow(-m), u);
        }

        #[test]
        fn digits_reconstruct_modulo(u in arb_padic(2), lo in -8i64..0, width in 1i64..12) {
            let hi = lo + width;
            let digits = u.digits(lo, hi);
            // the tail below `lo`
            let tail = u.canonical_ball_center(lo);
            let mut acc = tail;
            for (i, d) in digits.iter().enumerate() {
                let term = PadicRational::from_int(2, *d as i64).mul_pow(lo + i as i64);
                acc = &acc + &term;
            }
            prop_assert!(acc.within_ball(&u, hi));
        }

        #[test]
        fn ball_center_is_canonical(u in arb_padic(5), m in -6i64..6) {
            let c = u.canonical_ball_center(m);
            prop_assert!(c.within_ball(&u, m));
            prop_assert_eq!(c.canonical_ball_center(m), c.clone());
            let tail = c.digits(m, m + 6);
            prop_assert!(tail.iter().all(|&d| d == 0));
            prop_assert!(!c.is_negative());
        }
    }
}
