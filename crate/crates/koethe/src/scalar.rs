//! Exact rational scalars with a dyadic fast path.
//!
//! A `Scalar` is kept in the normal form (-1)^neg * (num/den) * 2^exp2 where
//! `num` and `den` are odd and coprime. Every value has exactly one
//! representation, so derived equality and hashing agree with numeric
//! equality. Pure powers of two (num = den = 1) multiply by adding
//! exponents only; the exponent is an arbitrary-precision integer because
//! the shift weights of deep ranks push it far beyond machine range.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Scalar {
    neg: bool,
    num: BigUint,
    den: BigUint,
    exp2: BigInt,
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar {
            neg: false,
            num: BigUint::zero(),
            den: BigUint::one(),
            exp2: BigInt::zero(),
        }
    }

    pub fn one() -> Self {
        Scalar::pow2(0)
    }

    /// 2^e, the dyadic fast-path representative.
    pub fn pow2<E: Into<BigInt>>(e: E) -> Self {
        Scalar {
            neg: false,
            num: BigUint::one(),
            den: BigUint::one(),
            exp2: e.into(),
        }
    }

    pub fn from_int(v: i64) -> Self {
        Scalar::from_bigint(BigInt::from(v))
    }

    pub fn from_bigint(v: BigInt) -> Self {
        let neg = v.sign() == Sign::Minus;
        Self::normalized(neg, v.magnitude().clone(), BigUint::one(), BigInt::zero())
    }

    pub fn from_biguint(v: BigUint) -> Self {
        Self::normalized(false, v, BigUint::one(), BigInt::zero())
    }

    /// num/den as a scalar; panics on a zero denominator.
    pub fn from_ratio(num: BigInt, den: BigInt) -> Self {
        assert!(!den.is_zero(), "scalar denominator must be non-zero");
        let neg = (num.sign() == Sign::Minus) != (den.sign() == Sign::Minus);
        Self::normalized(
            neg,
            num.magnitude().clone(),
            den.magnitude().clone(),
            BigInt::zero(),
        )
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Self::from_ratio(BigInt::from(num), BigInt::from(den))
    }

    fn normalized(neg: bool, mut num: BigUint, mut den: BigUint, mut exp2: BigInt) -> Self {
        debug_assert!(!den.is_zero());
        if num.is_zero() {
            return Scalar::zero();
        }
        let tz = num.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            num >>= tz;
            exp2 += tz;
        }
        let tz = den.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            den >>= tz;
            exp2 -= tz;
        }
        let g = num.gcd(&den);
        if !g.is_one() {
            num /= &g;
            den /= &g;
        }
        Scalar { neg, num, den, exp2 }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        !self.neg && self.num.is_one() && self.den.is_one() && self.exp2.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.neg
    }

    pub fn is_positive(&self) -> bool {
        !self.neg && !self.is_zero()
    }

    /// True for non-zero values of the form ±2^e.
    pub fn is_dyadic(&self) -> bool {
        !self.is_zero() && self.num.is_one() && self.den.is_one()
    }

    /// The exponent e when the value is exactly ±2^e.
    pub fn dyadic_exponent(&self) -> Option<&BigInt> {
        if self.is_dyadic() {
            Some(&self.exp2)
        } else {
            None
        }
    }

    pub fn is_integer(&self) -> bool {
        self.is_zero() || (self.den.is_one() && !self.exp2.is_negative())
    }

    pub fn abs(&self) -> Self {
        let mut r = self.clone();
        r.neg = false;
        r
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero scalar");
        Scalar {
            neg: self.neg,
            num: self.den.clone(),
            den: self.num.clone(),
            exp2: -self.exp2.clone(),
        }
    }

    /// Cheap scaling by 2^e.
    pub fn mul_pow2(&self, e: &BigInt) -> Self {
        if self.is_zero() {
            return Scalar::zero();
        }
        let mut r = self.clone();
        r.exp2 += e;
        r
    }

    /// (lo, hi) with 2^lo < |self| < 2^hi; meaningful only for non-zero values.
    fn log2_bounds(&self) -> (BigInt, BigInt) {
        let d = BigInt::from(self.num.bits()) - BigInt::from(self.den.bits());
        (&self.exp2 + &d - 1, &self.exp2 + &d + 1)
    }

    fn cmp_magnitude(&self, other: &Self) -> Ordering {
        if self.num == other.num && self.den == other.den {
            return self.exp2.cmp(&other.exp2);
        }
        let (lo_a, hi_a) = self.log2_bounds();
        let (lo_b, hi_b) = other.log2_bounds();
        if lo_a >= hi_b {
            return Ordering::Greater;
        }
        if lo_b >= hi_a {
            return Ordering::Less;
        }
        // Exponent gap is small here, so the shift below is small.
        let d = &self.exp2 - &other.exp2;
        let mut lhs = &self.num * &other.den;
        let mut rhs = &other.num * &self.den;
        let shift = d
            .magnitude()
            .to_usize()
            .expect("scalar comparison shift exceeds address space");
        if d.is_negative() {
            rhs <<= shift;
        } else {
            lhs <<= shift;
        }
        lhs.cmp(&rhs)
    }

    pub fn cmp_abs(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (false, false) => self.cmp_magnitude(other),
        }
    }

    /// Smallest e with 2^e >= self; None unless the value is positive.
    pub fn ceil_log2(&self) -> Option<BigInt> {
        if !self.is_positive() {
            return None;
        }
        let (_, hi) = self.log2_bounds();
        let mut e = hi;
        while &Scalar::pow2(&e - 1) >= self {
            e -= 1;
        }
        Some(e)
    }

    /// Smallest integer >= self.
    pub fn ceil_bigint(&self) -> BigInt {
        if self.is_zero() {
            return BigInt::zero();
        }
        let (n, d) = self.materialize();
        let q = n.div_floor(&d);
        if (&q * &d) == n {
            q
        } else {
            q + 1
        }
    }

    /// Signed numerator and positive denominator with exp2 folded in.
    fn materialize(&self) -> (BigInt, BigInt) {
        let mut n = BigInt::from_biguint(
            if self.neg { Sign::Minus } else { Sign::Plus },
            self.num.clone(),
        );
        let mut d = BigInt::from_biguint(Sign::Plus, self.den.clone());
        let shift = self
            .exp2
            .magnitude()
            .to_usize()
            .expect("scalar materialization shift exceeds address space");
        if self.exp2.is_negative() {
            d <<= shift;
        } else {
            n <<= shift;
        }
        (n, d)
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return if other.neg { Ordering::Greater } else { Ordering::Less },
            (false, true) => return if self.neg { Ordering::Less } else { Ordering::Greater },
            (false, false) => {}
        }
        match (self.neg, other.neg) {
            (false, true) => Ordering::Greater,
            (true, false) => Ordering::Less,
            (false, false) => self.cmp_magnitude(other),
            (true, true) => other.cmp_magnitude(self),
        }
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        if self.is_zero() {
            return Scalar::zero();
        }
        let mut r = self.clone();
        r.neg = !r.neg;
        r
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let e = self.exp2.clone().min(rhs.exp2.clone());
        let sa = (&self.exp2 - &e)
            .to_usize()
            .expect("scalar addition shift exceeds address space");
        let sb = (&rhs.exp2 - &e)
            .to_usize()
            .expect("scalar addition shift exceeds address space");
        let mut a = BigInt::from_biguint(
            if self.neg { Sign::Minus } else { Sign::Plus },
            &self.num * &rhs.den,
        );
        let mut b = BigInt::from_biguint(
            if rhs.neg { Sign::Minus } else { Sign::Plus },
            &rhs.num * &self.den,
        );
        a <<= sa;
        b <<= sb;
        let s = a + b;
        let neg = s.sign() == Sign::Minus;
        Scalar::normalized(neg, s.magnitude().clone(), &self.den * &rhs.den, e)
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        self + &(-rhs)
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        if self.is_zero() || rhs.is_zero() {
            return Scalar::zero();
        }
        // Odd * odd needs no 2-stripping, only an odd gcd reduction.
        let mut num = &self.num * &rhs.num;
        let mut den = &self.den * &rhs.den;
        let g = num.gcd(&den);
        if !g.is_one() {
            num /= &g;
            den /= &g;
        }
        Scalar {
            neg: self.neg != rhs.neg,
            num,
            den,
            exp2: &self.exp2 + &rhs.exp2,
        }
    }
}

impl Div for &Scalar {
    type Output = Scalar;
    // Division through the exact reciprocal keeps the odd/odd normal form.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: &Scalar) -> Scalar {
        self * &rhs.recip()
    }
}

macro_rules! forward_owned_binop {
    ($Op:ident, $op:ident) => {
        impl $Op for Scalar {
            type Output = Scalar;
            fn $op(self, rhs: Scalar) -> Scalar {
                (&self).$op(&rhs)
            }
        }
        impl $Op<&Scalar> for Scalar {
            type Output = Scalar;
            fn $op(self, rhs: &Scalar) -> Scalar {
                (&self).$op(rhs)
            }
        }
        impl $Op<Scalar> for &Scalar {
            type Output = Scalar;
            fn $op(self, rhs: Scalar) -> Scalar {
                self.$op(&rhs)
            }
        }
    };
}

forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);
forward_owned_binop!(Div, div);

/// Exponent magnitude up to which the canonical text folds 2^e into decimals.
const FOLD_LIMIT: u64 = 64;

impl fmt::Display for Scalar {
    /// Canonical text: "0", decimal "p" / "p/q", "2^e" for pure powers of
    /// two with |e| > 64, and "p/q*2^e" when a huge exponent rides on a
    /// non-trivial fraction.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let sign = if self.neg { "-" } else { "" };
        let small_exp = self.exp2.magnitude().to_u64().is_some_and(|m| m <= FOLD_LIMIT);
        if small_exp {
            let (n, d) = self.materialize();
            if d.is_one() {
                return write!(f, "{}", n);
            }
            return write!(f, "{}/{}", n, d);
        }
        if self.is_dyadic() {
            return write!(f, "{}2^{}", sign, self.exp2);
        }
        if self.den.is_one() {
            write!(f, "{}{}*2^{}", sign, self.num, self.exp2)
        } else {
            write!(f, "{}{}/{}*2^{}", sign, self.num, self.den, self.exp2)
        }
    }
}

impl FromStr for Scalar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.is_empty() {
            return Err(Error::Parse("empty scalar".into()));
        }
        let (neg, rest) = match t.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let parse_uint = |x: &str| -> Result<BigUint> {
            if x.is_empty() || !x.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::Parse(format!("bad integer {x:?} in scalar {s:?}")));
            }
            BigUint::from_str(x).map_err(|e| Error::Parse(e.to_string()))
        };
        let parse_int = |x: &str| -> Result<BigInt> {
            BigInt::from_str(x).map_err(|e| Error::Parse(format!("bad exponent {x:?}: {e}")))
        };

        // Forms: 2^E | P | P/Q | P*2^E | P/Q*2^E
        let (frac, exp) = match rest.split_once("*2^") {
            Some((p, e)) => (p, Some(parse_int(e)?)),
            None => match rest.strip_prefix("2^") {
                Some(e) => {
                    let exp = parse_int(e)?;
                    let v = Scalar::pow2(exp);
                    return Ok(if neg { -v } else { v });
                }
                None => (rest, None),
            },
        };
        let (num, den) = match frac.split_once('/') {
            Some((p, q)) => (parse_uint(p)?, parse_uint(q)?),
            None => (parse_uint(frac)?, BigUint::one()),
        };
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in scalar {s:?}")));
        }
        Ok(Scalar::normalized(
            neg,
            num,
            den,
            exp.unwrap_or_else(BigInt::zero),
        ))
    }
}
