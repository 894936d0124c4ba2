//! Coordinates, ranks and finitely supported vectors.
//!
//! A `SparseVector` is the only vector representation: a finite map from
//! grid coordinates (i, j) to non-zero exact scalars. Zero entries are
//! dropped eagerly so that support size drives the cost of every
//! operation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Position k in the enumeration of the grid; arbitrary precision.
pub type Rank = BigUint;

/// Finite map rank -> scalar, used for gamma coordinates and polynomial
/// coefficients.
pub type RankMap = BTreeMap<Rank, Scalar>;

/// Index pair (i, j): row i inside the j-th copy of the sequence space.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub i: BigUint,
    pub j: BigUint,
}

impl Coord {
    pub fn new<I: Into<BigUint>, J: Into<BigUint>>(i: I, j: J) -> Self {
        Coord { i: i.into(), j: j.into() }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

impl FromStr for Coord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let inner = t
            .strip_prefix('(')
            .and_then(|x| x.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("bad coordinate {t:?}")))?;
        let (i, j) = inner
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("bad coordinate {t:?}")))?;
        let parse = |x: &str| -> Result<BigUint> {
            let x = x.trim();
            if x.is_empty() || !x.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::Parse(format!("bad index {x:?} in coordinate {t:?}")));
            }
            x.parse().map_err(|_| Error::Parse(format!("bad index {x:?}")))
        };
        Ok(Coord { i: parse(i)?, j: parse(j)? })
    }
}

/// A finitely supported element of the product space, entries sorted by
/// coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseVector {
    entries: BTreeMap<Coord, Scalar>,
}

impl SparseVector {
    pub fn zero() -> Self {
        SparseVector::default()
    }

    pub fn unit(c: Coord) -> Self {
        let mut v = SparseVector::zero();
        v.add_entry(c, Scalar::one());
        v
    }

    pub fn single(c: Coord, s: Scalar) -> Self {
        let mut v = SparseVector::zero();
        v.add_entry(c, s);
        v
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, c: &Coord) -> Option<&Scalar> {
        self.entries.get(c)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Coord, &Scalar)> {
        self.entries.iter()
    }

    /// Adds `s` into the entry at `c`, dropping the entry if it cancels.
    pub fn add_entry(&mut self, c: Coord, s: Scalar) {
        if s.is_zero() {
            return;
        }
        match self.entries.get_mut(&c) {
            Some(cur) => {
                let sum = &*cur + &s;
                if sum.is_zero() {
                    self.entries.remove(&c);
                } else {
                    *cur = sum;
                }
            }
            None => {
                self.entries.insert(c, s);
            }
        }
    }

    pub fn scaled(&self, s: &Scalar) -> SparseVector {
        if s.is_zero() {
            return SparseVector::zero();
        }
        SparseVector {
            entries: self
                .entries
                .iter()
                .map(|(c, v)| (c.clone(), v * s))
                .collect(),
        }
    }

    /// The entries of column `j` as a map row -> scalar.
    pub fn column_slice(&self, j: &BigUint) -> BTreeMap<BigUint, Scalar> {
        self.entries
            .iter()
            .filter(|(c, _)| &c.j == j)
            .map(|(c, v)| (c.i.clone(), v.clone()))
            .collect()
    }

    /// Occupied column indices in increasing order, without duplicates.
    pub fn columns(&self) -> Vec<BigUint> {
        let mut cols: Vec<BigUint> = self.entries.keys().map(|c| c.j.clone()).collect();
        cols.sort();
        cols.dedup();
        cols
    }
}

impl FromIterator<(Coord, Scalar)> for SparseVector {
    fn from_iter<T: IntoIterator<Item = (Coord, Scalar)>>(iter: T) -> Self {
        let mut v = SparseVector::zero();
        for (c, s) in iter {
            v.add_entry(c, s);
        }
        v
    }
}

/// a*x + b*y, exact, zero entries dropped.
pub fn vec_combine(a: &Scalar, x: &SparseVector, b: &Scalar, y: &SparseVector) -> SparseVector {
    let mut out = x.scaled(a);
    for (c, v) in y.iter() {
        out.add_entry(c.clone(), v * b);
    }
    out
}

impl fmt::Display for SparseVector {
    /// One `(i,j) scalar` line per entry, sorted by coordinate; the empty
    /// vector prints as nothing.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, v) in &self.entries {
            writeln!(f, "{} {}", c, v)?;
        }
        Ok(())
    }
}

impl SparseVector {
    /// Parses the body format produced by `Display`.
    pub fn parse_entries(text: &str) -> Result<SparseVector> {
        let mut v = SparseVector::zero();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (coord, scalar) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::Parse(format!("bad vector entry {line:?}")))?;
            v.add_entry(coord.parse()?, scalar.trim().parse()?);
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(i: u64, j: u64) -> Coord {
        Coord::new(i, j)
    }

    #[test]
    fn combine_cancellation() {
        let x = SparseVector::unit(c(0, 0));
        let y = SparseVector::single(c(0, 0), Scalar::from_int(-1));
        let r = vec_combine(&Scalar::one(), &x, &Scalar::one(), &y);
        assert!(r.is_zero());
    }

    #[test]
    fn combine_scaling() {
        let x = SparseVector::single(c(3, 1), Scalar::ratio(1, 2));
        let r = vec_combine(&Scalar::from_int(2), &x, &Scalar::zero(), &SparseVector::zero());
        assert_eq!(r, SparseVector::unit(c(3, 1)));
    }

    #[test]
    fn combine_disjoint_support() {
        let x = SparseVector::unit(c(0, 0));
        let y = SparseVector::unit(c(1, 0));
        let r = vec_combine(&Scalar::one(), &x, &Scalar::one(), &y);
        assert_eq!(r.support_len(), 2);
        assert_eq!(r.get(&c(0, 0)), Some(&Scalar::one()));
        assert_eq!(r.get(&c(1, 0)), Some(&Scalar::one()));
    }

    #[test]
    fn column_slices() {
        let v: SparseVector = [
            (c(0, 0), Scalar::one()),
            (c(5, 2), Scalar::from_int(3)),
        ]
        .into_iter()
        .collect();
        let s = v.column_slice(&BigUint::from(2u32));
        assert_eq!(s.len(), 1);
        assert_eq!(s[&BigUint::from(5u32)], Scalar::from_int(3));
        assert!(SparseVector::zero().column_slice(&BigUint::from(0u32)).is_empty());
        let w: SparseVector = [
            (c(0, 0), Scalar::one()),
            (c(1, 0), Scalar::from_int(2)),
        ]
        .into_iter()
        .collect();
        assert!(w.column_slice(&BigUint::from(1u32)).is_empty());
    }

    #[test]
    fn serialize_parse_identity() {
        let v: SparseVector = [
            (c(0, 0), Scalar::one()),
            (c(3, 1), Scalar::ratio(-1, 2)),
            (c(2, 7), Scalar::pow2(100)),
        ]
        .into_iter()
        .collect();
        let text = v.to_string();
        assert_eq!(SparseVector::parse_entries(&text).unwrap(), v);
        assert_eq!(text, "(0,0) 1\n(2,7) 2^100\n(3,1) -1/2\n");
    }
}
