//! The shift operator: level sequence, alpha weights, closed forms for its
//! powers on e_0, sparse application, and fast high powers through the
//! perturbed canonical basis.
//!
//! Ranks split per stage n into a pure-shift interval
//! [pos(Delta_n,0), pos(a_n,0)) where T^j e_0 = alpha_j e_j, and an echo
//! interval [pos(a_n,0), pos(Delta_{n+1},0)) where
//! T^j e_0 = eps_n e_j + T^{j-pos(a_n,0)} e_0. Every alpha is an exact
//! power of two because the stage constants D_n are powers of two.
//!
//! Writing x in the basis gamma_j = T^j e_0 turns T into the index shift
//! gamma_j -> gamma_{j+1}; high powers and polynomial evaluation go
//! through these coordinates, so their cost does not depend on the power.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::ordering::{BList, Extension, StageGeometry};
use crate::scalar::Scalar;
use crate::vector::{Coord, Rank, RankMap, SparseVector};
use crate::weights::{WeightConfig, WeightTable};

/// The level sequence (0, 1, 0, 1, 2, 0, 1, 2, 3, 0, ...): block k >= 1
/// lists 0..=k starting at index (k-1)(k+2)/2. Every value recurs
/// infinitely often and the value at n never exceeds n.
pub fn nn_level(n: u64) -> u32 {
    let mut k: u64 = 1;
    loop {
        let start = (k - 1) * (k + 2) / 2;
        if n < start + k + 1 {
            return u32::try_from(n - start).expect("level exceeds u32");
        }
        k += 1;
    }
}

/// Smallest n with nn_level(n) = level.
pub fn first_stage_with_level(level: u32) -> u64 {
    if level == 0 {
        0
    } else {
        let k = level as u64;
        (k - 1) * (k + 2) / 2 + k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Strict,
    Toy,
}

/// Raw per-stage inputs; stage 0 has no b or s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSpec {
    pub b: Option<BigUint>,
    pub s: Option<BigUint>,
    pub a: BigUint,
    /// D_n = 2^d_exp.
    pub d_exp: u64,
}

/// Committed parameters of one stage, with cached path ranks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageParams {
    pub n: u32,
    /// N_n.
    pub level: u32,
    pub b: Option<BigUint>,
    pub s: Option<BigUint>,
    pub a: BigUint,
    /// Delta_n.
    pub delta: BigUint,
    /// Delta_{n+1} = a_n + pos(Delta_n, 0).
    pub delta_next: BigUint,
    /// D_n = 2^d_exp, a dyadic >= 1.
    pub d_exp: u64,
    /// eps_n = 1/A_{N_n, a_n}.
    pub eps: Scalar,
    pub pos_delta: Rank,
    pub pos_s: Option<Rank>,
    pub pos_a: Rank,
    pub pos_b: Option<Rank>,
    pub pos_delta_next: Rank,
}

impl StageParams {
    /// A_{N_n, a_n} = 1/eps_n.
    pub fn big_a(&self) -> Scalar {
        self.eps.recip()
    }

    pub fn d_value(&self) -> Scalar {
        Scalar::pow2(BigInt::from(self.d_exp))
    }
}

/// Which interval a rank falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankClass {
    /// Rank 0; T^0 e_0 = e_0.
    Zero,
    /// Pure-shift rank of stage n.
    Pure { n: u32 },
    /// Echo rank of stage n.
    Echo { n: u32 },
}

/// Immutable snapshot of everything needed to evaluate T exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorModel {
    weights: WeightTable,
    geometry: StageGeometry,
    stages: Vec<StageParams>,
    mode: Mode,
}

impl OperatorModel {
    /// Builds a model from raw stage inputs, deriving the Delta chain, the
    /// cached ranks and eps values, and validating the interleaving
    /// constraints and the rank identity
    /// pos(Delta_{n+1},0) = pos(a_n,0) + pos(Delta_n,0).
    pub fn assemble(mode: Mode, config: WeightConfig, specs: &[StageSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidParameter("at least stage 0 is required".into()));
        }
        if specs[0].b.is_some() || specs[0].s.is_some() {
            return Err(Error::InvalidParameter("stage 0 takes no b or s".into()));
        }
        let mut bs = Vec::new();
        for (n, spec) in specs.iter().enumerate().skip(1) {
            match (&spec.b, &spec.s) {
                (Some(b), Some(s)) => {
                    if *s <= (b << 1u32) {
                        return Err(Error::InvalidParameter(format!(
                            "stage {n}: s = {s} must exceed 2b = {}",
                            b << 1u32
                        )));
                    }
                    bs.push(b.clone());
                }
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "stage {n} requires both b and s"
                    )));
                }
            }
        }
        // The walk itself only needs the closed list; the strict model is
        // re-tied to an open floor below once the last Delta is known.
        let geometry = StageGeometry::new(BList::closed(bs.clone())?);
        let weights = WeightTable::new(config);

        let mut stages: Vec<StageParams> = Vec::with_capacity(specs.len());
        let mut delta = BigUint::one();
        for (n, spec) in specs.iter().enumerate() {
            if spec.a <= delta {
                return Err(Error::InvalidParameter(format!(
                    "stage {n}: a = {} must exceed Delta_{n} = {}",
                    spec.a, delta
                )));
            }
            if n == 0 && spec.a < BigUint::from(2u32) {
                return Err(Error::InvalidParameter("stage 0 needs a >= 2".into()));
            }
            if let Some(b) = &spec.b {
                if *b <= delta {
                    return Err(Error::InvalidParameter(format!(
                        "stage {n}: b = {b} must exceed Delta_{n} = {delta}"
                    )));
                }
                if spec.s.as_ref().unwrap() >= &spec.a {
                    return Err(Error::InvalidParameter(format!(
                        "stage {n}: a = {} must exceed s = {}",
                        spec.a,
                        spec.s.as_ref().unwrap()
                    )));
                }
            }
            let pos_delta = geometry.pos_column0(&delta)?;
            let pos_a = geometry.pos_column0(&spec.a)?;
            let pos_b = spec.b.as_ref().map(|b| geometry.pos_column0(b)).transpose()?;
            let pos_s = spec.s.as_ref().map(|s| geometry.pos_column0(s)).transpose()?;
            let delta_next = &spec.a + &pos_delta;
            let pos_delta_next = geometry.pos_column0(&delta_next)?;
            if pos_delta_next != &pos_a + &pos_delta {
                return Err(Error::InvalidParameter(format!(
                    "stage {n}: rank identity fails: pos({delta_next},0) = {pos_delta_next} \
                     but pos(a,0) + pos(Delta,0) = {}",
                    &pos_a + &pos_delta
                )));
            }
            let level = nn_level(n as u64);
            let eps = weights.weight(level, &spec.a)?.recip();
            stages.push(StageParams {
                n: n as u32,
                level,
                b: spec.b.clone(),
                s: spec.s.clone(),
                a: spec.a.clone(),
                delta: delta.clone(),
                delta_next: delta_next.clone(),
                d_exp: spec.d_exp,
                eps,
                pos_delta,
                pos_s,
                pos_a,
                pos_b,
                pos_delta_next,
            });
            delta = delta_next;
        }

        let geometry = match mode {
            Mode::Toy => geometry,
            Mode::Strict => {
                let floor = stages.last().unwrap().pos_delta_next.clone() << 1u32;
                StageGeometry::new(BList::new(bs, Extension::Open(floor))?)
            }
        };
        Ok(OperatorModel { weights, geometry, stages, mode })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    pub fn geometry(&self) -> &StageGeometry {
        &self.geometry
    }

    pub fn stages(&self) -> &[StageParams] {
        &self.stages
    }

    /// The raw per-stage inputs this model was assembled from.
    pub fn specs(&self) -> Vec<StageSpec> {
        self.stages
            .iter()
            .map(|st| StageSpec {
                b: st.b.clone(),
                s: st.s.clone(),
                a: st.a.clone(),
                d_exp: st.d_exp,
            })
            .collect()
    }

    pub fn stage(&self, n: u32) -> Result<&StageParams> {
        self.stages.get(n as usize).ok_or_else(|| {
            Error::HorizonExceeded(format!(
                "stage {n} is not committed (model has stages 0..={})",
                self.stages.len() - 1
            ))
        })
    }

    /// T^j e_0 is defined for ranks strictly below this.
    pub fn rank_horizon(&self) -> &Rank {
        &self.stages.last().unwrap().pos_delta_next
    }

    pub fn classify(&self, j: &Rank) -> Result<RankClass> {
        if j.is_zero() {
            return Ok(RankClass::Zero);
        }
        if j >= self.rank_horizon() {
            return Err(Error::HorizonExceeded(format!(
                "rank {} is at or beyond the committed horizon {}",
                j,
                self.rank_horizon()
            )));
        }
        let idx = self.stages.partition_point(|s| s.pos_delta <= *j);
        let st = &self.stages[idx - 1];
        debug_assert!(*j < st.pos_delta_next);
        if *j < st.pos_a {
            Ok(RankClass::Pure { n: st.n })
        } else {
            Ok(RankClass::Echo { n: st.n })
        }
    }

    /// e_j as a sparse vector.
    pub fn basis_vector(&self, j: &Rank) -> Result<SparseVector> {
        Ok(SparseVector::unit(self.geometry.rank_to_coord(j)?))
    }

    /// The shift weight alpha_j, defined on pure-shift ranks only; always
    /// an exact power of two.
    pub fn alpha(&self, j: &Rank) -> Result<Scalar> {
        let n = match self.classify(j)? {
            RankClass::Pure { n } => n,
            _ => {
                return Err(Error::RankOutsideAlphaDomain(j.to_string()));
            }
        };
        Ok(Scalar::pow2(self.alpha_exp(n, j)))
    }

    fn alpha_exp(&self, n: u32, j: &Rank) -> BigInt {
        let st = &self.stages[n as usize];
        let eps_exp = st.eps.dyadic_exponent().expect("eps is dyadic").clone();
        if n == 0 {
            // eps_0 * 2^(j - pos(Delta_0,0))
            return eps_exp + BigInt::from(j - &st.pos_delta);
        }
        let pos_s = st.pos_s.as_ref().expect("stage >= 1 has s");
        let d_prev = self.stages[n as usize - 1].d_exp;
        if j < pos_s {
            // eps_n * (1/(2 D_{n-1}))^(j - pos(Delta_n,0))
            eps_exp - BigInt::from(1 + d_prev) * BigInt::from(j - &st.pos_delta)
        } else {
            // alpha_{pos(s_n,0)-1} * 2^(j - pos(s_n,0))
            let bottom = pos_s - 1u32;
            let bottom_exp =
                eps_exp - BigInt::from(1 + d_prev) * BigInt::from(&bottom - &st.pos_delta);
            bottom_exp + BigInt::from(j - pos_s)
        }
    }

    /// Closed-form T^j e_0: unfolds the echo recursion, support at most
    /// one entry per stage plus the final pure term.
    pub fn t_power_e0(&self, j: &Rank) -> Result<SparseVector> {
        let mut out = SparseVector::zero();
        let mut cur = j.clone();
        loop {
            match self.classify(&cur)? {
                RankClass::Zero => {
                    out.add_entry(Coord::new(0u32, 0u32), Scalar::one());
                    return Ok(out);
                }
                RankClass::Pure { .. } => {
                    let c = self.geometry.rank_to_coord(&cur)?;
                    let a = self.alpha(&cur)?;
                    out.add_entry(c, a);
                    return Ok(out);
                }
                RankClass::Echo { n } => {
                    let st = &self.stages[n as usize];
                    let c = self.geometry.rank_to_coord(&cur)?;
                    out.add_entry(c, st.eps.clone());
                    cur = &cur - &st.pos_a;
                }
            }
        }
    }

    /// Image of the basis vector e_j under T: the five-case table.
    pub fn apply_to_basis(&self, j: &Rank) -> Result<SparseVector> {
        let succ = j + 1u32;
        match self.classify(j)? {
            RankClass::Zero => {
                // T e_0 = alpha_1 e_1.
                let a1 = self.alpha(&succ)?;
                Ok(SparseVector::single(self.geometry.rank_to_coord(&succ)?, a1))
            }
            RankClass::Pure { n } => {
                let st = &self.stages[n as usize];
                if succ < st.pos_a {
                    // Interior: (alpha_{j+1}/alpha_j) e_{j+1}.
                    let ratio = Scalar::pow2(self.alpha_exp(n, &succ) - self.alpha_exp(n, j));
                    Ok(SparseVector::single(self.geometry.rank_to_coord(&succ)?, ratio))
                } else {
                    // j = pos(a_n,0) - 1: (1/alpha_j)(eps_n e_{pos(a_n,0)} + e_0).
                    let inv = self.alpha(j)?.recip();
                    let mut out = SparseVector::single(
                        self.geometry.rank_to_coord(&succ)?,
                        &st.eps * &inv,
                    );
                    out.add_entry(Coord::new(0u32, 0u32), inv);
                    Ok(out)
                }
            }
            RankClass::Echo { n } => {
                let st = &self.stages[n as usize];
                if succ < st.pos_delta_next {
                    // Interior: e_{j+1}.
                    Ok(SparseVector::unit(self.geometry.rank_to_coord(&succ)?))
                } else {
                    // j = pos(Delta_{n+1},0) - 1 needs alpha at the first
                    // rank of stage n+1.
                    if (n as usize) + 1 >= self.stages.len() {
                        return Err(Error::HorizonExceeded(format!(
                            "image of e_{j} needs stage {} which is not committed",
                            n + 1
                        )));
                    }
                    let big_a = st.big_a();
                    let alpha_hi = self.alpha(&st.pos_delta_next)?;
                    let alpha_lo = self.alpha(&st.pos_delta)?;
                    let mut out = SparseVector::single(
                        self.geometry.rank_to_coord(&st.pos_delta_next)?,
                        &big_a * &alpha_hi,
                    );
                    out.add_entry(
                        self.geometry.rank_to_coord(&st.pos_delta)?,
                        -&(&big_a * &alpha_lo),
                    );
                    Ok(out)
                }
            }
        }
    }

    /// Linear extension of the basis table to sparse vectors.
    pub fn apply(&self, x: &SparseVector) -> Result<SparseVector> {
        let mut out = SparseVector::zero();
        for (c, v) in x.iter() {
            let j = self.geometry.coord_to_rank(c)?;
            for (ci, vi) in self.apply_to_basis(&j)?.iter() {
                out.add_entry(ci.clone(), vi * v);
            }
        }
        Ok(out)
    }

    /// Coefficients y with x = sum_k y_k T^k e_0. Pure ranks invert the
    /// diagonal; echo ranks use e_j = A(gamma_j - gamma_{j - pos(a_n,0)}).
    pub fn to_gamma(&self, x: &SparseVector) -> Result<RankMap> {
        let mut out = RankMap::new();
        for (c, v) in x.iter() {
            let j = self.geometry.coord_to_rank(c)?;
            match self.classify(&j)? {
                RankClass::Zero => add_rank(&mut out, j, v.clone()),
                RankClass::Pure { .. } => {
                    let coeff = v / &self.alpha(&j)?;
                    add_rank(&mut out, j, coeff);
                }
                RankClass::Echo { n } => {
                    let st = &self.stages[n as usize];
                    let big_a = st.big_a();
                    add_rank(&mut out, j.clone(), v * &big_a);
                    add_rank(&mut out, &j - &st.pos_a, -&(v * &big_a));
                }
            }
        }
        Ok(out)
    }

    /// Exact inverse of to_gamma: sum_k y_k T^k e_0.
    pub fn from_gamma(&self, y: &RankMap) -> Result<SparseVector> {
        let mut out = SparseVector::zero();
        for (k, v) in y {
            for (c, w) in self.t_power_e0(k)?.iter() {
                out.add_entry(c.clone(), w * v);
            }
        }
        Ok(out)
    }

    /// T^k x through the gamma coordinates; cost independent of k.
    pub fn apply_power(&self, k: &Rank, x: &SparseVector) -> Result<SparseVector> {
        if k.is_zero() {
            return Ok(x.clone());
        }
        let y = self.to_gamma(x)?;
        let shifted: RankMap = y.into_iter().map(|(r, v)| (&r + k, v)).collect();
        self.from_gamma(&shifted)
    }

    /// P(T)x for P = sum_i c_i t^i with i >= 1 (no constant term).
    pub fn apply_polynomial(&self, coeffs: &RankMap, x: &SparseVector) -> Result<SparseVector> {
        if coeffs.keys().any(|k| k.is_zero()) {
            return Err(Error::ConstantTermPresent);
        }
        let y = self.to_gamma(x)?;
        let mut acc = RankMap::new();
        for (i, ci) in coeffs {
            if ci.is_zero() {
                continue;
            }
            for (k, yk) in &y {
                add_rank(&mut acc, i + k, ci * yk);
            }
        }
        self.from_gamma(&acc)
    }

    /// ||x||_N, seeing columns 0..=N only.
    pub fn product_norm(&self, x: &SparseVector, level: u32) -> Result<Scalar> {
        self.weights.product_seminorm(x, level)
    }

    /// The graded norm over all columns.
    pub fn graded_norm(&self, x: &SparseVector, level: u32) -> Result<Scalar> {
        self.weights.graded_seminorm(x, level)
    }
}

pub(crate) fn add_rank(map: &mut RankMap, k: Rank, v: Scalar) {
    if v.is_zero() {
        return;
    }
    match map.get_mut(&k) {
        Some(cur) => {
            let sum = &*cur + &v;
            if sum.is_zero() {
                map.remove(&k);
            } else {
                *cur = sum;
            }
        }
        None => {
            map.insert(k, v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn toy() -> OperatorModel {
        let b = |v: u64| Some(BigUint::from(v));
        let specs = vec![
            StageSpec { b: None, s: None, a: BigUint::from(4u32), d_exp: 0 },
            StageSpec { b: b(6), s: b(14), a: BigUint::from(16u32), d_exp: 0 },
            StageSpec { b: b(30), s: b(62), a: BigUint::from(64u32), d_exp: 0 },
            StageSpec { b: b(120), s: b(242), a: BigUint::from(250u32), d_exp: 0 },
        ];
        OperatorModel::assemble(Mode::Toy, WeightConfig::default(), &specs).unwrap()
    }

    fn rk(v: u64) -> Rank {
        Rank::from(v)
    }

    #[test]
    fn level_sequence() {
        let want = [0, 1, 0, 1, 2, 0, 1, 2, 3, 0, 1, 2, 3, 4];
        let got: Vec<u32> = (0..14).map(nn_level).collect();
        assert_eq!(got, want);
        assert_eq!(first_stage_with_level(0), 0);
        assert_eq!(first_stage_with_level(1), 1);
        assert_eq!(first_stage_with_level(2), 4);
        assert_eq!(first_stage_with_level(3), 8);
        for n in 0..200u64 {
            assert!(u64::from(nn_level(n)) <= n);
        }
        // Every value recurs: at least three occurrences of each level
        // below 7 within the first 60 indices.
        for level in 0..7u32 {
            let hits = (0..60u64).filter(|&n| nn_level(n) == level).count();
            assert!(hits >= 3, "level {level} recurs only {hits} times");
        }
    }

    #[test]
    fn assembled_anchors() {
        let m = toy();
        let st = m.stages();
        assert_eq!(st.len(), 4);
        assert_eq!(st[0].delta_next, BigUint::from(5u32));
        assert_eq!(st[0].eps, Scalar::ratio(1, 4));
        assert_eq!(st[1].pos_s, Some(rk(40)));
        assert_eq!(st[1].pos_a, rk(42));
        assert_eq!(st[1].pos_delta_next, rk(47));
        assert_eq!(st[1].eps, Scalar::pow2(-9));
        assert_eq!(st[2].pos_delta_next, rk(355));
        assert_eq!(st[3].pos_delta_next, rk(2051));
        for s in st {
            assert_eq!(s.pos_delta_next, &s.pos_a + &s.pos_delta);
            assert_eq!(s.level, nn_level(u64::from(s.n)));
        }
    }

    #[test]
    fn assemble_rejects_bad_interleaving() {
        let specs = vec![
            StageSpec { b: None, s: None, a: BigUint::from(4u32), d_exp: 0 },
            StageSpec {
                b: Some(BigUint::from(5u32)), // must exceed Delta_1 = 5
                s: Some(BigUint::from(11u32)),
                a: BigUint::from(12u32),
                d_exp: 0,
            },
        ];
        assert!(OperatorModel::assemble(Mode::Toy, WeightConfig::default(), &specs).is_err());
    }

    #[test]
    fn alpha_values_and_domain() {
        let m = toy();
        assert_eq!(m.alpha(&rk(1)).unwrap(), Scalar::ratio(1, 4));
        assert_eq!(m.alpha(&rk(2)).unwrap(), Scalar::ratio(1, 2));
        assert_eq!(m.alpha(&rk(3)).unwrap(), Scalar::one());
        // First rank of stage 1 carries eps_1.
        assert_eq!(m.alpha(&rk(5)).unwrap(), Scalar::pow2(-9));
        assert_eq!(m.alpha(&rk(6)).unwrap(), Scalar::pow2(-10));
        // Doubling zone: alpha at pos_s equals alpha at pos_s - 1.
        assert_eq!(m.alpha(&rk(40)).unwrap(), m.alpha(&rk(39)).unwrap());
        assert_eq!(m.alpha(&rk(41)).unwrap(), &m.alpha(&rk(40)).unwrap() * &Scalar::from_int(2));
        assert!(matches!(m.alpha(&rk(0)), Err(Error::RankOutsideAlphaDomain(_))));
        assert!(matches!(m.alpha(&rk(4)), Err(Error::RankOutsideAlphaDomain(_))));
        assert!(matches!(m.alpha(&rk(5000)), Err(Error::HorizonExceeded(_))));
    }

    #[test]
    fn t_power_closed_forms() {
        let m = toy();
        let e0 = SparseVector::unit(Coord::new(0u32, 0u32));
        assert_eq!(m.t_power_e0(&rk(0)).unwrap(), e0);
        for j in 1..4u64 {
            let v = m.t_power_e0(&rk(j)).unwrap();
            assert_eq!(v.support_len(), 1);
            assert_eq!(
                v.get(&Coord::new(j, 0u32)).unwrap(),
                &(&Scalar::pow2(j as i64 - 1) * &Scalar::ratio(1, 4))
            );
        }
        // Echo rank pos(a_0,0): eps_0 e_4 + e_0.
        let v = m.t_power_e0(&rk(4)).unwrap();
        assert_eq!(v.get(&Coord::new(4u32, 0u32)).unwrap(), &Scalar::ratio(1, 4));
        assert_eq!(v.get(&Coord::new(0u32, 0u32)).unwrap(), &Scalar::one());
        // Deep echo chains: rank 46 = 42 + 4 unfolds twice.
        let v = m.t_power_e0(&rk(46)).unwrap();
        assert_eq!(v.support_len(), 3);
        assert_eq!(v.get(&Coord::new(0u32, 0u32)).unwrap(), &Scalar::one());
        assert!(matches!(m.t_power_e0(&rk(2051)), Err(Error::HorizonExceeded(_))));
    }

    #[test]
    fn apply_matches_five_cases() {
        let m = toy();
        // Case 1.
        let e0 = SparseVector::unit(Coord::new(0u32, 0u32));
        assert_eq!(
            m.apply(&e0).unwrap(),
            SparseVector::single(Coord::new(1u32, 0u32), Scalar::ratio(1, 4))
        );
        // Case 3 at stage 0: alpha_3 = 1.
        let v = m.apply(&m.basis_vector(&rk(3)).unwrap()).unwrap();
        assert_eq!(v.get(&Coord::new(4u32, 0u32)).unwrap(), &Scalar::ratio(1, 4));
        assert_eq!(v.get(&Coord::new(0u32, 0u32)).unwrap(), &Scalar::one());
        // Case 5 at stage 0 (rank 4): A alpha_5 e_5 - A alpha_1 e_1.
        let v = m.apply(&m.basis_vector(&rk(4)).unwrap()).unwrap();
        assert_eq!(v.get(&Coord::new(5u32, 0u32)).unwrap(), &Scalar::pow2(-7));
        assert_eq!(v.get(&Coord::new(1u32, 0u32)).unwrap(), &Scalar::from_int(-1));
        // Case 4: echo interior shifts by one.
        let v = m.apply(&m.basis_vector(&rk(43)).unwrap()).unwrap();
        assert_eq!(v, m.basis_vector(&rk(44)).unwrap());
        // Case 2: pure interior.
        let v = m.apply(&m.basis_vector(&rk(6)).unwrap()).unwrap();
        assert_eq!(
            v,
            SparseVector::single(
                m.geometry().rank_to_coord(&rk(7)).unwrap(),
                Scalar::pow2(-1)
            )
        );
        // The final boundary needs the uncommitted stage 4.
        assert!(matches!(
            m.apply(&m.basis_vector(&rk(2050)).unwrap()),
            Err(Error::HorizonExceeded(_))
        ));
    }

    #[test]
    fn iterated_apply_matches_closed_form() {
        let m = toy();
        let mut cur = SparseVector::unit(Coord::new(0u32, 0u32));
        for j in 0..=259u64 {
            assert_eq!(cur, m.t_power_e0(&rk(j)).unwrap(), "at power {j}");
            cur = m.apply(&cur).unwrap();
        }
    }

    #[test]
    fn gamma_echo_expansion() {
        let m = toy();
        // e_43 = A_{1,16} (gamma_43 - gamma_1) with A_{1,16} = 512.
        let y = m.to_gamma(&m.basis_vector(&rk(43)).unwrap()).unwrap();
        assert_eq!(y.len(), 2);
        assert_eq!(y[&rk(43)], Scalar::from_int(512));
        assert_eq!(y[&rk(1)], Scalar::from_int(-512));
        // e_0 is gamma_0; pure ranks invert the diagonal.
        let y = m.to_gamma(&SparseVector::unit(Coord::new(0u32, 0u32))).unwrap();
        assert_eq!(y.len(), 1);
        assert_eq!(y[&rk(0)], Scalar::one());
        let y = m.to_gamma(&m.basis_vector(&rk(2)).unwrap()).unwrap();
        assert_eq!(y[&rk(2)], Scalar::from_int(2));
    }

    fn random_vector(m: &OperatorModel, rng: &mut ChaCha8Rng, max_rank: u64, terms: usize) -> SparseVector {
        let mut x = SparseVector::zero();
        for _ in 0..terms {
            let j = rk(rng.gen_range(0..=max_rank));
            let c = m.geometry().rank_to_coord(&j).unwrap();
            x.add_entry(c, Scalar::ratio(rng.gen_range(-9i64..10), rng.gen_range(1i64..9)));
        }
        x
    }

    #[test]
    fn gamma_roundtrip_random() {
        let m = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = random_vector(&m, &mut rng, 2040, 6);
            let y = m.to_gamma(&x).unwrap();
            assert_eq!(m.from_gamma(&y).unwrap(), x);
            let back = m.to_gamma(&m.from_gamma(&y).unwrap()).unwrap();
            assert_eq!(back, y);
        }
    }

    #[test]
    fn power_matches_iteration() {
        let m = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = random_vector(&m, &mut rng, 1900, 4);
            let mut it = x.clone();
            for k in 0..=7u64 {
                assert_eq!(m.apply_power(&rk(k), &x).unwrap(), it, "power {k}");
                it = m.apply(&it).unwrap();
            }
        }
    }

    #[test]
    fn polynomial_evaluation() {
        let m = toy();
        let e0 = SparseVector::unit(Coord::new(0u32, 0u32));
        let mut p = RankMap::new();
        p.insert(rk(1), Scalar::one());
        assert_eq!(m.apply_polynomial(&p, &e0).unwrap(), m.apply(&e0).unwrap());
        // t^{pos(a_0,0)} sends e_0 to the echo vector.
        let mut p = RankMap::new();
        p.insert(rk(4), Scalar::one());
        assert_eq!(m.apply_polynomial(&p, &e0).unwrap(), m.t_power_e0(&rk(4)).unwrap());
        let mut p = RankMap::new();
        p.insert(rk(0), Scalar::one());
        assert!(matches!(
            m.apply_polynomial(&p, &e0),
            Err(Error::ConstantTermPresent)
        ));
    }
}
