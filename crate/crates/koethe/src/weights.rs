//! The weight matrix A_{N,j} = 2^{m(N,j)} and the seminorm families it
//! generates.
//!
//! Exponents follow the greedy chase
//!
//!   m(N,0) = N,   m(N,j+1) = m(N,j) + 1 if m(N,j) - N < T_N(j+1), else m(N,j)
//!
//! against the target T_N(j) = floor((N+1) * log2(j+1)) (optionally scaled
//! by a rational factor for experiments). The target is computed on
//! integers via bit lengths of (j+1)^(N+1); no transcendental arithmetic
//! appears anywhere. Rows are memoized prefixes and grow on demand; a
//! configurable cap guards accidental astronomically-large requests.

use std::collections::BTreeMap;
use std::sync::RwLock;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vector::SparseVector;

pub const DEFAULT_EVAL_CAP: u64 = 1 << 23;

/// Target curve the exponent chase runs after.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetRule {
    /// floor((N+1) * log2(j+1)); the stock choice.
    Standard,
    /// floor((N+1) * num/den * log2(j+1)); override hook for experiments.
    Scaled { num: u64, den: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightConfig {
    pub target: TargetRule,
    pub eval_cap: u64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig { target: TargetRule::Standard, eval_cap: DEFAULT_EVAL_CAP }
    }
}

impl WeightConfig {
    fn factors(&self, level: u32) -> (u32, u64) {
        let (num, den) = match self.target {
            TargetRule::Standard => (1, 1),
            TargetRule::Scaled { num, den } => (num, den),
        };
        let c = (level as u64 + 1)
            .checked_mul(num)
            .and_then(|c| u32::try_from(c).ok())
            .expect("target multiplier exceeds u32");
        (c, den)
    }

    /// T_N(j) = floor(c * log2(j+1) / d) = floor((bits((j+1)^c) - 1) / d).
    fn target_at(&self, level: u32, j: u64) -> u64 {
        let (c, d) = self.factors(level);
        let bits = BigUint::from(j + 1).pow(c).bits();
        (bits - 1) / d
    }

    /// The exact target value; used by the frontier certificates.
    pub fn target_at_pub(&self, level: u32, j: u64) -> u64 {
        self.target_at(level, j)
    }

    /// Smallest j with T_N(j) >= threshold.
    fn first_j_reaching(&self, level: u32, threshold: u64) -> u64 {
        if threshold == 0 {
            return 0;
        }
        let (c, d) = self.factors(level);
        // Need (j+1)^c >= 2^(threshold * d).
        let x = BigUint::one() << usize::try_from(threshold * d).expect("threshold overflow");
        let r = x.nth_root(c);
        let y = if r.pow(c) >= x { r } else { r + 1u32 };
        y.to_u64().expect("target jump index exceeds u64") - 1
    }
}

struct RowState {
    m: Vec<u32>,
    /// Target at the last computed index.
    target: u64,
    /// Smallest j whose target exceeds `target`.
    next_jump: u64,
}

/// Memoized exponent table; rows grow on demand and are never mutated
/// below their current length, so concurrent readers of frozen prefixes
/// are safe.
#[derive(Debug)]
pub struct WeightTable {
    config: WeightConfig,
    rows: RwLock<BTreeMap<u32, Vec<u32>>>,
}

impl Clone for WeightTable {
    fn clone(&self) -> Self {
        WeightTable {
            config: self.config.clone(),
            rows: RwLock::new(self.rows.read().unwrap().clone()),
        }
    }
}

impl PartialEq for WeightTable {
    fn eq(&self, other: &Self) -> bool {
        // Rows are caches; the config alone determines every value.
        self.config == other.config
    }
}
impl Eq for WeightTable {}

impl WeightTable {
    pub fn new(config: WeightConfig) -> Self {
        if let TargetRule::Scaled { num, den } = config.target {
            assert!(num >= 1 && den >= 1, "scaled target needs num, den >= 1");
        }
        WeightTable { config, rows: RwLock::new(BTreeMap::new()) }
    }

    pub fn standard() -> Self {
        WeightTable::new(WeightConfig::default())
    }

    pub fn config(&self) -> &WeightConfig {
        &self.config
    }

    fn check_cap(&self, j: &BigUint) -> Result<u64> {
        let idx = j.to_u64().ok_or_else(|| Error::WeightBudgetExceeded {
            j: j.to_string(),
            cap: self.config.eval_cap,
        })?;
        if idx > self.config.eval_cap {
            return Err(Error::WeightBudgetExceeded { j: j.to_string(), cap: self.config.eval_cap });
        }
        Ok(idx)
    }

    /// m(N, j); first evaluation of a row prefix costs O(j), later calls
    /// read the memo.
    pub fn exponent_u(&self, level: u32, j: u64) -> Result<u64> {
        if j > self.config.eval_cap {
            return Err(Error::WeightBudgetExceeded { j: j.to_string(), cap: self.config.eval_cap });
        }
        {
            let rows = self.rows.read().unwrap();
            if let Some(row) = rows.get(&level) {
                if (j as usize) < row.len() {
                    return Ok(row[j as usize] as u64);
                }
            }
        }
        let mut rows = self.rows.write().unwrap();
        let row = rows.entry(level).or_insert_with(|| vec![level]);
        if (j as usize) < row.len() {
            return Ok(row[j as usize] as u64);
        }
        let mut state = RowState {
            m: std::mem::take(row),
            target: self.config.target_at(level, 0),
            next_jump: 0,
        };
        // Re-derive the jump bookkeeping for the resume point.
        let resume = state.m.len() as u64 - 1;
        state.target = self.config.target_at(level, resume);
        state.next_jump = self.config.first_j_reaching(level, state.target + 1);
        while (state.m.len() as u64) <= j {
            let jn = state.m.len() as u64;
            if jn >= state.next_jump {
                state.target = self.config.target_at(level, jn);
                state.next_jump = self.config.first_j_reaching(level, state.target + 1);
            }
            let last = *state.m.last().unwrap() as u64;
            let step = u64::from(last - u64::from(level) < state.target);
            state.m.push(u32::try_from(last + step).expect("weight exponent exceeds u32"));
        }
        *row = state.m;
        Ok(row[j as usize] as u64)
    }

    /// The exponent prefix m(N, 0..=upto) as one slice copy; bulk scans
    /// use this instead of per-index lookups.
    pub fn row_prefix(&self, level: u32, upto: u64) -> Result<Vec<u32>> {
        self.exponent_u(level, upto)?;
        let rows = self.rows.read().unwrap();
        Ok(rows.get(&level).unwrap()[..=(upto as usize)].to_vec())
    }

    /// A_{N,j} = 2^{m(N,j)}, a dyadic scalar.
    pub fn weight(&self, level: u32, j: &BigUint) -> Result<Scalar> {
        let idx = self.check_cap(j)?;
        Ok(Scalar::pow2(BigInt::from(self.exponent_u(level, idx)?)))
    }

    pub fn weight_u(&self, level: u32, j: u64) -> Result<Scalar> {
        Ok(Scalar::pow2(BigInt::from(self.exponent_u(level, j)?)))
    }

    /// Sum_i |col(i)| * A_{N,i}, exact.
    pub fn column_seminorm(&self, col: &BTreeMap<BigUint, Scalar>, level: u32) -> Result<Scalar> {
        let mut acc = Scalar::zero();
        for (i, v) in col {
            acc = &acc + &(&v.abs() * &self.weight(level, i)?);
        }
        Ok(acc)
    }

    /// ||x||_N: sums column seminorms over columns 0..=N only; a seminorm,
    /// not a norm.
    pub fn product_seminorm(&self, x: &SparseVector, level: u32) -> Result<Scalar> {
        let cut = BigUint::from(level);
        let mut acc = Scalar::zero();
        for (c, v) in x.iter() {
            if c.j <= cut {
                acc = &acc + &(&v.abs() * &self.weight(level, &c.i)?);
            }
        }
        Ok(acc)
    }

    /// The graded norm: sums column seminorms over every occupied column.
    pub fn graded_seminorm(&self, x: &SparseVector, level: u32) -> Result<Scalar> {
        let mut acc = Scalar::zero();
        for (c, v) in x.iter() {
            acc = &acc + &(&v.abs() * &self.weight(level, &c.i)?);
        }
        Ok(acc)
    }

    /// Smallest j0 <= budget with A_{N,j}/A_{N+1,j} <= eps for all
    /// j in [j0, budget]; a finite witness for the vanishing ratio.
    pub fn ratio_decay_threshold(&self, level: u32, eps: &Scalar, budget: u64) -> Result<u64> {
        if !eps.is_positive() || eps > &Scalar::one() {
            return Err(Error::InvalidParameter(format!(
                "ratio threshold requires 0 < eps <= 1, got {eps}"
            )));
        }
        // 2^-d <= eps iff d >= d_min; find d_min once, then scan on
        // integer exponent differences only.
        let mut d_min = match eps.ceil_log2() {
            Some(e) => (-e).max(BigInt::from(0)),
            None => unreachable!("eps is positive"),
        };
        while Scalar::pow2(-d_min.clone()) > *eps {
            d_min += 1;
        }
        let d_min = d_min.to_u64().ok_or_else(|| {
            Error::BudgetExhausted("ratio threshold is astronomically small".into())
        })?;
        let lo = self.row_prefix(level, budget)?;
        let hi = self.row_prefix(level + 1, budget)?;
        let mut last_violation: Option<u64> = None;
        for j in 0..=budget {
            let diff = u64::from(hi[j as usize]) - u64::from(lo[j as usize]);
            if diff < d_min {
                last_violation = Some(j);
            }
        }
        match last_violation {
            None => Ok(0),
            Some(v) if v < budget => Ok(v + 1),
            Some(_) => Err(Error::BudgetExhausted(format!(
                "no decay threshold for level {level} and eps {eps} within budget {budget}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::{vec_combine, Coord};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table() -> WeightTable {
        WeightTable::standard()
    }

    #[test]
    fn chase_rows_match_hand_evaluation() {
        let t = table();
        let row0: Vec<u64> = (0..8).map(|j| t.exponent_u(0, j).unwrap()).collect();
        assert_eq!(row0, vec![0, 1, 1, 2, 2, 2, 2, 3]);
        let row1: Vec<u64> = (0..8).map(|j| t.exponent_u(1, j).unwrap()).collect();
        assert_eq!(row1, vec![1, 2, 3, 4, 5, 6, 6, 7]);
        assert_eq!(t.weight_u(0, 0).unwrap(), Scalar::one());
        assert_eq!(t.weight_u(3, 0).unwrap(), Scalar::from_int(8));
        assert_eq!(t.weight_u(1, 7).unwrap(), Scalar::from_int(128));
    }

    #[test]
    fn memo_resume_is_consistent() {
        let fresh = table();
        let resumed = table();
        resumed.exponent_u(0, 3).unwrap();
        resumed.exponent_u(0, 40).unwrap();
        for j in 0..=200 {
            assert_eq!(resumed.exponent_u(0, j).unwrap(), fresh.exponent_u(0, j).unwrap());
        }
    }

    #[test]
    fn matrix_items_small_range() {
        let t = table();
        for level in 0..=6u32 {
            for j in 0..=500u64 {
                let m = t.exponent_u(level, j).unwrap();
                let m_up = t.exponent_u(level + 1, j).unwrap();
                assert!(m >= level as u64, "A >= 1 fails at ({level},{j})");
                assert!(m_up > m, "strict increase in N fails at ({level},{j})");
                if j > 0 {
                    let prev = t.exponent_u(level, j - 1).unwrap();
                    assert!(m == prev || m == prev + 1, "j-step not in {{0,1}} at ({level},{j})");
                }
            }
        }
    }

    #[test]
    fn ratio_decay_examples() {
        let t = table();
        assert_eq!(t.ratio_decay_threshold(0, &Scalar::ratio(1, 2), 100).unwrap(), 0);
        assert_eq!(t.ratio_decay_threshold(0, &Scalar::ratio(1, 8), 100).unwrap(), 4);
        assert_eq!(t.ratio_decay_threshold(3, &Scalar::one(), 50).unwrap(), 0);
        assert!(t.ratio_decay_threshold(0, &Scalar::from_int(2), 10).is_err());
        assert!(matches!(
            t.ratio_decay_threshold(0, &Scalar::pow2(-60), 64),
            Err(Error::BudgetExhausted(_))
        ));
    }

    #[test]
    fn eval_cap_guards_requests() {
        let t = WeightTable::new(WeightConfig { target: TargetRule::Standard, eval_cap: 100 });
        assert!(t.exponent_u(0, 100).is_ok());
        assert!(matches!(
            t.exponent_u(0, 101),
            Err(Error::WeightBudgetExceeded { .. })
        ));
        let huge = BigUint::from(u128::MAX);
        assert!(t.weight(0, &huge).is_err());
    }

    #[test]
    fn seminorm_unit_vectors() {
        let t = table();
        // ||e_{n,m}||_N = A_{N,n} for m <= N and 0 for m > N.
        let e = SparseVector::unit(Coord::new(4u32, 2u32));
        assert_eq!(t.product_seminorm(&e, 2).unwrap(), t.weight_u(2, 4).unwrap());
        assert_eq!(t.product_seminorm(&e, 1).unwrap(), Scalar::zero());
        for level in 0..4 {
            assert_eq!(t.graded_seminorm(&e, level).unwrap(), t.weight_u(level, 4).unwrap());
        }
        assert_eq!(t.graded_seminorm(&SparseVector::zero(), 0).unwrap(), Scalar::zero());
        let two_cols: SparseVector = [
            (Coord::new(0u32, 0u32), Scalar::one()),
            (Coord::new(0u32, 7u32), Scalar::one()),
        ]
        .into_iter()
        .collect();
        assert_eq!(t.graded_seminorm(&two_cols, 0).unwrap(), Scalar::from_int(2));
    }

    #[test]
    fn column_seminorm_examples() {
        let t = table();
        assert_eq!(t.column_seminorm(&BTreeMap::new(), 5).unwrap(), Scalar::zero());
        let mut col = BTreeMap::new();
        col.insert(BigUint::from(0u32), Scalar::one());
        assert_eq!(t.column_seminorm(&col, 0).unwrap(), Scalar::one());
        let mut col = BTreeMap::new();
        col.insert(BigUint::from(1u32), Scalar::ratio(1, 2));
        col.insert(BigUint::from(3u32), Scalar::one());
        assert_eq!(t.column_seminorm(&col, 0).unwrap(), Scalar::from_int(5));
    }

    #[test]
    fn seminorm_axioms_random() {
        let t = table();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut x = SparseVector::zero();
            let mut y = SparseVector::zero();
            for _ in 0..6 {
                let c = Coord::new(rng.gen_range(0u64..40), rng.gen_range(0u64..5));
                x.add_entry(c, Scalar::ratio(rng.gen_range(-9i64..10), rng.gen_range(1i64..8)));
                let c = Coord::new(rng.gen_range(0u64..40), rng.gen_range(0u64..5));
                y.add_entry(c, Scalar::ratio(rng.gen_range(-9i64..10), rng.gen_range(1i64..8)));
            }
            let lam = Scalar::ratio(rng.gen_range(-7i64..8), 3);
            for level in [0u32, 2] {
                let nx = t.graded_seminorm(&x, level).unwrap();
                let ny = t.graded_seminorm(&y, level).unwrap();
                let sum = vec_combine(&Scalar::one(), &x, &Scalar::one(), &y);
                assert!(t.graded_seminorm(&sum, level).unwrap() <= &nx + &ny);
                let scaled = x.scaled(&lam);
                assert_eq!(t.graded_seminorm(&scaled, level).unwrap(), &lam.abs() * &nx);
                let pn = t.product_seminorm(&x, level).unwrap();
                assert!(pn <= nx);
            }
        }
    }

    #[test]
    fn scaled_target_rule_differs() {
        let t = WeightTable::new(WeightConfig {
            target: TargetRule::Scaled { num: 2, den: 1 },
            eval_cap: 1000,
        });
        // Doubled target: the N = 0 chase climbs twice as fast.
        let row: Vec<u64> = (0..8).map(|j| t.exponent_u(0, j).unwrap()).collect();
        assert_eq!(row, vec![0, 1, 2, 3, 4, 5, 5, 6]);
    }
}
