//! Deterministic samplers for K_n candidates and random test vectors.
//!
//! Draws come from a ChaCha stream keyed by the configured seed (recorded
//! in reports), so every run reproduces the same samples and enlarging the
//! sample count only appends draws.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operator::OperatorModel;
use crate::scalar::Scalar;
use crate::stage::{k_membership, KMembership};
use crate::vector::{Rank, SparseVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub count: u32,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { seed: 7, count: 64 }
    }
}

pub fn rng_for(cfg: &SamplerConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// gamma_p scaled to graded-0 norm 1.
fn unit_gamma(model: &OperatorModel, p: u64) -> Result<SparseVector> {
    let g = model.t_power_e0(&Rank::from(p))?;
    let norm = model.graded_norm(&g, 0)?;
    Ok(g.scaled(&norm.recip()))
}

/// Draws `count` members of K_n: unit-normalized scaled basis vectors,
/// two-term mixtures in the perturbed basis, and near-cancellation pairs
/// with a small leading coefficient. Draws failing the tau condition are
/// skipped; the stream is deterministic for a given seed.
pub fn k_samples(
    model: &OperatorModel,
    n: u32,
    cfg: &SamplerConfig,
    count: u32,
) -> Result<Vec<SparseVector>> {
    let st = model.stage(n)?.clone();
    let cut = st.pos_delta_next.to_u64().ok_or_else(|| {
        Error::SampleFailure("head dimension exceeds the sampling range".into())
    })?;
    let split = st.pos_a.to_u64().expect("split below head dimension");
    let special: Vec<u64> = [0, 1, split - 1, split, cut - 1]
        .into_iter()
        .filter(|&r| r < cut)
        .collect();

    let mut rng = rng_for(cfg, u64::from(n));
    let mut out = Vec::with_capacity(count as usize);
    let mut attempts = 0u32;
    while out.len() < count as usize && attempts < count.saturating_mul(20) {
        let family = attempts % 3;
        attempts += 1;
        let raw = match family {
            0 => {
                // A scaled basis vector.
                let r = if rng.gen_bool(0.5) {
                    special[rng.gen_range(0..special.len())]
                } else {
                    rng.gen_range(0..cut)
                };
                let e = model.basis_vector(&Rank::from(r))?;
                let norm = model.graded_norm(&e, 0)?;
                e.scaled(&norm.recip())
            }
            1 => {
                // A two-term mixture of perturbed basis vectors.
                let p = rng.gen_range(0..split);
                let q = rng.gen_range(p + 1..cut);
                let u_num = [1i64, -1, 3, -3][rng.gen_range(0..4)];
                let u_den = [1i64, 2, 4][rng.gen_range(0..3)];
                let v_num = [1i64, -1][rng.gen_range(0..2)];
                let v_den = [1i64, 2, 4][rng.gen_range(0..3)];
                let gp = unit_gamma(model, p)?.scaled(&Scalar::ratio(u_num, u_den));
                let gq = unit_gamma(model, q)?.scaled(&Scalar::ratio(v_num, v_den));
                crate::vector::vec_combine(&Scalar::one(), &gp, &Scalar::one(), &gq)
            }
            _ => {
                // Near cancellation: a tiny leading coefficient before a
                // full-size later term.
                let p = rng.gen_range(0..split);
                let q = rng.gen_range(p + 1..cut);
                let delta = Scalar::pow2(-rng.gen_range(1i64..4));
                let gp = unit_gamma(model, p)?.scaled(&delta);
                let gq = unit_gamma(model, q)?.scaled(&Scalar::ratio(1, 2));
                crate::vector::vec_combine(&Scalar::one(), &gp, &Scalar::one(), &gq)
            }
        };
        if raw.is_zero() {
            continue;
        }
        let norm = model.graded_norm(&raw, 0)?;
        let y = raw.scaled(&norm.recip());
        if let KMembership::Qualifies { scale } = k_membership(model, n, &y)? {
            if scale == BigUint::one() {
                out.push(y);
            }
        }
    }
    Ok(out)
}

/// Seeded convenience wrapper: draws until the vector is non-zero.
pub fn seeded_random_vector(
    model: &OperatorModel,
    seed: u64,
    max_rank_excl: u64,
    terms: usize,
) -> Result<SparseVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v = random_vector(model, &mut rng, max_rank_excl, terms)?;
        if !v.is_zero() {
            return Ok(v);
        }
    }
}

/// Random finitely supported vector with ranks below `max_rank_excl` and
/// small rational coefficients.
pub fn random_vector(
    model: &OperatorModel,
    rng: &mut ChaCha8Rng,
    max_rank_excl: u64,
    terms: usize,
) -> Result<SparseVector> {
    let mut x = SparseVector::zero();
    for _ in 0..terms {
        let j = Rank::from(rng.gen_range(0..max_rank_excl));
        let c = model.geometry().rank_to_coord(&j)?;
        let num = rng.gen_range(-9i64..10);
        let den = rng.gen_range(1i64..9);
        x.add_entry(c, Scalar::ratio(num, den));
    }
    Ok(x)
}
