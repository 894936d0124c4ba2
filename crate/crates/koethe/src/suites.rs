//! Verification suites: exact re-checks of the inequalities and
//! identities the construction rests on, with structured reports.
//!
//! Each suite enumerates a finite instance family, evaluates both sides
//! exactly, and emits one record per assertion family carrying the
//! worst-case witness plus one record per failing instance. Suites whose
//! truth depends on the growth conditions are flagged expected-fail when
//! run against toy parameters.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cyclicity::{find_polynomial, gamma_divide, head_qualify, lp_route, tail_bound_check, HeadQualification, Route};
use crate::error::{Error, Result};
use crate::operator::{Mode, OperatorModel, RankClass};
use crate::sampler::{k_samples, random_vector, SamplerConfig};
use crate::scalar::Scalar;
use crate::stage::{pi, tau};
use crate::vector::{vec_combine, Rank, RankMap, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteId {
    Prop21,
    EqPos,
    Prop71,
    Lemma81,
    Prop82,
    Lemma91,
    Prop92,
    Prop101,
    Lemma111,
    Prop112,
    Prop61,
}

impl SuiteId {
    pub const ALL: [SuiteId; 11] = [
        SuiteId::Prop21,
        SuiteId::EqPos,
        SuiteId::Prop71,
        SuiteId::Lemma81,
        SuiteId::Prop82,
        SuiteId::Lemma91,
        SuiteId::Prop92,
        SuiteId::Prop101,
        SuiteId::Lemma111,
        SuiteId::Prop112,
        SuiteId::Prop61,
    ];

    pub fn key(self) -> &'static str {
        match self {
            SuiteId::Prop21 => "prop2.1",
            SuiteId::EqPos => "eq-pos",
            SuiteId::Prop71 => "prop7.1",
            SuiteId::Lemma81 => "lemma8.1",
            SuiteId::Prop82 => "prop8.2",
            SuiteId::Lemma91 => "lemma9.1",
            SuiteId::Prop92 => "prop9.2",
            SuiteId::Prop101 => "prop10.1",
            SuiteId::Lemma111 => "lemma11.1",
            SuiteId::Prop112 => "prop11.2",
            SuiteId::Prop61 => "prop6.1",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.key() == key)
    }

    /// Whether the suite's truth rests on the growth conditions (so toy
    /// parameters are expected to break it).
    pub fn condition_dependent(self) -> bool {
        matches!(
            self,
            SuiteId::Prop82 | SuiteId::Prop92 | SuiteId::Lemma111 | SuiteId::Prop112 | SuiteId::Prop61
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Failed, but the failure is expected for toy parameters.
    XFail,
}

impl Verdict {
    pub fn key(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::XFail => "XFAIL(toy)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckRecord {
    pub suite: SuiteId,
    pub instance: String,
    pub lhs: String,
    pub rhs: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub suite: SuiteId,
    pub records: Vec<CheckRecord>,
    /// Individually evaluated instances backing the records.
    pub volume: u64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.verdict != Verdict::Fail)
    }

    pub fn counts(&self) -> (u64, u64, u64) {
        let mut c = (0, 0, 0);
        for r in &self.records {
            match r.verdict {
                Verdict::Pass => c.0 += 1,
                Verdict::Fail => c.1 += 1,
                Verdict::XFail => c.2 += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteRanges {
    pub jmax: u64,
    pub nmax: u32,
    pub samples: u32,
    pub seed: u64,
}

impl Default for SuiteRanges {
    fn default() -> Self {
        SuiteRanges { jmax: 5000, nmax: 6, samples: 100, seed: 7 }
    }
}

const MAX_FAIL_RECORDS: usize = 50;

/// Collects worst-case witnesses for a family of exact comparisons
/// lhs <= rhs, recording each failing instance up to a cap.
struct Family {
    suite: SuiteId,
    label: String,
    xfail: bool,
    volume: u64,
    worst: Option<(Scalar, Scalar, String)>,
    failures: Vec<CheckRecord>,
}

impl Family {
    fn new(suite: SuiteId, label: impl Into<String>, xfail: bool) -> Self {
        Family {
            suite,
            label: label.into(),
            xfail,
            volume: 0,
            worst: None,
            failures: Vec::new(),
        }
    }

    /// Record one instance of lhs <= rhs. "Worst" maximizes lhs - rhs.
    fn check(&mut self, instance: impl Into<String>, lhs: Scalar, rhs: Scalar) {
        self.volume += 1;
        let instance = instance.into();
        let slack_is_worse = match &self.worst {
            None => true,
            Some((wl, wr, _)) => &lhs - &rhs > wl - wr,
        };
        if slack_is_worse {
            self.worst = Some((lhs.clone(), rhs.clone(), instance.clone()));
        }
        if lhs > rhs && self.failures.len() < MAX_FAIL_RECORDS {
            self.failures.push(CheckRecord {
                suite: self.suite,
                instance,
                lhs: lhs.to_string(),
                rhs: rhs.to_string(),
                verdict: if self.xfail { Verdict::XFail } else { Verdict::Fail },
            });
        }
    }

    /// Record an equality instance.
    fn check_eq(&mut self, instance: impl Into<String>, lhs: Scalar, rhs: Scalar) {
        // lhs = rhs as two one-sided checks keeps "worst" meaningful.
        let inst = instance.into();
        self.check(inst.clone(), lhs.clone(), rhs.clone());
        self.volume -= 1;
        self.check(inst, rhs, lhs);
    }

    fn into_records(self, out: &mut Vec<CheckRecord>) -> u64 {
        let any_fail = !self.failures.is_empty();
        let (lhs, rhs, at) = match self.worst {
            Some(w) => w,
            None => (Scalar::zero(), Scalar::zero(), "vacuous".into()),
        };
        out.push(CheckRecord {
            suite: self.suite,
            instance: format!("{} [worst at {}; {} instances]", self.label, at, self.volume),
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
            verdict: if !any_fail {
                Verdict::Pass
            } else if self.xfail {
                Verdict::XFail
            } else {
                Verdict::Fail
            },
        });
        out.extend(self.failures);
        self.volume
    }
}

/// Runs one suite against the model.
pub fn run_suite(model: &OperatorModel, suite: SuiteId, ranges: &SuiteRanges) -> Result<SuiteReport> {
    let xfail = suite.condition_dependent() && model.mode() == Mode::Toy;
    let mut records = Vec::new();
    let mut volume = 0u64;
    match suite {
        SuiteId::Prop21 => suite_prop21(model, ranges, xfail, &mut records, &mut volume)?,
        SuiteId::EqPos => suite_eq_pos(model, xfail, &mut records, &mut volume)?,
        SuiteId::Prop71 => suite_prop71(model, ranges, xfail, &mut records, &mut volume)?,
        SuiteId::Lemma81 => suite_lemma81(model, ranges, xfail, &mut records, &mut volume)?,
        SuiteId::Prop82 => suite_prop82(model, ranges, xfail, &mut records, &mut volume)?,
        SuiteId::Lemma91 => suite_lemma91(model, ranges, xfail, &mut records, &mut volume)?,
        SuiteId::Prop92 => suite_prop92(model, ranges, xfail, &mut records, &mut volume)?,
        SuiteId::Prop101 => suite_prop101(model, ranges, xfail, &mut records, &mut volume)?,
        SuiteId::Lemma111 => suite_lemma111(model, ranges, xfail, &mut records, &mut volume)?,
        SuiteId::Prop112 => suite_prop112(model, ranges, xfail, &mut records, &mut volume)?,
        SuiteId::Prop61 => suite_prop61(model, ranges, xfail, &mut records, &mut volume)?,
    }
    Ok(SuiteReport { suite, records, volume })
}

/// Runs every suite in declaration order.
pub fn run_all(model: &OperatorModel, ranges: &SuiteRanges) -> Result<Vec<SuiteReport>> {
    SuiteId::ALL
        .into_iter()
        .map(|s| run_suite(model, s, ranges))
        .collect()
}

fn suite_prop21(
    model: &OperatorModel,
    ranges: &SuiteRanges,
    xfail: bool,
    records: &mut Vec<CheckRecord>,
    volume: &mut u64,
) -> Result<()> {
    let t = model.weights();
    let nmax = ranges.nmax.max(10);
    let jmax = ranges.jmax;
    // Scan on raw exponents, tracking the extremal instance per item;
    // the exact witnesses are materialized once at the end.
    let mut w1: (i64, u32, u64) = (i64::MAX, 0, 0); // min m
    let mut w2: (i64, u32, u64) = (i64::MAX, 0, 0); // min m_up - (m+1)
    let mut w3: (i64, u32, u64) = (i64::MAX, 0, 0); // min m - prev
    let mut w4: (i64, u32, u64) = (i64::MAX, 0, 0); // min (prev+1) - m
    let mut count = 0u64;
    for level in 0..=nmax {
        let row = t.row_prefix(level, jmax)?;
        let row_up = t.row_prefix(level + 1, jmax)?;
        let mut prev = 0i64;
        for j in 0..=jmax {
            count += 1;
            let m = i64::from(row[j as usize]);
            let m_up = i64::from(row_up[j as usize]);
            if m < w1.0 {
                w1 = (m, level, j);
            }
            if m_up - m - 1 < w2.0 {
                w2 = (m_up - m - 1, level, j);
            }
            if j > 0 {
                if m - prev < w3.0 {
                    w3 = (m - prev, level, j);
                }
                if prev + 1 - m < w4.0 {
                    w4 = (prev + 1 - m, level, j);
                }
            }
            prev = m;
        }
    }
    let exp2 = |e: i64| Scalar::pow2(BigInt::from(e));
    let range = format!("N<=({nmax}), j<={jmax}");
    for (label, (slack, n, j), lhs, rhs) in [
        ("item1: A >= 1", w1, Scalar::one(), exp2(w1.0)),
        ("item2: strictly increasing in N", w2, exp2(0), exp2(w2.0)),
        ("item3: non-decreasing in j", w3, exp2(0), exp2(w3.0)),
        ("item4: successive ratio <= 2", w4, exp2(0), exp2(w4.0)),
    ] {
        let mut fam = Family::new(SuiteId::Prop21, label, xfail);
        fam.check(format!("(N={n},j={j}) over {range}"), lhs, rhs);
        fam.volume += count - 1;
        let _ = slack;
        *volume += fam.into_records(records);
    }

    // Item 5 witness: the cross-level ratio drops below 1/64 and stays
    // there within the budget.
    let mut item5 = Family::new(SuiteId::Prop21, "item5: decay threshold (eps=1/64)", xfail);
    let budget = 100_000u64.max(jmax);
    for level in 0..=ranges.nmax.min(8) {
        match t.ratio_decay_threshold(level, &Scalar::ratio(1, 64), budget) {
            Ok(thr) => item5.check(
                format!("(N={level}) threshold j0={thr}"),
                Scalar::zero(),
                Scalar::from_int(thr as i64),
            ),
            Err(_) => item5.check(format!("(N={level}) no threshold"), Scalar::one(), Scalar::zero()),
        }
    }
    *volume += item5.into_records(records);

    // Unboundedness witnesses for items 2 and 3. In N the offset rule
    // reaches 2^60 at the 60th row already; in j the mark is reachable at
    // desk scale only for higher rows, so low rows witness strict growth
    // across the budget instead.
    let mut unbounded = Family::new(SuiteId::Prop21, "items2-3: unbounded exponents", xfail);
    unbounded.check(
        "(j=0,N=60)",
        Scalar::pow2(BigInt::from(60)),
        Scalar::pow2(BigInt::from(t.exponent_u(60, 0)?)),
    );
    for level in 0..=ranges.nmax.min(8) {
        let row = t.row_prefix(level, budget)?;
        let m_end = u64::from(*row.last().unwrap());
        if m_end >= 60 {
            let j = row.iter().position(|&m| u64::from(m) >= 60).unwrap();
            unbounded.check(
                format!("(N={level}) A >= 2^60 at j={j}"),
                Scalar::pow2(BigInt::from(60)),
                Scalar::pow2(BigInt::from(u64::from(row[j]))),
            );
        } else {
            let early = budget / 32;
            let m_early = t.exponent_u(level, early)?;
            unbounded.check(
                format!("(N={level}) gains >= 4 doublings over [{early}, {budget}]"),
                Scalar::pow2(BigInt::from(m_early + 4)),
                Scalar::pow2(BigInt::from(m_end)),
            );
        }
    }
    *volume += unbounded.into_records(records);

    // Item 6 witness: 2^j / A_{N,j} >= 2^(ceil(j/2)) from a found threshold on.
    let mut item6 = Family::new(SuiteId::Prop21, "item6: 2^j/A growth past threshold", xfail);
    for level in 0..=ranges.nmax.min(8) {
        let row = t.row_prefix(level, jmax)?;
        let mut threshold = None;
        for j in (0..=jmax).rev() {
            if u64::from(row[j as usize]) > j / 2 {
                threshold = Some(j + 1);
                break;
            }
        }
        let thr = threshold.unwrap_or(0);
        if thr > jmax {
            item6.check(format!("(N={level}) no threshold within {jmax}"), Scalar::one(), Scalar::zero());
            continue;
        }
        // Worst slack of j - m - ceil(j/2) >= 0 past the threshold.
        let mut worst: Option<(i64, u64)> = None;
        let mut n_inst = 0u64;
        for j in thr..=jmax {
            n_inst += 1;
            let slack = j as i64 - i64::from(row[j as usize]) - j.div_ceil(2) as i64;
            if worst.is_none_or(|(w, _)| slack < w) {
                worst = Some((slack, j));
            }
        }
        if let Some((_, j)) = worst {
            let m = i64::from(row[j as usize]);
            item6.check(
                format!("(N={level},j={j}, threshold {thr})"),
                Scalar::pow2(BigInt::from(j.div_ceil(2))),
                Scalar::pow2(BigInt::from(j as i64 - m)),
            );
            item6.volume += n_inst - 1;
        }
    }
    *volume += item6.into_records(records);
    Ok(())
}

fn suite_eq_pos(
    model: &OperatorModel,
    xfail: bool,
    records: &mut Vec<CheckRecord>,
    volume: &mut u64,
) -> Result<()> {
    let mut fam = Family::new(SuiteId::EqPos, "pos(Delta_{n+1},0) = pos(a_n,0) + pos(Delta_n,0)", xfail);
    for st in model.stages() {
        fam.check_eq(
            format!("stage {}", st.n),
            Scalar::from_biguint(st.pos_delta_next.clone()),
            Scalar::from_biguint(&st.pos_a + &st.pos_delta),
        );
    }
    *volume += fam.into_records(records);
    Ok(())
}

/// Ranks exercised by the operator suites: an initial segment plus every
/// committed boundary rank whose image is defined, plus probes around
/// each stage split so all five image cases occur.
fn probe_ranks(model: &OperatorModel, jmax: u64) -> Vec<Rank> {
    let horizon = model.rank_horizon();
    let last_defined = horizon - 2u32; // the final boundary needs the next stage
    let mut ranks: Vec<Rank> = Vec::new();
    let mut push = |r: Rank| {
        if r <= last_defined {
            ranks.push(r);
        }
    };
    let mut j = Rank::from(0u32);
    let cap = Rank::from(jmax);
    while j <= cap && j <= last_defined {
        push(j.clone());
        j += 1u32;
    }
    for st in model.stages() {
        for anchor in [&st.pos_delta, &st.pos_a, &st.pos_delta_next] {
            for off in -3i64..=3 {
                let r = if off < 0 {
                    let o = Rank::from((-off) as u64);
                    if *anchor < o {
                        continue;
                    }
                    anchor - &o
                } else {
                    anchor + Rank::from(off as u64)
                };
                push(r);
            }
        }
    }
    ranks.sort();
    ranks.dedup();
    ranks
}

fn suite_prop71(
    model: &OperatorModel,
    ranges: &SuiteRanges,
    xfail: bool,
    records: &mut Vec<CheckRecord>,
    volume: &mut u64,
) -> Result<()> {
    let mut image = Family::new(SuiteId::Prop71, "Te_j equals the shift route", xfail);
    let mut shape = Family::new(SuiteId::Prop71, "perturbed forward shift shape", xfail);
    let mut census = [0u64; 5];
    for j in probe_ranks(model, ranges.jmax) {
        let case = image_case(model, &j)?;
        census[case] += 1;
        let direct = model.apply_to_basis(&j)?;
        // Independent route: shift the gamma expansion by one.
        let gamma = model.to_gamma(&model.basis_vector(&j)?)?;
        let shifted: RankMap = gamma.into_iter().map(|(k, v)| (&k + 1u32, v)).collect();
        let via_gamma = model.from_gamma(&shifted)?;
        let diff = vec_combine(&Scalar::one(), &direct, &Scalar::from_int(-1), &via_gamma);
        image.check_eq(
            format!("j={j} (case {})", case + 1),
            model.graded_norm(&diff, 0)?,
            Scalar::zero(),
        );
        // Support within ranks <= j+1, with a non-zero top coefficient.
        let succ = &j + 1u32;
        let top = model.geometry().rank_to_coord(&succ)?;
        let has_top = direct.get(&top).is_some();
        let mut max_rank = Rank::from(0u32);
        for (c, _) in direct.iter() {
            let r = model.geometry().coord_to_rank(c)?;
            if r > max_rank {
                max_rank = r;
            }
        }
        if !has_top {
            max_rank = &succ + 1u32;
        }
        shape.check(format!("j={j}"), Scalar::from_biguint(max_rank), Scalar::from_biguint(succ));
    }
    *volume += image.into_records(records);
    *volume += shape.into_records(records);
    let all_cases = census.iter().all(|&c| c > 0);
    records.push(CheckRecord {
        suite: SuiteId::Prop71,
        instance: format!(
            "case census: j=0 x{}, pure interior x{}, pre-echo x{}, echo interior x{}, boundary x{}",
            census[0], census[1], census[2], census[3], census[4]
        ),
        lhs: if all_cases { "5".into() } else { "incomplete".into() },
        rhs: "5".into(),
        verdict: if all_cases { Verdict::Pass } else { Verdict::Fail },
    });
    Ok(())
}

fn image_case(model: &OperatorModel, j: &Rank) -> Result<usize> {
    Ok(match model.classify(j)? {
        RankClass::Zero => 0,
        RankClass::Pure { n } => {
            let st = model.stage(n)?;
            if j + 1u32 < st.pos_a {
                1
            } else {
                2
            }
        }
        RankClass::Echo { n } => {
            let st = model.stage(n)?;
            if j + 1u32 < st.pos_delta_next {
                3
            } else {
                4
            }
        }
    })
}

fn suite_lemma81(
    model: &OperatorModel,
    ranges: &SuiteRanges,
    xfail: bool,
    records: &mut Vec<CheckRecord>,
    volume: &mut u64,
) -> Result<()> {
    let mut prod = Family::new(SuiteId::Lemma81, "||e_{j+1}||_N <= 2||e_j||_{N+1}", xfail);
    let mut graded = Family::new(SuiteId::Lemma81, "graded |||e_{j+1}|||_N <= 2|||e_j|||_N", xfail);
    for j in probe_ranks(model, ranges.jmax) {
        let e = model.basis_vector(&j)?;
        let e_next = model.basis_vector(&(&j + 1u32))?;
        for level in 0..=ranges.nmax {
            prod.check(
                format!("(j={j},N={level})"),
                model.product_norm(&e_next, level)?,
                &Scalar::from_int(2) * &model.product_norm(&e, level + 1)?,
            );
            graded.check(
                format!("(j={j},N={level})"),
                model.graded_norm(&e_next, level)?,
                &Scalar::from_int(2) * &model.graded_norm(&e, level)?,
            );
        }
    }
    *volume += prod.into_records(records);
    *volume += graded.into_records(records);
    Ok(())
}

fn suite_prop82(
    model: &OperatorModel,
    ranges: &SuiteRanges,
    xfail: bool,
    records: &mut Vec<CheckRecord>,
    volume: &mut u64,
) -> Result<()> {
    let mut prod = Family::new(SuiteId::Prop82, "||Te_j||_N <= 4||e_j||_{N+1}", xfail);
    let mut graded = Family::new(SuiteId::Prop82, "graded |||Te_j|||_N <= 4|||e_j|||_N", xfail);
    let four = Scalar::from_int(4);
    for j in probe_ranks(model, ranges.jmax) {
        let e = model.basis_vector(&j)?;
        let te = model.apply_to_basis(&j)?;
        for level in 0..=ranges.nmax {
            prod.check(
                format!("(j={j},N={level})"),
                model.product_norm(&te, level)?,
                &four * &model.product_norm(&e, level + 1)?,
            );
            graded.check(
                format!("(j={j},N={level})"),
                model.graded_norm(&te, level)?,
                &four * &model.graded_norm(&e, level)?,
            );
        }
    }
    *volume += prod.into_records(records);
    *volume += graded.into_records(records);

    // Random sparse vectors, the linear-extension form.
    let mut rng = ChaCha8Rng::seed_from_u64(ranges.seed ^ 0x82);
    let mut rand_fam = Family::new(SuiteId::Prop82, "||Tx||_N <= 4||x||_{N+1} on random x", xfail);
    let max_rank = (model.rank_horizon() - 2u32).to_u64().unwrap_or(u64::MAX).min(ranges.jmax);
    for i in 0..ranges.samples.min(20) {
        let x = random_vector(model, &mut rng, max_rank + 1, 6)?;
        if x.is_zero() {
            continue;
        }
        let tx = model.apply(&x)?;
        for level in 0..=ranges.nmax.min(3) {
            rand_fam.check(
                format!("(sample {i},N={level})"),
                model.product_norm(&tx, level)?,
                &four * &model.product_norm(&x, level + 1)?,
            );
        }
    }
    *volume += rand_fam.into_records(records);
    Ok(())
}

fn suite_lemma91(
    model: &OperatorModel,
    ranges: &SuiteRanges,
    xfail: bool,
    records: &mut Vec<CheckRecord>,
    volume: &mut u64,
) -> Result<()> {
    // tau against the independent gamma-truncation route.
    let mut fam = Family::new(SuiteId::Lemma91, "tau_n(e_j) equals gamma truncation", xfail);
    for (n, st) in model.stages().iter().enumerate() {
        let n = n as u32;
        let dim = &st.pos_delta_next;
        let mut ranks: Vec<Rank> = Vec::new();
        if let Some(d) = dim.to_u64() {
            if d <= ranges.jmax.max(64) {
                ranks.extend((0..d).map(Rank::from));
            }
        }
        if ranks.is_empty() {
            // Sample boundaries and a seeded selection.
            let mut rng = ChaCha8Rng::seed_from_u64(ranges.seed ^ 0x91 ^ u64::from(n));
            for anchor in [&st.pos_delta, &st.pos_a] {
                for off in 0u64..3 {
                    let r = anchor + Rank::from(off);
                    if r < *dim {
                        ranks.push(r);
                    }
                }
            }
            ranks.push(dim - 1u32);
            let cap = dim.to_u64().unwrap_or(u64::MAX);
            for _ in 0..ranges.samples {
                ranks.push(Rank::from(rng.gen_range(0..cap)));
            }
            ranks.sort();
            ranks.dedup();
        }
        for j in ranks {
            let e = model.basis_vector(&j)?;
            let via_tau = tau(model, n, &e)?;
            let gamma = model.to_gamma(&e)?;
            let truncated: RankMap = gamma.into_iter().filter(|(k, _)| *k < st.pos_a).collect();
            let via_gamma = model.from_gamma(&truncated)?;
            let diff = vec_combine(&Scalar::one(), &via_tau, &Scalar::from_int(-1), &via_gamma);
            fam.check_eq(format!("(n={n},j={j})"), model.graded_norm(&diff, 0)?, Scalar::zero());
        }
    }
    *volume += fam.into_records(records);
    Ok(())
}

fn suite_prop92(
    model: &OperatorModel,
    ranges: &SuiteRanges,
    xfail: bool,
    records: &mut Vec<CheckRecord>,
    volume: &mut u64,
) -> Result<()> {
    let mut fam = Family::new(SuiteId::Prop92, "|||tau_n x|||_0 <= |||x|||_{N_n+1}", xfail);
    for (n, st) in model.stages().iter().enumerate() {
        let n = n as u32;
        let dim = st.pos_delta_next.to_u64().unwrap_or(u64::MAX);
        // Basis vectors.
        let basis_cap = dim.min(ranges.jmax.max(64));
        for j in 0..basis_cap {
            let e = model.basis_vector(&Rank::from(j))?;
            fam.check(
                format!("(n={n},e_{j})"),
                model.graded_norm(&tau(model, n, &e)?, 0)?,
                model.graded_norm(&e, st.level + 1)?,
            );
        }
        // Random rational combinations.
        let mut rng = ChaCha8Rng::seed_from_u64(ranges.seed ^ 0x92 ^ u64::from(n));
        for i in 0..ranges.samples {
            let x = random_vector(model, &mut rng, dim, 6)?;
            if x.is_zero() {
                continue;
            }
            fam.check(
                format!("(n={n},sample {i})"),
                model.graded_norm(&tau(model, n, &x)?, 0)?,
                model.graded_norm(&x, st.level + 1)?,
            );
        }
    }
    *volume += fam.into_records(records);
    Ok(())
}

fn suite_prop101(
    model: &OperatorModel,
    ranges: &SuiteRanges,
    xfail: bool,
    records: &mut Vec<CheckRecord>,
    volume: &mut u64,
) -> Result<()> {
    let mut fam = Family::new(
        SuiteId::Prop101,
        "normalized heads qualify and satisfy the K_n inequalities",
        xfail,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(ranges.seed ^ 0x101);
    let levels: Vec<u32> = {
        let mut l: Vec<u32> = model.stages().iter().map(|s| s.level).collect();
        l.sort();
        l.dedup();
        l
    };
    for level in levels {
        let first = model
            .stages()
            .iter()
            .find(|s| s.level == level)
            .expect("level present");
        let split = first.pos_a.to_u64().unwrap_or(u64::MAX);
        for i in 0..ranges.samples.min(40) {
            // Support inside the pure zone of the first stage of this
            // level guarantees qualification there.
            let x = random_vector(model, &mut rng, split, 4)?;
            if x.is_zero() {
                continue;
            }
            // Normalize: first occupied column gets |.|_0 norm 2.
            let k0 = x.columns().into_iter().next().unwrap();
            let cn = model.weights().column_seminorm(&x.column_slice(&k0), 0)?;
            let xs = x.scaled(&(&Scalar::from_int(2) / &cn));
            match head_qualify(model, &xs, level)? {
                HeadQualification::Qualified { n, scale } => {
                    let head = pi(model, n, &xs)?;
                    let m = Scalar::from_biguint(scale);
                    fam.check(
                        format!("(level {level},sample {i}) ball"),
                        model.graded_norm(&head.scaled(&m.recip()), 0)?,
                        Scalar::one(),
                    );
                    fam.check(
                        format!("(level {level},sample {i}) tau mass"),
                        Scalar::ratio(1, 2),
                        model.graded_norm(&tau(model, n, &head.scaled(&m.recip()))?, 0)?,
                    );
                }
                HeadQualification::Unresolved => {
                    fam.check(format!("(level {level},sample {i}) unresolved"), Scalar::one(), Scalar::zero());
                }
            }
        }
    }
    *volume += fam.into_records(records);
    Ok(())
}

fn suite_lemma111(
    model: &OperatorModel,
    ranges: &SuiteRanges,
    xfail: bool,
    records: &mut Vec<CheckRecord>,
    volume: &mut u64,
) -> Result<()> {
    let mut norm_fam = Family::new(SuiteId::Lemma111, "||e_{i+j}||_N <= 2^i ||e_j||_{N+1}", xfail);
    let mut col_fam = Family::new(SuiteId::Lemma111, "column moves by at most one", xfail);
    let st = model.stage(0)?.clone();
    let cut = st.pos_delta_next.to_u64().ok_or_else(|| {
        Error::HorizonExceeded("stage-0 head dimension exceeds the sampling range".into())
    })?;
    let hi = model
        .geometry()
        .rank_horizon()
        .map(|h| h.to_u64().unwrap_or(u64::MAX))
        .unwrap_or(u64::MAX)
        .min(cut + ranges.jmax.max(2000) * 4);
    let mut rng = ChaCha8Rng::seed_from_u64(ranges.seed ^ 0x111);
    for sample in 0..ranges.samples.clamp(50, 200) {
        let j = rng.gen_range(cut..hi.saturating_sub(cut).max(cut + 1));
        let i = rng.gen_range(1..=cut);
        if j + i >= hi {
            continue;
        }
        let ej = model.geometry().rank_to_coord(&Rank::from(j))?;
        let eij = model.geometry().rank_to_coord(&Rank::from(j + i))?;
        col_fam.check(
            format!("(sample {sample}: i={i},j={j})"),
            Scalar::from_biguint(eij.j.clone()),
            Scalar::from_biguint(&ej.j + 1u32),
        );
        let vej = SparseVector::unit(ej);
        let veij = SparseVector::unit(eij);
        for level in 0..=ranges.nmax.min(3) {
            norm_fam.check(
                format!("(sample {sample}: i={i},j={j},N={level})"),
                model.product_norm(&veij, level)?,
                &Scalar::pow2(BigInt::from(i)) * &model.product_norm(&vej, level + 1)?,
            );
        }
    }
    *volume += norm_fam.into_records(records);
    *volume += col_fam.into_records(records);
    Ok(())
}

fn suite_prop112(
    model: &OperatorModel,
    ranges: &SuiteRanges,
    xfail: bool,
    records: &mut Vec<CheckRecord>,
    volume: &mut u64,
) -> Result<()> {
    let n = 0u32;
    let st = model.stage(n)?.clone();
    let cut = st.pos_delta_next.to_u64().ok_or_else(|| {
        Error::HorizonExceeded("stage-0 head dimension exceeds the sampling range".into())
    })?;
    let horizon = model.rank_horizon().to_u64().unwrap_or(u64::MAX);
    if horizon <= 2 * cut + 8 {
        records.push(CheckRecord {
            suite: SuiteId::Prop112,
            instance: "tail window requires a further committed stage".into(),
            lhs: "-".into(),
            rhs: "-".into(),
            verdict: Verdict::Pass,
        });
        return Ok(());
    }
    let d_inv = st.d_value().recip();

    // Per-basis sampled pairs, including the pure-decay zone and a
    // zero-column case when one exists in range.
    let mut pairs: Vec<(u64, u64)> = vec![(1, cut), (cut.min(5), cut + 1)];
    let mut zero_col_pair = None;
    let mut decay_checked = false;
    let mut rng = ChaCha8Rng::seed_from_u64(ranges.seed ^ 0x112);
    let sample_hi = horizon.saturating_sub(cut + 1);
    for _ in 0..ranges.samples.max(200) {
        let j = rng.gen_range(cut..sample_hi);
        let i = rng.gen_range(1..=cut);
        pairs.push((i, j));
    }
    // Hunt a rank in a column beyond N_n + 1 for the vanishing case.
    for j in cut..horizon.min(cut + 500_000) {
        let c = model.geometry().rank_to_coord(&Rank::from(j))?;
        if c.j.to_u64().unwrap_or(0) >= u64::from(st.level) + 2 {
            zero_col_pair = Some((1u64, j));
            break;
        }
    }
    if let Some(p) = zero_col_pair {
        pairs.push(p);
    }

    let mut fam = Family::new(SuiteId::Prop112, "||T^i e_j||_{N_n} <= (1/D_n)||e_j||_{N_n+2}", xfail);
    for (i, j) in pairs {
        if j + i + 1 >= horizon || j < cut {
            continue;
        }
        let ej = model.basis_vector(&Rank::from(j))?;
        let ti = model.apply_power(&Rank::from(i), &ej)?;
        let lhs = model.product_norm(&ti, st.level)?;
        let rhs = &d_inv * &model.product_norm(&ej, st.level + 2)?;
        // Flag the structured cases in the instance text.
        let pos_s_next = model
            .stage(n + 1)
            .ok()
            .and_then(|s| s.pos_s.clone())
            .and_then(|p| p.to_u64());
        let mut tag = match pos_s_next {
            Some(ps) if j + i < ps.saturating_sub(cut) => {
                decay_checked = true;
                " pure-decay"
            }
            _ => "",
        };
        if zero_col_pair == Some((i, j)) && lhs.is_zero() {
            tag = " zero-column";
        }
        fam.check(format!("(i={i},j={j}{tag})"), lhs, rhs);
    }
    *volume += fam.into_records(records);
    let _ = decay_checked;

    // Aggregated bound on random tails.
    let mut agg = Family::new(SuiteId::Prop112, "||T^i x||_{N_n} <= (1/D_n)||x||_{N_n+2} on tails", xfail);
    for sample in 0..20 {
        let lo = cut + (rng.gen_range(0..sample_hi.saturating_sub(cut + 200).max(1)));
        let mut x = SparseVector::zero();
        for _ in 0..5 {
            let j = Rank::from(lo + rng.gen_range(0..100));
            x.add_entry(
                model.geometry().rank_to_coord(&j)?,
                Scalar::ratio(rng.gen_range(-9i64..10), rng.gen_range(1i64..9)),
            );
        }
        if x.is_zero() {
            continue;
        }
        let powers: Vec<u64> = (1..=3).map(|k| k * cut / 3).filter(|&p| p > 0 && lo + 100 + p < horizon).collect();
        if powers.is_empty() {
            continue;
        }
        let rep = tail_bound_check(model, n, &x, &powers)?;
        for c in rep.checks {
            agg.check(format!("(tail {sample},i={})", c.power), c.lhs, c.rhs);
        }
    }
    *volume += agg.into_records(records);
    Ok(())
}

fn suite_prop61(
    model: &OperatorModel,
    ranges: &SuiteRanges,
    xfail: bool,
    records: &mut Vec<CheckRecord>,
    volume: &mut u64,
) -> Result<()> {
    let n = 0u32;
    let st = model.stage(n)?.clone();
    let cfg = SamplerConfig { seed: ranges.seed, count: ranges.samples.max(50) };
    let samples = k_samples(model, n, &cfg, 50)?;
    let mut mass_fam = Family::new(SuiteId::Prop61, "coefficient mass within the stage constant", xfail);
    let mut res_fam = Family::new(SuiteId::Prop61, "graded residual <= 3", xfail);
    let mut agree_fam = Family::new(SuiteId::Prop61, "division and LP agree on feasibility", xfail);
    for (i, y) in samples.iter().enumerate() {
        let cert = match find_polynomial(model, n, y) {
            Ok(c) => c,
            Err(Error::ResidualTooLarge { value, bound }) => {
                res_fam.check(
                    format!("(sample {i})"),
                    value.parse().unwrap_or_else(|_| Scalar::from_int(i64::MAX)),
                    bound.parse().unwrap(),
                );
                continue;
            }
            Err(e) => return Err(e),
        };
        mass_fam.check(format!("(sample {i})"), cert.mass.clone(), st.d_value());
        res_fam.check(format!("(sample {i})"), cert.residual.clone(), Scalar::from_int(3));
        if i < 20 && cert.route == Route::Division {
            // Cross-check: the LP route on the same instance is feasible
            // with mass no larger than the division mass.
            let gamma = model.to_gamma(y)?;
            let div = gamma_divide(model, n, &gamma)?;
            if let Some((_, lp_mass)) = lp_route(model, n, &gamma)? {
                agree_fam.check(format!("(sample {i}) lp<=div"), lp_mass, div.mass);
            }
        }
    }
    *volume += mass_fam.into_records(records);
    *volume += res_fam.into_records(records);
    *volume += agree_fam.into_records(records);
    Ok(())
}
