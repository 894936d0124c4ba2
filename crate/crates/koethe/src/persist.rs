//! Line-oriented text persistence: parameter files, vector and
//! coefficient files, verification reports and cyclicity certificates.
//!
//! Every format starts with a magic line and is plain UTF-8 with decimal
//! big integers, so certificates stay human-auditable. Rendering is
//! deterministic; a parameter file reloads to a bit-identical model and
//! its sha-256 hash is stamped into every report generated from it.

use std::fmt::Write as _;

use num_bigint::BigUint;
use sha2::{Digest, Sha256};

use crate::cyclicity::CyclicityReport;
use crate::error::{Error, Result};
use crate::operator::{Mode, OperatorModel, StageSpec};
use crate::sampler::SamplerConfig;
use crate::scalar::Scalar;
use crate::stage::{
    ConditionCheck, ConditionId, ConditionReport, ConditionStatus, SearchBudget, Witness,
};
use crate::suites::{SuiteReport, SuiteRanges, Verdict};
use crate::vector::{RankMap, SparseVector};
use crate::weights::{TargetRule, WeightConfig};

pub const PARAMS_MAGIC: &str = "koethe-params v1";
pub const VECTOR_MAGIC: &str = "koethe-vector v1";
pub const RANKMAP_MAGIC: &str = "koethe-ranks v1";
pub const REPORT_MAGIC: &str = "koethe-verify-report v1";
pub const CERT_MAGIC: &str = "koethe-cyclic-report v1";

pub fn sha256_hex(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything a parameter file stores per stage: the raw inputs, the
/// condition report, and the sample size behind the empirical D.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageRecord {
    pub spec: StageSpec,
    pub report: ConditionReport,
    pub d_samples: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterFile {
    pub mode: Mode,
    pub config: WeightConfig,
    pub sampler: SamplerConfig,
    pub budget: SearchBudget,
    pub stages: Vec<StageRecord>,
}

impl ParameterFile {
    pub fn assemble(&self) -> Result<OperatorModel> {
        let specs: Vec<StageSpec> = self.stages.iter().map(|s| s.spec.clone()).collect();
        OperatorModel::assemble(self.mode, self.config.clone(), &specs)
    }
}

fn mode_key(mode: Mode) -> &'static str {
    match mode {
        Mode::Strict => "strict",
        Mode::Toy => "toy",
    }
}

fn status_key(s: ConditionStatus) -> &'static str {
    match s {
        ConditionStatus::Holds => "holds",
        ConditionStatus::Fails => "fails",
        ConditionStatus::Unchecked => "unchecked",
    }
}

fn status_from_key(s: &str) -> Result<ConditionStatus> {
    match s {
        "holds" => Ok(ConditionStatus::Holds),
        "fails" => Ok(ConditionStatus::Fails),
        "unchecked" => Ok(ConditionStatus::Unchecked),
        _ => Err(Error::Parse(format!("unknown condition status {s:?}"))),
    }
}

/// Renders the parameter file, including the derived anchors of the
/// assembled model for auditability (they are re-verified on load).
pub fn render_params(file: &ParameterFile) -> Result<String> {
    let model = file.assemble()?;
    let mut out = String::new();
    let _ = writeln!(out, "{PARAMS_MAGIC}");
    let _ = writeln!(out, "mode {}", mode_key(file.mode));
    match file.config.target {
        TargetRule::Standard => {
            let _ = writeln!(out, "target default");
        }
        TargetRule::Scaled { num, den } => {
            let _ = writeln!(out, "target scaled {num}/{den}");
        }
    }
    let _ = writeln!(out, "eval-cap {}", file.config.eval_cap);
    let _ = writeln!(out, "seed {}", file.sampler.seed);
    let _ = writeln!(out, "sample-count {}", file.sampler.count);
    let _ = writeln!(out, "window {}", file.budget.window);
    let _ = writeln!(out, "scan-cap {}", file.budget.scan_cap);
    let _ = writeln!(out, "stages {}", file.stages.len());
    for (n, rec) in file.stages.iter().enumerate() {
        let st = &model.stages()[n];
        let _ = writeln!(out, "stage {n}");
        let _ = writeln!(out, "level {}", st.level);
        if let Some(b) = &rec.spec.b {
            let _ = writeln!(out, "b {b}");
        }
        if let Some(s) = &rec.spec.s {
            let _ = writeln!(out, "s {s}");
        }
        let _ = writeln!(out, "a {}", rec.spec.a);
        let _ = writeln!(out, "d-exp {}", rec.spec.d_exp);
        let _ = writeln!(out, "d-samples {}", rec.d_samples);
        let _ = writeln!(out, "delta {}", st.delta);
        let _ = writeln!(out, "delta-next {}", st.delta_next);
        let _ = writeln!(out, "eps {}", st.eps);
        let _ = writeln!(out, "pos-delta {}", st.pos_delta);
        if let Some(p) = &st.pos_b {
            let _ = writeln!(out, "pos-b {p}");
        }
        if let Some(p) = &st.pos_s {
            let _ = writeln!(out, "pos-s {p}");
        }
        let _ = writeln!(out, "pos-a {}", st.pos_a);
        let _ = writeln!(out, "pos-delta-next {}", st.pos_delta_next);
        for check in &rec.report.checks {
            let _ = writeln!(
                out,
                "check {}|{}|{}",
                check.id.key(),
                status_key(check.status),
                check.range
            );
            for w in &check.witnesses {
                let _ = writeln!(out, "wit {}|{}|{}|{}", check.id.key(), w.label, w.lhs, w.rhs);
            }
        }
    }
    let _ = writeln!(out, "end");
    Ok(out)
}

pub fn parse_params(text: &str) -> Result<ParameterFile> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(PARAMS_MAGIC) {
        return Err(Error::Parse(format!("expected magic line {PARAMS_MAGIC:?}")));
    }
    let mut mode = None;
    let mut config = WeightConfig::default();
    let mut sampler = SamplerConfig::default();
    let mut budget = SearchBudget::default();
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut current: Option<StageRecord> = None;

    let parse_u64 = |v: &str, what: &str| -> Result<u64> {
        v.trim().parse().map_err(|_| Error::Parse(format!("bad {what}: {v:?}")))
    };
    let parse_big = |v: &str, what: &str| -> Result<BigUint> {
        v.trim().parse().map_err(|_| Error::Parse(format!("bad {what}: {v:?}")))
    };

    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "end" {
            break;
        }
        let (key, value) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "mode" => {
                mode = Some(match value.trim() {
                    "strict" => Mode::Strict,
                    "toy" => Mode::Toy,
                    other => return Err(Error::Parse(format!("unknown mode {other:?}"))),
                });
            }
            "target" => {
                config.target = match value.trim() {
                    "default" => TargetRule::Standard,
                    scaled => {
                        let spec = scaled.strip_prefix("scaled ").ok_or_else(|| {
                            Error::Parse(format!("unknown target rule {scaled:?}"))
                        })?;
                        let (num, den) = spec
                            .split_once('/')
                            .ok_or_else(|| Error::Parse(format!("bad target {spec:?}")))?;
                        let (num, den) =
                            (parse_u64(num, "target num")?, parse_u64(den, "target den")?);
                        if num < 1 || den < 1 {
                            return Err(Error::Parse("scaled target needs num, den >= 1".into()));
                        }
                        TargetRule::Scaled { num, den }
                    }
                };
            }
            "eval-cap" => config.eval_cap = parse_u64(value, "eval-cap")?,
            "seed" => sampler.seed = parse_u64(value, "seed")?,
            "sample-count" => sampler.count = parse_u64(value, "sample-count")? as u32,
            "window" => budget.window = parse_u64(value, "window")?,
            "scan-cap" => budget.scan_cap = parse_u64(value, "scan-cap")?,
            "stages" => {}
            "stage" => {
                if let Some(rec) = current.take() {
                    stages.push(rec);
                }
                let n = parse_u64(value, "stage index")? as u32;
                if n as usize != stages.len() {
                    return Err(Error::Parse(format!(
                        "stage {n} out of order (expected {})",
                        stages.len()
                    )));
                }
                current = Some(StageRecord {
                    spec: StageSpec { b: None, s: None, a: BigUint::from(0u32), d_exp: 0 },
                    report: ConditionReport { stage: n, checks: Vec::new() },
                    d_samples: 0,
                });
            }
            "b" | "s" | "a" | "d-exp" | "d-samples" | "check" | "wit" => {
                let rec = current.as_mut().ok_or_else(|| {
                    Error::Parse(format!("field {key:?} outside a stage block"))
                })?;
                match key {
                    "b" => rec.spec.b = Some(parse_big(value, "b")?),
                    "s" => rec.spec.s = Some(parse_big(value, "s")?),
                    "a" => rec.spec.a = parse_big(value, "a")?,
                    "d-exp" => rec.spec.d_exp = parse_u64(value, "d-exp")?,
                    "d-samples" => rec.d_samples = parse_u64(value, "d-samples")? as u32,
                    "check" => {
                        let mut it = value.splitn(3, '|');
                        let id = it
                            .next()
                            .and_then(ConditionId::from_key)
                            .ok_or_else(|| Error::Parse(format!("bad check line {value:?}")))?;
                        let status = status_from_key(it.next().unwrap_or(""))?;
                        let range = it.next().unwrap_or("").to_string();
                        rec.report.checks.push(ConditionCheck {
                            id,
                            status,
                            witnesses: Vec::new(),
                            range,
                        });
                    }
                    "wit" => {
                        let parts: Vec<&str> = value.splitn(4, '|').collect();
                        if parts.len() != 4 {
                            return Err(Error::Parse(format!("bad witness line {value:?}")));
                        }
                        let id = ConditionId::from_key(parts[0])
                            .ok_or_else(|| Error::Parse(format!("bad witness id {:?}", parts[0])))?;
                        let check = rec
                            .report
                            .checks
                            .iter_mut()
                            .rev()
                            .find(|c| c.id == id)
                            .ok_or_else(|| {
                                Error::Parse(format!("witness before its check: {value:?}"))
                            })?;
                        check.witnesses.push(Witness {
                            label: parts[1].to_string(),
                            lhs: parts[2].parse::<Scalar>()?,
                            rhs: parts[3].parse::<Scalar>()?,
                        });
                    }
                    _ => unreachable!(),
                }
            }
            // Derived fields: verified below against the assembled model.
            "level" | "delta" | "delta-next" | "eps" | "pos-delta" | "pos-b" | "pos-s"
            | "pos-a" | "pos-delta-next" => {}
            other => return Err(Error::Parse(format!("unknown parameter key {other:?}"))),
        }
    }
    if let Some(rec) = current.take() {
        stages.push(rec);
    }
    let file = ParameterFile {
        mode: mode.ok_or_else(|| Error::Parse("missing mode".into()))?,
        config,
        sampler,
        budget,
        stages,
    };
    // Loading must reproduce a valid model; derived lines in the file are
    // informative, the assembled values are authoritative.
    file.assemble()?;
    Ok(file)
}

/// Verifies that the derived lines in a rendered file match a fresh
/// assembly; used by `params check` to detect tampering.
pub fn verify_rendered(file: &ParameterFile, original_text: &str) -> Result<()> {
    let fresh = render_params(file)?;
    if fresh == original_text {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "parameter file does not match its canonical rendering".into(),
        ))
    }
}

// ---------------------------------------------------------------------------
// Vector and coefficient files.

pub fn render_vector(v: &SparseVector) -> String {
    format!("{VECTOR_MAGIC}\n{v}")
}

pub fn parse_vector(text: &str) -> Result<SparseVector> {
    let rest = text
        .strip_prefix(VECTOR_MAGIC)
        .ok_or_else(|| Error::Parse(format!("expected magic line {VECTOR_MAGIC:?}")))?;
    SparseVector::parse_entries(rest)
}

pub fn render_rankmap(m: &RankMap) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{RANKMAP_MAGIC}");
    for (k, v) in m {
        let _ = writeln!(out, "{k} {v}");
    }
    out
}

pub fn parse_rankmap(text: &str) -> Result<RankMap> {
    let rest = text
        .strip_prefix(RANKMAP_MAGIC)
        .ok_or_else(|| Error::Parse(format!("expected magic line {RANKMAP_MAGIC:?}")))?;
    let mut out = RankMap::new();
    for line in rest.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::Parse(format!("bad coefficient line {line:?}")))?;
        let rank: BigUint = k
            .parse()
            .map_err(|_| Error::Parse(format!("bad rank {k:?}")))?;
        let val: Scalar = v.trim().parse()?;
        if !val.is_zero() {
            out.insert(rank, val);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Reports.

pub fn render_suite_reports(
    params_hash: &str,
    mode: Mode,
    ranges: &SuiteRanges,
    reports: &[SuiteReport],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{REPORT_MAGIC}");
    let _ = writeln!(out, "params-hash {params_hash}");
    let _ = writeln!(out, "mode {}", mode_key(mode));
    let _ = writeln!(
        out,
        "ranges jmax={} nmax={} samples={} seed={}",
        ranges.jmax, ranges.nmax, ranges.samples, ranges.seed
    );
    let mut totals = (0u64, 0u64, 0u64);
    for rep in reports {
        let (p, f, x) = rep.counts();
        totals.0 += p;
        totals.1 += f;
        totals.2 += x;
        let _ = writeln!(
            out,
            "suite {} pass={p} fail={f} xfail={x} volume={}",
            rep.suite.key(),
            rep.volume
        );
        for r in &rep.records {
            let _ = writeln!(
                out,
                "check {}|{}|{}|{}|{}",
                r.suite.key(),
                r.instance,
                r.lhs,
                r.rhs,
                r.verdict.key()
            );
        }
    }
    let _ = writeln!(
        out,
        "summary suites={} pass={} fail={} xfail={}",
        reports.len(),
        totals.0,
        totals.1,
        totals.2
    );
    out
}

pub fn render_cyclic_report(params_hash: &str, rep: &CyclicityReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CERT_MAGIC}");
    let _ = writeln!(out, "params-hash {params_hash}");
    let _ = writeln!(out, "level {}", rep.level);
    let _ = writeln!(out, "k0 {}", rep.k0);
    let _ = writeln!(out, "scale {}", rep.scale);
    let _ = writeln!(out, "stage {}", rep.stage);
    let _ = writeln!(out, "k-scale {}", rep.k_scale);
    let _ = writeln!(out, "route {}", rep.certificate.route.key());
    let _ = writeln!(
        out,
        "seminorm {} {}",
        if rep.certificate.seminorm.graded { "graded" } else { "product" },
        rep.certificate.seminorm.level
    );
    for (k, v) in &rep.certificate.coeffs {
        let _ = writeln!(out, "coeff {k} {v}");
    }
    let _ = writeln!(out, "mass {}", rep.certificate.mass);
    let _ = writeln!(out, "head-residual {}", rep.certificate.residual);
    let _ = writeln!(out, "tail-norm {}", rep.tail_norm);
    let _ = writeln!(out, "final-norm {}", rep.final_norm);
    for (k, v) in &rep.polynomial {
        let _ = writeln!(out, "orig-coeff {k} {v}");
    }
    let _ = writeln!(out, "orig-mass {}", rep.polynomial_mass);
    let verdict = if rep.final_norm <= Scalar::from_int(4) { "PASS" } else { "FAIL" };
    let _ = writeln!(out, "verdict {verdict}");
    out
}

/// One human-readable block per check for `params show` and failures.
pub fn render_condition_report(report: &ConditionReport) -> String {
    let mut out = String::new();
    for c in &report.checks {
        let _ = writeln!(
            out,
            "  {:<9} {:<9} {}",
            c.id.key(),
            status_key(c.status),
            c.range
        );
        for w in &c.witnesses {
            let rel = if w.holds() { "<=" } else { ">" };
            let _ = writeln!(out, "    {}: {} {} {}", w.label, w.lhs, rel, w.rhs);
        }
    }
    out
}

pub fn verdict_key(v: Verdict) -> &'static str {
    v.key()
}
