//! The 3-SAT to 2-CSP reduction over a collection of clause subsets, its
//! parameter schedules, and the decoding of good labelings back into
//! assignments.

use crate::agree::{self, AgreeError, AgreementParams, DecodeOptions, DecodeResult, FunctionFamily};
use crate::csp::{Constraint, Csp2Instance, CspError, Labeling};
use crate::exec::{self, Exec};
use crate::formula::{Assignment, CnfFormula, FormulaError, Literal};
use crate::ratio::{self, Rational};
use crate::setsys::{self, EnumOptions, SetSysError, SetSystem};
use dashu_float::round::mode::HalfAway;
use dashu_float::FBig;
use dashu_int::{IBig, UBig};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_VAR_CAP: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    SetSys(#[from] SetSysError),
    #[error(transparent)]
    Csp(#[from] CspError),
    #[error(transparent)]
    Agree(#[from] AgreeError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("clause sets live over {got} clauses but the formula has {expected}")]
    UniverseMismatch { expected: usize, got: usize },
    #[error("vertex {vertex} touches {vars} variables, above the cap of {cap}")]
    VarCapExceeded { vertex: usize, vars: usize, cap: usize },
    #[error("{0} overflows a machine integer")]
    Overflow(&'static str),
    #[error("artifact carries no reduction parameters")]
    MissingParams,
    #[error("label {label:?} of vertex {vertex} is malformed")]
    BadLabel { vertex: usize, label: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamSource {
    Eth { m: u64, c: f64 },
    GapEth,
    Manual,
}

/// Parameters of the reduction. `zeta` doubles as the disperser error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    #[serde(with = "ratio::serde_str")]
    pub alpha: Rational,
    #[serde(with = "ratio::serde_str")]
    pub gamma: Rational,
    #[serde(with = "ratio::serde_str")]
    pub mu: Rational,
    #[serde(with = "ratio::serde_str")]
    pub zeta: Rational,
    pub ell: usize,
    pub r: usize,
    pub h: usize,
    #[serde(with = "ratio::serde_bigint")]
    pub k: BigUint,
    #[serde(with = "ratio::serde_str")]
    pub eps: Rational,
    /// Occurrence bound Δ.
    pub delta: usize,
    pub source: ParamSource,
}

impl ReductionParams {
    /// `ζ' = μ + 2ζ/γ`.
    pub fn zeta_prime(&self) -> Rational {
        &self.mu + ratio::int(2) * &self.zeta / &self.gamma
    }

    /// Parameters handed to the agreement decoder for variable sets of a
    /// formula with occurrence bound `delta`: disperser error `3Δζ` and
    /// uniformity error `3Δμ`.
    pub fn agreement_params(&self, delta: usize) -> AgreementParams {
        let three_delta = ratio::from_usize(3 * delta);
        AgreementParams {
            r: self.r,
            ell: self.ell,
            h: self.h,
            zeta: &three_delta * &self.zeta,
            mu: &three_delta * &self.mu,
            gamma: self.gamma.clone(),
        }
    }
}

/// Working precision, in bits, for the real-valued parts of the schedules.
const PREC: usize = 256;

type Real = FBig<HalfAway, 2>;

fn real_of_big(n: &BigUint) -> Real {
    Real::from_parts(IBig::from(UBig::from_le_bytes(&n.to_bytes_le())), 0).with_precision(PREC).value()
}

fn big_of_ibig(n: &IBig) -> BigInt {
    BigInt::from_signed_bytes_le(&n.to_le_bytes())
}

fn real_of_rational(x: &Rational) -> Real {
    let sign = if x.is_negative() { -1 } else { 1 };
    let n = real_of_big(x.numer().magnitude());
    let d = real_of_big(x.denom().magnitude());
    (n / d) * Real::from(sign)
}

fn rational_of_real(x: &Real) -> Rational {
    let repr = x.repr();
    let sig = big_of_ibig(repr.significand());
    let e = repr.exponent();
    if e >= 0 {
        Rational::from_integer(sig << e as usize)
    } else {
        Rational::new(sig, BigInt::one() << (-e) as usize)
    }
}

/// `log₂ x`, exact whenever `x` is a power of two.
fn log2_real(x: &Real) -> Real {
    let repr = x.repr();
    let bits = big_of_ibig(repr.significand()).bits() as isize;
    let e = repr.exponent() + bits - 1;
    let y = Real::from_parts(repr.significand().clone(), -(bits - 1)).with_precision(PREC).value();
    let ln2 = Real::from(2).with_precision(PREC).value().ln();
    Real::from(e as i64).with_precision(PREC).value() + y.ln() / ln2
}

fn ceil_to_usize(x: &Real, what: &'static str) -> Result<usize, ReductionError> {
    let c = big_of_ibig(&x.ceil().to_int().value());
    if c.is_negative() {
        return Ok(0);
    }
    c.to_usize().ok_or(ReductionError::Overflow(what))
}

/// Largest `L` with `2^{L^p} ≤ n`, i.e. `⌊(log₂ n)^{1/p}⌋`, computed on integers.
fn root_of_log2(n: &BigUint, p: u32) -> usize {
    let bits = n.bits().saturating_sub(1);
    let mut l = 0u64;
    while (l + 1).checked_pow(p).is_some_and(|v| v <= bits) {
        l += 1;
    }
    l as usize
}

fn finish_params(
    alpha: Rational,
    ell: usize,
    eps: &Rational,
    delta: usize,
    k: BigUint,
    source: ParamSource,
) -> Result<ReductionParams, ReductionError> {
    let gamma = &alpha / ratio::int(2);
    let d3 = ratio::from_usize(delta.pow(3));
    let e2 = eps * eps;
    let mu = &e2 * &gamma * &gamma / (ratio::int(288) * &d3);
    let zeta = &e2 * &gamma * &gamma * &gamma / (ratio::int(432) * &d3);
    let a = real_of_rational(&alpha);
    let two = Real::from(2).with_precision(PREC).value();
    let ln_zeta = (&two / real_of_rational(&zeta)).ln();
    let r = ceil_to_usize(&(ln_zeta / a.powi(IBig::from(ell))), "r")?;
    let ln_mu = (&two / real_of_rational(&mu)).ln();
    let h = ceil_to_usize(&(Real::from(8) * ln_mu / a), "h")?;
    Ok(ReductionParams { alpha, gamma, mu, zeta, ell, r, h, k, eps: eps.clone(), delta, source })
}

fn check_constants(eps: &Rational, delta: usize) -> Result<(), ReductionError> {
    if !eps.is_positive() || eps >= &ratio::int(1) {
        return Err(ReductionError::InvalidParameter("eps must lie in (0, 1)".into()));
    }
    if delta == 0 {
        return Err(ReductionError::InvalidParameter("Delta must be positive".into()));
    }
    Ok(())
}

/// Schedule with `α = 1/(log₂ m)^{c+1}`, `ℓ = max(2, ⌊(log₂ m)^{1/4}⌋)` and `k = 2^{ℓ²}`.
pub fn instantiate_params_eth(m: u64, c: f64, eps: &Rational, delta: usize) -> Result<ReductionParams, ReductionError> {
    if m < 2 {
        return Err(ReductionError::InvalidParameter("m must be at least 2".into()));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(ReductionError::InvalidParameter("c must be a nonnegative constant".into()));
    }
    check_constants(eps, delta)?;
    let lm = log2_real(&real_of_big(&BigUint::from(m)));
    let one = Real::from(1).with_precision(PREC).value();
    let power = if c.fract() == 0.0 && c < 1e6 {
        lm.powi(IBig::from(c as u64 + 1))
    } else {
        let e = Real::try_from(c + 1.0).expect("finite").with_precision(PREC).value();
        lm.powf(&e)
    };
    let alpha = rational_of_real(&(one / power));
    let ell = root_of_log2(&BigUint::from(m), 4).max(2);
    let k = BigUint::one() << (ell * ell);
    finish_params(alpha, ell, eps, delta, k, ParamSource::Eth { m, c })
}

/// Schedule with `α = 1/log₂ log₂ k` and `ℓ = ⌊√(log₂ k)⌋`.
pub fn instantiate_params_gap_eth(
    k: &BigUint,
    eps: &Rational,
    delta: usize,
) -> Result<ReductionParams, ReductionError> {
    check_constants(eps, delta)?;
    let ell = root_of_log2(k, 2);
    if ell < 2 {
        return Err(ReductionError::InvalidParameter(format!("k = {k} gives ell = {ell} < 2")));
    }
    let lk = log2_real(&real_of_big(k));
    let one = Real::from(1).with_precision(PREC).value();
    let alpha = rational_of_real(&(one / log2_real(&lk)));
    finish_params(alpha, ell, eps, delta, k.clone(), ParamSource::GapEth)
}

/// Label text: the DIMACS literals of a partial assignment in increasing variable order.
pub fn format_label(vars: &[usize], bits: u64) -> String {
    vars.iter()
        .enumerate()
        .map(|(t, &v)| Literal::new(v, bits >> (vars.len() - 1 - t) & 1 == 1).to_dimacs().to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Inverse of [`format_label`]: the assignment bits in variable order.
pub fn parse_label(vars: &[usize], label: &str) -> Option<Vec<bool>> {
    let lits: Option<Vec<Literal>> =
        label.split_whitespace().map(|t| t.parse::<i64>().ok().and_then(Literal::from_dimacs)).collect();
    let lits = lits?;
    (lits.len() == vars.len() && lits.iter().zip(vars).all(|(l, &v)| l.var == v))
        .then(|| lits.iter().map(|l| l.positive).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionArtifact {
    pub formula: CnfFormula,
    pub clause_sets: SetSystem,
    pub var_sets: SetSystem,
    pub instance: Csp2Instance,
    pub params: Option<ReductionParams>,
    /// First vertex whose clauses admit no satisfying partial assignment.
    pub unsat_trivial: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub var_cap: usize,
    pub exec: Exec,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { var_cap: DEFAULT_VAR_CAP, exec: Exec::default() }
    }
}

/// Satisfying assignments of `var(T)` (bit `t` from the top is `vars[t]`), ascending.
fn local_alphabet(f: &CnfFormula, clauses: &[usize], vars: &[usize]) -> Vec<u64> {
    let pos = |v: usize| vars.binary_search(&v).expect("clause variable in var(T)");
    let n = vars.len();
    let masks: Vec<(u64, u64)> = clauses
        .iter()
        .map(|&c| {
            f.clause(c).iter().fold((0u64, 0u64), |(p, q), l| {
                let bit = 1u64 << (n - 1 - pos(l.var));
                if l.positive {
                    (p | bit, q)
                } else {
                    (p, q | bit)
                }
            })
        })
        .collect();
    (0..1u64 << n).filter(|&x| masks.iter().all(|&(p, q)| x & p != 0 || !x & q != 0)).collect()
}

/// Γ_{Φ,T}: one vertex per clause subset, labelled by satisfying partial
/// assignments of its variables; two labels are compatible iff they agree on
/// shared variables.
pub fn build_2csp(f: &CnfFormula, t: &SetSystem, opts: &BuildOptions) -> Result<ReductionArtifact, ReductionError> {
    if t.universe_size() != f.num_clauses() {
        return Err(ReductionError::UniverseMismatch { expected: f.num_clauses(), got: t.universe_size() });
    }
    let k = t.len();
    let mut vars = Vec::with_capacity(k);
    for i in 0..k {
        let v = f.clause_vars(t.elements(i))?;
        if v.len() > opts.var_cap || v.len() > 63 {
            return Err(ReductionError::VarCapExceeded { vertex: i, vars: v.len(), cap: opts.var_cap });
        }
        vars.push(v);
    }
    let labels: Vec<Vec<u64>> = exec::map_range(opts.exec, k, |i| local_alphabet(f, &t.elements(i), &vars[i]));
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v))).collect();
    let constraints = exec::map(opts.exec, &pairs, |&(u, v)| {
        // Key of a label: its bits on the shared variables, in shared order.
        let key = |w: usize, x: u64| -> u64 {
            let other = if w == u { v } else { u };
            let n = vars[w].len();
            vars[w]
                .iter()
                .enumerate()
                .filter(|(_, var)| vars[other].binary_search(var).is_ok())
                .fold(0u64, |acc, (t, _)| acc << 1 | (x >> (n - 1 - t) & 1))
        };
        Constraint::KeyMatch {
            left: labels[u].iter().map(|&x| key(u, x)).collect(),
            right: labels[v].iter().map(|&x| key(v, x)).collect(),
        }
    });
    let alphabets: Vec<Vec<String>> =
        labels.iter().zip(&vars).map(|(ls, vs)| ls.iter().map(|&x| format_label(vs, x)).collect()).collect();
    let instance = Csp2Instance::new(alphabets, constraints)?;
    let var_sets = SetSystem::new(f.num_vars(), vars)?;
    Ok(ReductionArtifact {
        formula: f.clone(),
        clause_sets: t.clone(),
        var_sets,
        unsat_trivial: instance.unsat_trivial(),
        instance,
        params: None,
    })
}

impl ReductionArtifact {
    /// The labeling that restricts `g` to each `var(T_i)`, or `None` when some
    /// restriction violates a clause of `T_i`.
    pub fn labeling_of(&self, g: &Assignment) -> Option<Labeling> {
        let labels = (0..self.instance.num_vertices())
            .map(|v| {
                let vars = self.var_sets.elements(v);
                let bits: Vec<bool> = vars.iter().map(|&x| g.bits.get(x).copied()).collect::<Option<_>>()?;
                self.instance.alphabet(v).iter().position(|l| parse_label(&vars, l).as_deref() == Some(&bits[..]))
            })
            .collect::<Option<Vec<usize>>>()?;
        Some(Labeling::new(labels))
    }

    /// The local functions `σ_{T_i}` on `var(T_i)` selected by `l`.
    pub fn local_functions(&self, l: &Labeling) -> Result<FunctionFamily, ReductionError> {
        self.instance.check_labeling(l)?;
        let mut values = Vec::with_capacity(l.labels.len());
        for (vertex, &a) in l.labels.iter().enumerate() {
            let label = &self.instance.alphabet(vertex)[a];
            let bits = parse_label(&self.var_sets.elements(vertex), label)
                .ok_or_else(|| ReductionError::BadLabel { vertex, label: label.clone() })?;
            values.push(bits);
        }
        Ok(FunctionFamily::new(self.var_sets.clone(), values)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum DecodeStatus {
    Decoded,
    BelowThreshold,
    DecoderFailed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub status: DecodeStatus,
    #[serde(with = "ratio::serde_str")]
    pub agr_measured: Rational,
    /// `(10 + 64(rℓ)²k^{1/ℓ} + 65536hℓ²/μ)/k`, for display; the comparison is exact.
    pub threshold: f64,
    pub threshold_met: bool,
    /// Ran although the threshold was not met.
    pub best_effort: bool,
    pub subcollection_size: usize,
    /// The `h` members of S' closest to the decoded assignment.
    pub t_star: Vec<usize>,
    pub t_star_uniform: Option<bool>,
    /// `E_{T ∈ T*}[disa(g, σ_T)] / n`.
    #[serde(with = "ratio::serde_str_opt")]
    pub nu: Option<Rational>,
    /// `1 - μ - 3νΔ/γ`.
    #[serde(with = "ratio::serde_str_opt")]
    pub decoding_bound: Option<Rational>,
    #[serde(with = "ratio::serde_str_opt")]
    pub value: Option<Rational>,
    pub bound_holds: Option<bool>,
    pub uncovered_vars: usize,
    pub decoder: Option<DecodeResult>,
}

/// `δk - 10 - 65536hℓ²/μ ≥ 64(rℓ)²k^{1/ℓ}`, decided exactly.
pub fn soundness_threshold_met(agr: &Rational, k: usize, p: &ReductionParams) -> bool {
    let ell = p.ell;
    let extra = ratio::int(65536) * ratio::from_usize(p.h * ell * ell) / &p.mu;
    let a = agr * ratio::from_usize(k) - ratio::int(10) - extra;
    if a.is_negative() {
        return false;
    }
    let b = BigInt::from(64u32) * BigInt::from(p.r * ell).pow(2);
    num_traits::pow(a, ell) >= Rational::from_integer(num_traits::pow(b, ell) * BigInt::from(k))
}

fn soundness_threshold(k: usize, p: &ReductionParams) -> f64 {
    let ell = p.ell as f64;
    (10.0
        + 64.0 * (p.r as f64 * ell).powi(2) * (k as f64).powf(1.0 / ell)
        + 65536.0 * p.h as f64 * ell * ell / ratio::to_f64(&p.mu))
        / k as f64
}

/// Reads the labeling as local functions on variable sets, runs the
/// agreement decoder, and measures the decoded assignment against the
/// decoding lemma on the `h` closest members of S'.
pub fn decode_assignment(
    a: &ReductionArtifact,
    l: &Labeling,
    opts: &DecodeOptions,
) -> Result<(Assignment, DecodeReport), ReductionError> {
    let p = a.params.as_ref().ok_or(ReductionError::MissingParams)?;
    let f = a.local_functions(l)?;
    let n = a.formula.num_vars();
    let k = f.len();
    let agr = agree::agreement_probability(&f, &ratio::int(0), opts.exec);
    let threshold_met = soundness_threshold_met(&agr, k, p);
    let mut report = DecodeReport {
        status: DecodeStatus::BelowThreshold,
        agr_measured: agr,
        threshold: soundness_threshold(k, p),
        threshold_met,
        best_effort: !threshold_met && opts.best_effort,
        subcollection_size: 0,
        t_star: Vec::new(),
        t_star_uniform: None,
        nu: None,
        decoding_bound: None,
        value: None,
        bound_holds: None,
        uncovered_vars: n,
        decoder: None,
    };
    if !threshold_met && !opts.best_effort {
        return Ok((Assignment::zeros(n), report));
    }
    let agr_params = p.agreement_params(a.formula.occurrence_bound());
    let inner = DecodeOptions { best_effort: true, ..*opts };
    let res = match agree::agreement_decode(&f, &agr_params, &inner) {
        Ok(r) => r,
        Err(e) => {
            report.status = DecodeStatus::DecoderFailed(e.to_string());
            return Ok((Assignment::zeros(n), report));
        }
    };
    let g = Assignment::new(res.global.clone());
    let mut scored: Vec<(usize, usize)> = res
        .subcollection
        .iter()
        .map(|&i| Ok((agree::disagreement_with(&f, i, &g.bits)?, i)))
        .collect::<Result<_, AgreeError>>()?;
    scored.sort_unstable();
    scored.truncate(p.h);
    let mut t_star: Vec<usize> = scored.iter().map(|&(_, i)| i).collect();
    t_star.sort_unstable();
    let total: usize = scored.iter().map(|&(d, _)| d).sum();
    let nu = ratio::from_usize(total) / ratio::from_usize(t_star.len() * n.max(1));
    let delta = ratio::from_usize(a.formula.occurrence_bound());
    let bound = ratio::int(1) - &p.mu - ratio::int(3) * &nu * &delta / &p.gamma;
    let value = a.formula.eval_fraction(&g)?;
    report.status = DecodeStatus::Decoded;
    report.subcollection_size = res.subcollection.len();
    report.t_star_uniform = Some(setsys::uniform_on(&a.clause_sets, &t_star, &p.gamma, &p.mu));
    report.t_star = t_star;
    report.bound_holds = Some(value >= bound);
    report.nu = Some(nu);
    report.decoding_bound = Some(bound);
    report.value = Some(value);
    report.uncovered_vars = res.uncovered.len();
    report.decoder = Some(res);
    Ok((g, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplicationCheck {
    pub premise: bool,
    pub conclusion: bool,
    /// A witness against the conclusion when the premise held.
    pub counterexample: Option<Vec<Vec<usize>>>,
}

impl ImplicationCheck {
    pub fn holds(&self) -> bool {
        !self.premise || self.conclusion
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationReport {
    pub delta: usize,
    pub uniform: ImplicationCheck,
    /// `None` when `h` exceeds the number of sets.
    pub subcollections_uniform: Option<ImplicationCheck>,
    pub disperser: ImplicationCheck,
}

impl TranslationReport {
    pub fn holds(&self) -> bool {
        self.uniform.holds() && self.subcollections_uniform.as_ref().is_none_or(|c| c.holds()) && self.disperser.holds()
    }
}

/// Checks that well-behavedness of the clause subsets carries over to their
/// variable sets with errors scaled by `3Δ`.
#[allow(clippy::too_many_arguments)]
pub fn check_set_translation(
    a: &ReductionArtifact,
    r: usize,
    ell: usize,
    eta: &Rational,
    h: usize,
    gamma: &Rational,
    mu: &Rational,
    opts: &EnumOptions,
) -> Result<TranslationReport, ReductionError> {
    let delta = a.formula.occurrence_bound();
    let scale = ratio::from_usize(3 * delta);
    let (cs, vs) = (&a.clause_sets, &a.var_sets);
    let mu3 = &scale * mu;
    let eta3 = &scale * eta;

    let premise = setsys::check_uniform(cs, gamma, mu);
    let conclusion = setsys::check_uniform(vs, gamma, &mu3);
    let uniform = ImplicationCheck {
        premise,
        conclusion,
        counterexample: (premise && !conclusion).then(|| vec![(0..vs.len()).collect()]),
    };

    let subcollections_uniform = if h >= 1 && h <= cs.len() {
        let premise = setsys::check_all_subcollections_uniform(cs, h, gamma, mu, opts)?;
        let witness = setsys::find_nonuniform_subcollection(vs, h, gamma, &mu3, opts)?;
        Some(ImplicationCheck {
            premise,
            conclusion: witness.is_none(),
            counterexample: witness.filter(|_| premise).map(|w| vec![w]),
        })
    } else {
        None
    };

    let premise = setsys::check_disperser(cs, r, ell, eta, opts)?;
    let witness = setsys::find_disperser_violation(vs, r, ell, &eta3, opts)?;
    let disperser =
        ImplicationCheck { premise, conclusion: witness.is_none(), counterexample: witness.filter(|_| premise) };
    Ok(TranslationReport { delta, uniform, subcollections_uniform, disperser })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::{csp_opt_bruteforce, CspBruteForce};
    use crate::formula::parse_dimacs;
    use crate::ratio::frac;

    #[test]
    fn label_round_trip() {
        let vars = [0, 2, 5];
        assert_eq!(format_label(&vars, 0b101), "1 -3 6");
        assert_eq!(parse_label(&vars, "1 -3 6"), Some(vec![true, false, true]));
        assert_eq!(parse_label(&vars, "1 6 -3"), None);
        assert_eq!(format_label(&[], 0), "");
        assert_eq!(parse_label(&[], ""), Some(vec![]));
    }

    #[test]
    fn single_clause_example() {
        let f = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        let t = SetSystem::new(1, vec![vec![0], vec![0]]).unwrap();
        let a = build_2csp(&f, &t, &BuildOptions::default()).unwrap();
        assert_eq!(a.instance.alphabet(0), ["1".to_string()]);
        assert_eq!(a.instance.alphabet(1), ["1".to_string()]);
        assert_eq!(a.instance.labeling_value(&Labeling::new(vec![0, 0])).unwrap(), ratio::int(1));
    }

    #[test]
    fn empty_clause_sets() {
        let f = parse_dimacs("p cnf 3 2\n1 2 0\n-2 3 0\n").unwrap();
        let t = SetSystem::new(2, vec![vec![], vec![], vec![]]).unwrap();
        let a = build_2csp(&f, &t, &BuildOptions::default()).unwrap();
        assert_eq!(a.instance.alphabet_sizes(), vec![1, 1, 1]);
        let (v, _) = csp_opt_bruteforce(&a.instance, &CspBruteForce::default()).unwrap();
        assert_eq!(v, ratio::int(1));
    }

    #[test]
    fn constraints_match_shared_variables() {
        let f = parse_dimacs("p cnf 4 3\n1 2 0\n-2 3 0\n3 4 0\n").unwrap();
        let t = SetSystem::new(3, vec![vec![0], vec![1], vec![2]]).unwrap();
        let a = build_2csp(&f, &t, &BuildOptions::default()).unwrap();
        // var(T0) = {x1,x2}, var(T1) = {x2,x3}: compatible iff x2 agrees.
        for (i, la) in a.instance.alphabet(0).iter().enumerate() {
            for (j, lb) in a.instance.alphabet(1).iter().enumerate() {
                let x2a = la.split(' ').nth(1).unwrap();
                let x2b = lb.split(' ').next().unwrap();
                assert_eq!(a.instance.allows(0, i, 1, j), x2a == x2b);
            }
        }
        // T0 and T2 share nothing.
        assert!(a.instance.constraint(0, 2).allowed_pairs().len() == 9);
    }

    #[test]
    fn unsat_vertex_is_flagged() {
        let f = parse_dimacs("p cnf 1 2\n1 0\n-1 0\n").unwrap();
        let t = SetSystem::new(2, vec![vec![0, 1], vec![0]]).unwrap();
        let a = build_2csp(&f, &t, &BuildOptions::default()).unwrap();
        assert_eq!(a.unsat_trivial, Some(0));
    }

    #[test]
    fn var_cap() {
        let f = parse_dimacs("p cnf 6 2\n1 2 3 0\n4 5 6 0\n").unwrap();
        let t = SetSystem::new(2, vec![vec![0, 1]]).unwrap();
        let opts = BuildOptions { var_cap: 5, ..BuildOptions::default() };
        assert!(matches!(build_2csp(&f, &t, &opts), Err(ReductionError::VarCapExceeded { vars: 6, .. })));
    }

    #[test]
    fn eth_schedule_at_two_to_sixteen() {
        let p = instantiate_params_eth(1 << 16, 1.0, &frac(1, 2), 3).unwrap();
        assert_eq!(p.alpha, frac(1, 256));
        assert_eq!(p.gamma, frac(1, 512));
        assert_eq!(p.ell, 2);
        assert_eq!(p.k, BigUint::from(16u32));
        assert_eq!(p.mu, frac(1, 4) * frac(1, 512 * 512) / ratio::int(288 * 27));
    }

    #[test]
    fn gap_eth_schedule() {
        let p = instantiate_params_gap_eth(&BigUint::from(1u32 << 16), &frac(1, 2), 3).unwrap();
        assert_eq!(p.ell, 4);
        assert_eq!(p.alpha, frac(1, 4));
        assert_eq!(p.gamma, frac(1, 8));
        assert!(instantiate_params_gap_eth(&BigUint::from(15u32), &frac(1, 2), 3).is_err());
        assert_eq!(instantiate_params_gap_eth(&BigUint::from(16u32), &frac(1, 2), 3).unwrap().ell, 2);
    }

    #[test]
    fn integer_roots_of_logs() {
        assert_eq!(root_of_log2(&BigUint::from(1u32 << 16), 4), 2);
        assert_eq!(root_of_log2(&(BigUint::one() << 81), 4), 3);
        assert_eq!(root_of_log2(&((BigUint::one() << 81) - 1u32), 4), 2);
        assert_eq!(root_of_log2(&BigUint::from(3u32), 2), 1);
    }
}
