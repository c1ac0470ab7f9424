//! Collections of local Boolean functions, their pairwise consistency, and
//! the constructive agreement decoder.

use crate::exec::{self, Exec};
use crate::ratio::{self, Rational};
use crate::redblue::{self, RedBlueError, RedBlueGraph};
use crate::setsys::{SetSysError, SetSystem};
use fixedbitset::FixedBitSet;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgreeError {
    #[error(transparent)]
    SetSys(#[from] SetSysError),
    #[error(transparent)]
    RedBlue(#[from] RedBlueError),
    #[error("{count} value vectors for {k} supports")]
    ValueCount { count: usize, k: usize },
    #[error("function {set} has {got} values but its support has {expected} elements")]
    ValueLength { set: usize, expected: usize, got: usize },
    #[error("function {set}: value string may only contain 0 and 1")]
    InvalidValue { set: usize },
    #[error("global function has length {got}, universe has size {expected}")]
    GlobalLength { expected: usize, got: usize },
    #[error("set index {index} out of range for {k} functions")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("subcollection is empty")]
    EmptySubcollection,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("walk enumeration needs {needed} walks, above the cap of {cap}")]
    CapExceeded { needed: u128, cap: u128 },
    #[error("agreement {agr} is below the decoder threshold {threshold}")]
    BelowThreshold { agr: String, threshold: String },
    #[error("stage {stage} ({name}): {detail}")]
    Stage { stage: u8, name: String, detail: String },
}

fn stage(stage: u8, name: &str, detail: impl ToString) -> AgreeError {
    AgreeError::Stage { stage, name: name.into(), detail: detail.to_string() }
}

/// Functions `f_S: S -> {0,1}`, one per support set, over the universe `[n]`.
///
/// Supports and values are kept as packed 64-bit words; value bits outside a
/// support are always clear.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FamilyJson", into = "FamilyJson")]
pub struct FunctionFamily {
    supports: SetSystem,
    words: usize,
    sup: Vec<u64>,
    val: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    universe_size: usize,
    supports: Vec<Vec<usize>>,
    /// Per support, one `0`/`1` character per element in increasing order.
    values: Vec<String>,
}

impl From<FunctionFamily> for FamilyJson {
    fn from(f: FunctionFamily) -> Self {
        FamilyJson {
            universe_size: f.universe_size(),
            supports: (0..f.len()).map(|i| f.supports.elements(i)).collect(),
            values: (0..f.len())
                .map(|i| f.values(i).into_iter().map(|b| if b { '1' } else { '0' }).collect())
                .collect(),
        }
    }
}

impl TryFrom<FamilyJson> for FunctionFamily {
    type Error = AgreeError;

    fn try_from(j: FamilyJson) -> Result<Self, AgreeError> {
        let supports = SetSystem::new(j.universe_size, j.supports)?;
        let mut values = Vec::with_capacity(j.values.len());
        for (set, s) in j.values.iter().enumerate() {
            let bits: Option<Vec<bool>> = s
                .chars()
                .map(|c| match c {
                    '0' => Some(false),
                    '1' => Some(true),
                    _ => None,
                })
                .collect();
            values.push(bits.ok_or(AgreeError::InvalidValue { set })?);
        }
        FunctionFamily::new(supports, values)
    }
}

fn pack(bits: &FixedBitSet, words: usize, out: &mut Vec<u64>) {
    let mut w = vec![0u64; words];
    for e in bits.ones() {
        w[e / 64] |= 1 << (e % 64);
    }
    out.extend(w);
}

impl FunctionFamily {
    /// `values[i][t]` is the value of `f_{S_i}` on the `t`-th smallest element of `S_i`.
    pub fn new(supports: SetSystem, values: Vec<Vec<bool>>) -> Result<Self, AgreeError> {
        if values.len() != supports.len() {
            return Err(AgreeError::ValueCount { count: values.len(), k: supports.len() });
        }
        let n = supports.universe_size();
        let mut ones = Vec::with_capacity(values.len());
        for (i, v) in values.iter().enumerate() {
            let elems = supports.elements(i);
            if elems.len() != v.len() {
                return Err(AgreeError::ValueLength { set: i, expected: elems.len(), got: v.len() });
            }
            let mut b = FixedBitSet::with_capacity(n);
            b.extend(elems.iter().zip(v).filter(|(_, &x)| x).map(|(&e, _)| e));
            ones.push(b);
        }
        Ok(Self::from_parts(supports, &ones))
    }

    /// Restrictions `g|_S` of one global function to every support.
    pub fn from_global(supports: SetSystem, g: &[bool]) -> Result<Self, AgreeError> {
        let n = supports.universe_size();
        if g.len() != n {
            return Err(AgreeError::GlobalLength { expected: n, got: g.len() });
        }
        let ones: Vec<FixedBitSet> = (0..supports.len())
            .map(|i| {
                let mut b = FixedBitSet::with_capacity(n);
                b.extend(supports.set(i).ones().filter(|&e| g[e]));
                b
            })
            .collect();
        Ok(Self::from_parts(supports, &ones))
    }

    /// `ones[i]` holds the elements where `f_{S_i}` is 1; bits outside `S_i` are dropped.
    pub(crate) fn from_parts(supports: SetSystem, ones: &[FixedBitSet]) -> Self {
        let words = supports.universe_size().div_ceil(64).max(1);
        let mut sup = Vec::with_capacity(words * supports.len());
        let mut val = Vec::with_capacity(words * supports.len());
        for (i, o) in ones.iter().enumerate() {
            let mut v = o.clone();
            v.intersect_with(supports.set(i));
            pack(supports.set(i), words, &mut sup);
            pack(&v, words, &mut val);
        }
        FunctionFamily { supports, words, sup, val }
    }

    pub fn universe_size(&self) -> usize {
        self.supports.universe_size()
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    pub fn supports(&self) -> &SetSystem {
        &self.supports
    }

    fn sup_words(&self, i: usize) -> &[u64] {
        &self.sup[i * self.words..(i + 1) * self.words]
    }

    fn val_words(&self, i: usize) -> &[u64] {
        &self.val[i * self.words..(i + 1) * self.words]
    }

    /// `f_{S_i}(x)`, or `None` when `x ∉ S_i`.
    pub fn value(&self, i: usize, x: usize) -> Option<bool> {
        if x >= self.universe_size() {
            return None;
        }
        let (w, b) = (x / 64, x % 64);
        (self.sup_words(i)[w] >> b & 1 == 1).then(|| self.val_words(i)[w] >> b & 1 == 1)
    }

    /// Values of `f_{S_i}` in increasing element order.
    pub fn values(&self, i: usize) -> Vec<bool> {
        self.supports.set(i).ones().map(|x| self.value(i, x).unwrap()).collect()
    }

    pub fn subfamily(&self, indices: &[usize]) -> Result<FunctionFamily, AgreeError> {
        for &i in indices {
            if i >= self.len() {
                return Err(AgreeError::IndexOutOfRange { index: i, k: self.len() });
            }
        }
        let supports = self.supports.subsystem(indices)?;
        let w = self.words;
        let mut sup = Vec::with_capacity(w * indices.len());
        let mut val = Vec::with_capacity(w * indices.len());
        for &i in indices {
            sup.extend_from_slice(self.sup_words(i));
            val.extend_from_slice(self.val_words(i));
        }
        Ok(FunctionFamily { supports, words: w, sup, val })
    }

    /// `disa(i, j)` for every `j` in index order.
    fn disa_row(&self, i: usize, mut each: impl FnMut(usize, usize)) {
        if self.words == 1 {
            let (si, vi) = (self.sup[i], self.val[i]);
            for (j, (s, v)) in self.sup.iter().zip(&self.val).enumerate() {
                each(j, (si & s & (vi ^ v)).count_ones() as usize);
            }
        } else {
            for j in 0..self.len() {
                each(j, self.disa_unchecked(i, j));
            }
        }
    }

    #[inline]
    fn disa_unchecked(&self, i: usize, j: usize) -> usize {
        if self.words == 1 {
            return (self.sup[i] & self.sup[j] & (self.val[i] ^ self.val[j])).count_ones() as usize;
        }
        let (si, sj, vi, vj) = (self.sup_words(i), self.sup_words(j), self.val_words(i), self.val_words(j));
        (0..self.words).map(|w| (si[w] & sj[w] & (vi[w] ^ vj[w])).count_ones() as usize).sum()
    }

    fn check_index(&self, i: usize) -> Result<(), AgreeError> {
        if i >= self.len() {
            return Err(AgreeError::IndexOutOfRange { index: i, k: self.len() });
        }
        Ok(())
    }

    /// Disagreement of `f_{S_i}` with a total function given as packed words.
    fn disa_global_words(&self, i: usize, g: &[u64]) -> usize {
        let (s, v) = (self.sup_words(i), self.val_words(i));
        (0..self.words).map(|w| (s[w] & (v[w] ^ g[w])).count_ones() as usize).sum()
    }
}

fn pack_global(g: &[bool], words: usize) -> Vec<u64> {
    let mut out = vec![0u64; words];
    for (x, &b) in g.iter().enumerate() {
        if b {
            out[x / 64] |= 1 << (x % 64);
        }
    }
    out
}

/// `|{x ∈ S_i ∩ S_j : f_{S_i}(x) ≠ f_{S_j}(x)}|`.
pub fn disagreement(f: &FunctionFamily, i: usize, j: usize) -> Result<usize, AgreeError> {
    f.check_index(i)?;
    f.check_index(j)?;
    Ok(f.disa_unchecked(i, j))
}

/// `|{x ∈ S_i : f_{S_i}(x) ≠ g(x)}|` for a total function `g`.
pub fn disagreement_with(f: &FunctionFamily, i: usize, g: &[bool]) -> Result<usize, AgreeError> {
    f.check_index(i)?;
    if g.len() != f.universe_size() {
        return Err(AgreeError::GlobalLength { expected: f.universe_size(), got: g.len() });
    }
    Ok(f.disa_global_words(i, &pack_global(g, f.words)))
}

/// Largest disagreement count that is still `zeta`-consistent, or `None` if none is.
fn consistency_cap(zeta: &Rational, n: usize) -> Option<usize> {
    ratio::floor_count(zeta, n).map(|c| c.min(usize::MAX as u64) as usize)
}

/// `agr_ζ(F)`: fraction of ordered pairs, diagonal included, with `disa ≤ ζ·n`.
pub fn agreement_probability(f: &FunctionFamily, zeta: &Rational, exec: Exec) -> Rational {
    let k = f.len();
    let cap = consistency_cap(zeta, f.universe_size());
    let Some(cap) = cap else { return ratio::int(0) };
    let rows = exec::map_range(exec, k, |i| {
        let mut count = 0;
        f.disa_row(i, |_, d| count += usize::from(d <= cap));
        count
    });
    ratio::from_usize(rows.into_iter().sum()) / ratio::from_usize(k * k)
}

/// G^{F,ζ,ζ'}: blue pairs have `disa ≤ ζn`, red pairs have `disa > ζ'n`.
pub fn build_consistency_graph(
    f: &FunctionFamily,
    zeta: &Rational,
    zeta_prime: &Rational,
    exec: Exec,
) -> Result<RedBlueGraph, AgreeError> {
    if zeta.is_negative() || zeta > zeta_prime {
        return Err(AgreeError::InvalidParameter(format!(
            "need 0 <= zeta <= zeta' (got {}, {})",
            ratio::format(zeta),
            ratio::format(zeta_prime)
        )));
    }
    let k = f.len();
    let n = f.universe_size();
    let blue_cap = consistency_cap(zeta, n).expect("zeta is nonnegative");
    let red_cap = consistency_cap(zeta_prime, n).expect("zeta' is nonnegative");
    let rows = exec::map_range(exec, k, |i| {
        const BITS: usize = fixedbitset::Block::BITS as usize;
        let blocks = k.div_ceil(BITS);
        let mut blue = vec![0 as fixedbitset::Block; blocks];
        let mut red = vec![0 as fixedbitset::Block; blocks];
        f.disa_row(i, |j, d| {
            let bit = 1 << (j % BITS);
            if j == i {
            } else if d <= blue_cap {
                blue[j / BITS] |= bit;
            } else if d > red_cap {
                red[j / BITS] |= bit;
            }
        });
        (FixedBitSet::with_capacity_and_blocks(k, blue), FixedBitSet::with_capacity_and_blocks(k, red))
    });
    let (blue, red) = rows.into_iter().unzip();
    Ok(RedBlueGraph::from_rows(blue, red))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityDecoded {
    pub global: Vec<bool>,
    /// Elements covered by no function of the subcollection; they decode to 0.
    pub uncovered: Vec<usize>,
}

/// `g(x) = maj_{S ∈ sub, x ∈ S} f_S(x)`; ties and uncovered elements go to 0.
pub fn majority_decode(f: &FunctionFamily, sub: &[usize]) -> Result<MajorityDecoded, AgreeError> {
    if sub.is_empty() {
        return Err(AgreeError::EmptySubcollection);
    }
    let n = f.universe_size();
    let mut cover = vec![0usize; n];
    let mut ones = vec![0usize; n];
    for &i in sub {
        f.check_index(i)?;
        for x in f.supports.set(i).ones() {
            cover[x] += 1;
            if f.value(i, x) == Some(true) {
                ones[x] += 1;
            }
        }
    }
    Ok(MajorityDecoded {
        global: (0..n).map(|x| 2 * ones[x] > cover[x]).collect(),
        uncovered: (0..n).filter(|&x| cover[x] == 0).collect(),
    })
}

/// Sum over `sub` of `disa(g, f_S)`.
pub fn total_disagreement(f: &FunctionFamily, sub: &[usize], g: &[bool]) -> Result<usize, AgreeError> {
    if g.len() != f.universe_size() {
        return Err(AgreeError::GlobalLength { expected: f.universe_size(), got: g.len() });
    }
    let packed = pack_global(g, f.words);
    sub.iter()
        .map(|&i| {
            f.check_index(i)?;
            Ok(f.disa_global_words(i, &packed))
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityBound {
    /// `1 - agr_{ζ'}(F|sub)`.
    #[serde(with = "ratio::serde_str")]
    pub kappa: Rational,
    #[serde(with = "ratio::serde_str")]
    pub zeta_prime: Rational,
    /// `E_{S ∈ sub}[disa(g, f_S)]` for the majority decoding `g`.
    #[serde(with = "ratio::serde_str")]
    pub mean_disagreement: Rational,
    /// `n²(κ + ζ')`, compared against the squared mean.
    #[serde(with = "ratio::serde_str")]
    pub squared_bound: Rational,
    pub holds: bool,
}

/// Measures both sides of `E[disa(g, f_S)] ≤ n·√(κ + ζ')` on the subcollection `sub`.
pub fn check_majority_bound(
    f: &FunctionFamily,
    sub: &[usize],
    zeta_prime: &Rational,
    exec: Exec,
) -> Result<MajorityBound, AgreeError> {
    let g = majority_decode(f, sub)?;
    let restricted = f.subfamily(sub)?;
    let kappa = ratio::int(1) - agreement_probability(&restricted, zeta_prime, exec);
    let mean_disagreement = ratio::from_usize(total_disagreement(f, sub, &g.global)?) / ratio::from_usize(sub.len());
    let n = ratio::from_usize(f.universe_size());
    let squared_bound = &n * &n * (&kappa + zeta_prime);
    let holds = &mean_disagreement * &mean_disagreement <= squared_bound;
    Ok(MajorityBound { kappa, zeta_prime: zeta_prime.clone(), mean_disagreement, squared_bound, holds })
}

/// The parameters the agreement decoder is run with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementParams {
    pub r: usize,
    pub ell: usize,
    pub h: usize,
    #[serde(with = "ratio::serde_str")]
    pub zeta: Rational,
    #[serde(with = "ratio::serde_str")]
    pub mu: Rational,
    #[serde(with = "ratio::serde_str")]
    pub gamma: Rational,
}

impl AgreementParams {
    /// `ζ' = μ + 2ζ/γ`.
    pub fn zeta_prime(&self) -> Rational {
        &self.mu + ratio::int(2) * &self.zeta / &self.gamma
    }

    /// `(rℓ)^{2(ℓ-1)}`, saturating.
    pub fn walk_bound(&self) -> u128 {
        let base = (self.r as u128).saturating_mul(self.ell as u128);
        let mut acc = 1u128;
        for _ in 0..2 * (self.ell.saturating_sub(1)) {
            acc = acc.saturating_mul(base);
        }
        acc
    }

    fn validate(&self) -> Result<(), AgreeError> {
        if self.ell < 2 {
            return Err(AgreeError::InvalidParameter("ell must be at least 2".into()));
        }
        if self.r == 0 || self.h == 0 {
            return Err(AgreeError::InvalidParameter("r and h must be positive".into()));
        }
        if self.zeta.is_negative() || self.mu.is_negative() || !self.gamma.is_positive() {
            return Err(AgreeError::InvalidParameter("need zeta, mu >= 0 and gamma > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub exec: Exec,
    pub seed: u64,
    /// Keep going when agreement is below the theorem's threshold.
    pub best_effort: bool,
    pub subset_retries: u64,
    /// Exhaustive subset search is tried when both dense sets have at most this many vertices.
    pub exhaustive_limit: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions { exec: Exec::default(), seed: 0, best_effort: false, subset_retries: 1000, exhaustive_limit: 20 }
    }
}

/// Every bound the decoder compared against, with the values substituted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeThresholds {
    /// `(10 + 64(rℓ)²k^{1/ℓ})/k`, as a float for display; the comparison itself is exact.
    pub agr_threshold: f64,
    pub agr_threshold_formula: String,
    pub q0: u128,
    pub d: usize,
    #[serde(with = "ratio::serde_str")]
    pub first_density_threshold: Rational,
    #[serde(with = "ratio::serde_str")]
    pub subset_density: Rational,
    #[serde(with = "ratio::serde_str")]
    pub zeta_prime: Rational,
    pub d_prime: usize,
    #[serde(with = "ratio::serde_str")]
    pub second_density_threshold: Rational,
    /// `δk/(128ℓ²)`.
    #[serde(with = "ratio::serde_str")]
    pub size_bound: Rational,
    /// `X = 65536hℓ⁶/(δk) + μ + 2ζ/γ`; the mean must satisfy `mean² ≤ n²X`.
    #[serde(with = "ratio::serde_str")]
    pub x: Rational,
    pub mean_bound_formula: String,
    /// `δk/(256ℓ²)`.
    #[serde(with = "ratio::serde_str")]
    pub filtered_size_bound: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeChecks {
    pub agr_threshold: bool,
    pub size: bool,
    pub mean: bool,
    pub filtered_size: bool,
}

impl DecodeChecks {
    pub fn all(&self) -> bool {
        self.agr_threshold && self.size && self.mean && self.filtered_size
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    /// U', the blue neighbourhood found in the second dense-subgraph step.
    pub subcollection: Vec<usize>,
    /// Members of U' with `disa(g, f_S)² ≤ 4n²X`.
    pub filtered: Vec<usize>,
    pub global: Vec<bool>,
    pub uncovered: Vec<usize>,
    /// `E_{S ∈ U'}[disa(g, f_S)]`.
    #[serde(with = "ratio::serde_str")]
    pub mean_disagreement: Rational,
    /// `agr_0(F)`.
    #[serde(with = "ratio::serde_str")]
    pub agr_measured: Rational,
    pub within_theorem: bool,
    pub thresholds: DecodeThresholds,
    pub checks: DecodeChecks,
}

/// `δk - 10 ≥ 64(rℓ)²k^{1/ℓ}`, decided exactly by raising both sides to the ℓ-th power.
pub fn agr_threshold_met(agr: &Rational, k: usize, r: usize, ell: usize) -> bool {
    let a = agr * ratio::from_usize(k) - ratio::int(10);
    if a.is_negative() {
        return false;
    }
    let b = BigInt::from(64u32) * BigInt::from(r * ell).pow(2);
    let lhs = num_traits::pow(a, ell);
    let rhs = Rational::from_integer(num_traits::pow(b, ell) * BigInt::from(k));
    lhs >= rhs
}

fn pick_subsets(
    g: &RedBlueGraph,
    u1: &[usize],
    u2: &[usize],
    d: usize,
    ell: usize,
    opts: &DecodeOptions,
) -> Option<(Vec<usize>, Vec<usize>, Rational)> {
    let k = g.num_vertices();
    let target = ratio::frac(1, (ell * ell) as i64);
    let density = |a: &[usize], b: &[usize]| -> Rational {
        let mut bb = FixedBitSet::with_capacity(k);
        bb.extend(b.iter().copied());
        let nonred: usize = a.iter().map(|&x| b.len() - bb.intersection_count(g.red_neighbors(x))).sum();
        ratio::from_usize(nonred) / ratio::from_usize(a.len() * b.len())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.subset_retries {
        let mut a: Vec<usize> = sample(&mut rng, u1.len(), d).into_iter().map(|i| u1[i]).collect();
        let mut b: Vec<usize> = sample(&mut rng, u2.len(), d).into_iter().map(|i| u2[i]).collect();
        a.sort_unstable();
        b.sort_unstable();
        let dens = density(&a, &b);
        if dens >= target {
            return Some((a, b, dens));
        }
    }
    if u1.len() <= opts.exhaustive_limit && u2.len() <= opts.exhaustive_limit {
        let mut firsts = Vec::new();
        crate::setsys::combinations(u1.len(), d, &mut |c| firsts.push(c.iter().map(|&i| u1[i]).collect::<Vec<_>>()));
        let mut seconds = Vec::new();
        crate::setsys::combinations(u2.len(), d, &mut |c| seconds.push(c.iter().map(|&i| u2[i]).collect::<Vec<_>>()));
        for a in &firsts {
            for b in &seconds {
                let dens = density(a, b);
                if dens >= target {
                    return Some((a.clone(), b.clone(), dens));
                }
            }
        }
    }
    None
}

/// Runs the constructive agreement theorem on `f`.
///
/// Stages: (1) G^{F,0,ζ}; (2) `d = ⌊(δk-1)/4⌋`; (3) dense pair with
/// `q0 = (rℓ)^{2(ℓ-1)}`, `ℓ0 = ℓ`, `d0 = d`; (4) size-`d` subsets with
/// non-red fraction at least `1/ℓ²`; (5) G^{F̃,ζ,ζ'} on their union;
/// (6) dense neighbourhood with `ℓ0 = 2`, `q0 = h`; (7) majority decoding.
pub fn agreement_decode(
    f: &FunctionFamily,
    p: &AgreementParams,
    opts: &DecodeOptions,
) -> Result<DecodeResult, AgreeError> {
    p.validate()?;
    let k = f.len();
    let n = f.universe_size();
    let ell = p.ell;
    let exec = opts.exec;
    let kr = ratio::from_usize(k);

    let g1 = build_consistency_graph(f, &ratio::int(0), &p.zeta, exec)?;
    let agr = ratio::from_usize(2 * g1.blue_edge_count() + k) / (&kr * &kr);
    let within = agr_threshold_met(&agr, k, p.r, ell);
    let agr_threshold = (10.0 + 64.0 * ((p.r * ell) as f64).powi(2) * (k as f64).powf(1.0 / ell as f64)) / k as f64;
    if !within && !opts.best_effort {
        return Err(AgreeError::BelowThreshold { agr: ratio::format(&agr), threshold: format!("{agr_threshold:.6}") });
    }

    let dk = &agr * &kr;
    let d = ratio::floor(&((&dk - ratio::int(1)) / ratio::int(4)));
    let d = if d.is_positive() { d.to_usize().unwrap_or(usize::MAX) } else { 0 };
    if d == 0 {
        return Err(stage(2, "degree", format!("d = floor((δk-1)/4) is 0 for δk = {}", ratio::format(&dk))));
    }

    let q0 = p.walk_bound();
    let first = redblue::find_dense_subgraphs(&g1, q0, ell, d, exec).map_err(|e| stage(3, "dense subgraph", e))?;

    let (t1, t2, subset_density) = pick_subsets(&g1, &first.u1, &first.u2, d, ell, opts).ok_or_else(|| {
        stage(4, "subset selection", format!("no size-{d} subsets with non-red fraction >= 1/{}", ell * ell))
    })?;

    let mut union: Vec<usize> = t1.iter().chain(&t2).copied().collect();
    union.sort_unstable();
    union.dedup();
    let zeta_prime = p.zeta_prime();
    let sub = f.subfamily(&union)?;
    let g2 = build_consistency_graph(&sub, &p.zeta, &zeta_prime, exec)?;

    let d_prime = g2.blue_edge_count() / (2 * union.len());
    if d_prime == 0 {
        return Err(stage(6, "second dense subgraph", "d' = floor(|E_b|/(2|U|)) is 0"));
    }
    let second = redblue::find_dense_subgraphs(&g2, p.h as u128, 2, d_prime, exec)
        .map_err(|e| stage(6, "second dense subgraph", e))?;
    let u_prime: Vec<usize> = second.u1.iter().map(|&i| union[i]).collect();

    let decoded = majority_decode(f, &u_prime)?;
    let packed = pack_global(&decoded.global, f.words);
    let disas: Vec<usize> = u_prime.iter().map(|&i| f.disa_global_words(i, &packed)).collect();
    let mean = ratio::from_usize(disas.iter().sum()) / ratio::from_usize(u_prime.len());

    let ell2 = ratio::from_usize(ell * ell);
    let size_bound = &dk / (ratio::int(128) * &ell2);
    let filtered_size_bound = &dk / (ratio::int(256) * &ell2);
    let x = ratio::int(65536) * ratio::from_usize(p.h) * num_traits::pow(ratio::from_usize(ell), 6) / &dk
        + &p.mu
        + ratio::int(2) * &p.zeta / &p.gamma;
    let n2 = ratio::from_usize(n * n);
    let beta_sq = ratio::int(4) * &n2 * &x;
    let filtered: Vec<usize> =
        u_prime.iter().zip(&disas).filter(|(_, &dd)| ratio::from_usize(dd * dd) <= beta_sq).map(|(&i, _)| i).collect();
    let checks = DecodeChecks {
        agr_threshold: within,
        size: ratio::from_usize(u_prime.len()) >= size_bound,
        mean: &mean * &mean <= &n2 * &x,
        filtered_size: ratio::from_usize(filtered.len()) >= filtered_size_bound,
    };
    let thresholds = DecodeThresholds {
        agr_threshold,
        agr_threshold_formula: format!("(10 + 64*({}*{})^2*{}^(1/{}))/{} = {agr_threshold:.6}", p.r, ell, k, ell, k),
        q0,
        d,
        first_density_threshold: first.threshold,
        subset_density,
        zeta_prime,
        d_prime,
        second_density_threshold: second.threshold,
        size_bound,
        mean_bound_formula: format!(
            "n*sqrt(65536*{}*{}^6/({}) + {} + 2*{}/{}) with n = {}",
            p.h,
            ell,
            ratio::format(&dk),
            ratio::format(&p.mu),
            ratio::format(&p.zeta),
            ratio::format(&p.gamma),
            n
        ),
        x,
        filtered_size_bound,
    };
    Ok(DecodeResult {
        subcollection: u_prime,
        filtered,
        global: decoded.global,
        uncovered: decoded.uncovered,
        mean_disagreement: mean,
        agr_measured: agr,
        within_theorem: within,
        thresholds,
        checks,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisjointWalkViolation {
    pub u: usize,
    pub v: usize,
    pub p: usize,
    /// Interior vertex sets of `r` pairwise-disjoint blue `p`-walks from `u` to `v`.
    pub interiors: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisjointWalkReport {
    pub red_pairs: usize,
    pub violations: Vec<DisjointWalkViolation>,
}

impl DisjointWalkReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn interior_masks(g: &RedBlueGraph, u: usize, v: usize, p: usize, cap: u128) -> Result<Vec<u128>, AgreeError> {
    let mut masks = Vec::new();
    let mut visited = 0u128;
    #[allow(clippy::too_many_arguments)]
    fn go(
        g: &RedBlueGraph,
        cur: usize,
        v: usize,
        left: usize,
        mask: u128,
        out: &mut Vec<u128>,
        visited: &mut u128,
        cap: u128,
    ) -> Result<(), u128> {
        *visited += 1;
        if *visited > cap {
            return Err(*visited);
        }
        if left == 1 {
            if g.is_blue(cur, v) {
                out.push(mask);
            }
            return Ok(());
        }
        for w in g.blue_neighbors(cur).ones() {
            go(g, w, v, left - 1, mask | 1 << w, out, visited, cap)?;
        }
        Ok(())
    }
    for w in g.blue_neighbors(u).ones() {
        go(g, w, v, p - 1, 1 << w, &mut masks, &mut visited, cap)
            .map_err(|needed| AgreeError::CapExceeded { needed, cap })?;
    }
    masks.sort_unstable();
    masks.dedup();
    // A packing only ever needs the inclusion-minimal interiors.
    let minimal: Vec<u128> = masks.iter().copied().filter(|&m| !masks.iter().any(|&o| o != m && o & m == o)).collect();
    Ok(minimal)
}

fn pack_disjoint(masks: &[u128], from: usize, used: u128, want: usize, chosen: &mut Vec<u128>) -> bool {
    if chosen.len() == want {
        return true;
    }
    for i in from..masks.len() {
        if masks[i] & used == 0 {
            chosen.push(masks[i]);
            if pack_disjoint(masks, i + 1, used | masks[i], want, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

/// For each red pair of G^{F,ζ} and each `2 ≤ p ≤ ℓ`, searches for `r`
/// blue `p`-walks with pairwise-disjoint interiors. Supports of an
/// `(r, ℓ, ζ)`-disperser admit none. At most 128 functions.
pub fn check_claim_disjoint_walks(
    f: &FunctionFamily,
    zeta: &Rational,
    r: usize,
    ell: usize,
    cap: u128,
    exec: Exec,
) -> Result<DisjointWalkReport, AgreeError> {
    if f.len() > 128 {
        return Err(AgreeError::InvalidParameter("disjoint-walk search handles at most 128 functions".into()));
    }
    if ell < 2 {
        return Err(AgreeError::InvalidParameter("ell must be at least 2".into()));
    }
    let g = build_consistency_graph(f, &ratio::int(0), zeta, exec)?;
    let pairs = g.red_edges();
    let found = exec::map(exec, &pairs, |&(u, v)| -> Result<Vec<DisjointWalkViolation>, AgreeError> {
        let mut out = Vec::new();
        for p in 2..=ell {
            let masks = interior_masks(&g, u, v, p, cap)?;
            let mut chosen = Vec::new();
            if pack_disjoint(&masks, 0, 0, r, &mut chosen) {
                out.push(DisjointWalkViolation {
                    u,
                    v,
                    p,
                    interiors: chosen.iter().map(|&m| (0..128).filter(|&b| m >> b & 1 == 1).collect()).collect(),
                });
            }
        }
        Ok(out)
    });
    let mut violations = Vec::new();
    for r in found {
        violations.extend(r?);
    }
    Ok(DisjointWalkReport { red_pairs: pairs.len(), violations })
}
