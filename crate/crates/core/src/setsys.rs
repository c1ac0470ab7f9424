//! Subset collections over a universe `[m]` and their verifiers: size bound,
//! intersection-disperser property and uniformity, plus the block-partition
//! construction of well-behaved collections.
//!
//! The exhaustive verifiers merge identical sets first. A subcollection is a
//! multiset of distinct contents with multiplicities bounded by how often
//! each content occurs, which is exactly the index-level enumeration with
//! the symmetric duplicates removed.

use crate::exec::{self, Exec};
use crate::ratio::{self, Rational};
use fixedbitset::FixedBitSet;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

pub const DEFAULT_ENUM_CAP: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetSysError {
    #[error("a set system needs at least one set")]
    EmptyCollection,
    #[error("set {set} contains element {element} outside the universe of size {m}")]
    ElementOutOfRange { set: usize, element: usize, m: usize },
    #[error("density {0} must lie strictly between 0 and 1")]
    InvalidDensity(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("set index {index} out of range for {k} sets")]
    IndexOutOfRange { index: usize, k: usize },
    #[error("enumeration needs {needed} candidates, above the cap of {cap}")]
    CapExceeded { needed: u128, cap: u128 },
    #[error("universe size {m} is smaller than the block size m0 = {m0}")]
    UniverseTooSmall { m: usize, m0: usize },
    #[error("block {block} (elements {start}..{end}) has no valid collection after {attempts} candidates")]
    BlockSearchFailed { block: usize, start: usize, end: usize, attempts: u64 },
    #[error("constructed system failed its own verification: {0}")]
    PostConditionFailed(String),
}

/// An ordered list of `k >= 1` subsets of `[m]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SetSystemJson", into = "SetSystemJson")]
pub struct SetSystem {
    universe_size: usize,
    sets: Vec<FixedBitSet>,
}

#[derive(Serialize, Deserialize)]
struct SetSystemJson {
    universe_size: usize,
    sets: Vec<Vec<usize>>,
}

impl From<SetSystem> for SetSystemJson {
    fn from(s: SetSystem) -> Self {
        SetSystemJson { universe_size: s.universe_size, sets: (0..s.len()).map(|i| s.elements(i)).collect() }
    }
}

impl TryFrom<SetSystemJson> for SetSystem {
    type Error = SetSysError;

    fn try_from(j: SetSystemJson) -> Result<Self, SetSysError> {
        SetSystem::new(j.universe_size, j.sets)
    }
}

impl SetSystem {
    pub fn new(universe_size: usize, sets: Vec<Vec<usize>>) -> Result<Self, SetSysError> {
        if sets.is_empty() {
            return Err(SetSysError::EmptyCollection);
        }
        let mut bits = Vec::with_capacity(sets.len());
        for (si, s) in sets.iter().enumerate() {
            let mut b = FixedBitSet::with_capacity(universe_size);
            for &e in s {
                if e >= universe_size {
                    return Err(SetSysError::ElementOutOfRange { set: si, element: e, m: universe_size });
                }
                b.insert(e);
            }
            bits.push(b);
        }
        Ok(SetSystem { universe_size, sets: bits })
    }

    pub fn from_bitsets(universe_size: usize, sets: Vec<FixedBitSet>) -> Result<Self, SetSysError> {
        if sets.is_empty() {
            return Err(SetSysError::EmptyCollection);
        }
        let mut out = Vec::with_capacity(sets.len());
        for (si, mut s) in sets.into_iter().enumerate() {
            if let Some(e) = s.ones().find(|&e| e >= universe_size) {
                return Err(SetSysError::ElementOutOfRange { set: si, element: e, m: universe_size });
            }
            s.grow(universe_size);
            if s.len() > universe_size {
                let mut t = FixedBitSet::with_capacity(universe_size);
                t.extend(s.ones());
                s = t;
            }
            out.push(s);
        }
        Ok(SetSystem { universe_size, sets: out })
    }

    pub fn universe_size(&self) -> usize {
        self.universe_size
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn set(&self, i: usize) -> &FixedBitSet {
        &self.sets[i]
    }

    pub fn sets(&self) -> &[FixedBitSet] {
        &self.sets
    }

    pub fn set_size(&self, i: usize) -> usize {
        self.sets[i].count_ones(..)
    }

    pub fn elements(&self, i: usize) -> Vec<usize> {
        self.sets[i].ones().collect()
    }

    pub fn subsystem(&self, indices: &[usize]) -> Result<SetSystem, SetSysError> {
        let mut sets = Vec::with_capacity(indices.len());
        for &i in indices {
            sets.push(self.sets.get(i).ok_or(SetSysError::IndexOutOfRange { index: i, k: self.len() })?.clone());
        }
        if sets.is_empty() {
            return Err(SetSysError::EmptyCollection);
        }
        Ok(SetSystem { universe_size: self.universe_size, sets })
    }

    pub fn has_duplicates(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        !self.sets.iter().all(|s| seen.insert(s.as_slice().to_vec()))
    }

    /// Number of sets among `indices` containing each element.
    pub fn coverage(&self, indices: &[usize]) -> Vec<usize> {
        let mut c = vec![0usize; self.universe_size];
        for &i in indices {
            for e in self.sets[i].ones() {
                c[e] += 1;
            }
        }
        c
    }
}

/// Draws `k` sets from D_{[m], alpha}: each element independently with probability `alpha`.
pub fn sample_random(m: usize, k: usize, alpha: f64, seed: u64) -> Result<SetSystem, SetSysError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SetSysError::InvalidDensity(alpha));
    }
    if k == 0 {
        return Err(SetSysError::EmptyCollection);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets = (0..k).map(|_| random_set(&mut rng, m, alpha)).collect();
    Ok(SetSystem { universe_size: m, sets })
}

fn random_set(rng: &mut ChaCha8Rng, m: usize, alpha: f64) -> FixedBitSet {
    let mut b = FixedBitSet::with_capacity(m);
    for e in 0..m {
        if rng.gen_bool(alpha) {
            b.insert(e);
        }
    }
    b
}

/// True iff every set has at most `2·alpha·m` elements.
pub fn check_sizes(s: &SetSystem, alpha: &Rational) -> bool {
    let bound = ratio::floor_count(&(alpha * ratio::int(2)), s.universe_size);
    match bound {
        None => false,
        Some(b) => s.sets.iter().all(|x| x.count_ones(..) as u64 <= b),
    }
}

/// True iff at least `(1 - mu)·m` elements lie in at least a `gamma` fraction of the sets.
pub fn check_uniform(s: &SetSystem, gamma: &Rational, mu: &Rational) -> bool {
    let all: Vec<usize> = (0..s.len()).collect();
    uniform_on(s, &all, gamma, mu)
}

/// [`check_uniform`] restricted to the subcollection `indices`.
pub fn uniform_on(s: &SetSystem, indices: &[usize], gamma: &Rational, mu: &Rational) -> bool {
    let cov = s.coverage(indices);
    uniform_from_coverage(&cov, indices.len(), gamma, mu)
}

fn uniform_from_coverage(cov: &[usize], size: usize, gamma: &Rational, mu: &Rational) -> bool {
    let per_element = ratio::ceil_count(gamma, size);
    let good = cov.iter().filter(|&&c| c as u64 >= per_element).count();
    good as u64 >= ratio::ceil_count(&(ratio::int(1) - mu), cov.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumOptions {
    pub cap: u128,
    pub exec: Exec,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { cap: DEFAULT_ENUM_CAP, exec: Exec::default() }
    }
}

/// Distinct set contents with the indices carrying each, in first-occurrence order.
struct Groups {
    reps: Vec<FixedBitSet>,
    members: Vec<Vec<usize>>,
}

impl Groups {
    fn of(s: &SetSystem) -> Self {
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut reps = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, set) in s.sets.iter().enumerate() {
            let key = set.as_slice().to_vec();
            let g = *index.entry(key).or_insert_with(|| {
                reps.push(set.clone());
                members.push(Vec::new());
                reps.len() - 1
            });
            members[g].push(i);
        }
        Groups { reps, members }
    }

    fn mults(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }
}

/// Number of vectors `c` with `0 <= c[g] <= bounds[g]` and `sum c = total`, saturating.
fn count_bounded_compositions(bounds: &[usize], total: usize) -> u128 {
    let mut ways = vec![0u128; total + 1];
    ways[0] = 1;
    for &b in bounds {
        let mut next = vec![0u128; total + 1];
        for (t, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for c in 0..=b.min(total - t) {
                next[t + c] = next[t + c].saturating_add(w);
            }
        }
        ways = next;
    }
    ways[total]
}

/// Visits bounded compositions extending `prefix` in lexicographic order
/// until `visit` returns `Some`.
fn first_composition<R>(
    bounds: &[usize],
    remaining: usize,
    prefix: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]) -> Option<R>,
) -> Option<R> {
    let g = prefix.len();
    if g == bounds.len() {
        return if remaining == 0 { visit(prefix) } else { None };
    }
    let room: usize = bounds[g + 1..].iter().sum();
    let lo = remaining.saturating_sub(room);
    let hi = bounds[g].min(remaining);
    for c in lo..=hi {
        prefix.push(c);
        let r = first_composition(bounds, remaining - c, prefix, visit);
        prefix.pop();
        if r.is_some() {
            return r;
        }
    }
    None
}

fn composition_prefixes(bounds: &[usize], total: usize, want: usize) -> Vec<Vec<usize>> {
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    while layer.len() < want && layer[0].len() < bounds.len().saturating_sub(1) {
        let g = layer[0].len();
        let room: usize = bounds[g + 1..].iter().sum();
        let mut next = Vec::new();
        for p in &layer {
            let used: usize = p.iter().sum();
            let remaining = total - used;
            for c in remaining.saturating_sub(room)..=bounds[g].min(remaining) {
                let mut q = p.clone();
                q.push(c);
                next.push(q);
            }
        }
        layer = next;
    }
    layer
}

/// First size-`h` subcollection (as sorted indices) that is not `(gamma, mu)`-uniform.
pub fn find_nonuniform_subcollection(
    s: &SetSystem,
    h: usize,
    gamma: &Rational,
    mu: &Rational,
    opts: &EnumOptions,
) -> Result<Option<Vec<usize>>, SetSysError> {
    if h == 0 || h > s.len() {
        return Err(SetSysError::InvalidParameter(format!("subcollection size h = {h} must lie in 1..={}", s.len())));
    }
    let groups = Groups::of(s);
    let bounds: Vec<usize> = groups.mults().iter().map(|&c| c.min(h)).collect();
    let needed = count_bounded_compositions(&bounds, h);
    if needed > opts.cap {
        return Err(SetSysError::CapExceeded { needed, cap: opts.cap });
    }
    let m = s.universe_size;
    let per_element = ratio::ceil_count(gamma, h);
    let need_good = ratio::ceil_count(&(ratio::int(1) - mu), m);
    let containing: Vec<Vec<usize>> =
        (0..m).map(|e| (0..groups.reps.len()).filter(|&g| groups.reps[g].contains(e)).collect()).collect();
    let prefixes = composition_prefixes(&bounds, h, 256);
    let hit = exec::find_map_first(opts.exec, &prefixes, |p| {
        let used: usize = p.iter().sum();
        let mut prefix = p.clone();
        first_composition(&bounds, h - used, &mut prefix, &mut |c: &[usize]| {
            let good =
                containing.iter().filter(|gs| gs.iter().map(|&g| c[g]).sum::<usize>() as u64 >= per_element).count()
                    as u64;
            (good < need_good).then(|| c.to_vec())
        })
    });
    Ok(hit.map(|c| {
        let mut idx: Vec<usize> =
            c.iter().enumerate().flat_map(|(g, &n)| groups.members[g][..n].iter().copied()).collect();
        idx.sort_unstable();
        idx
    }))
}

/// True iff every size-`h` subcollection is `(gamma, mu)`-uniform.
pub fn check_all_subcollections_uniform(
    s: &SetSystem,
    h: usize,
    gamma: &Rational,
    mu: &Rational,
    opts: &EnumOptions,
) -> Result<bool, SetSysError> {
    find_nonuniform_subcollection(s, h, gamma, mu, opts).map(|w| w.is_none())
}

/// First family of `r` disjoint nonempty subcollections of size at most `ell`
/// whose union of intersections covers fewer than `(1 - eta)·m` elements.
///
/// A subcollection with no sets has the whole universe as its intersection,
/// so families containing one never violate the bound; when the system has
/// too few sets for `r` nonempty blocks the property holds vacuously.
pub fn find_disperser_violation(
    s: &SetSystem,
    r: usize,
    ell: usize,
    eta: &Rational,
    opts: &EnumOptions,
) -> Result<Option<Vec<Vec<usize>>>, SetSysError> {
    let m = s.universe_size;
    let need = ratio::ceil_count(&(ratio::int(1) - eta), m);
    if r == 0 {
        return Ok((need > 0).then(Vec::new));
    }
    let groups = Groups::of(s);
    let d = groups.reps.len();
    let mults = groups.mults();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for size in 1..=ell.min(d) {
        combinations(d, size, &mut |c| blocks.push(c.to_vec()));
    }
    let needed = multichoose(blocks.len() as u128, r as u128);
    if needed > opts.cap {
        return Err(SetSysError::CapExceeded { needed, cap: opts.cap });
    }
    let inter: Vec<FixedBitSet> = blocks
        .iter()
        .map(|b| {
            let mut x = groups.reps[b[0]].clone();
            for &g in &b[1..] {
                x.intersect_with(&groups.reps[g]);
            }
            x
        })
        .collect();
    let nb = blocks.len();
    let hit = exec::find_map_first_range(opts.exec, nb, |first| {
        let mut usage = vec![0usize; d];
        for &g in &blocks[first] {
            usage[g] += 1;
        }
        let mut chosen = vec![first];
        let mut acc = vec![inter[first].clone()];
        disperser_search(&blocks, &inter, &mults, r, need, &mut usage, &mut chosen, &mut acc)
    });
    Ok(hit.map(|chosen| {
        let mut next = vec![0usize; d];
        chosen
            .iter()
            .map(|&b| {
                let mut idx: Vec<usize> = blocks[b]
                    .iter()
                    .map(|&g| {
                        let i = groups.members[g][next[g]];
                        next[g] += 1;
                        i
                    })
                    .collect();
                idx.sort_unstable();
                idx
            })
            .collect()
    }))
}

#[allow(clippy::too_many_arguments)]
fn disperser_search(
    blocks: &[Vec<usize>],
    inter: &[FixedBitSet],
    mults: &[usize],
    r: usize,
    need: u64,
    usage: &mut Vec<usize>,
    chosen: &mut Vec<usize>,
    acc: &mut Vec<FixedBitSet>,
) -> Option<Vec<usize>> {
    let top = acc.last().expect("nonempty");
    if chosen.len() == r {
        return ((top.count_ones(..) as u64) < need).then(|| chosen.clone());
    }
    let last = *chosen.last().expect("nonempty");
    for b in last..blocks.len() {
        if blocks[b].iter().any(|&g| usage[g] >= mults[g]) {
            continue;
        }
        for &g in &blocks[b] {
            usage[g] += 1;
        }
        let mut next = acc.last().expect("nonempty").clone();
        next.union_with(&inter[b]);
        chosen.push(b);
        acc.push(next);
        let hit = disperser_search(blocks, inter, mults, r, need, usage, chosen, acc);
        acc.pop();
        chosen.pop();
        for &g in &blocks[b] {
            usage[g] -= 1;
        }
        if hit.is_some() {
            return hit;
        }
    }
    None
}

/// True iff `s` is an `(r, ell, eta)`-intersection disperser.
pub fn check_disperser(
    s: &SetSystem,
    r: usize,
    ell: usize,
    eta: &Rational,
    opts: &EnumOptions,
) -> Result<bool, SetSysError> {
    find_disperser_violation(s, r, ell, eta, opts).map(|w| w.is_none())
}

fn multichoose(n: u128, r: u128) -> u128 {
    if n == 0 {
        return 0;
    }
    ratio::binomial((n + r - 1) as u64, r as u64).to_u128().unwrap_or(u128::MAX)
}

/// Calls `f` on every size-`size` subset of `0..n` in lexicographic order.
pub fn combinations(n: usize, size: usize, f: &mut impl FnMut(&[usize])) {
    if size > n {
        return;
    }
    let mut c: Vec<usize> = (0..size).collect();
    loop {
        f(&c);
        let mut i = size;
        while i > 0 && c[i - 1] == n - size + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        c[i - 1] += 1;
        for j in i..size {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Requested properties for [`construct_deterministic`]. `r` and `h` default
/// to `⌈ln(2/η)/α^ℓ⌉` and `⌈8 ln(2/μ)/α⌉`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellBehavedTargets {
    #[serde(with = "ratio::serde_str")]
    pub alpha: Rational,
    pub ell: usize,
    #[serde(with = "ratio::serde_str")]
    pub eta: Rational,
    #[serde(with = "ratio::serde_str")]
    pub mu: Rational,
    pub r: Option<usize>,
    pub h: Option<usize>,
    /// Block size forced below the formula value.
    pub unsafe_m0: Option<usize>,
}

impl WellBehavedTargets {
    pub fn r(&self) -> usize {
        self.r.unwrap_or_else(|| {
            let a = ratio::to_f64(&self.alpha);
            let e = ratio::to_f64(&self.eta);
            ceil_usize((2.0 / e).ln() / a.powi(self.ell as i32))
        })
    }

    pub fn h(&self) -> usize {
        self.h.unwrap_or_else(|| {
            let a = ratio::to_f64(&self.alpha);
            let mu = ratio::to_f64(&self.mu);
            ceil_usize(8.0 * (2.0 / mu).ln() / a)
        })
    }

    /// `1000(log k·log(1/μ)/(αμ²) + ℓ·log(1/η)·log k/(α^ℓ·η) + 1/α + 1)`, base-2 logs.
    pub fn m0_formula(&self, k: usize) -> f64 {
        let a = ratio::to_f64(&self.alpha);
        let mu = ratio::to_f64(&self.mu);
        let eta = ratio::to_f64(&self.eta);
        let lk = (k as f64).log2();
        let l = self.ell as f64;
        1000.0
            * (lk * (1.0 / mu).log2() / (a * mu * mu)
                + l * (1.0 / eta).log2() * lk / (a.powi(self.ell as i32) * eta)
                + 1.0 / a
                + 1.0)
    }
}

fn ceil_usize(x: f64) -> usize {
    if x.is_nan() || x <= 0.0 {
        0
    } else if x >= usize::MAX as f64 {
        usize::MAX
    } else {
        x.ceil() as usize
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertChecks {
    pub sizes: Option<bool>,
    pub disperser: Option<bool>,
    pub uniformity: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellBehavedCert {
    #[serde(with = "ratio::serde_str")]
    pub alpha: Rational,
    pub r: usize,
    pub ell: usize,
    #[serde(with = "ratio::serde_str")]
    pub eta: Rational,
    pub h: usize,
    #[serde(with = "ratio::serde_str")]
    pub gamma: Rational,
    #[serde(with = "ratio::serde_str")]
    pub mu: Rational,
    pub m0: usize,
    pub m0_formula: f64,
    pub m0_overridden: bool,
    pub blocks: Vec<(usize, usize)>,
    pub duplicate_sets: bool,
    /// Set when `h > k`, so there is no size-`h` subcollection to test.
    pub uniformity_vacuous: bool,
    pub checked: CertChecks,
}

impl WellBehavedCert {
    fn from_targets(t: &WellBehavedTargets, k: usize) -> Self {
        let m0_formula = t.m0_formula(k);
        WellBehavedCert {
            alpha: t.alpha.clone(),
            r: t.r(),
            ell: t.ell,
            eta: t.eta.clone(),
            h: t.h(),
            gamma: &t.alpha / ratio::int(2),
            mu: t.mu.clone(),
            m0: t.unsafe_m0.unwrap_or_else(|| ceil_usize(m0_formula)),
            m0_formula,
            m0_overridden: t.unsafe_m0.is_some(),
            blocks: Vec::new(),
            duplicate_sets: false,
            uniformity_vacuous: false,
            checked: CertChecks::default(),
        }
    }

    /// Runs all three verifiers on `s` and records the outcome.
    pub fn verify(&mut self, s: &SetSystem, opts: &EnumOptions) -> Result<bool, SetSysError> {
        let sizes = check_sizes(s, &self.alpha);
        let disperser = check_disperser(s, self.r, self.ell, &self.eta, opts)?;
        self.uniformity_vacuous = self.h > s.len();
        let uniformity =
            self.uniformity_vacuous || check_all_subcollections_uniform(s, self.h, &self.gamma, &self.mu, opts)?;
        self.duplicate_sets = s.has_duplicates();
        self.checked = CertChecks { sizes: Some(sizes), disperser: Some(disperser), uniformity: Some(uniformity) };
        Ok(sizes && disperser && uniformity)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSearch {
    /// Seeded candidates from D_{U_i, α}, verified, up to `retries` per block.
    Randomized { retries: u64 },
    /// Every collection of `k` subsets of the block in increasing bit order.
    Exhaustive { max_bits: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructOptions {
    pub seed: u64,
    pub search: BlockSearch,
    pub enumeration: EnumOptions,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        ConstructOptions {
            seed: 0,
            search: BlockSearch::Randomized { retries: 1000 },
            enumeration: EnumOptions::default(),
        }
    }
}

/// Balanced partition of `0..m` into `⌊m/m0⌋` contiguous blocks as `(start, len)`.
pub fn block_partition(m: usize, m0: usize) -> Result<Vec<(usize, usize)>, SetSysError> {
    if m0 == 0 {
        return Err(SetSysError::InvalidParameter("m0 must be positive".into()));
    }
    if m < m0 {
        return Err(SetSysError::UniverseTooSmall { m, m0 });
    }
    let nb = m / m0;
    let base = m / nb;
    let extra = m % nb;
    let mut out = Vec::with_capacity(nb);
    let mut start = 0;
    for b in 0..nb {
        let len = base + usize::from(b < extra);
        out.push((start, len));
        start += len;
    }
    Ok(out)
}

/// Builds a well-behaved collection of `k` subsets of `[m]` by solving each
/// block of the partition separately and taking element-wise unions.
pub fn construct_deterministic(
    m: usize,
    k: usize,
    targets: &WellBehavedTargets,
    opts: &ConstructOptions,
) -> Result<(SetSystem, WellBehavedCert), SetSysError> {
    if k == 0 {
        return Err(SetSysError::EmptyCollection);
    }
    let alpha = ratio::to_f64(&targets.alpha);
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SetSysError::InvalidDensity(alpha));
    }
    let mut cert = WellBehavedCert::from_targets(targets, k);
    let blocks = block_partition(m, cert.m0)?;
    cert.blocks = blocks.clone();
    let inner = EnumOptions { exec: Exec::Sequential, ..opts.enumeration };
    let local_seq = |b: &SetSystem| -> Result<bool, SetSysError> {
        let mut c = cert.clone();
        c.verify(b, &inner)
    };
    let found: Vec<Result<SetSystem, SetSysError>> = exec::map_range(opts.enumeration.exec, blocks.len(), |bi| {
        let (start, len) = blocks[bi];
        let fail = |attempts| SetSysError::BlockSearchFailed { block: bi, start, end: start + len, attempts };
        match opts.search {
            BlockSearch::Randomized { retries } => {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(bi as u64);
                for _ in 0..retries {
                    let sets = (0..k).map(|_| random_set(&mut rng, len, alpha)).collect();
                    let cand = SetSystem { universe_size: len, sets };
                    if local_seq(&cand)? {
                        return Ok(cand);
                    }
                }
                Err(fail(retries))
            }
            BlockSearch::Exhaustive { max_bits } => {
                let bits = (k * len) as u32;
                if bits > max_bits.min(40) {
                    return Err(SetSysError::CapExceeded {
                        needed: 1u128 << bits.min(127),
                        cap: 1u128 << max_bits.min(40),
                    });
                }
                let total = 1u64 << bits;
                let hit = exec::find_first_chunk(opts.enumeration.exec, total, 1 << 12, |lo, hi| {
                    (lo..hi).find_map(|x| {
                        let sets = (0..k)
                            .map(|i| {
                                let mut b = FixedBitSet::with_capacity(len);
                                for e in 0..len {
                                    if (x >> (i * len + e)) & 1 == 1 {
                                        b.insert(e);
                                    }
                                }
                                b
                            })
                            .collect();
                        let cand = SetSystem { universe_size: len, sets };
                        match local_seq(&cand) {
                            Ok(true) => Some(Ok(cand)),
                            Ok(false) => None,
                            Err(e) => Some(Err(e)),
                        }
                    })
                });
                hit.unwrap_or_else(|| Err(fail(total)))
            }
        }
    });
    let mut sets = vec![FixedBitSet::with_capacity(m); k];
    for (bi, res) in found.into_iter().enumerate() {
        let block = res?;
        let start = blocks[bi].0;
        for (i, s) in block.sets.iter().enumerate() {
            sets[i].extend(s.ones().map(|e| e + start));
        }
    }
    let system = SetSystem { universe_size: m, sets };
    if !cert.verify(&system, &opts.enumeration)? {
        return Err(SetSysError::PostConditionFailed(format!("{:?}", cert.checked)));
    }
    Ok((system, cert))
}
