//! 2-CSP instances on the complete constraint graph, labelings, values and
//! an exact optimum search.

use crate::exec::{self, Exec};
use crate::ratio::{self, Rational};
use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use thiserror::Error;

pub const DEFAULT_CSP_CAP: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CspError {
    #[error("expected {expected} constraints for {k} vertices, got {got}")]
    ConstraintCount { k: usize, expected: usize, got: usize },
    #[error("constraint {index} is stored for ({u}, {v}) but position {index} belongs to ({eu}, {ev})")]
    ConstraintOrder { index: usize, u: usize, v: usize, eu: usize, ev: usize },
    #[error("constraint ({u}, {v}) has shape {rows}x{cols}, alphabets are {ru}x{cv}")]
    ConstraintShape { u: usize, v: usize, rows: usize, cols: usize, ru: usize, cv: usize },
    #[error("constraint ({u}, {v}) allows label pair ({a}, {b}) outside the alphabets")]
    PairOutOfRange { u: usize, v: usize, a: usize, b: usize },
    #[error("labeling has {got} labels for {k} vertices")]
    LabelingLength { k: usize, got: usize },
    #[error("label {label} is invalid for vertex {vertex} with alphabet size {size}")]
    InvalidLabel { vertex: usize, label: usize, size: usize },
    #[error("vertex {vertex} has an empty alphabet, so no labeling exists")]
    UnsatTrivial { vertex: usize },
    #[error("search space of {needed} labelings exceeds the cap of {cap}")]
    CapExceeded { needed: u128, cap: u128 },
}

/// Allowed label pairs for one edge `{u, v}` with `u < v`; rows index `Σ_u`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// Explicit bit matrix, serialized as its list of allowed pairs.
    Pairs {
        rows: usize,
        cols: usize,
        #[serde(with = "pairs_serde")]
        allowed: FixedBitSet,
    },
    /// `(a, b)` is allowed iff `left[a] == right[b]`.
    KeyMatch { left: Vec<u64>, right: Vec<u64> },
}

mod pairs_serde {
    use fixedbitset::FixedBitSet;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Raw {
        len: usize,
        ones: Vec<usize>,
    }

    pub fn serialize<S: Serializer>(b: &FixedBitSet, s: S) -> Result<S::Ok, S::Error> {
        Raw { len: b.len(), ones: b.ones().collect() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<FixedBitSet, D::Error> {
        let r = Raw::deserialize(d)?;
        let mut b = FixedBitSet::with_capacity(r.len);
        for i in r.ones {
            if i >= r.len {
                return Err(serde::de::Error::custom("bit index beyond matrix size"));
            }
            b.insert(i);
        }
        Ok(b)
    }
}

impl Constraint {
    pub fn from_pairs(rows: usize, cols: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut allowed = FixedBitSet::with_capacity(rows * cols);
        for (a, b) in pairs {
            assert!(a < rows && b < cols, "pair ({a}, {b}) outside {rows}x{cols}");
            allowed.insert(a * cols + b);
        }
        Constraint::Pairs { rows, cols, allowed }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        let mut allowed = FixedBitSet::with_capacity(rows * cols);
        allowed.insert_range(..);
        Constraint::Pairs { rows, cols, allowed }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Constraint::Pairs { rows, cols, allowed: FixedBitSet::with_capacity(rows * cols) }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Constraint::Pairs { rows, cols, .. } => (*rows, *cols),
            Constraint::KeyMatch { left, right } => (left.len(), right.len()),
        }
    }

    #[inline]
    pub fn allows(&self, a: usize, b: usize) -> bool {
        match self {
            Constraint::Pairs { cols, allowed, .. } => allowed.contains(a * cols + b),
            Constraint::KeyMatch { left, right } => left[a] == right[b],
        }
    }

    pub fn allowed_pairs(&self) -> Vec<(usize, usize)> {
        let (rows, cols) = self.shape();
        match self {
            Constraint::Pairs { allowed, .. } => allowed.ones().map(|x| (x / cols, x % cols)).collect(),
            Constraint::KeyMatch { .. } => {
                (0..rows).flat_map(|a| (0..cols).filter(move |&b| self.allows(a, b)).map(move |b| (a, b))).collect()
            }
        }
    }
}

/// Index of edge `{u, v}`, `u < v`, in the row-major list of unordered pairs.
pub fn pair_index(k: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v && v < k);
    u * k - u * (u + 1) / 2 + (v - u - 1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CspJson", into = "CspJson")]
pub struct Csp2Instance {
    alphabets: Vec<Vec<String>>,
    constraints: Vec<Constraint>,
}

#[derive(Serialize, Deserialize)]
struct CspJson {
    format: String,
    version: u32,
    num_vertices: usize,
    alphabets: Vec<Vec<String>>,
    constraints: Vec<EdgeJson>,
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    u: usize,
    v: usize,
    #[serde(flatten)]
    constraint: Constraint,
}

const CSP_FORMAT: &str = "agreecsp/csp2";

impl From<Csp2Instance> for CspJson {
    fn from(c: Csp2Instance) -> Self {
        let k = c.alphabets.len();
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v))).collect();
        CspJson {
            format: CSP_FORMAT.into(),
            version: 1,
            num_vertices: k,
            alphabets: c.alphabets,
            constraints: pairs
                .into_iter()
                .zip(c.constraints)
                .map(|((u, v), constraint)| EdgeJson { u, v, constraint })
                .collect(),
        }
    }
}

impl TryFrom<CspJson> for Csp2Instance {
    type Error = String;

    fn try_from(j: CspJson) -> Result<Self, String> {
        if j.format != CSP_FORMAT || j.version != 1 {
            return Err(format!("unsupported format {} v{}", j.format, j.version));
        }
        if j.alphabets.len() != j.num_vertices {
            return Err("num_vertices disagrees with the alphabet list".into());
        }
        let k = j.num_vertices;
        let mut cons = Vec::with_capacity(j.constraints.len());
        for (index, e) in j.constraints.into_iter().enumerate() {
            if e.u >= e.v || e.v >= k || pair_index(k, e.u, e.v) != index {
                let (eu, ev) = nth_pair(k, index);
                return Err(CspError::ConstraintOrder { index, u: e.u, v: e.v, eu, ev }.to_string());
            }
            cons.push(e.constraint);
        }
        Csp2Instance::new(j.alphabets, cons).map_err(|e| e.to_string())
    }
}

fn nth_pair(k: usize, index: usize) -> (usize, usize) {
    (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v))).nth(index).unwrap_or((usize::MAX, usize::MAX))
}

impl Csp2Instance {
    /// `constraints` lists every unordered pair `{u, v}`, `u < v`, in row-major order.
    pub fn new(alphabets: Vec<Vec<String>>, constraints: Vec<Constraint>) -> Result<Self, CspError> {
        let k = alphabets.len();
        let expected = k * k.saturating_sub(1) / 2;
        if constraints.len() != expected {
            return Err(CspError::ConstraintCount { k, expected, got: constraints.len() });
        }
        let mut idx = 0;
        for u in 0..k {
            for v in u + 1..k {
                let c = &constraints[idx];
                let (rows, cols) = c.shape();
                let (ru, cv) = (alphabets[u].len(), alphabets[v].len());
                if (rows, cols) != (ru, cv) {
                    return Err(CspError::ConstraintShape { u, v, rows, cols, ru, cv });
                }
                if let Constraint::Pairs { allowed, .. } = c {
                    if allowed.len() != rows * cols {
                        return Err(CspError::PairOutOfRange { u, v, a: rows, b: cols });
                    }
                }
                idx += 1;
            }
        }
        Ok(Csp2Instance { alphabets, constraints })
    }

    /// Alphabets named `0..size` for each vertex.
    pub fn with_sizes(sizes: &[usize], constraints: Vec<Constraint>) -> Result<Self, CspError> {
        let alphabets = sizes.iter().map(|&s| (0..s).map(|a| a.to_string()).collect()).collect();
        Self::new(alphabets, constraints)
    }

    pub fn num_vertices(&self) -> usize {
        self.alphabets.len()
    }

    pub fn num_edges(&self) -> usize {
        self.constraints.len()
    }

    pub fn alphabet(&self, v: usize) -> &[String] {
        &self.alphabets[v]
    }

    pub fn alphabet_size(&self, v: usize) -> usize {
        self.alphabets[v].len()
    }

    pub fn alphabet_sizes(&self) -> Vec<usize> {
        self.alphabets.iter().map(Vec::len).collect()
    }

    /// The first vertex with an empty alphabet, if any.
    pub fn unsat_trivial(&self) -> Option<usize> {
        self.alphabets.iter().position(Vec::is_empty)
    }

    /// Constraint of edge `{u, v}`, `u < v`.
    pub fn constraint(&self, u: usize, v: usize) -> &Constraint {
        &self.constraints[pair_index(self.num_vertices(), u, v)]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Whether label `a` at `u` and `b` at `v` satisfy edge `{u, v}`, in either order.
    #[inline]
    pub fn allows(&self, u: usize, a: usize, v: usize, b: usize) -> bool {
        if u < v {
            self.constraint(u, v).allows(a, b)
        } else {
            self.constraint(v, u).allows(b, a)
        }
    }

    pub fn check_labeling(&self, l: &Labeling) -> Result<(), CspError> {
        let k = self.num_vertices();
        if l.labels.len() != k {
            return Err(CspError::LabelingLength { k, got: l.labels.len() });
        }
        for (vertex, &label) in l.labels.iter().enumerate() {
            let size = self.alphabets[vertex].len();
            if label >= size {
                return Err(CspError::InvalidLabel { vertex, label, size });
            }
        }
        Ok(())
    }

    pub fn satisfied_edges(&self, l: &Labeling) -> Result<usize, CspError> {
        self.check_labeling(l)?;
        let k = self.num_vertices();
        let mut n = 0;
        for u in 0..k {
            for v in u + 1..k {
                if self.constraint(u, v).allows(l.labels[u], l.labels[v]) {
                    n += 1;
                }
            }
        }
        Ok(n)
    }

    /// val(σ) as an exact fraction of the C(k,2) edges; 1 when there are no edges.
    pub fn labeling_value(&self, l: &Labeling) -> Result<Rational, CspError> {
        let sat = self.satisfied_edges(l)?;
        Ok(edge_fraction(sat, self.num_edges()))
    }
}

fn edge_fraction(sat: usize, edges: usize) -> Rational {
    if edges == 0 {
        ratio::int(1)
    } else {
        ratio::from_usize(sat) / ratio::from_usize(edges)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Labeling {
    pub labels: Vec<usize>,
}

impl Labeling {
    pub fn new(labels: Vec<usize>) -> Self {
        Labeling { labels }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CspBruteForce {
    pub cap: u128,
    pub exec: Exec,
}

impl Default for CspBruteForce {
    fn default() -> Self {
        CspBruteForce { cap: DEFAULT_CSP_CAP, exec: Exec::default() }
    }
}

pub fn search_space(inst: &Csp2Instance) -> u128 {
    inst.alphabets.iter().fold(1u128, |acc, a| acc.saturating_mul(a.len() as u128))
}

/// Exact val(Γ) with the lexicographically smallest optimal labeling.
///
/// Depth-first over vertices in index order and labels in index order,
/// pruned by an upper bound: edges already satisfied, plus for each
/// unlabeled vertex the best number of labeled neighbours any of its labels
/// agrees with, plus every edge among unlabeled vertices. Subtrees are cut
/// only when their bound cannot reach the best value, so the first optimum
/// met in label order survives. Work is split over the labels of vertex 0.
pub fn csp_opt_bruteforce(inst: &Csp2Instance, opts: &CspBruteForce) -> Result<(Rational, Labeling), CspError> {
    if let Some(vertex) = inst.unsat_trivial() {
        return Err(CspError::UnsatTrivial { vertex });
    }
    let needed = search_space(inst);
    if needed > opts.cap {
        return Err(CspError::CapExceeded { needed, cap: opts.cap });
    }
    let k = inst.num_vertices();
    if k <= 1 {
        return Ok((ratio::int(1), Labeling::new(vec![0; k])));
    }
    let total = inst.num_edges();
    let adj = Adjacency::new(inst);
    let global = AtomicUsize::new(sequential_lower_bound(inst, 64));
    let winner = AtomicUsize::new(usize::MAX);
    let results = exec::map_range(opts.exec, inst.alphabet_size(0), |a0| {
        let mut s = Search::new(inst, &adj, a0, total, &global, &winner);
        s.dfs(1);
        s.best
    });
    let mut best: Option<(usize, Vec<usize>)> = None;
    for r in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| r.0 > b.0) {
            best = Some(r);
        }
    }
    let (sat, labels) = best.expect("vertex 0 has a label, so some task finishes");
    Ok((edge_fraction(sat, total), Labeling::new(labels)))
}

const NO_BUCKET: usize = usize::MAX;

/// For each edge `{u, v}`, `u < v`, the labels of `v` compatible with each
/// label of `u`, grouped so that rows with the same key share one list.
struct Adjacency {
    k: usize,
    row_bucket: Vec<Vec<usize>>,
    buckets: Vec<Vec<Vec<usize>>>,
}

impl Adjacency {
    fn new(inst: &Csp2Instance) -> Self {
        let k = inst.num_vertices();
        let mut row_bucket = Vec::with_capacity(inst.num_edges());
        let mut buckets = Vec::with_capacity(inst.num_edges());
        for c in inst.constraints() {
            match c {
                Constraint::KeyMatch { left, right } => {
                    let mut ids: HashMap<u64, usize> = HashMap::new();
                    let mut lists: Vec<Vec<usize>> = Vec::new();
                    for (b, key) in right.iter().enumerate() {
                        let id = *ids.entry(*key).or_insert_with(|| {
                            lists.push(Vec::new());
                            lists.len() - 1
                        });
                        lists[id].push(b);
                    }
                    row_bucket.push(left.iter().map(|key| ids.get(key).copied().unwrap_or(NO_BUCKET)).collect());
                    buckets.push(lists);
                }
                Constraint::Pairs { rows, cols, .. } => {
                    let lists: Vec<Vec<usize>> =
                        (0..*rows).map(|a| (0..*cols).filter(|&b| c.allows(a, b)).collect()).collect();
                    row_bucket.push((0..*rows).collect());
                    buckets.push(lists);
                }
            }
        }
        Adjacency { k, row_bucket, buckets }
    }

    fn compatible(&self, u: usize, a: usize, v: usize) -> &[usize] {
        let e = pair_index(self.k, u, v);
        match self.row_bucket[e][a] {
            NO_BUCKET => &[],
            id => &self.buckets[e][id],
        }
    }
}

struct Search<'a> {
    inst: &'a Csp2Instance,
    adj: &'a Adjacency,
    k: usize,
    task: usize,
    total: usize,
    labels: Vec<usize>,
    /// `cnt[j][b]`: labelled vertices whose label is compatible with `b` at `j`.
    cnt: Vec<Vec<u32>>,
    /// `mx[j] = max_b cnt[j][b]`.
    mx: Vec<u32>,
    sat: usize,
    best: Option<(usize, Vec<usize>)>,
    global: &'a AtomicUsize,
    winner: &'a AtomicUsize,
}

impl<'a> Search<'a> {
    fn new(
        inst: &'a Csp2Instance,
        adj: &'a Adjacency,
        a0: usize,
        total: usize,
        global: &'a AtomicUsize,
        winner: &'a AtomicUsize,
    ) -> Self {
        let k = inst.num_vertices();
        let mut cnt: Vec<Vec<u32>> = (0..k).map(|j| vec![0; inst.alphabet_size(j)]).collect();
        let mut mx = vec![0; k];
        for j in 1..k {
            for &b in adj.compatible(0, a0, j) {
                cnt[j][b] = 1;
                mx[j] = 1;
            }
        }
        let mut labels = vec![0; k];
        labels[0] = a0;
        Search { inst, adj, k, task: a0, total, labels, cnt, mx, sat: 0, best: None, global, winner }
    }

    fn local_best(&self) -> Option<usize> {
        self.best.as_ref().map(|b| b.0)
    }

    fn promising(&self, bound: usize) -> bool {
        self.local_best().is_none_or(|b| bound > b) && bound >= self.global.load(Ordering::Relaxed)
    }

    fn stopped(&self) -> bool {
        self.winner.load(Ordering::Relaxed) < self.task || self.local_best() == Some(self.total)
    }

    fn dfs(&mut self, d: usize) {
        if d == self.k {
            let v = self.sat;
            if self.local_best().is_none_or(|b| v > b) {
                self.best = Some((v, self.labels.clone()));
                self.global.fetch_max(v, Ordering::Relaxed);
                if v == self.total {
                    self.winner.fetch_min(self.task, Ordering::Relaxed);
                }
            }
            return;
        }
        let rest = self.k - d - 1;
        let among_rest = rest * rest.saturating_sub(1) / 2;
        let loose: usize = (d + 1..self.k).map(|j| self.mx[j] as usize + 1).sum();
        let saved: Vec<u32> = self.mx[d + 1..].to_vec();
        for a in 0..self.inst.alphabet_size(d) {
            if self.stopped() {
                return;
            }
            let gain = self.cnt[d][a] as usize;
            if !self.promising(self.sat + gain + loose + among_rest) {
                continue;
            }
            let mut tight = 0;
            for j in d + 1..self.k {
                let mut m = self.mx[j];
                for &b in self.adj.compatible(d, a, j) {
                    let x = &mut self.cnt[j][b];
                    *x += 1;
                    m = m.max(*x);
                }
                self.mx[j] = m;
                tight += m as usize;
            }
            if self.promising(self.sat + gain + tight + among_rest) {
                self.labels[d] = a;
                self.sat += gain;
                self.dfs(d + 1);
                self.sat -= gain;
            }
            for j in d + 1..self.k {
                for &b in self.adj.compatible(d, a, j) {
                    self.cnt[j][b] -= 1;
                }
            }
            self.mx[d + 1..].copy_from_slice(&saved);
        }
    }
}

/// Best value over the first `tries` labels of vertex 0 when every later
/// vertex greedily takes the first label compatible with the most already
/// labelled vertices. Only used to seed the pruning bound, so ties in the
/// exact search are still broken in label order.
fn sequential_lower_bound(inst: &Csp2Instance, tries: usize) -> usize {
    let k = inst.num_vertices();
    (0..inst.alphabet_size(0).min(tries))
        .map(|a0| {
            let mut labels = vec![a0];
            let mut sat = 0;
            for j in 1..k {
                let (gain, b) = (0..inst.alphabet_size(j))
                    .map(|b| {
                        let g = labels.iter().enumerate().filter(|&(u, &a)| inst.allows(u, a, j, b)).count();
                        (g, b)
                    })
                    .fold((0, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
                sat += gain;
                labels.push(b);
            }
            sat
        })
        .max()
        .unwrap_or(0)
}

/// Star heuristic: for each label of vertex 0, give every other vertex the
/// first label compatible with it; keep the best resulting labeling.
pub fn greedy_star_labeling(inst: &Csp2Instance) -> Result<Labeling, CspError> {
    if let Some(vertex) = inst.unsat_trivial() {
        return Err(CspError::UnsatTrivial { vertex });
    }
    let k = inst.num_vertices();
    if k == 0 {
        return Ok(Labeling::new(Vec::new()));
    }
    let mut best: Option<(usize, Labeling)> = None;
    for a in 0..inst.alphabet_size(0) {
        let mut labels = vec![a; 1];
        for j in 1..k {
            let c = inst.constraint(0, j);
            labels.push((0..inst.alphabet_size(j)).find(|&b| c.allows(a, b)).unwrap_or(0));
        }
        let l = Labeling::new(labels);
        let v = inst.satisfied_edges(&l)?;
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, l));
        }
    }
    Ok(best.expect("nonempty alphabet").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;

    fn uniform(k: usize, s: usize, make: impl Fn(usize, usize) -> Constraint) -> Csp2Instance {
        let mut cons = Vec::new();
        for u in 0..k {
            for v in u + 1..k {
                cons.push(make(u, v));
            }
        }
        Csp2Instance::with_sizes(&vec![s; k], cons).unwrap()
    }

    #[test]
    fn pair_indexing_is_row_major() {
        let k = 5;
        let mut i = 0;
        for u in 0..k {
            for v in u + 1..k {
                assert_eq!(pair_index(k, u, v), i);
                assert_eq!(nth_pair(k, i), (u, v));
                i += 1;
            }
        }
    }

    #[test]
    fn value_examples() {
        let full = uniform(4, 2, |_, _| Constraint::full(2, 2));
        let empty = uniform(4, 2, |_, _| Constraint::empty(2, 2));
        let l = Labeling::new(vec![1, 0, 1, 1]);
        assert_eq!(full.labeling_value(&l).unwrap(), frac(1, 1));
        assert_eq!(empty.labeling_value(&l).unwrap(), frac(0, 1));
        let one = uniform(3, 2, |u, v| {
            if (u, v) == (0, 2) {
                Constraint::from_pairs(2, 2, [(1, 0)])
            } else {
                Constraint::empty(2, 2)
            }
        });
        assert_eq!(one.labeling_value(&Labeling::new(vec![1, 1, 0])).unwrap(), frac(1, 3));
        assert!(matches!(
            one.labeling_value(&Labeling::new(vec![2, 0, 0])),
            Err(CspError::InvalidLabel { vertex: 0, label: 2, size: 2 })
        ));
    }

    #[test]
    fn opt_examples() {
        let single = Csp2Instance::with_sizes(&[3, 2], vec![Constraint::from_pairs(3, 2, [(2, 1)])]).unwrap();
        let (v, l) = csp_opt_bruteforce(&single, &CspBruteForce::default()).unwrap();
        assert_eq!((v, l.labels), (frac(1, 1), vec![2, 1]));
        let empty = uniform(3, 2, |_, _| Constraint::empty(2, 2));
        let (v, l) = csp_opt_bruteforce(&empty, &CspBruteForce::default()).unwrap();
        assert_eq!((v, l.labels), (frac(0, 1), vec![0, 0, 0]));
        let tight = CspBruteForce { cap: 7, exec: Exec::Sequential };
        assert!(matches!(csp_opt_bruteforce(&empty, &tight), Err(CspError::CapExceeded { needed: 8, .. })));
    }

    #[test]
    fn triangle_inequality_constraints() {
        let neq = uniform(3, 2, |_, _| Constraint::from_pairs(2, 2, [(0, 1), (1, 0)]));
        let (v, l) = csp_opt_bruteforce(&neq, &CspBruteForce::default()).unwrap();
        assert_eq!(v, frac(2, 3));
        assert_eq!(l.labels, vec![0, 0, 1]);
    }

    #[test]
    fn empty_alphabet_is_flagged() {
        let inst = Csp2Instance::with_sizes(&[0, 2], vec![Constraint::empty(0, 2)]).unwrap();
        assert_eq!(inst.unsat_trivial(), Some(0));
        assert!(matches!(
            csp_opt_bruteforce(&inst, &CspBruteForce::default()),
            Err(CspError::UnsatTrivial { vertex: 0 })
        ));
    }

    #[test]
    fn key_match_and_pairs_agree() {
        let km = Constraint::KeyMatch { left: vec![0, 1, 1], right: vec![1, 0] };
        let pairs = Constraint::from_pairs(3, 2, km.allowed_pairs());
        for a in 0..3 {
            for b in 0..2 {
                assert_eq!(km.allows(a, b), pairs.allows(a, b));
            }
        }
        assert_eq!(km.allowed_pairs(), vec![(0, 1), (1, 0), (2, 0)]);
    }

    #[test]
    fn json_round_trip() {
        let inst = Csp2Instance::with_sizes(
            &[2, 3, 1],
            vec![
                Constraint::from_pairs(2, 3, [(0, 2), (1, 1)]),
                Constraint::KeyMatch { left: vec![4, 5], right: vec![5] },
                Constraint::full(3, 1),
            ],
        )
        .unwrap();
        let s = serde_json::to_string(&inst).unwrap();
        assert_eq!(serde_json::from_str::<Csp2Instance>(&s).unwrap(), inst);
        let bad = s.replace("\"u\":0,\"v\":1", "\"u\":1,\"v\":0");
        assert!(serde_json::from_str::<Csp2Instance>(&bad).is_err());
    }
}
