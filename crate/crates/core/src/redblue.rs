//! Red/blue graphs, blue walks, red-filled walks, transitivity checks and the
//! dense-subgraph extraction step of the agreement decoder.

use crate::exec::{self, Exec};
use crate::ratio::{self, Rational};
use fixedbitset::FixedBitSet;
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RedBlueError {
    #[error("edge ({u}, {v}) is a self-loop")]
    SelfLoop { u: usize, v: usize },
    #[error("edge ({u}, {v}) leaves the vertex range 0..{k}")]
    VertexOutOfRange { u: usize, v: usize, k: usize },
    #[error("edge ({u}, {v}) is both red and blue")]
    Overlap { u: usize, v: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{blue_edges} blue edges, but the lemma needs at least 2·k·d0 = {required}")]
    TooFewBlueEdges { blue_edges: usize, required: u128 },
    #[error("removing vertices of blue-degree below {d0} emptied the graph")]
    EmptiedByPreprocessing { d0: usize },
    #[error("returned sets have non-red density {density}, below {threshold}")]
    PostConditionFailed { density: String, threshold: String },
    #[error("no neighbourhood pair reaches non-red density {threshold}; best was {best}")]
    NoDensePair { threshold: String, best: String },
}

/// Undirected graph whose edges are coloured red or blue, never both.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct RedBlueGraph {
    blue: Vec<FixedBitSet>,
    red: Vec<FixedBitSet>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    num_vertices: usize,
    blue_edges: Vec<(usize, usize)>,
    red_edges: Vec<(usize, usize)>,
}

impl From<RedBlueGraph> for GraphJson {
    fn from(g: RedBlueGraph) -> Self {
        GraphJson { num_vertices: g.num_vertices(), blue_edges: g.blue_edges(), red_edges: g.red_edges() }
    }
}

impl TryFrom<GraphJson> for RedBlueGraph {
    type Error = RedBlueError;

    fn try_from(j: GraphJson) -> Result<Self, RedBlueError> {
        RedBlueGraph::new(j.num_vertices, &j.blue_edges, &j.red_edges)
    }
}

impl RedBlueGraph {
    pub fn new(k: usize, blue: &[(usize, usize)], red: &[(usize, usize)]) -> Result<Self, RedBlueError> {
        let mut g = RedBlueGraph::empty(k);
        for &(u, v) in blue {
            g.check_edge(u, v)?;
            g.blue[u].insert(v);
            g.blue[v].insert(u);
        }
        for &(u, v) in red {
            g.check_edge(u, v)?;
            if g.blue[u].contains(v) {
                return Err(RedBlueError::Overlap { u, v });
            }
            g.red[u].insert(v);
            g.red[v].insert(u);
        }
        Ok(g)
    }

    pub fn empty(k: usize) -> Self {
        RedBlueGraph { blue: vec![FixedBitSet::with_capacity(k); k], red: vec![FixedBitSet::with_capacity(k); k] }
    }

    /// Builds from symmetric, loop-free, disjoint adjacency rows.
    pub(crate) fn from_rows(blue: Vec<FixedBitSet>, red: Vec<FixedBitSet>) -> Self {
        debug_assert!(blue.iter().zip(&red).all(|(b, r)| b.is_disjoint(r)));
        RedBlueGraph { blue, red }
    }

    fn check_edge(&self, u: usize, v: usize) -> Result<(), RedBlueError> {
        let k = self.num_vertices();
        if u >= k || v >= k {
            return Err(RedBlueError::VertexOutOfRange { u, v, k });
        }
        if u == v {
            return Err(RedBlueError::SelfLoop { u, v });
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.blue.len()
    }

    pub fn blue_neighbors(&self, v: usize) -> &FixedBitSet {
        &self.blue[v]
    }

    pub fn red_neighbors(&self, v: usize) -> &FixedBitSet {
        &self.red[v]
    }

    pub fn is_blue(&self, u: usize, v: usize) -> bool {
        self.blue[u].contains(v)
    }

    pub fn is_red(&self, u: usize, v: usize) -> bool {
        self.red[u].contains(v)
    }

    pub fn blue_degree(&self, v: usize) -> usize {
        self.blue[v].count_ones(..)
    }

    pub fn blue_edge_count(&self) -> usize {
        self.blue.iter().map(|b| b.count_ones(..)).sum::<usize>() / 2
    }

    pub fn red_edge_count(&self) -> usize {
        self.red.iter().map(|b| b.count_ones(..)).sum::<usize>() / 2
    }

    fn edges(rows: &[FixedBitSet]) -> Vec<(usize, usize)> {
        rows.iter().enumerate().flat_map(|(u, r)| r.ones().filter(move |&v| v > u).map(move |v| (u, v))).collect()
    }

    pub fn blue_edges(&self) -> Vec<(usize, usize)> {
        Self::edges(&self.blue)
    }

    pub fn red_edges(&self) -> Vec<(usize, usize)> {
        Self::edges(&self.red)
    }

    /// Subgraph induced on `vertices`; vertex `i` of the result is `vertices[i]`.
    pub fn induced(&self, vertices: &[usize]) -> RedBlueGraph {
        let n = vertices.len();
        let pick = |rows: &[FixedBitSet]| -> Vec<FixedBitSet> {
            vertices
                .iter()
                .map(|&u| {
                    let mut row = FixedBitSet::with_capacity(n);
                    for (j, &v) in vertices.iter().enumerate() {
                        if rows[u].contains(v) {
                            row.insert(j);
                        }
                    }
                    row
                })
                .collect()
        };
        RedBlueGraph { blue: pick(&self.blue), red: pick(&self.red) }
    }
}

/// |W_ℓ|: number of (ℓ+1)-tuples with blue consecutive pairs; vertices may repeat.
pub fn count_blue_walks(g: &RedBlueGraph, ell: usize) -> Result<BigUint, RedBlueError> {
    if ell == 0 {
        return Err(RedBlueError::InvalidParameter("walk length must be at least 1".into()));
    }
    let k = g.num_vertices();
    let mut ways = vec![BigUint::one(); k];
    for _ in 0..ell {
        ways = (0..k).map(|v| g.blue[v].ones().fold(BigUint::zero(), |acc, u| acc + &ways[u])).collect();
    }
    Ok(ways.into_iter().sum())
}

fn check_red_filled_args(g: &RedBlueGraph, ell: usize, u: usize, v: usize) -> Result<(), RedBlueError> {
    if ell < 2 {
        return Err(RedBlueError::InvalidParameter("red-filled walks need length at least 2".into()));
    }
    let k = g.num_vertices();
    if u >= k || v >= k {
        return Err(RedBlueError::VertexOutOfRange { u, v, k });
    }
    Ok(())
}

/// Depth-first search over interior positions `1..ell`. A candidate for
/// position `p` must be blue to the previous vertex, red to every earlier
/// vertex at distance at least two, and red to `v` unless it is the last
/// interior vertex, which must be blue to `v` instead.
fn red_filled_dfs(
    g: &RedBlueGraph,
    ell: usize,
    v: usize,
    walk: &mut Vec<usize>,
    reds: &FixedBitSet,
    visit: &mut impl FnMut(&[usize], &FixedBitSet),
) {
    let p = walk.len();
    let prev = walk[p - 1];
    let mut cand = g.blue[prev].clone();
    cand.intersect_with(reds);
    if p == ell - 1 {
        cand.intersect_with(&g.blue[v]);
        visit(walk, &cand);
        return;
    }
    cand.intersect_with(&g.red[v]);
    let mut next = reds.clone();
    next.intersect_with(&g.red[prev]);
    for w in cand.ones() {
        walk.push(w);
        red_filled_dfs(g, ell, v, walk, &next, visit);
        walk.pop();
    }
}

fn walk_red_filled(g: &RedBlueGraph, ell: usize, u: usize, v: usize, visit: &mut impl FnMut(&[usize], &FixedBitSet)) {
    if !g.is_red(u, v) {
        return;
    }
    let mut walk = vec![u];
    let all = {
        let mut b = FixedBitSet::with_capacity(g.num_vertices());
        b.insert_range(..);
        b
    };
    red_filled_dfs(g, ell, v, &mut walk, &all, visit);
}

/// W̃_ℓ(u, v): every red-filled ℓ-walk from `u` to `v`, in lexicographic order.
pub fn enumerate_red_filled(g: &RedBlueGraph, ell: usize, u: usize, v: usize) -> Result<Vec<Vec<usize>>, RedBlueError> {
    check_red_filled_args(g, ell, u, v)?;
    let mut out = Vec::new();
    walk_red_filled(g, ell, u, v, &mut |prefix, last| {
        for w in last.ones() {
            let mut walk = prefix.to_vec();
            walk.push(w);
            walk.push(v);
            out.push(walk);
        }
    });
    Ok(out)
}

/// |W̃_ℓ(u, v)| without materializing the walks.
pub fn count_red_filled(g: &RedBlueGraph, ell: usize, u: usize, v: usize) -> Result<u128, RedBlueError> {
    check_red_filled_args(g, ell, u, v)?;
    let mut n = 0u128;
    walk_red_filled(g, ell, u, v, &mut |_, last| n += last.count_ones(..) as u128);
    Ok(n)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCount {
    pub u: usize,
    pub v: usize,
    pub count: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkCensus {
    pub ell: usize,
    #[serde(with = "ratio::serde_bigint")]
    pub total_blue_walks: BigUint,
    #[serde(with = "ratio::serde_bigint")]
    pub red_filled_count: BigUint,
    /// One entry per ordered red pair with at least one red-filled walk.
    pub per_pair: Vec<PairCount>,
}

pub fn walk_census(g: &RedBlueGraph, ell: usize, exec: Exec) -> Result<WalkCensus, RedBlueError> {
    let total_blue_walks = count_blue_walks(g, ell)?;
    if ell < 2 {
        return Err(RedBlueError::InvalidParameter("red-filled walks need length at least 2".into()));
    }
    let pairs: Vec<(usize, usize)> =
        g.red.iter().enumerate().flat_map(|(u, r)| r.ones().map(move |v| (u, v))).collect();
    let counts = exec::map(exec, &pairs, |&(u, v)| count_red_filled(g, ell, u, v).expect("valid pair"));
    let per_pair: Vec<PairCount> =
        pairs.iter().zip(counts).filter(|(_, c)| *c > 0).map(|(&(u, v), count)| PairCount { u, v, count }).collect();
    let red_filled_count = per_pair.iter().map(|p| BigUint::from(p.count)).sum();
    Ok(WalkCensus { ell, total_blue_walks, red_filled_count, per_pair })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitivityReport {
    pub holds: bool,
    pub q: u128,
    pub ell: usize,
    /// Red pair `(u, v)`, `u < v`, with the most red-filled walks; ties go to the smallest pair.
    pub worst_pair: Option<(usize, usize)>,
    pub worst_count: u128,
}

/// Whether every red pair carries at most `q` red-filled ℓ-walks.
pub fn check_transitivity(
    g: &RedBlueGraph,
    q: u128,
    ell: usize,
    exec: Exec,
) -> Result<TransitivityReport, RedBlueError> {
    if ell < 2 {
        return Err(RedBlueError::InvalidParameter("red-filled walks need length at least 2".into()));
    }
    let pairs = g.red_edges();
    let counts = exec::map(exec, &pairs, |&(u, v)| count_red_filled(g, ell, u, v).expect("valid pair"));
    let mut worst: Option<((usize, usize), u128)> = None;
    for (p, c) in pairs.into_iter().zip(counts) {
        if worst.is_none_or(|w| c > w.1) {
            worst = Some((p, c));
        }
    }
    let worst_count = worst.map_or(0, |w| w.1);
    Ok(TransitivityReport { holds: worst_count <= q, q, ell, worst_pair: worst.map(|w| w.0), worst_count })
}

/// Vertices that survive repeatedly deleting those of blue-degree below `d0`.
pub fn preprocess(g: &RedBlueGraph, d0: usize) -> Vec<usize> {
    let k = g.num_vertices();
    let mut alive = vec![true; k];
    let mut deg: Vec<usize> = (0..k).map(|v| g.blue_degree(v)).collect();
    let mut queue: Vec<usize> = (0..k).filter(|&v| deg[v] < d0).collect();
    for &v in &queue {
        alive[v] = false;
    }
    while let Some(v) = queue.pop() {
        for u in g.blue[v].ones() {
            if alive[u] {
                deg[u] -= 1;
                if deg[u] < d0 {
                    alive[u] = false;
                    queue.push(u);
                }
            }
        }
    }
    (0..k).filter(|&v| alive[v]).collect()
}

/// Fraction of ordered pairs in `u1 × u2` that are not red edges (pairs `(x, x)` count as non-red).
pub fn non_red_fraction(g: &RedBlueGraph, u1: &[usize], u2: &[usize]) -> Rational {
    let mut nonred = 0usize;
    for &x in u1 {
        for &y in u2 {
            if !g.is_red(x, y) {
                nonred += 1;
            }
        }
    }
    ratio::from_usize(nonred) / ratio::from_usize(u1.len() * u2.len())
}

/// `(1 - q0·k/d0^ℓ0) / C(ℓ0, 2)`.
pub fn dense_threshold(q0: u128, k: usize, ell0: usize, d0: usize) -> Rational {
    let q0k = Rational::from_integer(BigInt::from(q0) * BigInt::from(k));
    let dl = Rational::from_integer(num_traits::pow(BigInt::from(d0), ell0));
    let pairs = ratio::from_usize(ell0 * (ell0 - 1) / 2);
    (ratio::int(1) - q0k / dl) / pairs
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseSubgraphs {
    pub u_star: usize,
    pub v_star: usize,
    pub u1: Vec<usize>,
    pub u2: Vec<usize>,
    #[serde(with = "ratio::serde_str")]
    pub density: Rational,
    #[serde(with = "ratio::serde_str")]
    pub threshold: Rational,
    pub survivors: usize,
}

/// Constructive form of the dense-subgraph lemma: after pruning low blue
/// degrees, return the blue neighbourhoods (within the pruned graph) of the
/// first ordered pair `(u*, v*)` whose product has non-red density at least
/// the lemma's threshold. With `ell0 = 2` only `u* = v*` is tried.
pub fn find_dense_subgraphs(
    g: &RedBlueGraph,
    q0: u128,
    ell0: usize,
    d0: usize,
    exec: Exec,
) -> Result<DenseSubgraphs, RedBlueError> {
    if ell0 < 2 {
        return Err(RedBlueError::InvalidParameter("ell0 must be at least 2".into()));
    }
    if d0 == 0 {
        return Err(RedBlueError::InvalidParameter("d0 must be positive".into()));
    }
    let k = g.num_vertices();
    let required = 2u128 * k as u128 * d0 as u128;
    let blue_edges = g.blue_edge_count();
    if (blue_edges as u128) < required {
        return Err(RedBlueError::TooFewBlueEdges { blue_edges, required });
    }
    let survivors = preprocess(g, d0);
    if survivors.is_empty() {
        return Err(RedBlueError::EmptiedByPreprocessing { d0 });
    }
    let mut alive = FixedBitSet::with_capacity(k);
    alive.extend(survivors.iter().copied());
    let hood = |u: usize| -> FixedBitSet {
        let mut n = g.blue[u].clone();
        n.intersect_with(&alive);
        n
    };
    let threshold = dense_threshold(q0, k, ell0, d0);
    let density = |n1: &FixedBitSet, n2: &FixedBitSet| -> Rational {
        let size2 = n2.count_ones(..);
        let nonred: usize = n1.ones().map(|x| size2 - n2.intersection_count(&g.red[x])).sum();
        ratio::from_usize(nonred) / ratio::from_usize(n1.count_ones(..) * size2)
    };
    let hit = exec::find_map_first(exec, &survivors, |&us| {
        let n1 = hood(us);
        let partners: Vec<usize> = if ell0 == 2 { vec![us] } else { survivors.clone() };
        partners.into_iter().find_map(|vs| {
            let n2 = if vs == us { n1.clone() } else { hood(vs) };
            let d = density(&n1, &n2);
            (d >= threshold).then(|| (us, vs, n1.ones().collect::<Vec<_>>(), n2.ones().collect::<Vec<_>>(), d))
        })
    });
    match hit {
        Some((u_star, v_star, u1, u2, density)) => {
            let direct = non_red_fraction(g, &u1, &u2);
            if direct != density || direct < threshold {
                return Err(RedBlueError::PostConditionFailed {
                    density: ratio::format(&direct),
                    threshold: ratio::format(&threshold),
                });
            }
            Ok(DenseSubgraphs { u_star, v_star, u1, u2, density, threshold, survivors: survivors.len() })
        }
        None => {
            let best = survivors
                .iter()
                .map(|&u| {
                    let n = hood(u);
                    density(&n, &n)
                })
                .max()
                .expect("nonempty");
            Err(RedBlueError::NoDensePair { threshold: ratio::format(&threshold), best: ratio::format(&best) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;

    fn complete_blue(k: usize) -> RedBlueGraph {
        let edges: Vec<_> = (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v))).collect();
        RedBlueGraph::new(k, &edges, &[]).unwrap()
    }

    #[test]
    fn construction_rejects_bad_edges() {
        assert_eq!(RedBlueGraph::new(3, &[(1, 1)], &[]), Err(RedBlueError::SelfLoop { u: 1, v: 1 }));
        assert!(matches!(RedBlueGraph::new(3, &[(0, 3)], &[]), Err(RedBlueError::VertexOutOfRange { .. })));
        assert_eq!(RedBlueGraph::new(3, &[(0, 1)], &[(1, 0)]), Err(RedBlueError::Overlap { u: 1, v: 0 }));
    }

    #[test]
    fn blue_walk_examples() {
        let g = RedBlueGraph::new(2, &[(0, 1)], &[]).unwrap();
        assert_eq!(count_blue_walks(&g, 2).unwrap(), BigUint::from(2u32));
        for k in 1..6 {
            assert_eq!(count_blue_walks(&complete_blue(k), 1).unwrap(), BigUint::from(k * (k - 1)));
        }
        assert!(count_blue_walks(&g, 0).is_err());
    }

    #[test]
    fn rbb_triangle() {
        let g = RedBlueGraph::new(3, &[(0, 1), (1, 2)], &[(0, 2)]).unwrap();
        assert_eq!(enumerate_red_filled(&g, 2, 0, 2).unwrap(), vec![vec![0, 1, 2]]);
        assert_eq!(enumerate_red_filled(&g, 2, 2, 0).unwrap(), vec![vec![2, 1, 0]]);
        assert!(enumerate_red_filled(&g, 2, 0, 1).unwrap().is_empty());
        let t = check_transitivity(&g, 0, 2, Exec::Sequential).unwrap();
        assert!(!t.holds);
        assert_eq!((t.worst_pair, t.worst_count), (Some((0, 2)), 1));
        assert!(check_transitivity(&g, 1, 2, Exec::Sequential).unwrap().holds);
    }

    #[test]
    fn red_filled_path() {
        let blue = [(0, 1), (1, 2), (2, 3), (3, 4)];
        let red: Vec<_> = (0..5).flat_map(|u| (u + 2..5).map(move |v| (u, v))).collect();
        let g = RedBlueGraph::new(5, &blue, &red).unwrap();
        let w = enumerate_red_filled(&g, 4, 0, 4).unwrap();
        assert_eq!(w, vec![vec![0, 1, 2, 3, 4]]);
        assert_eq!(count_red_filled(&g, 4, 0, 4).unwrap(), 1);
        // 2-walks 0-1-2 (red 0,2) and 3-walks like 0-1-2-3 also qualify.
        assert_eq!(count_red_filled(&g, 3, 0, 3).unwrap(), 1);
        assert_eq!(count_red_filled(&g, 2, 1, 3).unwrap(), 1);
    }

    #[test]
    fn census_sums_per_pair() {
        let blue = [(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)];
        let red = [(0, 2)];
        let g = RedBlueGraph::new(4, &blue, &red).unwrap();
        let c = walk_census(&g, 2, Exec::Sequential).unwrap();
        let total: u128 = c.per_pair.iter().map(|p| p.count).sum();
        assert_eq!(c.red_filled_count, BigUint::from(total));
        assert_eq!(total, 4);
    }

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(dense_threshold(16, 100, 2, 50), frac(9, 25));
        assert_eq!(dense_threshold(0, 10, 3, 2), frac(1, 3));
    }

    #[test]
    fn dense_without_red_edges() {
        let g = complete_blue(12);
        let d = find_dense_subgraphs(&g, 0, 2, 2, Exec::Sequential).unwrap();
        assert_eq!(d.density, frac(1, 1));
        assert_eq!((d.u_star, d.v_star), (0, 0));
        assert_eq!(d.u1, (1..12).collect::<Vec<_>>());
        assert!(matches!(
            find_dense_subgraphs(&g, 0, 2, 3, Exec::Sequential),
            Err(RedBlueError::TooFewBlueEdges { blue_edges: 66, required: 72 })
        ));
    }

    #[test]
    fn preprocessing_is_strict() {
        // Star with centre 0 plus the edge (1, 2).
        let g = RedBlueGraph::new(5, &[(0, 1), (0, 2), (0, 3), (0, 4), (1, 2)], &[]).unwrap();
        assert_eq!(preprocess(&g, 2), vec![0, 1, 2]);
        assert_eq!(preprocess(&g, 1), vec![0, 1, 2, 3, 4]);
        assert!(preprocess(&g, 3).is_empty());
    }

    #[test]
    fn json_round_trip() {
        let g = RedBlueGraph::new(4, &[(0, 1), (2, 3)], &[(0, 2)]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<RedBlueGraph>(&s).unwrap(), g);
    }
}
