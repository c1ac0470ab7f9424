//! Directed Steiner Network instances built from 2-CSPs, and an exact
//! brute-force solver for small ones.

use crate::csp::Csp2Instance;
use crate::exec::{self, Exec};
use crate::ratio::{self, Rational};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_POSITIVE_ARC_CAP: usize = 24;
pub const MAX_VERTICES: usize = 128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DsnError {
    #[error("arc {index} has negative weight {weight}")]
    NegativeWeight { index: usize, weight: String },
    #[error("arc {index} ({tail} -> {head}) leaves the vertex range 0..{n}")]
    ArcOutOfRange { index: usize, tail: usize, head: usize, n: usize },
    #[error("demand {index} ({s}, {t}) leaves the vertex range 0..{n}")]
    DemandOutOfRange { index: usize, s: usize, t: usize, n: usize },
    #[error("{count} positive-weight arcs, above the cap of {cap}")]
    CapExceeded { count: usize, cap: usize },
    #[error("{n} vertices, the solver handles at most {max}")]
    TooManyVertices { n: usize, max: usize },
    #[error("some demand cannot be connected even with every arc")]
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub tail: usize,
    pub head: usize,
    #[serde(with = "ratio::serde_str")]
    pub weight: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DsnJson", into = "DsnJson")]
pub struct DsnInstance {
    num_vertices: usize,
    arcs: Vec<Arc>,
    demands: Vec<(usize, usize)>,
    names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct DsnJson {
    num_vertices: usize,
    #[serde(default)]
    names: Vec<String>,
    arcs: Vec<Arc>,
    demands: Vec<(usize, usize)>,
}

impl From<DsnInstance> for DsnJson {
    fn from(d: DsnInstance) -> Self {
        DsnJson { num_vertices: d.num_vertices, names: d.names, arcs: d.arcs, demands: d.demands }
    }
}

impl TryFrom<DsnJson> for DsnInstance {
    type Error = DsnError;

    fn try_from(j: DsnJson) -> Result<Self, DsnError> {
        let mut d = DsnInstance::new(j.num_vertices, j.arcs, j.demands)?;
        if j.names.len() == j.num_vertices {
            d.names = j.names;
        }
        Ok(d)
    }
}

impl DsnInstance {
    pub fn new(num_vertices: usize, arcs: Vec<Arc>, demands: Vec<(usize, usize)>) -> Result<Self, DsnError> {
        for (index, a) in arcs.iter().enumerate() {
            if a.tail >= num_vertices || a.head >= num_vertices {
                return Err(DsnError::ArcOutOfRange { index, tail: a.tail, head: a.head, n: num_vertices });
            }
            if a.weight.is_negative() {
                return Err(DsnError::NegativeWeight { index, weight: ratio::format(&a.weight) });
            }
        }
        for (index, &(s, t)) in demands.iter().enumerate() {
            if s >= num_vertices || t >= num_vertices {
                return Err(DsnError::DemandOutOfRange { index, s, t, n: num_vertices });
            }
        }
        Ok(DsnInstance { num_vertices, arcs, demands, names: Vec::new() })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn demands(&self) -> &[(usize, usize)] {
        &self.demands
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cost(&self, arcs: &[usize]) -> Rational {
        arcs.iter().fold(Rational::zero(), |acc, &i| acc + &self.arcs[i].weight)
    }

    /// Whether the arcs listed connect every demand pair by a directed path.
    pub fn connects(&self, arcs: &[usize]) -> bool {
        let n = self.num_vertices;
        let mut adj = vec![Vec::new(); n];
        for &i in arcs {
            adj[self.arcs[i].tail].push(self.arcs[i].head);
        }
        self.demands.iter().all(|&(s, t)| {
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
            seen[t]
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DsnSolution {
    /// Indices into the instance's arc list, ascending.
    pub arcs: Vec<usize>,
    #[serde(with = "ratio::serde_str")]
    pub cost: Rational,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// Separate out- and in-copies of every label, so each demand path is
    /// `s_i → ⟨i,a⟩⁺ → ⟨j,b⟩⁻ → t_j`.
    #[default]
    Layered,
    /// One node per label with arcs `s_i → ⟨i,a⟩ → t_i` and zero-weight
    /// arcs between compatible labels.
    SingleLayer,
}

/// Builds the DSN instance of a 2-CSP with `k` vertices: `k² - k` demands
/// `(s_i, t_j)`, label arcs of weight `1/(2k)` and free arcs for allowed pairs.
pub fn build_dsn(inst: &Csp2Instance, construction: Construction) -> DsnInstance {
    let k = inst.num_vertices();
    let w = ratio::frac(1, 2 * k.max(1) as i64);
    let sizes = inst.alphabet_sizes();
    let mut offset = Vec::with_capacity(k);
    let mut total = 0;
    for &s in &sizes {
        offset.push(total);
        total += s;
    }
    let source = |i: usize| i;
    let sink = |i: usize| k + i;
    let out_copy = |i: usize, a: usize| 2 * k + offset[i] + a;
    let in_copy = |i: usize, a: usize| match construction {
        Construction::Layered => 2 * k + total + offset[i] + a,
        Construction::SingleLayer => out_copy(i, a),
    };
    let num_vertices = match construction {
        Construction::Layered => 2 * k + 2 * total,
        Construction::SingleLayer => 2 * k + total,
    };
    let mut names = vec![String::new(); num_vertices];
    for i in 0..k {
        names[source(i)] = format!("s{i}");
        names[sink(i)] = format!("t{i}");
        for a in 0..sizes[i] {
            match construction {
                Construction::Layered => {
                    names[out_copy(i, a)] = format!("<{i},{a}>+");
                    names[in_copy(i, a)] = format!("<{i},{a}>-");
                }
                Construction::SingleLayer => names[out_copy(i, a)] = format!("<{i},{a}>"),
            }
        }
    }
    let mut arcs = Vec::new();
    for (i, &size) in sizes.iter().enumerate() {
        for a in 0..size {
            arcs.push(Arc { tail: source(i), head: out_copy(i, a), weight: w.clone() });
        }
    }
    for (j, &size) in sizes.iter().enumerate() {
        for b in 0..size {
            arcs.push(Arc { tail: in_copy(j, b), head: sink(j), weight: w.clone() });
        }
    }
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            for a in 0..sizes[i] {
                for b in 0..sizes[j] {
                    if inst.allows(i, a, j, b) {
                        arcs.push(Arc { tail: out_copy(i, a), head: in_copy(j, b), weight: Rational::zero() });
                    }
                }
            }
        }
    }
    let demands = (0..k).flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (source(i), sink(j)))).collect();
    let mut d = DsnInstance::new(num_vertices, arcs, demands).expect("construction is well formed");
    d.names = names;
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DsnBruteForce {
    pub cap: usize,
    pub exec: Exec,
}

impl Default for DsnBruteForce {
    fn default() -> Self {
        DsnBruteForce { cap: DEFAULT_POSITIVE_ARC_CAP, exec: Exec::default() }
    }
}

/// Minimum-cost arc set connecting every demand. Zero-weight arcs are always
/// taken; the search runs over subsets of positive arcs, and among optimal
/// subsets returns the one with the smallest bit vector (bit `t` = `t`-th
/// positive arc).
pub fn dsn_opt_bruteforce(d: &DsnInstance, opts: &DsnBruteForce) -> Result<DsnSolution, DsnError> {
    let n = d.num_vertices;
    if n > MAX_VERTICES {
        return Err(DsnError::TooManyVertices { n, max: MAX_VERTICES });
    }
    let positive: Vec<usize> = (0..d.arcs.len()).filter(|&i| d.arcs[i].weight.is_positive()).collect();
    let free: Vec<usize> = (0..d.arcs.len()).filter(|&i| d.arcs[i].weight.is_zero()).collect();
    if positive.len() > opts.cap.min(40) {
        return Err(DsnError::CapExceeded { count: positive.len(), cap: opts.cap });
    }
    let scale = ratio::lcm_of_denominators(d.arcs.iter().map(|a| &a.weight));
    let scaled: Vec<u128> = positive
        .iter()
        .map(|&i| (&d.arcs[i].weight * Rational::from_integer(scale.clone())).to_integer().to_u128())
        .collect::<Option<_>>()
        .expect("scaled weights fit in u128");
    let mut base = vec![0u128; n];
    for &i in &free {
        base[d.arcs[i].tail] |= 1 << d.arcs[i].head;
    }
    let extra: Vec<(usize, u128)> = positive.iter().map(|&i| (d.arcs[i].tail, 1u128 << d.arcs[i].head)).collect();
    let mut targets: Vec<(usize, u128)> = Vec::new();
    for &(s, t) in &d.demands {
        match targets.iter_mut().find(|(x, _)| *x == s) {
            Some(e) => e.1 |= 1 << t,
            None => targets.push((s, 1 << t)),
        }
    }
    let feasible = |mask: u64| -> bool {
        let mut adj = base.clone();
        for (b, &(tail, bit)) in extra.iter().enumerate() {
            if mask >> b & 1 == 1 {
                adj[tail] |= bit;
            }
        }
        targets.iter().all(|&(s, want)| {
            let mut reach = 1u128 << s;
            let mut frontier = reach;
            while frontier != 0 && reach & want != want {
                let mut next = 0u128;
                let mut f = frontier;
                while f != 0 {
                    let v = f.trailing_zeros() as usize;
                    f &= f - 1;
                    next |= adj[v];
                }
                frontier = next & !reach;
                reach |= next;
            }
            reach & want == want
        })
    };
    let cost_of = |mask: u64| -> u128 { (0..scaled.len()).filter(|&b| mask >> b & 1 == 1).map(|b| scaled[b]).sum() };
    let total = 1u64 << positive.len();
    let bests = exec::map_chunks(opts.exec, total, 1 << 12, |lo, hi| {
        let mut best: Option<(u128, u64)> = None;
        for mask in lo..hi {
            let c = cost_of(mask);
            if best.is_some_and(|(bc, _)| c >= bc) {
                continue;
            }
            if feasible(mask) {
                best = Some((c, mask));
            }
        }
        best
    });
    let (c, mask) = bests.into_iter().flatten().min().ok_or(DsnError::Infeasible)?;
    let mut arcs: Vec<usize> = free;
    arcs.extend((0..positive.len()).filter(|&b| mask >> b & 1 == 1).map(|b| positive[b]));
    arcs.sort_unstable();
    let cost = Rational::new(BigInt::from(c), scale);
    debug_assert_eq!(cost, d.cost(&arcs));
    Ok(DsnSolution { arcs, cost })
}

/// `k'^{1/4} / 2^{(log₂ k')^{1/2 + ρ'}}`.
pub fn corollary_ratio(k_prime: u64, rho: f64) -> f64 {
    let k = k_prime as f64;
    k.powf(0.25) / (k.log2().powf(0.5 + rho)).exp2()
}

/// `opt² · val ≥ 2`, the squared form of `opt > √(2/val)`.
pub fn soundness_squared_holds(opt: &Rational, val: &Rational) -> bool {
    opt * opt * val >= ratio::int(2)
}
