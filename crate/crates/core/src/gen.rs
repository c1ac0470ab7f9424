//! Seeded instance generators.

use crate::agree::{AgreeError, FunctionFamily};
use crate::csp::{Constraint, Csp2Instance};
use crate::formula::{Assignment, CnfFormula, Literal};
use crate::setsys::SetSystem;
use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("occurrence bound {delta} over {num_vars} variables cannot hold {num_clauses} 3-clauses")]
    Infeasible { num_vars: usize, num_clauses: usize, delta: usize },
    #[error("no instance found after {0} attempts")]
    GaveUp(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

const ATTEMPTS: usize = 200;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random 3-CNF satisfied by a hidden assignment, with every variable in at
/// most `delta` clauses. Variables that end up unused are dropped, so the
/// formula may have fewer than `num_vars` variables; the returned assignment
/// is indexed like the formula.
pub fn gen_planted(
    num_vars: usize,
    num_clauses: usize,
    delta: usize,
    seed: u64,
) -> Result<(CnfFormula, Assignment), GenError> {
    if delta == 0 {
        return Err(GenError::InvalidParameter("Delta must be at least 1".into()));
    }
    if delta * num_vars < 3 * num_clauses || (num_clauses > 0 && num_vars < 3) {
        return Err(GenError::Infeasible { num_vars, num_clauses, delta });
    }
    let mut r = rng(seed);
    let planted: Vec<bool> = (0..num_vars).map(|_| r.gen()).collect();
    for _ in 0..ATTEMPTS {
        let mut load = vec![0usize; num_vars];
        let mut clauses = Vec::with_capacity(num_clauses);
        let ok = (0..num_clauses).all(|_| {
            let mut open: Vec<usize> = (0..num_vars).filter(|&v| load[v] < delta).collect();
            if open.len() < 3 {
                return false;
            }
            // Least-loaded variables first keeps late clauses feasible.
            open.shuffle(&mut r);
            open.sort_by_key(|&v| load[v]);
            let pool = open.len().min(6);
            let mut vars: Vec<usize> = open[..pool].choose_multiple(&mut r, 3).copied().collect();
            vars.sort_unstable();
            let mut lits: Vec<Literal> = vars.iter().map(|&v| Literal::new(v, r.gen())).collect();
            if !lits.iter().any(|l| l.satisfied_by(planted[l.var])) {
                let i = r.gen_range(0..3);
                lits[i].positive = planted[lits[i].var];
            }
            for &v in &vars {
                load[v] += 1;
            }
            clauses.push(lits);
            true
        });
        if ok {
            let (f, map) = CnfFormula::compacted(num_vars, clauses).expect("generated clauses are valid");
            let mut bits = vec![false; f.num_vars()];
            for (old, new) in map.iter().enumerate() {
                if let Some(n) = new {
                    bits[*n] = planted[old];
                }
            }
            return Ok((f, Assignment::new(bits)));
        }
    }
    Err(GenError::GaveUp(ATTEMPTS))
}

/// Complete 2-CSP with alphabet sizes drawn from `1..=max_alphabet` and each
/// label pair allowed with probability `density`.
pub fn random_csp(k: usize, max_alphabet: usize, density: f64, seed: u64) -> Result<Csp2Instance, GenError> {
    if max_alphabet == 0 || !(0.0..=1.0).contains(&density) {
        return Err(GenError::InvalidParameter("need max_alphabet >= 1 and density in [0, 1]".into()));
    }
    let mut r = rng(seed);
    let sizes: Vec<usize> = (0..k).map(|_| r.gen_range(1..=max_alphabet)).collect();
    let mut cons = Vec::new();
    for u in 0..k {
        for v in u + 1..k {
            let pairs: Vec<(usize, usize)> = (0..sizes[u])
                .flat_map(|a| (0..sizes[v]).map(move |b| (a, b)))
                .filter(|_| r.gen_bool(density))
                .collect();
            cons.push(Constraint::from_pairs(sizes[u], sizes[v], pairs));
        }
    }
    Ok(Csp2Instance::with_sizes(&sizes, cons).expect("shapes match"))
}

pub fn random_global(n: usize, seed: u64) -> Vec<bool> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen()).collect()
}

fn random_ones(r: &mut ChaCha8Rng, s: &FixedBitSet, n: usize) -> FixedBitSet {
    let mut b = FixedBitSet::with_capacity(n);
    b.extend(s.ones().filter(|_| r.gen::<bool>()));
    b
}

#[derive(Clone, Debug)]
pub struct PlantedFamily {
    pub family: FunctionFamily,
    pub global: Vec<bool>,
    /// Indices whose function is the restriction of `global`.
    pub planted: Vec<usize>,
}

/// Restrictions of one random global function on a random `fraction` of
/// the supports; the remaining functions are uniformly random.
pub fn planted_family(supports: &SetSystem, fraction: f64, seed: u64) -> Result<PlantedFamily, AgreeError> {
    let n = supports.universe_size();
    let k = supports.len();
    let mut r = rng(seed);
    let global: Vec<bool> = (0..n).map(|_| r.gen()).collect();
    let count = ((k as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
    let mut idx: Vec<usize> = (0..k).collect();
    idx.shuffle(&mut r);
    let mut planted = idx[..count].to_vec();
    planted.sort_unstable();
    let mut is_planted = vec![false; k];
    for &i in &planted {
        is_planted[i] = true;
    }
    let ones: Vec<FixedBitSet> = (0..k)
        .map(|i| {
            if is_planted[i] {
                let mut b = FixedBitSet::with_capacity(n);
                b.extend(supports.set(i).ones().filter(|&x| global[x]));
                b
            } else {
                random_ones(&mut r, supports.set(i), n)
            }
        })
        .collect();
    Ok(PlantedFamily { family: FunctionFamily::from_parts(supports.clone(), &ones), global, planted })
}

/// Restrictions of `global` with every value flipped independently with probability `flip`.
pub fn noisy_family(supports: &SetSystem, global: &[bool], flip: f64, seed: u64) -> Result<FunctionFamily, AgreeError> {
    let n = supports.universe_size();
    if global.len() != n {
        return Err(AgreeError::GlobalLength { expected: n, got: global.len() });
    }
    let mut r = rng(seed);
    let ones: Vec<FixedBitSet> = (0..supports.len())
        .map(|i| {
            let mut b = FixedBitSet::with_capacity(n);
            b.extend(supports.set(i).ones().filter(|&x| global[x] ^ r.gen_bool(flip)));
            b
        })
        .collect();
    Ok(FunctionFamily::from_parts(supports.clone(), &ones))
}

/// Splits the supports into `groups` contiguous blocks; block `b` holds
/// restrictions of its own random global function. Returns the globals too.
pub fn block_planted_family(
    supports: &SetSystem,
    groups: usize,
    seed: u64,
) -> Result<(FunctionFamily, Vec<Vec<bool>>), AgreeError> {
    if groups == 0 {
        return Err(AgreeError::InvalidParameter("need at least one group".into()));
    }
    let n = supports.universe_size();
    let k = supports.len();
    let mut r = rng(seed);
    let globals: Vec<Vec<bool>> = (0..groups).map(|_| (0..n).map(|_| r.gen()).collect()).collect();
    let ones: Vec<FixedBitSet> = (0..k)
        .map(|i| {
            let g = &globals[i * groups / k];
            let mut b = FixedBitSet::with_capacity(n);
            b.extend(supports.set(i).ones().filter(|&x| g[x]));
            b
        })
        .collect();
    Ok((FunctionFamily::from_parts(supports.clone(), &ones), globals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio;

    #[test]
    fn planted_formula_is_satisfied() {
        for seed in 0..20 {
            let (f, a) = gen_planted(12, 14, 4, seed).unwrap();
            assert_eq!(f.eval_fraction(&a).unwrap(), ratio::int(1));
            assert!(f.occurrence_bound() <= 4);
            assert!(f.clauses().iter().all(|c| c.len() == 3));
        }
    }

    #[test]
    fn planted_is_deterministic() {
        assert_eq!(gen_planted(10, 8, 3, 7).unwrap(), gen_planted(10, 8, 3, 7).unwrap());
    }

    #[test]
    fn planted_infeasible() {
        assert_eq!(gen_planted(4, 5, 3, 0), Err(GenError::Infeasible { num_vars: 4, num_clauses: 5, delta: 3 }));
    }

    #[test]
    fn block_groups_are_contiguous() {
        let s = SetSystem::new(4, vec![vec![0, 1, 2, 3]; 8]).unwrap();
        let (f, globals) = block_planted_family(&s, 4, 1).unwrap();
        for i in 0..8 {
            assert_eq!(f.values(i), globals[i / 2]);
        }
    }
}
