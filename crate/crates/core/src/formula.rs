//! 3-CNF formulas, assignments, DIMACS I/O and a brute-force MAX-3-SAT oracle.

use crate::exec::{self, Exec};
use crate::ratio::Rational;
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

pub const DEFAULT_MAX_SAT_CAP: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn new(var: usize, positive: bool) -> Self {
        Literal { var, positive }
    }

    /// DIMACS literals are 1-based and signed; `0` is not a literal.
    pub fn from_dimacs(x: i64) -> Option<Self> {
        if x == 0 {
            return None;
        }
        Some(Literal { var: (x.unsigned_abs() - 1) as usize, positive: x > 0 })
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.positive {
            v
        } else {
            -v
        }
    }

    pub fn satisfied_by(self, bit: bool) -> bool {
        bit == self.positive
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("clause {clause} is empty")]
    EmptyClause { clause: usize },
    #[error("clause {clause} has {width} literals (at most 3 allowed)")]
    ClauseTooWide { clause: usize, width: usize },
    #[error("clause {clause} mentions variable {var} but the formula has {num_vars} variables")]
    VarOutOfRange { clause: usize, var: usize, num_vars: usize },
    #[error("clause {clause} mentions variable {var} twice")]
    DuplicateVar { clause: usize, var: usize },
    #[error("clause index {index} out of range for {m} clauses")]
    ClauseIndexOutOfRange { index: usize, m: usize },
    #[error("assignment has {got} bits but the formula has {expected} variables")]
    AssignmentLength { expected: usize, got: usize },
    #[error("{num_vars} variables exceed the brute-force cap of {cap}")]
    CapExceeded { num_vars: usize, cap: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: missing `p cnf` header before clauses")]
    MissingHeader { line: usize },
    #[error("line {line}: malformed header")]
    MalformedHeader { line: usize },
    #[error("line {line}: second header")]
    DuplicateHeader { line: usize },
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: clause has more than 3 literals")]
    ClauseTooWide { line: usize },
    #[error("line {line}: literal {literal} out of range for {num_vars} variables")]
    LiteralOutOfRange { line: usize, literal: i64, num_vars: usize },
    #[error("line {line}: variable {var} repeated within a clause")]
    DuplicateVariable { line: usize, var: usize },
    #[error("line {line}: empty clause")]
    EmptyClause { line: usize },
    #[error("line {line}: last clause is not terminated by 0")]
    UnterminatedClause { line: usize },
    #[error("header declares {declared} clauses but {found} were given")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("no `p cnf` header found")]
    NoHeader,
}

/// A 3-CNF formula in which every variable occurs in some clause.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CnfJson", into = "CnfJson")]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<Literal>>,
    occurrence_bound: usize,
}

#[derive(Serialize, Deserialize)]
struct CnfJson {
    num_vars: usize,
    #[serde(default)]
    occurrence_bound: Option<usize>,
    clauses: Vec<Vec<i64>>,
}

impl From<CnfFormula> for CnfJson {
    fn from(f: CnfFormula) -> Self {
        CnfJson {
            num_vars: f.num_vars,
            occurrence_bound: Some(f.occurrence_bound),
            clauses: f.clauses.iter().map(|c| c.iter().map(|l| l.to_dimacs()).collect()).collect(),
        }
    }
}

impl TryFrom<CnfJson> for CnfFormula {
    type Error = String;

    fn try_from(j: CnfJson) -> Result<Self, String> {
        let mut clauses = Vec::with_capacity(j.clauses.len());
        for (ci, c) in j.clauses.iter().enumerate() {
            let mut lits = Vec::with_capacity(c.len());
            for &x in c {
                lits.push(Literal::from_dimacs(x).ok_or_else(|| format!("clause {ci}: literal 0"))?);
            }
            clauses.push(lits);
        }
        let f = CnfFormula::new(j.num_vars, clauses).map_err(|e| e.to_string())?;
        if let Some(d) = j.occurrence_bound {
            if d != f.occurrence_bound {
                return Err(format!("stored occurrence bound {d} differs from recomputed {}", f.occurrence_bound));
            }
        }
        Ok(f)
    }
}

impl CnfFormula {
    /// Validates the clauses, then strips unused variables and compacts indices.
    pub fn new(num_vars: usize, clauses: Vec<Vec<Literal>>) -> Result<Self, FormulaError> {
        Self::compacted(num_vars, clauses).map(|(f, _)| f)
    }

    /// Like [`CnfFormula::new`] but also returns the old-to-new variable map.
    pub fn compacted(num_vars: usize, clauses: Vec<Vec<Literal>>) -> Result<(Self, Vec<Option<usize>>), FormulaError> {
        let mut used = vec![false; num_vars];
        for (ci, c) in clauses.iter().enumerate() {
            if c.is_empty() {
                return Err(FormulaError::EmptyClause { clause: ci });
            }
            if c.len() > 3 {
                return Err(FormulaError::ClauseTooWide { clause: ci, width: c.len() });
            }
            for (li, l) in c.iter().enumerate() {
                if l.var >= num_vars {
                    return Err(FormulaError::VarOutOfRange { clause: ci, var: l.var, num_vars });
                }
                if c[..li].iter().any(|o| o.var == l.var) {
                    return Err(FormulaError::DuplicateVar { clause: ci, var: l.var });
                }
                used[l.var] = true;
            }
        }
        let mut map = vec![None; num_vars];
        let mut next = 0;
        for (v, u) in used.iter().enumerate() {
            if *u {
                map[v] = Some(next);
                next += 1;
            }
        }
        let clauses: Vec<Vec<Literal>> = clauses
            .into_iter()
            .map(|c| c.into_iter().map(|l| Literal::new(map[l.var].expect("used variable"), l.positive)).collect())
            .collect();
        let mut occ = vec![0usize; next];
        for c in &clauses {
            for l in c {
                occ[l.var] += 1;
            }
        }
        let occurrence_bound = occ.into_iter().max().unwrap_or(0);
        Ok((CnfFormula { num_vars: next, clauses, occurrence_bound }, map))
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Literal>] {
        &self.clauses
    }

    pub fn clause(&self, i: usize) -> &[Literal] {
        &self.clauses[i]
    }

    /// Δ: the largest number of clauses any variable occurs in.
    pub fn occurrence_bound(&self) -> usize {
        self.occurrence_bound
    }

    /// var(T): sorted union of the variables of the clauses in `t`.
    pub fn clause_vars(&self, t: impl IntoIterator<Item = usize>) -> Result<Vec<usize>, FormulaError> {
        let mut seen = vec![false; self.num_vars];
        for ci in t {
            let c =
                self.clauses.get(ci).ok_or(FormulaError::ClauseIndexOutOfRange { index: ci, m: self.clauses.len() })?;
            for l in c {
                seen[l.var] = true;
            }
        }
        Ok(seen.iter().enumerate().filter_map(|(v, s)| s.then_some(v)).collect())
    }

    pub fn satisfied_count(&self, a: &Assignment) -> Result<usize, FormulaError> {
        self.check_assignment(a)?;
        Ok(self.clauses.iter().filter(|c| c.iter().any(|l| l.satisfied_by(a.bits[l.var]))).count())
    }

    /// val(ψ): the fraction of satisfied clauses; an empty formula has value 1.
    pub fn eval_fraction(&self, a: &Assignment) -> Result<Rational, FormulaError> {
        let sat = self.satisfied_count(a)?;
        if self.clauses.is_empty() {
            return Ok(Rational::from_integer(BigInt::from(1)));
        }
        Ok(Rational::new(BigInt::from(sat), BigInt::from(self.clauses.len())))
    }

    fn check_assignment(&self, a: &Assignment) -> Result<(), FormulaError> {
        if a.bits.len() != self.num_vars {
            return Err(FormulaError::AssignmentLength { expected: self.num_vars, got: a.bits.len() });
        }
        Ok(())
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                let _ = write!(s, "{} ", l.to_dimacs());
            }
            s.push_str("0\n");
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment { bits }
    }

    pub fn zeros(n: usize) -> Self {
        Assignment { bits: vec![false; n] }
    }

    /// Bit `i` is bit `n - 1 - i` of `idx`, so increasing `idx` walks
    /// bit vectors in lexicographic order with `x1` most significant.
    pub fn from_index(idx: u64, n: usize) -> Self {
        Assignment { bits: (0..n).map(|i| (idx >> (n - 1 - i)) & 1 == 1).collect() }
    }
}

pub fn parse_dimacs(text: &str) -> Result<CnfFormula, ParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<Literal>> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut current_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('c') {
            continue;
        }
        if t.starts_with('%') {
            break;
        }
        if t.starts_with('p') {
            if header.is_some() {
                return Err(ParseError::DuplicateHeader { line });
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(ParseError::MalformedHeader { line });
            }
            let n = parts[2].parse().map_err(|_| ParseError::MalformedHeader { line })?;
            let m = parts[3].parse().map_err(|_| ParseError::MalformedHeader { line })?;
            header = Some((n, m));
            continue;
        }
        let (num_vars, _) = header.ok_or(ParseError::MissingHeader { line })?;
        for tok in t.split_whitespace() {
            let x: i64 = tok.parse().map_err(|_| ParseError::InvalidToken { line, token: tok.to_string() })?;
            if x == 0 {
                if current.is_empty() {
                    return Err(ParseError::EmptyClause { line });
                }
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            if x.unsigned_abs() as usize > num_vars {
                return Err(ParseError::LiteralOutOfRange { line, literal: x, num_vars });
            }
            let lit = Literal::from_dimacs(x).expect("nonzero");
            if current.iter().any(|l| l.var == lit.var) {
                return Err(ParseError::DuplicateVariable { line, var: lit.var + 1 });
            }
            if current.len() == 3 {
                return Err(ParseError::ClauseTooWide { line });
            }
            if current.is_empty() {
                current_line = line;
            }
            current.push(lit);
        }
    }
    let (num_vars, declared) = header.ok_or(ParseError::NoHeader)?;
    if !current.is_empty() {
        return Err(ParseError::UnterminatedClause { line: current_line });
    }
    if clauses.len() != declared {
        return Err(ParseError::ClauseCountMismatch { declared, found: clauses.len() });
    }
    Ok(CnfFormula::new(num_vars, clauses).expect("parser enforces clause invariants"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BruteForce {
    pub cap: usize,
    pub exec: Exec,
}

impl Default for BruteForce {
    fn default() -> Self {
        BruteForce { cap: DEFAULT_MAX_SAT_CAP, exec: Exec::default() }
    }
}

/// Exact val(Φ) by exhaustive enumeration. Ties go to the lexicographically
/// smallest bit vector (x1 = 0 before x1 = 1).
pub fn max_sat_bruteforce(f: &CnfFormula, opts: &BruteForce) -> Result<(Rational, Assignment), FormulaError> {
    let n = f.num_vars;
    if n > opts.cap || n > 63 {
        return Err(FormulaError::CapExceeded { num_vars: n, cap: opts.cap.min(63) });
    }
    let masks: Vec<(u64, u64)> = f
        .clauses
        .iter()
        .map(|c| {
            c.iter().fold((0u64, 0u64), |(p, q), l| {
                let bit = 1u64 << (n - 1 - l.var);
                if l.positive {
                    (p | bit, q)
                } else {
                    (p, q | bit)
                }
            })
        })
        .collect();
    let total = 1u64 << n;
    let per_chunk = exec::map_chunks(opts.exec, total, 1 << 14, |lo, hi| {
        let mut best = (0usize, lo);
        let mut first = true;
        for idx in lo..hi {
            let sat = masks.iter().filter(|&&(p, q)| idx & p != 0 || !idx & q != 0).count();
            if first || sat > best.0 {
                best = (sat, idx);
                first = false;
            }
        }
        best
    });
    let mut best = per_chunk[0];
    for &c in &per_chunk[1..] {
        if c.0 > best.0 {
            best = c;
        }
    }
    let a = Assignment::from_index(best.1, n);
    Ok((f.eval_fraction(&a)?, a))
}
