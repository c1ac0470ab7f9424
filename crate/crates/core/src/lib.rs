//! Clause-subset reduction from 3-SAT to 2-CSP, the constructive agreement
//! decoder behind its soundness argument, and the 2-CSP to directed Steiner
//! network reduction. Every stage ships with a brute-force oracle so the
//! lemma inequalities can be checked on small instances.

pub mod agree;
pub mod csp;
pub mod dsn;
pub mod exec;
pub mod formula;
pub mod gen;
pub mod ratio;
pub mod redblue;
pub mod reduction;
pub mod setsys;

pub use exec::Exec;
pub use ratio::Rational;
