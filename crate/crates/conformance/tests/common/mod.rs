//! Fixed-point evaluator with 256 fractional bits, independent of the f64 code paths.

#![allow(dead_code)]

use agreecsp::ratio::Rational;
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};

pub const BITS: u32 = 256;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fx(pub BigInt);

fn scale() -> BigInt {
    BigInt::one() << BITS
}

impl Fx {
    pub fn int(n: i64) -> Fx {
        Fx(BigInt::from(n) << BITS)
    }

    pub fn from_big(n: &BigUint) -> Fx {
        Fx(BigInt::from(n.clone()) << BITS)
    }

    pub fn from_rational(x: &Rational) -> Fx {
        Fx((x.numer() << BITS) / x.denom())
    }

    pub fn to_rational(&self) -> Rational {
        Rational::new(self.0.clone(), scale())
    }

    pub fn add(&self, o: &Fx) -> Fx {
        Fx(&self.0 + &o.0)
    }

    pub fn sub(&self, o: &Fx) -> Fx {
        Fx(&self.0 - &o.0)
    }

    pub fn mul(&self, o: &Fx) -> Fx {
        Fx((&self.0 * &o.0) >> BITS)
    }

    pub fn div(&self, o: &Fx) -> Fx {
        Fx((&self.0 << BITS) / &o.0)
    }

    pub fn powi(&self, e: u32) -> Fx {
        (0..e).fold(Fx::int(1), |acc, _| acc.mul(self))
    }

    pub fn floor(&self) -> BigInt {
        &self.0 >> BITS
    }

    pub fn ceil(&self) -> BigInt {
        let q = self.floor();
        if (&q << BITS) == self.0 {
            q
        } else {
            q + 1
        }
    }
}

/// `2·atanh(z)` by its Taylor series, for `|z| ≤ 1/3`.
fn two_atanh(z: &Fx) -> Fx {
    let z2 = z.mul(z);
    let mut term = z.clone();
    let mut sum = Fx(BigInt::zero());
    let mut k = 1i64;
    while !term.0.is_zero() {
        sum = sum.add(&Fx(&term.0 / k));
        term = term.mul(&z2);
        k += 2;
    }
    Fx(sum.0 * 2)
}

pub fn ln2() -> Fx {
    two_atanh(&Fx::int(1).div(&Fx::int(3)))
}

/// `x = 2^e·y` with `y ∈ [1, 2)`.
fn split(x: &Fx) -> (i64, Fx) {
    assert!(x.0.is_positive());
    let mut e: i64 = x.0.bits() as i64 - 1 - BITS as i64;
    let mut y = if e >= 0 { Fx(&x.0 >> e as u32) } else { Fx(&x.0 << (-e) as u32) };
    if y >= Fx::int(2) {
        y = Fx(y.0 >> 1);
        e += 1;
    }
    (e, y)
}

fn ln_mantissa(y: &Fx) -> Fx {
    let one = Fx::int(1);
    two_atanh(&y.sub(&one).div(&y.add(&one)))
}

/// Natural log of a positive fixed-point number.
pub fn ln(x: &Fx) -> Fx {
    let (e, y) = split(x);
    ln_mantissa(&y).add(&Fx(ln2().0 * e))
}

/// Exact on powers of two.
pub fn log2(x: &Fx) -> Fx {
    let (e, y) = split(x);
    Fx::int(e).add(&ln_mantissa(&y).div(&ln2()))
}

/// `|a - b| ≤ tol·|b|`.
pub fn rel_close(a: &Rational, b: &Fx, tol: f64) -> bool {
    let b = b.to_rational();
    let diff = (a - &b).abs();
    let tol = agreecsp::ratio::from_f64(tol).expect("finite");
    diff <= tol * b.abs()
}

pub fn to_f64(x: &Fx) -> f64 {
    x.to_rational().to_f64().unwrap_or(f64::NAN)
}

pub struct OracleParams {
    pub alpha: Fx,
    pub gamma: Fx,
    pub mu: Fx,
    pub zeta: Fx,
    pub ell: usize,
    pub r: BigInt,
    pub h: BigInt,
    pub k: BigUint,
}

fn finish(alpha: Fx, ell: usize, k: BigUint, eps: &Rational, delta: usize) -> OracleParams {
    let gamma = Fx(&alpha.0 / 2);
    let e = Fx::from_rational(eps);
    let e2 = e.mul(&e);
    let d3 = Fx::int((delta * delta * delta) as i64);
    let mu = e2.mul(&gamma).mul(&gamma).div(&Fx::int(288).mul(&d3));
    let zeta = e2.mul(&gamma).mul(&gamma).mul(&gamma).div(&Fx::int(432).mul(&d3));
    let two = Fx::int(2);
    let r = ln(&two.div(&zeta)).div(&alpha.powi(ell as u32)).ceil();
    let h = Fx::int(8).mul(&ln(&two.div(&mu))).div(&alpha).ceil();
    OracleParams { alpha, gamma, mu, zeta, ell, r, h, k }
}

/// Largest `L` with `L^p ≤ x`.
fn int_root_floor(x: &Fx, p: u32) -> usize {
    let mut l = 0usize;
    while Fx::int(l as i64 + 1).powi(p) <= *x {
        l += 1;
    }
    l
}

pub fn eth(m: u64, c: u32, eps: &Rational, delta: usize) -> OracleParams {
    let lm = log2(&Fx::from_big(&BigUint::from(m)));
    let alpha = Fx::int(1).div(&lm.powi(c + 1));
    let ell = int_root_floor(&lm, 4).max(2);
    let k = BigUint::one() << (ell * ell);
    finish(alpha, ell, k, eps, delta)
}

pub fn gap_eth(k: &BigUint, eps: &Rational, delta: usize) -> OracleParams {
    let lk = log2(&Fx::from_big(k));
    let alpha = Fx::int(1).div(&log2(&lk));
    let ell = int_root_floor(&lk, 2);
    finish(alpha, ell, k.clone(), eps, delta)
}
