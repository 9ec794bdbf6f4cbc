//! Literal big-rational evaluation of the recursion at small indices.
//!
//! Terms grow doubly exponentially (digit counts multiply by roughly k per
//! step), so this module is a ground-truth oracle for small n, never a way to
//! reach N_k. A digit budget caps the run; hitting it is reported as a
//! distinct status, not an error and not silent truncation.

use num::bigint::{BigInt, BigUint};
use num::rational::BigRational;
use num::traits::{One, Pow, Zero};

use crate::arith::{mod_inverse, PrimePowerModulus};

/// Default cap on numerator digits (the sequence blows past any budget fast;
/// this keeps worst-case `term` invocations at desk scale).
pub const DEFAULT_DIGIT_BUDGET: u64 = 2_000_000;

/// One exact sequence term. `value` is fully reduced; `digit_count` counts
/// decimal digits of the numerator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactTerm {
    pub n: u64,
    pub value: BigRational,
    pub digit_count: u64,
}

impl ExactTerm {
    pub fn is_integer(&self) -> bool {
        self.value.is_integer()
    }
}

/// How an exact evaluation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactStatus {
    /// All requested indices were produced.
    Completed,
    /// The term at `at_n` would exceed the digit budget and was not emitted.
    DigitBudgetReached { at_n: u64 },
}

impl ExactStatus {
    pub fn is_truncated(&self) -> bool {
        matches!(self, ExactStatus::DigitBudgetReached { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactRun {
    pub terms: Vec<ExactTerm>,
    pub status: ExactStatus,
}

/// Result of scanning for the first non-integer term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstNonInteger {
    /// Smallest scanned n whose term has a non-unit denominator.
    pub first: Option<u64>,
    /// Last index actually examined.
    pub scanned_to: u64,
    pub status: ExactStatus,
}

/// Decimal digits of x (1 for x = 0). Uses the bit length to bracket the
/// answer, then corrects against exact powers of ten; never formats x.
pub fn decimal_digits(x: &BigUint) -> u64 {
    if x.is_zero() {
        return 1;
    }
    let mut d = ((x.bits() - 1) as f64 * std::f64::consts::LOG10_2).floor() as u64 + 1;
    let mut lower = BigUint::from(10u32).pow(d - 1);
    while lower > *x {
        d -= 1;
        lower /= 10u32;
    }
    let mut upper = lower * 10u32;
    while upper <= *x {
        d += 1;
        upper *= 10u32;
    }
    d
}

/// Reduced positive fraction a/b. Terms stay positive, so unsigned parts
/// suffice; `BigRational` is only built at the boundary.
struct Fraction {
    numer: BigUint,
    denom: BigUint,
}

impl Fraction {
    fn from_integer(l: u64) -> Self {
        Fraction {
            numer: BigUint::from(l),
            denom: BigUint::one(),
        }
    }

    fn is_integer(&self) -> bool {
        self.denom.is_one()
    }

    fn to_value(&self) -> BigRational {
        // already reduced; new_raw skips Ratio's gcd, which is quadratic in
        // the numerator size and dwarfs everything else at ~10^6 digits
        BigRational::new_raw(
            BigInt::from(self.numer.clone()),
            BigInt::from(self.denom.clone()),
        )
    }

    /// g(n) from g(n−1): n·g(n) = (n−1)·g(n−1) + g(n−1)^k. With gcd(a,b) = 1,
    /// the raw numerator (n−1)·a·b^{k−1} + a^k is coprime to b (every prime of
    /// b divides the left summand but not a^k), so the reduction gcd is
    /// gcd(num, n·b^k) = gcd(num, n) — one word-sized division.
    fn step(&self, k: u64, n: u64) -> Fraction {
        let bk1: BigUint = Pow::pow(&self.denom, k - 1);
        let ak: BigUint = Pow::pow(&self.numer, k);
        let num = &self.numer * &bk1 * (n - 1) + ak;
        let den = &bk1 * &self.denom * n;
        let g = num::integer::gcd(u64::try_from(&num % n).expect("residue below n"), n);
        debug_assert!((&den % g).is_zero());
        Fraction {
            numer: num / g,
            denom: den / g,
        }
    }
}

fn term_at(n: u64, frac: &Fraction) -> ExactTerm {
    ExactTerm {
        n,
        value: frac.to_value(),
        digit_count: decimal_digits(&frac.numer),
    }
}

/// Terms 1..n' where n' = n_max or the last index whose numerator stays
/// within `digit_budget` decimal digits.
pub fn exact_terms(k: u64, l: u64, n_max: u64, digit_budget: u64) -> ExactRun {
    assert!(k >= 2 && l >= 2 && n_max >= 1 && digit_budget >= 1);
    let mut terms = Vec::new();
    let mut frac = Fraction::from_integer(l);
    for n in 1..=n_max {
        if n > 1 {
            frac = frac.step(k, n);
        }
        let term = term_at(n, &frac);
        if term.digit_count > digit_budget {
            return ExactRun {
                terms,
                status: ExactStatus::DigitBudgetReached { at_n: n },
            };
        }
        terms.push(term);
    }
    ExactRun {
        terms,
        status: ExactStatus::Completed,
    }
}

/// Smallest scanned index with a non-unit denominator, stopping early once
/// found. `scanned_to` reports the horizon actually reached.
pub fn exact_first_noninteger(k: u64, l: u64, n_max: u64, digit_budget: u64) -> FirstNonInteger {
    assert!(k >= 2 && l >= 2 && n_max >= 1 && digit_budget >= 1);
    let mut frac = Fraction::from_integer(l);
    let mut scanned_to = 0;
    for n in 1..=n_max {
        if n > 1 {
            frac = frac.step(k, n);
        }
        if decimal_digits(&frac.numer) > digit_budget {
            return FirstNonInteger {
                first: None,
                scanned_to,
                status: ExactStatus::DigitBudgetReached { at_n: n },
            };
        }
        scanned_to = n;
        if !frac.is_integer() {
            return FirstNonInteger {
                first: Some(n),
                scanned_to,
                status: ExactStatus::Completed,
            };
        }
    }
    FirstNonInteger {
        first: None,
        scanned_to,
        status: ExactStatus::Completed,
    }
}

/// numerator·denominator⁻¹ mod p^s, or None when p divides the denominator
/// (the term has no image in Z/p^s).
pub fn rational_residue(value: &BigRational, m: &PrimePowerModulus) -> Option<BigUint> {
    let denom = value.denom().magnitude();
    if (denom % m.p().get()).is_zero() {
        return None;
    }
    if m.is_trivial() {
        return Some(BigUint::zero());
    }
    let modulus = BigInt::from(m.modulus().clone());
    let num = ((value.numer() % &modulus) + &modulus) % &modulus;
    let num = num.to_biguint().expect("canonical residue is non-negative");
    let inv = mod_inverse(denom, m).expect("denominator coprime to p");
    Some(m.reduce(&(num * inv)))
}

/// Residue of a term, per `rational_residue`.
pub fn exact_residue(term: &ExactTerm, m: &PrimePowerModulus) -> Option<BigUint> {
    rational_residue(&term.value, m)
}
