//! Number-theoretic primitives: valuations, Legendre's formula, sieves,
//! primorials, totients, and modular arithmetic over prime powers.
//!
//! Everything here is a pure function; all moduli are arbitrary-precision
//! because the working exponents scale with the solver's search bound.

use num::bigint::BigInt;
use num::integer::Integer;
use num::traits::{One, Pow, Zero};
use num::BigUint;

use crate::{Error, Result};

/// A validated prime. Construction runs a deterministic Miller-Rabin test,
/// so downstream code never re-checks primality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prime(u64);

impl Prime {
    pub fn new(p: u64) -> Result<Self> {
        if is_prime_u64(p) {
            Ok(Prime(p))
        } else {
            Err(Error::NotPrime(p))
        }
    }

    /// For values already known prime (sieve output).
    pub(crate) fn new_unchecked(p: u64) -> Self {
        debug_assert!(is_prime_u64(p));
        Prime(p)
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

impl std::fmt::Display for Prime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// a⁻¹ mod m for gcd(a, m) = 1, by extended Euclid; 0 when m = 1.
pub(crate) fn inv_mod_u64(a: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let (mut t, mut new_t) = (0i128, 1i128);
    let (mut r, mut new_r) = (m as i128, (a % m) as i128);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    debug_assert_eq!(r, 1, "{a} is not invertible mod {m}");
    t.rem_euclid(m as i128) as u64
}

/// Deterministic Miller-Rabin for all of u64.
/// Witnesses {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37} are exact below 3.3e24.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// p-adic valuation: largest v with p^v | n. Rejects n = 0.
pub fn padic_valuation(n: u64, p: Prime) -> Result<u64> {
    if n == 0 {
        return Err(Error::InfiniteValuation);
    }
    let p = p.get();
    let mut n = n;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    Ok(v)
}

/// ν_p(n!) by Legendre's formula Σ ⌊n/p^i⌋, never forming n!.
pub fn factorial_valuation(n: u64, p: Prime) -> u64 {
    let p = p.get();
    let mut total = 0;
    let mut q = n / p;
    while q > 0 {
        total += q;
        q /= p;
    }
    total
}

/// All primes in [2, m], ascending. Plain sieve of Eratosthenes.
pub fn primes_up_to(m: u64) -> Vec<u64> {
    if m < 2 {
        return Vec::new();
    }
    let m = m as usize;
    let mut composite = vec![false; m + 1];
    let mut primes = Vec::new();
    for i in 2..=m {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= m {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

pub(crate) fn primes_in(m: u64) -> Vec<Prime> {
    primes_up_to(m).into_iter().map(Prime::new_unchecked).collect()
}

/// Primorial m#: product of all primes ≤ m (empty product = 1).
pub fn primorial(m: u64) -> BigUint {
    primes_up_to(m)
        .into_iter()
        .map(BigUint::from)
        .product()
}

/// m!/m# computed as ∏_{p≤m} p^(ν_p(m!)−1); m! itself is never formed.
pub fn factorial_over_primorial(m: u64) -> BigUint {
    assert!(m >= 1, "m must be >= 1");
    let mut out = BigUint::one();
    for p in primes_in(m) {
        let e = factorial_valuation(m, p) - 1;
        out *= BigUint::from(p.get()).pow(e);
    }
    out
}

/// φ(p^r) = p^(r−1)·(p−1). Rejects r = 0.
pub fn euler_phi_prime_power(p: Prime, r: u64) -> Result<BigUint> {
    if r == 0 {
        return Err(Error::ZeroExponent);
    }
    Ok(BigUint::from(p.get()).pow(r - 1) * BigUint::from(p.get() - 1))
}

/// The ring Z/p^s, including the trivial ring s = 0 (modulus 1, all residues 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimePowerModulus {
    p: Prime,
    s: u64,
    modulus: BigUint,
}

impl PrimePowerModulus {
    pub fn new(p: Prime, s: u64) -> Self {
        PrimePowerModulus {
            p,
            s,
            modulus: BigUint::from(p.get()).pow(s),
        }
    }

    pub fn p(&self) -> Prime {
        self.p
    }

    pub fn s(&self) -> u64 {
        self.s
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn is_trivial(&self) -> bool {
        self.s == 0
    }

    /// Canonical residue in [0, p^s).
    pub fn reduce(&self, x: &BigUint) -> BigUint {
        x % &self.modulus
    }

    pub fn reduce_u64(&self, x: u64) -> BigUint {
        self.reduce(&BigUint::from(x))
    }

    /// The ring with exponent s − v; precision loss divides the modulus by p^v.
    pub fn shrink(&self, v: u64) -> Self {
        assert!(v <= self.s, "cannot shrink below the trivial ring");
        PrimePowerModulus {
            p: self.p,
            s: self.s - v,
            modulus: &self.modulus / BigUint::from(self.p.get()).pow(v),
        }
    }

    pub fn euler_phi(&self) -> BigUint {
        euler_phi_prime_power(self.p, self.s).expect("nontrivial ring")
    }
}

impl std::fmt::Display for PrimePowerModulus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}^{}", self.p, self.s)
    }
}

/// c with c·a ≡ 1 (mod p^s), for gcd(a, p) = 1. Returns 0 in the trivial ring;
/// signals NotInvertible when p | a and s ≥ 1.
pub fn mod_inverse(a: &BigUint, m: &PrimePowerModulus) -> Result<BigUint> {
    if m.is_trivial() {
        return Ok(BigUint::zero());
    }
    let a = m.reduce(a);
    if (&a % m.p().get()).is_zero() {
        return Err(Error::NotInvertible(format!("{a} mod {m}")));
    }
    let gcd = BigInt::from(a).extended_gcd(&BigInt::from(m.modulus().clone()));
    debug_assert!(gcd.gcd.is_one());
    let modulus = BigInt::from(m.modulus().clone());
    let c = ((gcd.x % &modulus) + &modulus) % &modulus;
    Ok(c.to_biguint().expect("canonical residue is non-negative"))
}

/// u⁻¹ mod m for a word-sized unit and a multi-word modulus; the caller
/// guarantees gcd(u, m) = 1 and m ≥ 2.
pub(crate) fn inv_unit_mod(u: u64, m: &BigUint) -> BigUint {
    let modulus = BigInt::from(m.clone());
    let gcd = BigInt::from(u).extended_gcd(&modulus);
    debug_assert!(gcd.gcd.is_one(), "{u} is not invertible");
    let c = ((gcd.x % &modulus) + &modulus) % &modulus;
    c.to_biguint().expect("canonical residue is non-negative")
}

/// a^k mod p^s with the exponent reduced through φ(p^s).
///
/// When k ≥ φ(p^s) the exponent is replaced by φ(p^s) + (k mod φ(p^s)):
/// congruent mod φ for units, and both exponents stay ≥ s so powers of
/// non-units vanish identically. Valid for every base, unit or not.
pub fn mod_pow_reduced(a: &BigUint, k: &BigUint, m: &PrimePowerModulus) -> BigUint {
    assert!(!k.is_zero(), "exponent must be >= 1");
    if m.is_trivial() {
        return BigUint::zero();
    }
    // k < 2^bits ≤ p^{s−1} ≤ φ(p^s) certifies no reduction without building φ
    let log2p = 63 - m.p().get().leading_zeros() as u64;
    if k.bits() <= (m.s() - 1) * log2p {
        return a.modpow(k, m.modulus());
    }
    let phi = m.euler_phi();
    let exp = if *k >= phi { &phi + k % &phi } else { k.clone() };
    a.modpow(&exp, m.modulus())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prime(p: u64) -> Prime {
        Prime::new(p).unwrap()
    }

    fn ring(p: u64, s: u64) -> PrimePowerModulus {
        PrimePowerModulus::new(prime(p), s)
    }

    #[test]
    fn primality() {
        assert!(is_prime_u64(2));
        assert!(is_prime_u64(43));
        assert!(is_prime_u64(4_294_967_311)); // first prime past 2^32
        assert!(!is_prime_u64(0));
        assert!(!is_prime_u64(1));
        assert!(!is_prime_u64(214)); // 2 · 107
        assert!(!is_prime_u64(3_215_031_751)); // strong pseudoprime to bases 2,3,5,7
        assert!(Prime::new(4).is_err());
    }

    #[test]
    fn primality_matches_sieve() {
        let primes = primes_up_to(5_000);
        for n in 0..=5_000u64 {
            assert_eq!(is_prime_u64(n), primes.binary_search(&n).is_ok(), "n = {n}");
        }
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(padic_valuation(12, prime(2)).unwrap(), 2);
        assert_eq!(padic_valuation(7, prime(5)).unwrap(), 0);
        assert_eq!(padic_valuation(9, prime(3)).unwrap(), 2);
        assert_eq!(padic_valuation(0, prime(2)), Err(Error::InfiniteValuation));
    }

    #[test]
    fn factorial_valuation_examples() {
        // 10! = 2^8 · 3^4 · ...: ⌊10/2⌋+⌊10/4⌋+⌊10/8⌋ = 5+2+1
        assert_eq!(factorial_valuation(10, prime(2)), 8);
        assert_eq!(factorial_valuation(10, prime(3)), 4);
        assert_eq!(factorial_valuation(1, prime(7)), 0);
        assert_eq!(factorial_valuation(0, prime(2)), 0);
    }

    #[test]
    fn legendre_agrees_with_direct_sum() {
        for p in primes_in(97) {
            let mut acc = 0;
            for n in 1..=10_000u64 {
                acc += padic_valuation(n, p).unwrap();
                if n % 977 == 0 || n == 10_000 {
                    assert_eq!(factorial_valuation(n, p), acc, "n = {n}, p = {p}");
                }
            }
            assert_eq!(
                factorial_valuation(10_000, p),
                (1..=10_000).map(|n| padic_valuation(n, p).unwrap()).sum::<u64>()
            );
        }
    }

    #[test]
    fn sieve_examples() {
        assert_eq!(primes_up_to(10), vec![2, 3, 5, 7]);
        assert_eq!(primes_up_to(1), Vec::<u64>::new());
        assert_eq!(primes_up_to(2), vec![2]);
        assert_eq!(primes_up_to(0), Vec::<u64>::new());
    }

    #[test]
    fn primorial_examples() {
        assert_eq!(primorial(10), BigUint::from(210u32));
        assert_eq!(primorial(1), BigUint::one());
        assert_eq!(primorial(7), BigUint::from(210u32));
    }

    #[test]
    fn factorial_over_primorial_examples() {
        assert_eq!(factorial_over_primorial(6), BigUint::from(24u32));
        assert_eq!(factorial_over_primorial(4), BigUint::from(4u32));
        assert_eq!(factorial_over_primorial(9), BigUint::from(1728u32));
        assert_eq!(factorial_over_primorial(1), BigUint::one());
    }

    #[test]
    fn factorial_over_primorial_times_primorial_is_factorial() {
        let mut factorial = BigUint::one();
        for m in 1..=20u64 {
            factorial *= BigUint::from(m);
            assert_eq!(factorial_over_primorial(m) * primorial(m), factorial, "m = {m}");
        }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(euler_phi_prime_power(prime(3), 2).unwrap(), BigUint::from(6u32));
        assert_eq!(euler_phi_prime_power(prime(2), 1).unwrap(), BigUint::one());
        assert_eq!(euler_phi_prime_power(prime(2), 3).unwrap(), BigUint::from(4u32));
        assert_eq!(euler_phi_prime_power(prime(5), 0), Err(Error::ZeroExponent));
    }

    #[test]
    fn mod_inverse_examples() {
        assert_eq!(mod_inverse(&BigUint::from(2u32), &ring(3, 2)).unwrap(), BigUint::from(5u32));
        assert_eq!(mod_inverse(&BigUint::one(), &ring(7, 4)).unwrap(), BigUint::one());
        assert_eq!(mod_inverse(&BigUint::from(3u32), &ring(7, 1)).unwrap(), BigUint::from(5u32));
        assert!(mod_inverse(&BigUint::from(6u32), &ring(3, 2)).is_err());
        assert!(mod_inverse(&BigUint::zero(), &ring(5, 1)).is_err());
        // trivial ring: everything "inverts" to 0
        assert_eq!(mod_inverse(&BigUint::from(6u32), &ring(3, 0)).unwrap(), BigUint::zero());
    }

    #[test]
    fn mod_inverse_roundtrip() {
        for p in [2u64, 3, 5, 7, 11] {
            for s in 1..=5u64 {
                let m = ring(p, s);
                let pow = p.pow(s as u32);
                for a in 1..pow.min(200) {
                    if a % p == 0 {
                        continue;
                    }
                    let c = mod_inverse(&BigUint::from(a), &m).unwrap();
                    assert_eq!((c * a) % m.modulus(), BigUint::one(), "a = {a} mod {m}");
                }
            }
        }
    }

    #[test]
    fn word_inverse_matches_bignum() {
        assert_eq!(inv_mod_u64(7, 1), 0);
        for p in [2u64, 3, 5, 7, 11, 13] {
            for s in 1..=5u64 {
                let m = ring(p, s);
                let pow = p.pow(s as u32);
                for a in 1..pow.min(300) {
                    if a % p == 0 {
                        continue;
                    }
                    let got = inv_mod_u64(a, pow);
                    assert_eq!(mul_mod(got, a, pow), 1 % pow, "a = {a}, m = {pow}");
                    assert_eq!(
                        BigUint::from(got),
                        mod_inverse(&BigUint::from(a), &m).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn mod_pow_examples() {
        // 2^6 ≡ 1 mod 9, so 2^100 = 2^(96+4) ≡ 2^4 = 16 ≡ 7
        assert_eq!(
            mod_pow_reduced(&BigUint::from(2u32), &BigUint::from(100u32), &ring(3, 2)),
            BigUint::from(7u32)
        );
        // ν_3(6^5) = 5 ≥ 2
        assert_eq!(
            mod_pow_reduced(&BigUint::from(6u32), &BigUint::from(5u32), &ring(3, 2)),
            BigUint::zero()
        );
        assert_eq!(
            mod_pow_reduced(&BigUint::one(), &BigUint::from(10u64.pow(15)), &ring(7, 3)),
            BigUint::one()
        );
        assert_eq!(
            mod_pow_reduced(&BigUint::from(5u32), &BigUint::from(3u32), &ring(2, 0)),
            BigUint::zero()
        );
    }

    /// Small-scale oracle: naive repeated multiplication over every residue of
    /// every prime power ≤ 3^7, with exponents straddling each φ(p^s) threshold.
    #[test]
    fn mod_pow_matches_naive() {
        const CAP: u64 = 2187; // 3^7
        for p in [2u64, 3, 5, 7, 11, 13] {
            let mut s = 1u64;
            while p.pow(s as u32) <= CAP {
                let m = ring(p, s);
                let pow = p.pow(s as u32);
                let phi = (pow / p) * (p - 1);
                let mut ks: Vec<u64> = (1..=256).collect();
                ks.extend([509, 1024, 1777, 2000]);
                for d in [phi.saturating_sub(1), phi, phi + 1, 2 * phi, 2 * phi + 1] {
                    if d >= 1 {
                        ks.push(d);
                    }
                }
                ks.sort_unstable();
                ks.dedup();
                ks.retain(|&k| k <= 2000);
                for a in 0..pow {
                    // naive table a^1..a^max, computed incrementally in u64
                    let max_k = *ks.last().unwrap();
                    let mut table = Vec::with_capacity(max_k as usize + 1);
                    table.push(1u64 % pow);
                    for i in 1..=max_k as usize {
                        table.push(table[i - 1] * a % pow);
                    }
                    for &k in &ks {
                        let got = mod_pow_reduced(&BigUint::from(a), &BigUint::from(k), &m);
                        assert_eq!(
                            got,
                            BigUint::from(table[k as usize]),
                            "a = {a}, k = {k}, modulus {m}"
                        );
                    }
                }
                s += 1;
            }
        }
    }

    #[test]
    fn shrink_ladder() {
        let m = ring(3, 5);
        let m2 = m.shrink(2);
        assert_eq!(m2.s(), 3);
        assert_eq!(*m2.modulus(), BigUint::from(27u32));
        let trivial = m2.shrink(3);
        assert!(trivial.is_trivial());
        assert_eq!(*trivial.modulus(), BigUint::one());
        assert_eq!(trivial.reduce_u64(17), BigUint::zero());
    }
}
