//! The modular recursion g_{k,p,r}(n): the sequence simulated in Z/p^s with
//! a precision ladder s = r − ν_p(n!) and an absorbing failure mark F.
//!
//! A step at index n asks whether (n−1)·a + a^k is divisible by p^{ν_p(n)};
//! refusal certifies that p divides the denominator of the true term g(n),
//! so F at index n is a proof of non-integrality there. Passing costs
//! ν_p(n) digits of precision. The recursion is defined only while
//! ν_p(n!) ≤ r; running out of digits is a separate terminal condition,
//! never conflated with F.

use num::traits::{Pow, ToPrimitive, Zero};
use num::BigUint;

use crate::arith::{
    euler_phi_prime_power, factorial_valuation, inv_mod_u64, inv_unit_mod, mod_inverse,
    mod_pow_reduced, mul_mod, padic_valuation, pow_mod, Prime, PrimePowerModulus,
};
use crate::{Error, Result};

/// Residue or the absorbing failure mark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermStatus {
    Value(BigUint),
    Failed,
}

/// g_{k,p,r}(n) together with its ladder position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PadicTermState {
    r: u64,
    n: u64,
    ring: PrimePowerModulus,
    status: TermStatus,
}

impl PadicTermState {
    /// State at n = 1: l mod p^r.
    pub fn init(p: Prime, r: u64, l: u64) -> Result<Self> {
        if r == 0 {
            return Err(Error::ZeroExponent);
        }
        assert!(l >= 2, "initial value must be >= 2");
        let ring = PrimePowerModulus::new(p, r);
        let a = ring.reduce_u64(l);
        Ok(PadicTermState {
            r,
            n: 1,
            ring,
            status: TermStatus::Value(a),
        })
    }

    pub fn p(&self) -> Prime {
        self.ring.p()
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Current precision exponent; always r − ν_p(n!).
    pub fn s(&self) -> u64 {
        self.ring.s()
    }

    pub fn ring(&self) -> &PrimePowerModulus {
        &self.ring
    }

    pub fn status(&self) -> &TermStatus {
        &self.status
    }

    pub fn is_failed(&self) -> bool {
        matches!(self.status, TermStatus::Failed)
    }

    pub fn value(&self) -> Option<&BigUint> {
        match &self.status {
            TermStatus::Value(a) => Some(a),
            TermStatus::Failed => None,
        }
    }

    /// Whether g_{k,p,r}(n+1) is still defined, i.e. ν_p((n+1)!) ≤ r.
    pub fn can_step(&self) -> bool {
        padic_valuation(self.n + 1, self.p()).expect("n + 1 >= 2") <= self.s()
    }

    /// Advance from index n to n + 1.
    ///
    /// Panics if the next index is beyond the precision horizon
    /// (ν_p((n+1)!) > r), where the quantity is undefined; guard with
    /// [`can_step`](Self::can_step).
    pub fn step(&self, k: &BigUint) -> PadicTermState {
        debug_assert!(*k >= BigUint::from(2u32));
        let p = self.p();
        let n = self.n + 1;
        let v = padic_valuation(n, p).expect("n >= 2");
        assert!(
            v <= self.s(),
            "g(k,{p},{r}) is undefined at n = {n}: ν_{p}({n}!) > {r}",
            r = self.r
        );
        let next_ring = self.ring.shrink(v);
        let status = match &self.status {
            TermStatus::Failed => TermStatus::Failed,
            TermStatus::Value(a) => {
                let t = self
                    .ring
                    .reduce(&(BigUint::from(n - 1) * a + mod_pow_reduced(a, k, &self.ring)));
                let pv = BigUint::from(p.get()).pow(v);
                if v > 0 && !(&t % &pv).is_zero() {
                    TermStatus::Failed
                } else {
                    let unit = n / p.get().pow(v as u32);
                    let c = mod_inverse(&BigUint::from(unit), &next_ring)
                        .expect("n/p^v is coprime to p");
                    TermStatus::Value(next_ring.reduce(&((t / pv) * c)))
                }
            }
        };
        let next = PadicTermState {
            r: self.r,
            n,
            ring: next_ring,
            status,
        };
        debug_assert_eq!(next.s(), next.r - factorial_valuation(next.n, p));
        next
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Reached n_max with the next index still evaluable.
    Completed,
    /// A divisibility check refused; the sequence is non-integer there.
    Failed,
    /// ν_p((n'+1)!) > r: no more digits, no failure observed.
    PrecisionExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    /// Index of the first F, present iff stop_reason is Failed.
    pub first_failure: Option<u64>,
    /// Last index evaluated.
    pub reached: u64,
    pub terminal_state: PadicTermState,
    pub stop_reason: StopReason,
}

/// Iterate the recursion from n = 1, stopping at the first failure, at
/// n_max, or when precision runs out — whichever comes first.
pub fn run(k: &BigUint, l: u64, p: Prime, r: u64, n_max: u64) -> Result<RunOutcome> {
    assert!(n_max >= 1);
    let mut state = PadicTermState::init(p, r, l)?;
    loop {
        if state.is_failed() {
            return Ok(RunOutcome {
                first_failure: Some(state.n()),
                reached: state.n(),
                stop_reason: StopReason::Failed,
                terminal_state: state,
            });
        }
        if state.n() == n_max || !state.can_step() {
            let stop_reason = if state.can_step() {
                StopReason::Completed
            } else {
                StopReason::PrecisionExhausted
            };
            return Ok(RunOutcome {
                first_failure: None,
                reached: state.n(),
                stop_reason,
                terminal_state: state,
            });
        }
        state = state.step(k);
    }
}

/// A run outcome without the terminal state — all a search needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunEssentials {
    pub first_failure: Option<u64>,
    pub reached: u64,
    pub stop_reason: StopReason,
}

/// [`run`] minus state construction. When p^r fits in a machine word (every
/// prime that is not tiny relative to the bound), the whole ladder runs in
/// u64 arithmetic; results are identical to [`run`] by construction and by
/// the cross-path tests below.
pub fn run_essentials(k: &BigUint, l: u64, p: Prime, r: u64, n_max: u64) -> Result<RunEssentials> {
    if r == 0 {
        return Err(Error::ZeroExponent);
    }
    assert!(l >= 2 && n_max >= 1);
    // headroom: 2·φ < 2^63 keeps reduced exponents and sums overflow-free
    let word = u32::try_from(r)
        .ok()
        .and_then(|e| p.get().checked_pow(e))
        .filter(|&m| m <= 1 << 62);
    Ok(match word {
        Some(modulus) => run_u64(k, l, p.get(), r, modulus, n_max),
        None => run_big(k, l, p.get(), r, n_max),
    })
}

/// ν_p(n), p^{ν_p(n)}, and the unit part n/p^{ν_p(n)}.
fn split_unit(n: u64, p: u64) -> (u64, u64, u64) {
    let (mut v, mut pv, mut unit) = (0u64, 1u64, n);
    while unit % p == 0 {
        unit /= p;
        v += 1;
        pv *= p;
    }
    (v, pv, unit)
}

/// Reduced exponent in Z/p^s for a multi-word ring, mirroring
/// `mod_pow_reduced` (m must equal p^s).
fn reduced_exponent(k: &BigUint, p: u64, s: u64, m: &BigUint) -> BigUint {
    let log2p = 63 - p.leading_zeros() as u64;
    if k.bits() <= (s - 1) * log2p {
        return k.clone();
    }
    let phi = m / p * (p - 1);
    if *k < phi {
        k.clone()
    } else {
        &phi + k % &phi
    }
}

/// The ladder on a multi-word ring, allocation-lean: no states, exponent
/// refreshed only when s shrinks.
fn run_big(k: &BigUint, l: u64, p: u64, r: u64, n_max: u64) -> RunEssentials {
    let mut s = r;
    let mut m = BigUint::from(p).pow(r);
    let mut a = BigUint::from(l) % &m;
    let mut e = reduced_exponent(k, p, s, &m);
    for next in 2..=n_max {
        let (v, pv, unit) = split_unit(next, p);
        if v > s {
            return RunEssentials {
                first_failure: None,
                reached: next - 1,
                stop_reason: StopReason::PrecisionExhausted,
            };
        }
        let t = (&a * (next - 1) + a.modpow(&e, &m)) % &m;
        if v > 0 {
            if !(&t % pv).is_zero() {
                return RunEssentials {
                    first_failure: Some(next),
                    reached: next,
                    stop_reason: StopReason::Failed,
                };
            }
            s -= v;
            m /= pv;
            if s == 0 {
                // trivial ring: residues are 0 and stay 0 while ν_p = 0
                a = BigUint::zero();
                continue;
            }
            e = reduced_exponent(k, p, s, &m);
        }
        let c = inv_unit_mod(unit, &m);
        a = (t / pv) * c % &m;
    }
    let (v_next, _, _) = split_unit(n_max + 1, p);
    RunEssentials {
        first_failure: None,
        reached: n_max,
        stop_reason: if v_next <= s {
            StopReason::Completed
        } else {
            StopReason::PrecisionExhausted
        },
    }
}

/// Exponent actually raised to in Z/p^s, mirroring `mod_pow_reduced`:
/// k itself below φ(p^s), otherwise φ + (k mod φ).
fn exponent_for(k: &BigUint, p: u64, s: u64) -> u64 {
    debug_assert!(s >= 1);
    let phi = p.pow((s - 1) as u32) * (p - 1);
    match k.to_u64() {
        Some(small) if small < phi => small,
        _ => phi + (k % phi).to_u64().expect("residue below phi"),
    }
}

fn run_u64(k: &BigUint, l: u64, p: u64, r: u64, modulus: u64, n_max: u64) -> RunEssentials {
    let mut m = modulus; // p^s, shrinking with the ladder
    let mut s = r;
    let mut a = l % m;
    let mut e = exponent_for(k, p, s);
    for next in 2..=n_max {
        let (v, pv, unit) = split_unit(next, p);
        if v > s {
            return RunEssentials {
                first_failure: None,
                reached: next - 1,
                stop_reason: StopReason::PrecisionExhausted,
            };
        }
        let t = (mul_mod((next - 1) % m, a, m) + pow_mod(a, e, m)) % m;
        if v > 0 && t % pv != 0 {
            return RunEssentials {
                first_failure: Some(next),
                reached: next,
                stop_reason: StopReason::Failed,
            };
        }
        if v > 0 {
            s -= v;
            m /= pv;
            e = if s == 0 { 1 } else { exponent_for(k, p, s) };
        }
        // t/pv < p^{s_prev−v} = m already
        a = mul_mod(t / pv, inv_mod_u64(unit, m), m);
    }
    let (v_next, _, _) = split_unit(n_max + 1, p);
    RunEssentials {
        first_failure: None,
        reached: n_max,
        stop_reason: if v_next <= s {
            StopReason::Completed
        } else {
            StopReason::PrecisionExhausted
        },
    }
}

/// Full state sequence for n = 1..min(n_max, horizon), continuing through
/// failure (F is absorbing but still defined while ν_p(n!) ≤ r).
pub fn run_trace(k: &BigUint, l: u64, p: Prime, r: u64, n_max: u64) -> Result<Vec<PadicTermState>> {
    assert!(n_max >= 1);
    let mut states = vec![PadicTermState::init(p, r, l)?];
    loop {
        let last = states.last().expect("nonempty");
        if last.n() == n_max || !last.can_step() {
            return Ok(states);
        }
        let next = last.step(k);
        states.push(next);
    }
}

/// Largest n ≤ n_max with ν_p(n!) ≤ r: the last index the recursion reaches.
pub fn precision_horizon(p: Prime, r: u64, n_max: u64) -> u64 {
    let mut horizon = 1;
    for n in 2..=n_max {
        if factorial_valuation(n, p) > r {
            break;
        }
        horizon = n;
    }
    horizon
}

/// Check the k_p = φ(p^r)+1 closed form against an actual run: before
/// n = p^{ν_p(l)} the state is (l/p^{ν_p(n)})·c with c·(n/p^{ν_p(n)}) ≡ 1,
/// and from n = p^{ν_p(l)} on it is the constant l/p^{ν_p(l)}.
///
/// Requires ν_p(l) ≤ r (otherwise the second branch lies beyond the
/// precision horizon and the form does not apply).
pub fn closed_form_check_kp(p: Prime, r: u64, l: u64, n_max: u64) -> Result<bool> {
    let vl = padic_valuation(l, p)?;
    assert!(vl <= r, "closed form requires ν_p(l) <= r");
    let kp = euler_phi_prime_power(p, r)? + 1u32;
    let boundary = p.get().pow(vl as u32);
    for state in run_trace(&kp, l, p, r, n_max)? {
        let predicted = if state.n() <= boundary {
            let vn = padic_valuation(state.n(), p)?;
            let unit = state.n() / p.get().pow(vn as u32);
            let c = mod_inverse(&BigUint::from(unit), state.ring())?;
            state.ring().reduce(&(BigUint::from(l / p.get().pow(vn as u32)) * c))
        } else {
            state.ring().reduce_u64(l / p.get().pow(vl as u32))
        };
        if state.value() != Some(&predicted) {
            return Ok(false);
        }
    }
    Ok(true)
}
