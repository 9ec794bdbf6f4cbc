//! Exit gate for the workspace: eight checks covering the CLI fast path, the
//! k-sweep, the unboundedness construction, modular/exact agreement, exponent
//! periodicity, the k_p closed form, the full 10^4 sweep, and golden terms.
//!
//! Each check prints exactly one `criterion N: PASS/FAIL — ...` line (visible
//! with `--nocapture`); the test fails at the end if any check failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use num::traits::{ToPrimitive, Zero};
use num::BigUint;

use goebel_core::arith::{euler_phi_prime_power, padic_valuation, primes_up_to, Prime};
use goebel_core::exact::{exact_residue, exact_terms};
use goebel_core::padic::{closed_form_check_kp, run_trace};
use goebel_core::solver::{sweep, verify_theorem, BoundPolicy, SweepOutcome};

fn prime(p: u64) -> Prime {
    Prime::new(p).unwrap()
}

/// xorshift64*: a fixed-seed generator so the randomized criterion replays
/// the same cases on every run and every platform.
struct Rng(u64);

impl Rng {
    fn next(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0.wrapping_mul(0x2545F4914F6CDD1D)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

fn run_criterion(failures: &mut Vec<u32>, idx: u32, name: &str, f: impl FnOnce() -> String) {
    let started = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f));
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => println!("criterion {idx}: PASS ({secs:.1}s) — {name}: {detail}"),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| payload.downcast_ref::<&str>().copied())
                .unwrap_or("panic without message");
            println!("criterion {idx}: FAIL ({secs:.1}s) — {name}: {msg}");
            failures.push(idx);
        }
    }
}

fn criterion_1_cli_n2() -> String {
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_goebel"))
        .args(["nk", "--k", "2"])
        .output()
        .expect("binary spawns");
    let wall = started.elapsed();
    assert_eq!(out.status.code(), Some(0), "exit code");
    let stdout = String::from_utf8(out.stdout).expect("utf-8");
    assert_eq!(stdout, "N_2 = 43\n", "stdout was {stdout:?}");
    assert!(wall < Duration::from_secs(1), "took {wall:?}, budget 1s");
    format!("N_2 = 43 in {:.0} ms end to end", wall.as_secs_f64() * 1e3)
}

fn criterion_2_sweep_100() -> String {
    let started = Instant::now();
    let report = sweep(2, 100, 2, BoundPolicy::default(), 0);
    let secs = started.elapsed().as_secs_f64();
    let s = &report.summary;
    assert_eq!(
        (s.exact, s.lower_bound, s.errors),
        (99, 0, 0),
        "every k must resolve exactly"
    );
    assert_eq!(s.min_n_k, Some(19), "minimum over 2..=100");
    assert!(s.argmin_ks.contains(&6), "k = 6 attains the minimum");
    assert!(secs < 30.0, "took {secs:.1}s, budget 30s");
    format!(
        "99/99 exact, min N_k = 19 at k = {:?}, {secs:.1}s",
        s.argmin_ks
    )
}

fn criterion_3_theorem_m8() -> String {
    let started = Instant::now();
    let checks = verify_theorem(8, BoundPolicy::default()).expect("default policy is valid");
    let secs = started.elapsed().as_secs_f64();
    assert_eq!(checks.len(), 8);
    let expected_k = [2u64, 2, 2, 5, 5, 25, 25, 193];
    for (check, want_k) in checks.iter().zip(expected_k) {
        let m = check.witness.m;
        assert_eq!(
            check.witness.k,
            BigUint::from(want_k),
            "smallest k ≡ 1 (mod m!/m#) for m = {m}"
        );
        assert!(
            check.verified,
            "m = {m}: outcome {:?} does not prove N_k > {m}",
            check.outcome
        );
    }
    assert!(secs < 120.0, "took {secs:.1}s, budget 120s");
    format!("m = 1..=8 all verified (largest witness k = 193), {secs:.1}s")
}

fn criterion_4_oracle_equivalence() -> String {
    let mut comparisons = 0u64;
    for k in 2..=6u64 {
        for l in 2..=6u64 {
            // n = 10 at k = l = 6 peaks near 7.3M digits; the budget must
            // cover it or the criterion is void
            let run = exact_terms(k, l, 10, 8_000_000);
            assert!(!run.status.is_truncated(), "budget too small at k={k} l={l}");
            assert_eq!(run.terms.len(), 10);
            let kb = BigUint::from(k);
            for p in [2u64, 3, 5, 7, 11, 13].map(prime) {
                for r in 1..=8u64 {
                    let trace = run_trace(&kb, l, p, r, 10).unwrap();
                    let first_fail = trace.iter().find(|st| st.is_failed()).map(|st| st.n());
                    for st in &trace {
                        let at = format!("k={k} l={l} p={p} r={r} n={}", st.n());
                        let term = &run.terms[(st.n() - 1) as usize];
                        let residue = exact_residue(term, st.ring());
                        match first_fail {
                            Some(nf) if st.n() > nf => {
                                assert!(st.is_failed(), "F is absorbing, {at}")
                            }
                            Some(nf) if st.n() == nf => assert_eq!(
                                residue, None,
                                "failure must certify p | denominator, {at}"
                            ),
                            _ => {
                                let a = st.value().expect("pre-failure state holds a value");
                                assert_eq!(residue.as_ref(), Some(a), "residue mismatch, {at}");
                            }
                        }
                        comparisons += 1;
                    }
                    // no silent miss: the first p in a denominator within the
                    // traced range must coincide with the first F
                    let horizon = trace.last().unwrap().n();
                    let exact_first = run
                        .terms
                        .iter()
                        .take(horizon as usize)
                        .find(|t| (t.value.denom().magnitude() % p.get()).is_zero())
                        .map(|t| t.n);
                    assert_eq!(
                        first_fail, exact_first,
                        "first-failure mismatch at k={k} l={l} p={p} r={r}"
                    );
                }
            }
        }
    }
    format!("{comparisons} state comparisons across k,l ∈ 2..=6, p ≤ 13, r ≤ 8, zero mismatches")
}

fn criterion_5_periodicity() -> String {
    // all prime powers p^r ≤ 3^6
    let mut rings = Vec::new();
    for p in primes_up_to(729) {
        let mut m = p;
        let mut r = 1u64;
        loop {
            rings.push((p, r));
            if m > 729 / p {
                break;
            }
            m *= p;
            r += 1;
        }
    }
    let mut rng = Rng(0x9E37_79B9_7F4A_7C15);
    for case in 0..200u32 {
        let (p, r) = rings[rng.below(rings.len() as u64) as usize];
        let phi = euler_phi_prime_power(prime(p), r)
            .unwrap()
            .to_u64()
            .expect("φ(p^r) ≤ 729 fits");
        let k = r + 2 + rng.below(3000);
        let cycles = 1 + rng.below(3);
        let l = 2 + rng.below(300);
        let shifted = BigUint::from(k + cycles * phi);
        let base = run_trace(&BigUint::from(k), l, prime(p), r, 60).unwrap();
        let moved = run_trace(&shifted, l, prime(p), r, 60).unwrap();
        assert_eq!(
            base, moved,
            "case {case}: period break at p={p} r={r} k={k} +{cycles}·φ l={l}"
        );
    }
    format!(
        "200 randomized cases over {} rings (p^r ≤ 729), shifts by up to 3·φ(p^r) leave traces identical",
        rings.len()
    )
}

fn criterion_6_closed_forms() -> String {
    let mut checks = 0u32;
    for p in [2u64, 3, 5, 7, 11, 13] {
        for r in 1..=6u64 {
            assert!(
                closed_form_check_kp(prime(p), r, 2, 200).unwrap(),
                "closed form broke at p={p} r={r} l=2"
            );
            // the shapes behind the check, spelled out: at k = k_p and l = 2
            // the even-prime states are 1 from n = 2 on, odd-prime states
            // stay 2 throughout
            let kp = euler_phi_prime_power(prime(p), r).unwrap() + 1u32;
            for st in run_trace(&kp, 2, prime(p), r, 200).unwrap() {
                let expected = if p == 2 && st.n() >= 2 { 1u64 } else { 2 };
                assert_eq!(
                    st.value(),
                    Some(&st.ring().reduce_u64(expected)),
                    "p={p} r={r} n={}",
                    st.n()
                );
            }
            checks += 1;
        }
    }
    // both branches of the form, including l with p | l (skip ν_p(l) > r
    // where the branch point lies beyond the precision horizon)
    for p in [3u64, 5] {
        for r in 1..=6u64 {
            for l in 2..=12u64 {
                if padic_valuation(l, prime(p)).unwrap() > r {
                    continue;
                }
                assert!(
                    closed_form_check_kp(prime(p), r, l, 200).unwrap(),
                    "closed form broke at p={p} r={r} l={l}"
                );
                checks += 1;
            }
        }
    }
    format!("{checks} (p, r, l) combinations match the k_p = φ(p^r)+1 closed form")
}

fn criterion_7_sweep_10k() -> String {
    let started = Instant::now();
    let report = sweep(2, 10_000, 2, BoundPolicy::default(), 0);
    let secs = started.elapsed().as_secs_f64();
    let unresolved: Vec<u64> = report
        .records
        .iter()
        .filter(|rec| matches!(rec.outcome, SweepOutcome::LowerBound { .. }))
        .map(|rec| rec.k)
        .collect();
    assert!(unresolved.is_empty(), "lower bounds at k = {unresolved:?}");
    let s = &report.summary;
    assert_eq!((s.exact, s.errors), (9_999, 0));
    let prime_fraction = s.prime_fraction.expect("exact outcomes exist");
    assert!(secs < 600.0, "took {secs:.1}s, budget 600s");
    format!(
        "9999/9999 exact, min N_k = {}, prime N_k fraction {prime_fraction:.4}, {secs:.1}s",
        s.min_n_k.unwrap()
    )
}

fn criterion_8_golden_terms() -> String {
    let run = exact_terms(2, 2, 8, 1_000);
    assert!(run.terms.iter().all(|t| t.is_integer()));
    let values: Vec<String> = run.terms.iter().map(|t| t.value.to_string()).collect();
    assert_eq!(values, ["2", "3", "5", "10", "28", "154", "3520", "1551880"]);

    let run = exact_terms(3, 2, 4, 1_000);
    assert!(run.terms.iter().all(|t| t.is_integer()));
    let values: Vec<String> = run.terms.iter().map(|t| t.value.to_string()).collect();
    assert_eq!(values, ["2", "5", "45", "22815"]);
    "g_2(1..=8) and g_3(1..=4) match the hand-computed integers".to_string()
}

#[test]
fn acceptance() {
    let mut failures = Vec::new();
    let mut gate = |idx, name, f: fn() -> String| run_criterion(&mut failures, idx, name, f);
    gate(1, "CLI resolves N_2 within a second", criterion_1_cli_n2);
    gate(2, "sweep k = 2..=100 attains min N_k = 19", criterion_2_sweep_100);
    gate(3, "unboundedness witnesses verified to m = 8", criterion_3_theorem_m8);
    gate(4, "modular pipeline matches the exact oracle", criterion_4_oracle_equivalence);
    gate(5, "traces are periodic in k with period φ(p^r)", criterion_5_periodicity);
    gate(6, "k_p closed form holds on both branches", criterion_6_closed_forms);
    gate(7, "sweep k = 2..=10000 fully resolves", criterion_7_sweep_10k);
    gate(8, "golden small-index terms", criterion_8_golden_terms);
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
