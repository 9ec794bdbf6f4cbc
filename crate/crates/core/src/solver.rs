//! N_k determination by iterative deepening over primes, theorem-witness
//! construction/verification, and cached k-sweeps.
//!
//! Soundness of the search: a denominator appearing at index n can only
//! contain primes ≤ n, and a p-run at precision r = ν_p(M!) detects the
//! first loss of p-integrality anywhere in n ≤ M. So scanning all p ≤ M to
//! depth M either finds N_k exactly (the minimal failure index) or proves
//! N_k > M.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use num::BigUint;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::arith::{
    euler_phi_prime_power, factorial_over_primorial, factorial_valuation, is_prime_u64, primes_in,
    Prime,
};
use crate::padic::{run_essentials, StopReason};
use crate::{Error, Result};

/// Deepening schedule plus an optional step budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundPolicy {
    /// First search bound M.
    pub initial_bound: u64,
    /// Deepening cap; reaching it without a failure yields LowerBound.
    pub max_bound: u64,
    /// Cap on total padic steps across all deepening levels. Exceeding it is
    /// an error, reported distinctly from a LowerBound outcome.
    pub step_budget: Option<u64>,
}

impl Default for BoundPolicy {
    fn default() -> Self {
        BoundPolicy {
            initial_bound: 128,
            max_bound: 4096,
            step_budget: None,
        }
    }
}

impl BoundPolicy {
    pub fn new(initial_bound: u64, max_bound: u64) -> Result<Self> {
        if initial_bound < 2 || initial_bound > max_bound {
            return Err(Error::InvalidBounds {
                initial: initial_bound,
                max: max_bound,
            });
        }
        Ok(BoundPolicy {
            initial_bound,
            max_bound,
            step_budget: None,
        })
    }

    /// Default schedule clamped to a cap (the cap wins below 128).
    pub fn with_max_bound(max_bound: u64) -> Result<Self> {
        let default = BoundPolicy::default();
        BoundPolicy::new(default.initial_bound.min(max_bound), max_bound)
    }

    pub fn with_step_budget(mut self, budget: u64) -> Self {
        self.step_budget = Some(budget);
        self
    }
}

/// Exact value of N_k with its certifying prime, or a proven lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NkOutcome {
    Exact { n_k: u64, witness_prime: Prime },
    LowerBound { bound: u64 },
}

#[derive(Debug, Clone)]
pub struct NkResult {
    pub k: BigUint,
    pub l: u64,
    pub outcome: NkOutcome,
    /// Deepening level at which the search concluded.
    pub bound_used: u64,
    pub timing: Duration,
}

/// The unboundedness witness for a given m: the smallest k ≥ 2 with
/// k ≡ 1 (mod m!/m#), which the theorem guarantees has N_k > m.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoremWitness {
    pub m: u64,
    pub modulus: BigUint,
    pub k: BigUint,
}

#[derive(Debug, Clone)]
pub struct TheoremCheck {
    pub witness: TheoremWitness,
    pub outcome: NkOutcome,
    /// Whether the outcome proves N_k > m.
    pub verified: bool,
}

/// Per-k sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub k: u64,
    pub outcome: SweepOutcome,
    /// Whether this k shares at least one per-prime run with a smaller k in
    /// the range. Derived from the deepening schedule, not from live cache
    /// timing, so it is identical no matter how workers interleave.
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutcome {
    Exact {
        n_k: u64,
        witness_prime: u64,
        n_k_is_prime: bool,
    },
    LowerBound {
        bound: u64,
    },
    /// Step budget exceeded for this k; the sweep continues.
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub total: usize,
    pub exact: usize,
    pub lower_bound: usize,
    pub errors: usize,
    pub min_n_k: Option<u64>,
    /// Every k in the range attaining min_n_k, ascending.
    pub argmin_ks: Vec<u64>,
    /// Fraction of exact outcomes whose N_k is prime.
    pub prime_fraction: Option<f64>,
    /// Schedule-independent lookup counts (ascending-k replay), so summaries
    /// compare equal across worker interleavings.
    pub cache_hits: u64,
    pub cache_misses: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    pub summary: SweepSummary,
}

/// Memoized per-prime run outcomes, keyed by the residue class of k modulo
/// φ(p^r) (valid once k ≥ r; smaller k are keyed exactly). Shared across
/// sweep workers; duplicate computation is allowed, divergent results are
/// not (checked on insert, plus a sampled audit of hits).
pub struct RunCache {
    map: Mutex<HashMap<CacheKey, CachedRun>>,
    hits: AtomicU64,
    misses: AtomicU64,
    audit_every: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    p: u64,
    bound: u64,
    l: u64,
    class: KClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum KClass {
    /// k < r: periodicity does not apply; key by k itself.
    Verbatim(BigUint),
    /// k ≥ r: key by k mod φ(p^r).
    Residue(BigUint),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct CachedRun {
    first_failure: Option<u64>,
    stop_reason: StopReason,
}

impl Default for RunCache {
    fn default() -> Self {
        RunCache::new()
    }
}

impl RunCache {
    /// Cache with a 1-in-100 hit audit (each sampled hit is recomputed from
    /// scratch and compared).
    pub fn new() -> Self {
        RunCache::with_audit_every(Some(100))
    }

    pub fn without_audit() -> Self {
        RunCache::with_audit_every(None)
    }

    /// Audit every nth hit; None disables auditing.
    pub fn with_audit_every(audit_every: Option<u64>) -> Self {
        if let Some(n) = audit_every {
            assert!(n >= 1);
        }
        RunCache {
            map: Mutex::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            audit_every,
        }
    }

    /// (hits, misses) so far.
    pub fn stats(&self) -> (u64, u64) {
        (
            self.hits.load(Ordering::Relaxed),
            self.misses.load(Ordering::Relaxed),
        )
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_or_compute<F: FnOnce() -> CachedRun>(&self, key: CacheKey, compute: F) -> (CachedRun, bool) {
        let cached = self.map.lock().expect("cache lock").get(&key).cloned();
        if let Some(found) = cached {
            let hits = self.hits.fetch_add(1, Ordering::Relaxed) + 1;
            if self.audit_every.is_some_and(|n| hits % n == 0) {
                let fresh = compute();
                assert_eq!(
                    fresh, found,
                    "cache audit divergence for {key:?}: recomputation disagrees"
                );
            }
            return (found, true);
        }
        let value = compute();
        self.misses.fetch_add(1, Ordering::Relaxed);
        let mut map = self.map.lock().expect("cache lock");
        match map.get(&key) {
            Some(prev) => assert_eq!(prev, &value, "divergent results raced into the cache"),
            None => {
                map.insert(key, value.clone());
            }
        }
        (value, false)
    }
}

fn cache_key(k: &BigUint, l: u64, p: Prime, r: u64, bound: u64) -> CacheKey {
    let class = if *k < BigUint::from(r) {
        KClass::Verbatim(k.clone())
    } else {
        let phi = euler_phi_prime_power(p, r).expect("r >= 1");
        KClass::Residue(k % phi)
    };
    CacheKey {
        p: p.get(),
        bound,
        l,
        class,
    }
}

/// One prime's run at deepening level `bound`, through the cache if given.
/// Returns the outcome essentials and whether it was a cache hit.
fn prime_run(
    k: &BigUint,
    l: u64,
    p: Prime,
    bound: u64,
    cache: Option<&RunCache>,
) -> (CachedRun, bool) {
    let r = factorial_valuation(bound, p);
    debug_assert!(r >= 1, "p <= bound implies at least one digit");
    let compute = || {
        let out = run_essentials(k, l, p, r, bound).expect("r >= 1");
        // r = ν_p(bound!) puts the horizon at bound or past it (exactly at
        // bound when p | bound+1, labeled exhausted), so depth is never lost
        debug_assert!(
            out.reached == bound || out.stop_reason == StopReason::Failed,
            "no failure, yet stopped at {} < bound {bound}",
            out.reached
        );
        CachedRun {
            first_failure: out.first_failure,
            stop_reason: out.stop_reason,
        }
    };
    match cache {
        None => (compute(), false),
        Some(c) => c.get_or_compute(cache_key(k, l, p, r, bound), compute),
    }
}

fn map_primes<T, F>(primes: &[Prime], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Prime) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        primes.par_iter().map(|&p| f(p)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        primes.iter().map(|&p| f(p)).collect()
    }
}

/// The deepening schedule: initial_bound, doubling, clamped at max_bound.
fn levels(policy: &BoundPolicy) -> Vec<u64> {
    let mut out = vec![policy.initial_bound];
    let mut m = policy.initial_bound;
    while m < policy.max_bound {
        m = (m * 2).min(policy.max_bound);
        out.push(m);
    }
    out
}

/// Iterative deepening: search bound M runs every prime p ≤ M at precision
/// ν_p(M!) to depth M, doubling M up to the cap. The minimal failure index
/// is N_k (ties broken by smallest prime); no failure anywhere ≤ cap proves
/// N_k > cap.
pub fn compute_nk(k: &BigUint, l: u64, policy: BoundPolicy) -> Result<NkResult> {
    compute_nk_with_cache(k, l, policy, None).map(|(result, _)| result)
}

/// As [`compute_nk`], optionally memoizing per-prime runs. The flag reports
/// whether any lookup hit the cache.
pub fn compute_nk_with_cache(
    k: &BigUint,
    l: u64,
    policy: BoundPolicy,
    cache: Option<&RunCache>,
) -> Result<(NkResult, bool)> {
    assert!(*k >= BigUint::from(2u32), "k must be >= 2");
    assert!(l >= 2, "l must be >= 2");
    if policy.initial_bound < 2 || policy.initial_bound > policy.max_bound {
        return Err(Error::InvalidBounds {
            initial: policy.initial_bound,
            max: policy.max_bound,
        });
    }
    let started = Instant::now();
    let mut spent = 0u64;
    let mut any_hit = false;
    for bound in levels(&policy) {
        let primes = primes_in(bound);
        if let Some(budget) = policy.step_budget {
            // charge the level up front: ≤ bound − 1 steps per prime
            let planned = primes.len() as u64 * (bound - 1);
            if spent + planned > budget {
                return Err(Error::BudgetExhausted { budget, spent });
            }
            spent += planned;
        }
        let level: Vec<(Option<u64>, bool)> = map_primes(&primes, |p| {
            let (out, hit) = prime_run(k, l, p, bound, cache);
            (out.first_failure, hit)
        });
        any_hit |= level.iter().any(|&(_, hit)| hit);
        let first = primes
            .iter()
            .zip(&level)
            .filter_map(|(&p, &(failure, _))| failure.map(|n| (n, p)))
            .min_by_key(|&(n, p)| (n, p.get()));
        if let Some((n_k, witness_prime)) = first {
            let result = NkResult {
                k: k.clone(),
                l,
                outcome: NkOutcome::Exact { n_k, witness_prime },
                bound_used: bound,
                timing: started.elapsed(),
            };
            return Ok((result, any_hit));
        }
    }
    let result = NkResult {
        k: k.clone(),
        l,
        outcome: NkOutcome::LowerBound {
            bound: policy.max_bound,
        },
        bound_used: policy.max_bound,
        timing: started.elapsed(),
    };
    Ok((result, any_hit))
}

/// Witness for m: modulus m!/m#, k the smallest valid exponent.
pub fn construct_k_for_m(m: u64) -> TheoremWitness {
    assert!(m >= 1);
    let modulus = factorial_over_primorial(m);
    let k = if modulus == BigUint::from(1u32) {
        BigUint::from(2u32)
    } else {
        &modulus + 1u32
    };
    TheoremWitness { m, modulus, k }
}

/// Check N_k > m for every constructed witness with m ≤ m_max.
pub fn verify_theorem(m_max: u64, policy: BoundPolicy) -> Result<Vec<TheoremCheck>> {
    assert!(m_max >= 1);
    let mut checks = Vec::with_capacity(m_max as usize);
    for m in 1..=m_max {
        let witness = construct_k_for_m(m);
        let (result, _) = compute_nk_with_cache(&witness.k, 2, policy, None)?;
        let verified = match result.outcome {
            NkOutcome::Exact { n_k, .. } => n_k > m,
            // no failure through `bound`, so N_k > bound
            NkOutcome::LowerBound { bound } => bound > m,
        };
        checks.push(TheoremCheck {
            witness,
            outcome: result.outcome,
            verified,
        });
    }
    Ok(checks)
}

fn sweep_record(k: u64, l: u64, policy: BoundPolicy, cache: &RunCache) -> SweepRecord {
    match compute_nk_with_cache(&BigUint::from(k), l, policy, Some(cache)) {
        Ok((result, _)) => {
            let outcome = match result.outcome {
                NkOutcome::Exact { n_k, witness_prime } => SweepOutcome::Exact {
                    n_k,
                    witness_prime: witness_prime.get(),
                    n_k_is_prime: is_prime_u64(n_k),
                },
                NkOutcome::LowerBound { bound } => SweepOutcome::LowerBound { bound },
            };
            SweepRecord {
                k,
                outcome,
                cache_hit: false, // set by the canonical replay below
            }
        }
        Err(e) => SweepRecord {
            k,
            outcome: SweepOutcome::Error {
                message: e.to_string(),
            },
            cache_hit: false,
        },
    }
}

/// Deepening levels a record's computation actually executed, reconstructed
/// from the outcome (the schedule is a pure function of the policy).
fn executed_levels(record: &SweepRecord, policy: &BoundPolicy) -> Vec<u64> {
    let all = levels(policy);
    match &record.outcome {
        SweepOutcome::Exact { n_k, .. } => {
            // ran every level up to the first whose depth covers n_k
            let mut out = Vec::new();
            for m in all {
                let found = m >= *n_k;
                out.push(m);
                if found {
                    break;
                }
            }
            out
        }
        SweepOutcome::LowerBound { .. } => all,
        SweepOutcome::Error { .. } => {
            // levels fully charged before the budget refused the next one
            let budget = policy.step_budget.unwrap_or(u64::MAX);
            let mut spent = 0u64;
            let mut out = Vec::new();
            for m in all {
                let planned = primes_in(m).len() as u64 * (m - 1);
                if spent + planned > budget {
                    break;
                }
                spent += planned;
                out.push(m);
            }
            out
        }
    }
}

/// Replay the sweep in ascending-k order against a fresh key set, marking
/// each row that would have been served (even partly) from cache. This makes
/// `cache_hit` and the summary counters schedule-independent.
fn canonicalize_cache_flags(
    records: &mut [SweepRecord],
    l: u64,
    policy: &BoundPolicy,
) -> (u64, u64) {
    let mut seen: HashSet<CacheKey> = HashSet::new();
    let mut hits = 0u64;
    let mut misses = 0u64;
    for record in records.iter_mut() {
        let k = BigUint::from(record.k);
        let mut row_hit = false;
        for bound in executed_levels(record, policy) {
            for p in primes_in(bound) {
                let r = factorial_valuation(bound, p);
                if seen.insert(cache_key(&k, l, p, r, bound)) {
                    misses += 1;
                } else {
                    row_hit = true;
                    hits += 1;
                }
            }
        }
        record.cache_hit = row_hit;
    }
    (hits, misses)
}

fn summarize(records: &[SweepRecord], cache_hits: u64, cache_misses: u64) -> SweepSummary {
    let mut exact = 0usize;
    let mut lower_bound = 0usize;
    let mut errors = 0usize;
    let mut prime_count = 0usize;
    let mut min_n_k: Option<u64> = None;
    for rec in records {
        match &rec.outcome {
            SweepOutcome::Exact { n_k, n_k_is_prime, .. } => {
                exact += 1;
                prime_count += usize::from(*n_k_is_prime);
                min_n_k = Some(min_n_k.map_or(*n_k, |m| m.min(*n_k)));
            }
            SweepOutcome::LowerBound { .. } => lower_bound += 1,
            SweepOutcome::Error { .. } => errors += 1,
        }
    }
    let argmin_ks = min_n_k
        .map(|m| {
            records
                .iter()
                .filter(|rec| matches!(rec.outcome, SweepOutcome::Exact { n_k, .. } if n_k == m))
                .map(|rec| rec.k)
                .collect()
        })
        .unwrap_or_default();
    SweepSummary {
        total: records.len(),
        exact,
        lower_bound,
        errors,
        min_n_k,
        argmin_ks,
        prime_fraction: (exact > 0).then(|| prime_count as f64 / exact as f64),
        cache_hits,
        cache_misses,
    }
}

/// Sweep k over [k_from, k_to] with a shared run cache. `jobs` controls
/// worker parallelism: 0 uses all cores, 1 forces sequential execution
/// (and is the only mode without the "parallel" feature).
pub fn sweep_with_cache(
    k_from: u64,
    k_to: u64,
    l: u64,
    policy: BoundPolicy,
    jobs: usize,
    cache: &RunCache,
) -> SweepReport {
    assert!(k_from >= 2 && k_from <= k_to, "need 2 <= k_from <= k_to");
    let ks: Vec<u64> = (k_from..=k_to).collect();
    let worker = |k: &u64| sweep_record(*k, l, policy, cache);
    #[cfg(feature = "parallel")]
    let mut records: Vec<SweepRecord> = match jobs {
        1 => ks.iter().map(worker).collect(),
        0 => ks.par_iter().map(worker).collect(),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("worker pool")
            .install(|| ks.par_iter().map(worker).collect()),
    };
    #[cfg(not(feature = "parallel"))]
    let mut records: Vec<SweepRecord> = {
        let _ = jobs;
        ks.iter().map(worker).collect()
    };
    let (hits, misses) = canonicalize_cache_flags(&mut records, l, &policy);
    let summary = summarize(&records, hits, misses);
    SweepReport { records, summary }
}

/// Sweep with a fresh internal cache.
pub fn sweep(k_from: u64, k_to: u64, l: u64, policy: BoundPolicy, jobs: usize) -> SweepReport {
    sweep_with_cache(k_from, k_to, l, policy, jobs, &RunCache::new())
}
