//! `goebel`: exact terms, N_k determination, theorem witnesses, and k-sweeps.
//!
//! Exit codes: 0 success, 2 usage error, 3 result is only a lower bound,
//! 4 theorem verification failure, 1 anything else.

use std::collections::BTreeMap;
use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num::BigUint;
use serde::Serialize;
use serde_json::{json, Value};

use goebel_core::exact::{self, ExactStatus, DEFAULT_DIGIT_BUDGET};
use goebel_core::solver::{self, BoundPolicy, NkOutcome, SweepOutcome, SweepReport};

const SCHEMA_VERSION: &str = "1";
const DEFAULT_MAX_BOUND: u64 = 4096;
const MAX_BOUND_ENV: &str = "GOEBEL_MAX_BOUND";

#[derive(Parser)]
#[command(
    name = "goebel",
    version,
    about = "k-Göbel sequences: exact terms, first non-integer index, witnesses, sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print exact terms g(1..n) with digit counts
    Term(TermArgs),
    /// Determine N_k, the first index where the sequence leaves the integers
    Nk(NkArgs),
    /// Sweep a k-range; per-k rows on stdout, a summary line on stderr
    Scan(ScanArgs),
    /// Construct the witness exponent k ≡ 1 (mod m!/m#) for a given m
    Construct(ConstructArgs),
    /// Verify N_k > m for every witness with m ≤ m-max
    VerifyTheorem(VerifyTheoremArgs),
}

fn parse_big_k(s: &str) -> Result<BigUint, String> {
    let k: BigUint = s
        .parse()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))?;
    if k < BigUint::from(2u32) {
        return Err("k must be >= 2".into());
    }
    Ok(k)
}

#[derive(Args)]
struct TermArgs {
    /// Recursion exponent (k >= 2)
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    k: u64,
    /// Initial value g(1)
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..))]
    l: u64,
    /// Number of terms to print
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Stop before any numerator exceeds this many decimal digits
    #[arg(long, default_value_t = DEFAULT_DIGIT_BUDGET, value_parser = clap::value_parser!(u64).range(1..))]
    max_digits: u64,
    /// Emit a JSON envelope instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct NkArgs {
    /// Recursion exponent (k >= 2, arbitrary size)
    #[arg(long, value_parser = parse_big_k)]
    k: BigUint,
    /// Initial value g(1)
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..))]
    l: u64,
    /// Deepening cap (wins over GOEBEL_MAX_BOUND; default 4096)
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    max_bound: Option<u64>,
    /// Emit a JSON envelope instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ScanFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct ScanArgs {
    /// First k of the range (inclusive)
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    k_from: u64,
    /// Last k of the range (inclusive)
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    k_to: u64,
    /// Initial value g(1)
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..))]
    l: u64,
    /// Worker threads (0 = all cores, 1 = sequential)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Row format written to stdout
    #[arg(long, value_enum, default_value_t = ScanFormat::Csv)]
    out: ScanFormat,
    /// Deepening cap (wins over GOEBEL_MAX_BOUND; default 4096)
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    max_bound: Option<u64>,
}

#[derive(Args)]
struct ConstructArgs {
    /// Theorem parameter: the witness guarantees N_k > m
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    m: u64,
    /// Emit a JSON envelope instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyTheoremArgs {
    /// Verify witnesses for every m up to this value
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    m_max: u64,
    /// Deepening cap (wins over GOEBEL_MAX_BOUND; default 4096)
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    max_bound: Option<u64>,
    /// Emit a JSON envelope instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Serialize)]
struct Envelope {
    schema_version: &'static str,
    command: &'static str,
    parameters: BTreeMap<String, String>,
    results: Value,
    timings: BTreeMap<String, f64>,
}

fn emit_envelope(
    command: &'static str,
    parameters: BTreeMap<String, String>,
    results: Value,
    timings: BTreeMap<String, f64>,
) {
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        parameters,
        results,
        timings,
    };
    let rendered = serde_json::to_string_pretty(&envelope).expect("serializable envelope");
    println!("{rendered}");
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

/// --max-bound wins; otherwise GOEBEL_MAX_BOUND; otherwise the default cap.
fn resolve_max_bound(flag: Option<u64>) -> Result<u64, String> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match std::env::var(MAX_BOUND_ENV) {
        Err(_) => Ok(DEFAULT_MAX_BOUND),
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .ok()
            .filter(|&v| v >= 2)
            .ok_or(format!("{MAX_BOUND_ENV} must be an integer >= 2, got `{raw}`")),
    }
}

fn policy_for(max_bound: u64) -> Result<BoundPolicy, String> {
    BoundPolicy::with_max_bound(max_bound).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Term(args) => cmd_term(args),
        Command::Nk(args) => cmd_nk(args),
        Command::Scan(args) => cmd_scan(args),
        Command::Construct(args) => cmd_construct(args),
        Command::VerifyTheorem(args) => cmd_verify_theorem(args),
    }
}

fn cmd_term(args: TermArgs) -> ExitCode {
    let started = Instant::now();
    let run = exact::exact_terms(args.k, args.l, args.n, args.max_digits);
    let solve_secs = started.elapsed().as_secs_f64();

    if args.json {
        let terms: Vec<Value> = run
            .terms
            .iter()
            .map(|t| {
                json!({
                    "n": t.n,
                    "value": t.value.to_string(),
                    "digit_count": t.digit_count,
                    "is_integer": t.is_integer(),
                })
            })
            .collect();
        let truncated_at = match run.status {
            ExactStatus::Completed => Value::Null,
            ExactStatus::DigitBudgetReached { at_n } => json!(at_n),
        };
        emit_envelope(
            "term",
            params([
                ("k", args.k.to_string()),
                ("l", args.l.to_string()),
                ("n", args.n.to_string()),
                ("max_digits", args.max_digits.to_string()),
            ]),
            json!({
                "terms": terms,
                "truncated": run.status.is_truncated(),
                "truncated_at": truncated_at,
            }),
            timings(solve_secs, started),
        );
    } else {
        for t in &run.terms {
            let digits = if t.digit_count == 1 { "digit" } else { "digits" };
            println!("g({}) = {} ({} {digits})", t.n, t.value, t.digit_count);
        }
        if let ExactStatus::DigitBudgetReached { at_n } = run.status {
            eprintln!(
                "stopped before n = {at_n}: numerator would exceed {} digits",
                args.max_digits
            );
        }
    }
    ExitCode::SUCCESS
}

fn cmd_nk(args: NkArgs) -> ExitCode {
    let max_bound = match resolve_max_bound(args.max_bound) {
        Ok(v) => v,
        Err(msg) => return usage_error(&msg),
    };
    let policy = match policy_for(max_bound) {
        Ok(p) => p,
        Err(msg) => return usage_error(&msg),
    };
    let started = Instant::now();
    let result = match solver::compute_nk(&args.k, args.l, policy) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let solve_secs = started.elapsed().as_secs_f64();

    let (outcome_name, n_k, witness, lower) = match result.outcome {
        NkOutcome::Exact { n_k, witness_prime } => {
            ("exact", Some(n_k), Some(witness_prime.get()), None)
        }
        NkOutcome::LowerBound { bound } => ("lower_bound", None, None, Some(bound)),
    };

    if args.json {
        emit_envelope(
            "nk",
            params([
                ("k", args.k.to_string()),
                ("l", args.l.to_string()),
                ("max_bound", max_bound.to_string()),
            ]),
            json!({
                "k": args.k.to_string(),
                "l": args.l,
                "outcome": outcome_name,
                "n_k": n_k,
                "witness_prime": witness,
                "lower_bound": lower,
                "bound_used": result.bound_used,
            }),
            timings(solve_secs, started),
        );
    } else {
        match result.outcome {
            NkOutcome::Exact { n_k, witness_prime } => {
                println!("N_{} = {}", args.k, n_k);
                eprintln!(
                    "witness prime {witness_prime}, search bound {}, {:.3}s",
                    result.bound_used, solve_secs
                );
            }
            NkOutcome::LowerBound { bound } => {
                println!("N_{} > {}", args.k, bound);
                eprintln!(
                    "no failure for any prime <= {} at depth {}; raise --max-bound for more",
                    bound, bound
                );
            }
        }
    }
    match result.outcome {
        NkOutcome::Exact { .. } => ExitCode::SUCCESS,
        NkOutcome::LowerBound { .. } => ExitCode::from(3),
    }
}

fn scan_rows_csv(report: &SweepReport, out: &mut dyn Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "n_k", "witness_prime", "n_k_is_prime", "cache_hit"])?;
    for rec in &report.records {
        let k = rec.k.to_string();
        let hit = rec.cache_hit.to_string();
        match &rec.outcome {
            SweepOutcome::Exact {
                n_k,
                witness_prime,
                n_k_is_prime,
            } => w.write_record([
                k,
                n_k.to_string(),
                witness_prime.to_string(),
                n_k_is_prime.to_string(),
                hit,
            ])?,
            SweepOutcome::LowerBound { bound } => {
                w.write_record([k, format!(">{bound}"), String::new(), String::new(), hit])?
            }
            SweepOutcome::Error { message } => {
                w.write_record([k, format!("error: {message}"), String::new(), String::new(), hit])?
            }
        }
    }
    w.flush()
}

fn scan_results_json(report: &SweepReport) -> Value {
    let records: Vec<Value> = report
        .records
        .iter()
        .map(|rec| {
            let (n_k, witness, is_prime, error): (Value, Value, Value, Value) =
                match &rec.outcome {
                    SweepOutcome::Exact {
                        n_k,
                        witness_prime,
                        n_k_is_prime,
                    } => (json!(n_k), json!(witness_prime), json!(n_k_is_prime), Value::Null),
                    SweepOutcome::LowerBound { bound } => {
                        (json!(format!(">{bound}")), Value::Null, Value::Null, Value::Null)
                    }
                    SweepOutcome::Error { message } => {
                        (Value::Null, Value::Null, Value::Null, json!(message))
                    }
                };
            json!({
                "k": rec.k,
                "n_k": n_k,
                "witness_prime": witness,
                "n_k_is_prime": is_prime,
                "cache_hit": rec.cache_hit,
                "error": error,
            })
        })
        .collect();
    let s = &report.summary;
    json!({
        "records": records,
        "summary": {
            "total": s.total,
            "exact": s.exact,
            "lower_bound": s.lower_bound,
            "errors": s.errors,
            "min_n_k": s.min_n_k,
            "argmin_ks": s.argmin_ks,
            "prime_fraction": s.prime_fraction,
            "cache_hits": s.cache_hits,
            "cache_misses": s.cache_misses,
        }
    })
}

fn cmd_scan(args: ScanArgs) -> ExitCode {
    if args.k_from > args.k_to {
        return usage_error(&format!(
            "empty range: --k-from {} exceeds --k-to {}",
            args.k_from, args.k_to
        ));
    }
    let max_bound = match resolve_max_bound(args.max_bound) {
        Ok(v) => v,
        Err(msg) => return usage_error(&msg),
    };
    let policy = match policy_for(max_bound) {
        Ok(p) => p,
        Err(msg) => return usage_error(&msg),
    };
    let started = Instant::now();
    let report = solver::sweep(args.k_from, args.k_to, args.l, policy, args.jobs);
    let solve_secs = started.elapsed().as_secs_f64();

    match args.out {
        ScanFormat::Csv => {
            let mut stdout = std::io::stdout().lock();
            if let Err(e) = scan_rows_csv(&report, &mut stdout) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
        ScanFormat::Json => emit_envelope(
            "scan",
            params([
                ("k_from", args.k_from.to_string()),
                ("k_to", args.k_to.to_string()),
                ("l", args.l.to_string()),
                ("jobs", args.jobs.to_string()),
                ("out", "json".to_string()),
                ("max_bound", max_bound.to_string()),
            ]),
            scan_results_json(&report),
            timings(solve_secs, started),
        ),
    }

    let s = &report.summary;
    let min = s
        .min_n_k
        .map(|m| m.to_string())
        .unwrap_or_else(|| "-".into());
    let argmin = if s.argmin_ks.is_empty() {
        "-".to_string()
    } else {
        s.argmin_ks
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let fraction = s
        .prime_fraction
        .map(|f| format!("{f:.4}"))
        .unwrap_or_else(|| "-".into());
    eprintln!(
        "scan k = {}..={} (l = {}): {} exact, {} lower bounds, {} errors; \
         min N_k = {min} at k = {argmin}; prime fraction {fraction}; \
         cache {}/{} hits/misses; {solve_secs:.3}s",
        args.k_from, args.k_to, args.l, s.exact, s.lower_bound, s.errors,
        s.cache_hits, s.cache_misses
    );

    if s.exact == 0 && s.lower_bound == 0 {
        // nothing succeeded
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_construct(args: ConstructArgs) -> ExitCode {
    let started = Instant::now();
    let witness = solver::construct_k_for_m(args.m);
    let solve_secs = started.elapsed().as_secs_f64();
    if args.json {
        emit_envelope(
            "construct",
            params([("m", args.m.to_string())]),
            json!({
                "m": witness.m,
                "modulus": witness.modulus.to_string(),
                "k": witness.k.to_string(),
            }),
            timings(solve_secs, started),
        );
    } else {
        println!(
            "m = {}: modulus {}, k = {}",
            witness.m, witness.modulus, witness.k
        );
    }
    ExitCode::SUCCESS
}

fn cmd_verify_theorem(args: VerifyTheoremArgs) -> ExitCode {
    let max_bound = match resolve_max_bound(args.max_bound) {
        Ok(v) => v,
        Err(msg) => return usage_error(&msg),
    };
    let policy = match policy_for(max_bound) {
        Ok(p) => p,
        Err(msg) => return usage_error(&msg),
    };
    let started = Instant::now();
    let checks = match solver::verify_theorem(args.m_max, policy) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let solve_secs = started.elapsed().as_secs_f64();
    let all_verified = checks.iter().all(|c| c.verified);

    if args.json {
        let rows: Vec<Value> = checks
            .iter()
            .map(|c| {
                let (n_k, lower) = match c.outcome {
                    NkOutcome::Exact { n_k, .. } => (json!(n_k), Value::Null),
                    NkOutcome::LowerBound { bound } => (Value::Null, json!(bound)),
                };
                json!({
                    "m": c.witness.m,
                    "modulus": c.witness.modulus.to_string(),
                    "k": c.witness.k.to_string(),
                    "n_k": n_k,
                    "lower_bound": lower,
                    "verified": c.verified,
                })
            })
            .collect();
        emit_envelope(
            "verify-theorem",
            params([
                ("m_max", args.m_max.to_string()),
                ("max_bound", max_bound.to_string()),
            ]),
            json!({ "checks": rows, "all_verified": all_verified }),
            timings(solve_secs, started),
        );
    } else {
        for c in &checks {
            let outcome = match c.outcome {
                NkOutcome::Exact { n_k, .. } => format!("N_k = {n_k}"),
                NkOutcome::LowerBound { bound } => format!("N_k > {bound}"),
            };
            let verdict = if c.verified { "verified" } else { "FAILED" };
            println!(
                "m = {}: k = {} (modulus {}), {outcome} — {verdict}",
                c.witness.m, c.witness.k, c.witness.modulus
            );
        }
    }
    if all_verified {
        ExitCode::SUCCESS
    } else {
        eprintln!("verification failed for at least one m");
        ExitCode::from(4)
    }
}

fn params<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

fn timings(solve_secs: f64, started: Instant) -> BTreeMap<String, f64> {
    let mut map = BTreeMap::new();
    map.insert("solve".to_string(), solve_secs);
    map.insert("total".to_string(), started.elapsed().as_secs_f64());
    map
}
