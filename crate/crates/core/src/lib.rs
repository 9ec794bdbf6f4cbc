//! Core engine for k-Göbel and (k,l)-Göbel sequences.
//!
//! The sequence is defined by `g(1) = l` and `n·g(n) = (n-1)·g(n-1) + g(n-1)^k`.
//! Terms grow doubly exponentially, so the first non-integer index `N_k` is
//! found without ever materializing the terms: for each prime `p` the
//! recursion is simulated over shrinking prime-power moduli (`padic`), and a
//! failed divisibility check certifies a `p` in some denominator. The exact
//! big-rational evaluator (`exact`) serves as a small-index ground-truth
//! oracle for the modular pipeline.

pub mod arith;
pub mod exact;
pub mod padic;
pub mod solver;

pub use arith::{Prime, PrimePowerModulus};
pub use exact::{ExactRun, ExactStatus, ExactTerm, FirstNonInteger};
pub use padic::{PadicTermState, RunOutcome, StopReason, TermStatus};
pub use solver::{
    BoundPolicy, NkOutcome, NkResult, RunCache, SweepOutcome, SweepRecord, SweepReport,
    SweepSummary, TheoremCheck, TheoremWitness,
};

/// Errors surfaced by the arithmetic and solver layers.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("p-adic valuation of 0 is infinite")]
    InfiniteValuation,
    #[error("r must be >= 1")]
    ZeroExponent,
    #[error("{0} is not invertible modulo the prime power")]
    NotInvertible(String),
    #[error("invalid bound policy: initial {initial}, max {max}")]
    InvalidBounds { initial: u64, max: u64 },
    #[error("step budget of {budget} exhausted after {spent} steps")]
    BudgetExhausted { budget: u64, spent: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
