//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while loading, validating, certifying or
/// learning. Parse-shaped errors carry the offending line; domain errors
/// carry state/action labels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown state label '{0}'")]
    UnknownState(String),

    #[error("unknown action label '{0}'")]
    UnknownAction(String),

    #[error("target set E is empty")]
    EmptyTarget,

    #[error("forbidden set U is empty")]
    EmptyForbidden,

    #[error("state '{0}' assigned to more than one partition class")]
    OverlappingPartition(String),

    #[error("negative probability {prob} for ({state}, {action})")]
    NegativeProbability {
        state: String,
        action: String,
        prob: f64,
    },

    #[error("row ({state}, {action}) sums to {sum}, not 1 (tolerance 1e-9)")]
    NonStochasticRow {
        state: String,
        action: String,
        sum: f64,
    },

    #[error("policy distribution at state '{state}' sums to {sum}, not 1 (tolerance 1e-9)")]
    NonStochasticPolicy { state: String, sum: f64 },

    #[error("policy is missing a distribution for domain state '{0}'")]
    MissingPolicyState(String),

    #[error("state '{0}' is outside the requested policy domain")]
    StateOutsideDomain(String),

    #[error("proxy state '{0}' is not a taboo state")]
    ProxyOutsideTaboo(String),

    #[error("policy domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("coverage violation at proxy state '{state}': target puts {target_prob} on action '{action}' but baseline puts 0")]
    CoverageViolation {
        state: String,
        action: String,
        target_prob: f64,
    },

    #[error("zero importance-sampling denominator at ('{state}', '{action}')")]
    ZeroImportanceDenominator { state: String, action: String },

    #[error("termination not certified: taboo state '{0}' cannot reach E ∪ U under the policy")]
    TerminationUncertified(String),

    #[error("linear system is singular (hitting time not almost-surely finite?)")]
    SingularSystem,

    #[error("linear solve residual {0:e} exceeds 1e-10")]
    ResidualTooLarge(f64),

    #[error("|H| = {0} exceeds the dense-solver cap of 10000")]
    TabooSetTooLarge(usize),

    #[error("learner config invalid: {0}")]
    InvalidConfig(String),

    #[error("baseline not certified safe at p = {p}: max safety over proxy set is {bound} at state '{state}'")]
    BaselineUnsafe { p: f64, bound: f64, state: String },

    #[error("proxy certificate failed: {0}")]
    ProxyInvalid(String),

    #[error("instance generation exhausted {attempts} attempts (n_taboo={n_taboo}, n_actions={n_actions}, p={p})")]
    GenerationExhausted {
        attempts: usize,
        n_taboo: usize,
        n_actions: usize,
        p: f64,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv schema mismatch: {0}")]
    CsvSchema(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit-code contract for the CLI: 2 for malformed input, 1 for
    /// domain/validation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Io(_) | Error::CsvSchema(_) => 2,
            _ => 1,
        }
    }
}
