//! Certification and safe online learning of policy safety on finite MDPs.
//!
//! The state space is partitioned into a target set E, a forbidden set U and
//! a taboo (living) set H. The safety function S_π(x) is the probability,
//! starting from x and following π, of hitting U before E; π is p-safe when
//! max_{x∈H} S_π(x) ≤ p.
//!
//! The crate provides:
//!
//! - an exact oracle ([`solve_safety`]) via the dense hitting-probability
//!   linear system, with a Monte-Carlo cross-check ([`monte_carlo_safety`]);
//! - p-safety certification ([`certify_p_safety`]), proxy-set validation
//!   ([`validate_proxy`]) and baseline certification ([`certify_baseline`]);
//! - a safe episodic TD(0) learner ([`run_algorithm1`]) that estimates the
//!   target policy's safety function off-policy with per-decision importance
//!   sampling while only ever behaving like the certified behavior policy;
//! - text formats for models and policies, CSV reporting, seeded random
//!   instance generation and built-in benchmark fixtures.

pub mod error;
pub mod exact;
pub mod fixtures;
pub mod format;
pub mod generate;
pub mod learner;
pub mod linsolve;
pub mod mdp;
pub mod policy;
pub mod report;

pub use error::{Error, Result};
pub use exact::{
    certify_baseline, certify_p_safety, certify_termination, kappa, monte_carlo_safety,
    solve_safety, validate_proxy, validate_proxy_under_policy, BaselineCertificate, KappaTable,
    McEstimate, ProxyCertificate, ProxyWitness, SafetyVector, SafetyVerdict, MAX_TABOO_DENSE,
    RESIDUAL_TOLERANCE,
};
pub use fixtures::{
    gambler_buffer, twelve_state, Fixture, GAMBLER_BUFFER_S_BEHAVIOR, GAMBLER_BUFFER_S_TARGET,
    TWELVE_STATE_S_BEHAVIOR, TWELVE_STATE_S_TARGET,
};
pub use format::{fmt17, load_mdp, load_policy, serialize_mdp, serialize_policy};
pub use generate::{generate_instance, GeneratedInstance, RandomMdpSpec};
pub use learner::{
    convergence_report, run_algorithm1, run_on_policy, EpisodeRecord, InitialEstimate,
    LearnerConfig, LearningRateSchedule, ReportRow, RunTrace, Snapshot, TerminalKind,
};
pub use mdp::{ActionId, KernelRow, Mdp, Partition, ProxySet, Role, StateId, ROW_SUM_TOLERANCE};
pub use policy::{compose_behavior_policy, coverage_check, PolicyKind, PolicyTable};
pub use report::{
    read_solve_csv, read_trace_csv, summarize_trace, write_solve_csv, write_trace_csv, TraceRow,
    TraceSummary, SOLVE_HEADER, TRACE_HEADER,
};
