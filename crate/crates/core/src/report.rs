//! CSV emission and ingestion for traces and exact solutions.
//!
//! Trace CSV: one row per (snapshot, taboo state),
//!
//! ```text
//! episode,state,S_target_est,S_behavior_est,sup_err_target,sup_err_behavior,unsafe_episode_frac
//! ```
//!
//! Solve CSV: `state,exact_safety`, one row per state in index order. All
//! decimals carry 17 significant digits so files round-trip exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exact::SafetyVector;
use crate::format::fmt17;
use crate::learner::RunTrace;
use crate::mdp::Mdp;

pub const TRACE_HEADER: &str =
    "episode,state,S_target_est,S_behavior_est,sup_err_target,sup_err_behavior,unsafe_episode_frac";
pub const SOLVE_HEADER: &str = "state,exact_safety";

/// One parsed trace-CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub episode: u64,
    pub state: String,
    pub s_target_est: f64,
    pub s_behavior_est: f64,
    pub sup_err_target: f64,
    pub sup_err_behavior: f64,
    pub unsafe_episode_frac: f64,
}

/// Renders the trace against exact oracles for the target and behavior
/// policies. Sup errors are over the taboo set at each snapshot.
pub fn write_trace_csv(
    mdp: &Mdp,
    trace: &RunTrace,
    oracle_target: &SafetyVector,
    oracle_behavior: &SafetyVector,
) -> String {
    let h = mdp.partition().taboo_states();
    let mut out = String::new();
    let _ = writeln!(out, "{TRACE_HEADER}");
    for snap in &trace.snapshots {
        let sup_t = h
            .iter()
            .map(|&x| (snap.s_target[x.0] - oracle_target.get(x)).abs())
            .fold(0.0, f64::max);
        let sup_b = h
            .iter()
            .map(|&x| (snap.s_behavior[x.0] - oracle_behavior.get(x)).abs())
            .fold(0.0, f64::max);
        for &x in &h {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                snap.episode,
                mdp.state_label(x),
                fmt17(snap.s_target[x.0]),
                fmt17(snap.s_behavior[x.0]),
                fmt17(sup_t),
                fmt17(sup_b),
                fmt17(snap.unsafe_frac)
            );
        }
    }
    out
}

fn schema_err(msg: impl Into<String>) -> Error {
    Error::CsvSchema(msg.into())
}

fn parse_field<T: std::str::FromStr>(line: usize, name: &str, tok: &str) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| schema_err(format!("line {line}: bad {name} value '{tok}'")))
}

pub fn read_trace_csv(source: &str) -> Result<Vec<TraceRow>> {
    let mut lines = source.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| schema_err("empty trace file"))?;
    if header.trim() != TRACE_HEADER {
        return Err(schema_err(format!(
            "unexpected trace header '{}'",
            header.trim()
        )));
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.trim().split(',').collect();
        if f.len() != 7 {
            return Err(schema_err(format!(
                "line {line}: expected 7 fields, got {}",
                f.len()
            )));
        }
        rows.push(TraceRow {
            episode: parse_field(line, "episode", f[0])?,
            state: f[1].to_string(),
            s_target_est: parse_field(line, "S_target_est", f[2])?,
            s_behavior_est: parse_field(line, "S_behavior_est", f[3])?,
            sup_err_target: parse_field(line, "sup_err_target", f[4])?,
            sup_err_behavior: parse_field(line, "sup_err_behavior", f[5])?,
            unsafe_episode_frac: parse_field(line, "unsafe_episode_frac", f[6])?,
        });
    }
    if rows.is_empty() {
        return Err(schema_err("trace file has no data rows"));
    }
    Ok(rows)
}

pub fn write_solve_csv(mdp: &Mdp, safety: &SafetyVector) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SOLVE_HEADER}");
    for x in mdp.states() {
        let _ = writeln!(out, "{},{}", mdp.state_label(x), fmt17(safety.get(x)));
    }
    out
}

pub fn read_solve_csv(source: &str) -> Result<Vec<(String, f64)>> {
    let mut lines = source.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| schema_err("empty solve file"))?;
    if header.trim() != SOLVE_HEADER {
        return Err(schema_err(format!(
            "unexpected solve header '{}'",
            header.trim()
        )));
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.trim().split(',').collect();
        if f.len() != 2 {
            return Err(schema_err(format!(
                "line {line}: expected 2 fields, got {}",
                f.len()
            )));
        }
        rows.push((f[0].to_string(), parse_field(line, "exact_safety", f[1])?));
    }
    Ok(rows)
}

/// Digest of a trace CSV for human-readable reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub final_episode: u64,
    pub snapshots: usize,
    pub final_sup_err_target: f64,
    pub final_sup_err_behavior: f64,
    pub final_unsafe_frac: f64,
}

pub fn summarize_trace(rows: &[TraceRow]) -> Result<TraceSummary> {
    let last = rows.last().ok_or_else(|| schema_err("no rows"))?;
    let mut episodes: Vec<u64> = rows.iter().map(|r| r.episode).collect();
    episodes.dedup();
    Ok(TraceSummary {
        final_episode: last.episode,
        snapshots: episodes.len(),
        final_sup_err_target: last.sup_err_target,
        final_sup_err_behavior: last.sup_err_behavior,
        final_unsafe_frac: last.unsafe_episode_frac,
    })
}
