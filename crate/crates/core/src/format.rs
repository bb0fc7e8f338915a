//! Line-oriented text formats for MDPs and policies, plus canonical
//! serialization.
//!
//! MDP documents:
//!
//! ```text
//! [states]    s1 s2 ...
//! [actions]   a1 a2 ...
//! [target]    labels...
//! [forbidden] labels...
//! [transitions]
//! <state> <action> <next-state> <prob>
//! ```
//!
//! `#` starts a comment. Omitted transition triples are zero. Policy
//! documents carry a single `[policy]` section with `<state> <action> <prob>`
//! lines. Canonical serialization prints sections in the order above, rows
//! sorted by (state, action, next-state) index and probabilities with 17
//! significant digits, so serialize → load round-trips bit-for-bit.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{Mdp, Partition, Role, StateId};
use crate::policy::{PolicyKind, PolicyTable};

/// 17 significant digits; enough to reconstruct any f64 exactly.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

struct Section {
    name: String,
    /// (line number, tokens) for every non-empty content line, plus tokens
    /// trailing the header on the same line.
    lines: Vec<(usize, Vec<String>)>,
}

fn split_sections(source: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let (name, tail) = rest
                .split_once(']')
                .ok_or_else(|| parse_err(lineno, "unterminated section header"))?;
            let mut section = Section {
                name: name.trim().to_string(),
                lines: Vec::new(),
            };
            let tail_tokens: Vec<String> =
                tail.split_whitespace().map(str::to_string).collect();
            if !tail_tokens.is_empty() {
                section.lines.push((lineno, tail_tokens));
            }
            sections.push(section);
        } else {
            let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            match sections.last_mut() {
                Some(s) => s.lines.push((lineno, tokens)),
                None => return Err(parse_err(lineno, "content before any section header")),
            }
        }
    }
    Ok(sections)
}

fn section_tokens(s: &Section) -> Vec<(usize, String)> {
    s.lines
        .iter()
        .flat_map(|(n, toks)| toks.iter().map(move |t| (*n, t.clone())))
        .collect()
}

fn parse_prob(lineno: usize, token: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| parse_err(lineno, format!("invalid probability '{token}'")))
}

/// Parses and validates an MDP document.
pub fn load_mdp(source: &str) -> Result<Mdp> {
    let sections = split_sections(source)?;
    let find = |name: &str| -> Result<&Section> {
        sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| parse_err(0, format!("missing [{name}] section")))
    };

    let state_labels: Vec<String> = section_tokens(find("states")?)
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let action_labels: Vec<String> = section_tokens(find("actions")?)
        .into_iter()
        .map(|(_, t)| t)
        .collect();

    let mut roles = vec![Role::Taboo; state_labels.len()];
    let lookup = |lineno: usize, label: &str| -> Result<usize> {
        state_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| parse_err(lineno, format!("unknown state label '{label}'")))
    };
    for (lineno, label) in section_tokens(find("target")?) {
        let i = lookup(lineno, &label)?;
        roles[i] = Role::Target;
    }
    for (lineno, label) in section_tokens(find("forbidden")?) {
        let i = lookup(lineno, &label)?;
        if roles[i] == Role::Target {
            return Err(Error::OverlappingPartition(label));
        }
        roles[i] = Role::Forbidden;
    }
    let partition = Partition::new(roles)?;

    let mut triples = Vec::new();
    for (lineno, tokens) in &find("transitions")?.lines {
        if tokens.len() != 4 {
            return Err(parse_err(
                *lineno,
                format!(
                    "expected '<state> <action> <next-state> <prob>', got {} tokens",
                    tokens.len()
                ),
            ));
        }
        let x = lookup(*lineno, &tokens[0])?;
        let a = action_labels
            .iter()
            .position(|l| *l == tokens[1])
            .ok_or_else(|| parse_err(*lineno, format!("unknown action label '{}'", tokens[1])))?;
        let y = lookup(*lineno, &tokens[2])?;
        let prob = parse_prob(*lineno, &tokens[3])?;
        triples.push((x, a, y, prob));
    }

    Mdp::new(state_labels, action_labels, partition, &triples)
}

/// Parses a policy document for the stated domain.
pub fn load_policy(
    source: &str,
    mdp: &Mdp,
    domain: &[StateId],
    kind: PolicyKind,
) -> Result<PolicyTable> {
    let sections = split_sections(source)?;
    let policy = sections
        .iter()
        .find(|s| s.name == "policy")
        .ok_or_else(|| parse_err(0, "missing [policy] section"))?;

    let mut rows: Vec<(StateId, Vec<f64>)> = Vec::new();
    for (lineno, tokens) in &policy.lines {
        if tokens.len() != 3 {
            return Err(parse_err(
                *lineno,
                format!("expected '<state> <action> <prob>', got {} tokens", tokens.len()),
            ));
        }
        let x = mdp.state_by_label(&tokens[0])?;
        let a = mdp.action_by_label(&tokens[1])?;
        let prob = parse_prob(*lineno, &tokens[2])?;
        let row = match rows.iter_mut().find(|(rx, _)| *rx == x) {
            Some((_, dist)) => dist,
            None => {
                rows.push((x, vec![0.0; mdp.n_actions()]));
                &mut rows.last_mut().unwrap().1
            }
        };
        row[a.0] = prob;
    }
    PolicyTable::new(mdp, kind, domain, &rows)
}

/// Canonical MDP serialization; terminal self-loop rows are omitted (they
/// are reimposed at load).
pub fn serialize_mdp(mdp: &Mdp) -> String {
    let mut out = String::new();
    let labels = |xs: Vec<StateId>| {
        xs.iter()
            .map(|&x| mdp.state_label(x))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(
        out,
        "[states] {}",
        mdp.states().map(|x| mdp.state_label(x)).collect::<Vec<_>>().join(" ")
    );
    let _ = writeln!(
        out,
        "[actions] {}",
        mdp.actions().map(|a| mdp.action_label(a)).collect::<Vec<_>>().join(" ")
    );
    let _ = writeln!(out, "[target] {}", labels(mdp.partition().target_states()));
    let _ = writeln!(out, "[forbidden] {}", labels(mdp.partition().forbidden_states()));
    let _ = writeln!(out, "[transitions]");
    for x in mdp.states() {
        if mdp.partition().is_terminal(x) {
            continue;
        }
        for a in mdp.actions() {
            for &(y, p) in mdp.row(x, a) {
                let _ = writeln!(
                    out,
                    "{} {} {} {}",
                    mdp.state_label(x),
                    mdp.action_label(a),
                    mdp.state_label(StateId(y)),
                    fmt17(p)
                );
            }
        }
    }
    out
}

/// Canonical policy serialization (rows sorted by state then action index).
pub fn serialize_policy(mdp: &Mdp, policy: &PolicyTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[policy]");
    for x in policy.domain() {
        for a in mdp.actions() {
            let _ = writeln!(
                out,
                "{} {} {}",
                mdp.state_label(x),
                mdp.action_label(a),
                fmt17(policy.prob(x, a))
            );
        }
    }
    out
}
