//! Built-in benchmark models with known exact safety values.

use crate::mdp::{Mdp, Partition, ProxySet, Role, StateId};
use crate::policy::{PolicyKind, PolicyTable};

/// A model plus the policies and proxy set used in experiments.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub mdp: Mdp,
    pub target: PolicyTable,
    pub baseline: PolicyTable,
    pub proxy: ProxySet,
}

/// Three-state random walk with a one-step buffer before the forbidden
/// state.
///
/// h1 ⇄ h2, with h2 leading into the buffer; the buffer's first action
/// falls into U surely and its second escapes back to h1. The target policy
/// is uniform on h1/h2 and deterministic-unsafe at the buffer, so
/// S_π = (1/3, 2/3, 1). The baseline plays the escape with 0.96, giving
/// S_{π^b} = (1/51, 2/51, 3/51).
pub fn gambler_buffer() -> Fixture {
    let labels = ["h1", "h2", "buf", "e", "u"];
    let roles = vec![
        Role::Taboo,
        Role::Taboo,
        Role::Taboo,
        Role::Target,
        Role::Forbidden,
    ];
    let mut triples = Vec::new();
    for a in 0..2usize {
        triples.push((0, a, 3, 0.5)); // h1 → e
        triples.push((0, a, 1, 0.5)); // h1 → h2
        triples.push((1, a, 0, 0.5)); // h2 → h1
        triples.push((1, a, 2, 0.5)); // h2 → buf
    }
    triples.push((2, 0, 4, 1.0)); // buf, a1 → u
    triples.push((2, 1, 0, 1.0)); // buf, a2 → h1

    let mdp = Mdp::new(
        labels.iter().map(|s| s.to_string()).collect(),
        vec!["a1".into(), "a2".into()],
        Partition::new(roles).unwrap(),
        &triples,
    )
    .unwrap();

    let h = mdp.partition().taboo_states();
    let target = PolicyTable::new(
        &mdp,
        PolicyKind::Target,
        &h,
        &[
            (StateId(0), vec![0.5, 0.5]),
            (StateId(1), vec![0.5, 0.5]),
            (StateId(2), vec![1.0, 0.0]),
        ],
    )
    .unwrap();
    let proxy = ProxySet::new(&mdp, vec![StateId(2)]).unwrap();
    let baseline = PolicyTable::new(
        &mdp,
        PolicyKind::BaselineSubPolicy,
        proxy.states(),
        &[(StateId(2), vec![0.04, 0.96])],
    )
    .unwrap();

    Fixture {
        mdp,
        target,
        baseline,
        proxy,
    }
}

/// Exact taboo-set safety values of [`gambler_buffer`] under the target
/// policy and under the composed behavior policy, in state-index order.
pub const GAMBLER_BUFFER_S_TARGET: [f64; 3] = [1.0 / 3.0, 2.0 / 3.0, 1.0];
pub const GAMBLER_BUFFER_S_BEHAVIOR: [f64; 3] = [1.0 / 51.0, 2.0 / 51.0, 3.0 / 51.0];

/// A 12-state benchmark with 8 taboo states feeding two target and two
/// forbidden terminals.
///
/// States 3–8 can fall into U under their second action and form the proxy
/// set; states 1–2 only route into the proxy region. Under the uniform
/// target policy the exact safety values are
///
/// ```text
/// S_π(1..8) = (0.714375, 0.73875, 0.69, 0.7875, 0.5, 0.3, 0.625, 0.5)
/// ```
///
/// and with the 0.96/0.04 baseline on the proxy set the behavior policy is
/// 0.1-safe (max 0.0894592 at state 4).
pub fn twelve_state() -> Fixture {
    let state_labels: Vec<String> = (1..=12).map(|i| i.to_string()).collect();
    let mut roles = vec![Role::Taboo; 12];
    roles[8] = Role::Target; // state 9
    roles[10] = Role::Target; // state 11
    roles[9] = Role::Forbidden; // state 10
    roles[11] = Role::Forbidden; // state 12

    // 0-based indices; action 0 is the "safe" branch everywhere
    let triples: Vec<(usize, usize, usize, f64)> = vec![
        // state 1
        (0, 0, 2, 1.0),
        (0, 1, 2, 0.5),
        (0, 1, 3, 0.5),
        // state 2
        (1, 0, 2, 1.0),
        (1, 1, 3, 1.0),
        // state 3
        (2, 0, 4, 0.4),
        (2, 0, 5, 0.6),
        (2, 1, 9, 1.0),
        // state 4
        (3, 0, 6, 0.6),
        (3, 0, 7, 0.4),
        (3, 1, 9, 1.0),
        // state 5
        (4, 0, 8, 1.0),
        (4, 1, 9, 1.0),
        // state 6
        (5, 0, 4, 0.4),
        (5, 0, 8, 0.6),
        (5, 1, 11, 0.4),
        (5, 1, 10, 0.6),
        // state 7
        (6, 0, 10, 0.5),
        (6, 0, 7, 0.5),
        (6, 1, 11, 1.0),
        // state 8
        (7, 0, 10, 1.0),
        (7, 1, 11, 1.0),
    ];

    let mdp = Mdp::new(
        state_labels,
        vec!["1".into(), "2".into()],
        Partition::new(roles).unwrap(),
        &triples,
    )
    .unwrap();

    let h = mdp.partition().taboo_states();
    let target = PolicyTable::uniform(&mdp, PolicyKind::Target, &h);
    let proxy = ProxySet::new(&mdp, (2..8).map(StateId).collect()).unwrap();
    let rows: Vec<_> = proxy
        .states()
        .iter()
        .map(|&x| (x, vec![0.96, 0.04]))
        .collect();
    let baseline =
        PolicyTable::new(&mdp, PolicyKind::BaselineSubPolicy, proxy.states(), &rows).unwrap();

    Fixture {
        mdp,
        target,
        baseline,
        proxy,
    }
}

/// Exact taboo-set safety values of [`twelve_state`] (states 1–8, in order)
/// under the uniform target policy and the composed behavior policy.
pub const TWELVE_STATE_S_TARGET: [f64; 8] =
    [0.714375, 0.73875, 0.69, 0.7875, 0.5, 0.3, 0.625, 0.5];
pub const TWELVE_STATE_S_BEHAVIOR: [f64; 8] = [
    0.07743232, 0.08144128, 0.07342336, 0.0894592, 0.04, 0.03136, 0.0592, 0.04,
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{certify_baseline, solve_safety, validate_proxy};
    use crate::policy::compose_behavior_policy;

    fn assert_taboo_values(fix: &Fixture, policy: &PolicyTable, expected: &[f64], tol: f64) {
        let s = solve_safety(&fix.mdp, policy).unwrap();
        for (i, &x) in fix.mdp.partition().taboo_states().iter().enumerate() {
            assert!(
                (s.get(x) - expected[i]).abs() < tol,
                "state {}: got {}, expected {}",
                fix.mdp.state_label(x),
                s.get(x),
                expected[i]
            );
        }
    }

    #[test]
    fn gambler_buffer_exact_values() {
        let fix = gambler_buffer();
        assert_taboo_values(&fix, &fix.target, &GAMBLER_BUFFER_S_TARGET, 1e-12);
        let b =
            compose_behavior_policy(&fix.mdp, &fix.target, &fix.baseline, &fix.proxy).unwrap();
        assert_taboo_values(&fix, &b, &GAMBLER_BUFFER_S_BEHAVIOR, 1e-12);
        assert!(validate_proxy(&fix.mdp, &fix.proxy).holds());
        let cert =
            certify_baseline(&fix.mdp, &fix.target, &fix.baseline, &fix.proxy, 0.1).unwrap();
        assert!(cert.safe && cert.coverage_ok);
    }

    #[test]
    fn twelve_state_exact_values() {
        let fix = twelve_state();
        assert_taboo_values(&fix, &fix.target, &TWELVE_STATE_S_TARGET, 1e-12);
        let b =
            compose_behavior_policy(&fix.mdp, &fix.target, &fix.baseline, &fix.proxy).unwrap();
        assert_taboo_values(&fix, &b, &TWELVE_STATE_S_BEHAVIOR, 1e-12);
        assert!(validate_proxy(&fix.mdp, &fix.proxy).holds());
        let cert =
            certify_baseline(&fix.mdp, &fix.target, &fix.baseline, &fix.proxy, 0.1).unwrap();
        assert!(cert.safe && cert.coverage_ok);
        assert!((cert.bound - 0.0894592).abs() < 1e-12);
        assert_eq!(cert.bound_state, Some(StateId(3)));
    }
}
