//! Stationary stochastic policies and behavior-policy composition.

use crate::error::{Error, Result};
use crate::mdp::{ActionId, Mdp, ProxySet, StateId};

const RENORM_SKIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Target,
    BaselineSubPolicy,
    Behavior,
}

/// π(a|x) over a stated domain: the full taboo set for target/behavior
/// policies, the proxy set for a baseline sub-policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    kind: PolicyKind,
    /// probs[x] = Some(distribution over actions) for x in the domain.
    probs: Vec<Option<Vec<f64>>>,
}

impl PolicyTable {
    /// Validates row-stochasticity (1e-9 tolerance, exact renormalization)
    /// and that exactly the domain states carry distributions.
    pub fn new(
        mdp: &Mdp,
        kind: PolicyKind,
        domain: &[StateId],
        rows: &[(StateId, Vec<f64>)],
    ) -> Result<Self> {
        let mut probs: Vec<Option<Vec<f64>>> = vec![None; mdp.n_states()];
        for (x, dist) in rows {
            if !domain.contains(x) {
                return Err(Error::StateOutsideDomain(mdp.state_label(*x).to_string()));
            }
            if dist.len() != mdp.n_actions() {
                return Err(Error::DomainMismatch(format!(
                    "distribution at '{}' has {} entries, expected {}",
                    mdp.state_label(*x),
                    dist.len(),
                    mdp.n_actions()
                )));
            }
            for &p in dist {
                if p < 0.0 {
                    return Err(Error::NegativeProbability {
                        state: mdp.state_label(*x).to_string(),
                        action: String::new(),
                        prob: p,
                    });
                }
            }
            let sum: f64 = dist.iter().sum();
            if (sum - 1.0).abs() > crate::mdp::ROW_SUM_TOLERANCE {
                return Err(Error::NonStochasticPolicy {
                    state: mdp.state_label(*x).to_string(),
                    sum,
                });
            }
            let mut dist = dist.clone();
            if (sum - 1.0).abs() > RENORM_SKIP {
                for p in dist.iter_mut() {
                    *p /= sum;
                }
            }
            probs[x.0] = Some(dist);
        }
        for x in domain {
            if probs[x.0].is_none() {
                return Err(Error::MissingPolicyState(mdp.state_label(*x).to_string()));
            }
        }
        Ok(PolicyTable { kind, probs })
    }

    /// Uniform policy over all actions on the given domain.
    pub fn uniform(mdp: &Mdp, kind: PolicyKind, domain: &[StateId]) -> Self {
        let u = 1.0 / mdp.n_actions() as f64;
        let mut probs = vec![None; mdp.n_states()];
        for x in domain {
            probs[x.0] = Some(vec![u; mdp.n_actions()]);
        }
        PolicyTable { kind, probs }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn covers(&self, x: StateId) -> bool {
        self.probs[x.0].is_some()
    }

    pub fn domain(&self) -> impl Iterator<Item = StateId> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_some())
            .map(|(i, _)| StateId(i))
    }

    /// π(a|x); panics if x is outside the domain.
    pub fn prob(&self, x: StateId, a: ActionId) -> f64 {
        self.probs[x.0].as_ref().expect("state outside policy domain")[a.0]
    }

    pub fn dist(&self, x: StateId) -> &[f64] {
        self.probs[x.0].as_ref().expect("state outside policy domain")
    }

    /// Samples an action from π(·|x) given a uniform draw in [0,1).
    pub fn sample(&self, x: StateId, u: f64) -> ActionId {
        let dist = self.dist(x);
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (a, &p) in dist.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = a;
                if u < acc {
                    return ActionId(a);
                }
            }
        }
        ActionId(last_positive)
    }
}

/// π^b: the target policy off the proxy set, the baseline sub-policy on it.
pub fn compose_behavior_policy(
    mdp: &Mdp,
    target: &PolicyTable,
    baseline: &PolicyTable,
    proxy: &ProxySet,
) -> Result<PolicyTable> {
    for x in mdp.partition().taboo_states() {
        if !target.covers(x) {
            return Err(Error::DomainMismatch(format!(
                "target policy does not cover taboo state '{}'",
                mdp.state_label(x)
            )));
        }
    }
    for &x in proxy.states() {
        if !baseline.covers(x) {
            return Err(Error::DomainMismatch(format!(
                "baseline sub-policy does not cover proxy state '{}'",
                mdp.state_label(x)
            )));
        }
    }
    let mut probs: Vec<Option<Vec<f64>>> = vec![None; mdp.n_states()];
    for x in target.domain() {
        probs[x.0] = Some(target.dist(x).to_vec());
    }
    for &x in proxy.states() {
        probs[x.0] = Some(baseline.dist(x).to_vec());
    }
    Ok(PolicyTable {
        kind: PolicyKind::Behavior,
        probs,
    })
}

/// Absolute continuity π ≪ π^S on U': every target-supported action at a
/// proxy state must have positive baseline probability, otherwise the
/// importance-sampling ratio is undefined.
pub fn coverage_check(
    mdp: &Mdp,
    target: &PolicyTable,
    baseline: &PolicyTable,
    proxy: &ProxySet,
) -> bool {
    proxy.states().iter().all(|&x| {
        mdp.actions()
            .all(|a| target.prob(x, a) == 0.0 || baseline.prob(x, a) > 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{Partition, Role};

    fn toy_mdp() -> Mdp {
        // 4 states: h0 h1 (taboo), e (target), u (forbidden); 2 actions
        let part = Partition::new(vec![Role::Taboo, Role::Taboo, Role::Target, Role::Forbidden])
            .unwrap();
        Mdp::new(
            vec!["h0".into(), "h1".into(), "e".into(), "u".into()],
            vec!["a1".into(), "a2".into()],
            part,
            &[
                (0, 0, 2, 1.0),
                (0, 1, 1, 1.0),
                (1, 0, 2, 1.0),
                (1, 1, 3, 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_distribution_not_summing_to_one() {
        let mdp = toy_mdp();
        let err = PolicyTable::new(
            &mdp,
            PolicyKind::Target,
            &[StateId(0)],
            &[(StateId(0), vec![0.7, 0.2])],
        );
        assert!(matches!(err, Err(Error::NonStochasticPolicy { .. })));
    }

    #[test]
    fn composition_overrides_proxy_states_only() {
        let mdp = toy_mdp();
        let h = mdp.partition().taboo_states();
        let target = PolicyTable::uniform(&mdp, PolicyKind::Target, &h);
        let proxy = ProxySet::new(&mdp, vec![StateId(1)]).unwrap();
        let baseline = PolicyTable::new(
            &mdp,
            PolicyKind::BaselineSubPolicy,
            proxy.states(),
            &[(StateId(1), vec![0.96, 0.04])],
        )
        .unwrap();
        let b = compose_behavior_policy(&mdp, &target, &baseline, &proxy).unwrap();
        assert_eq!(b.prob(StateId(0), ActionId(0)), 0.5);
        assert_eq!(b.prob(StateId(1), ActionId(0)), 0.96);
        assert_eq!(b.kind(), PolicyKind::Behavior);
    }

    #[test]
    fn identity_composition_when_baseline_equals_target() {
        let mdp = toy_mdp();
        let h = mdp.partition().taboo_states();
        let target = PolicyTable::uniform(&mdp, PolicyKind::Target, &h);
        let proxy = ProxySet::new(&mdp, vec![StateId(1)]).unwrap();
        let baseline = PolicyTable::new(
            &mdp,
            PolicyKind::BaselineSubPolicy,
            proxy.states(),
            &[(StateId(1), vec![0.5, 0.5])],
        )
        .unwrap();
        let b = compose_behavior_policy(&mdp, &target, &baseline, &proxy).unwrap();
        for x in mdp.partition().taboo_states() {
            for a in mdp.actions() {
                assert_eq!(b.prob(x, a), target.prob(x, a));
            }
        }
    }

    #[test]
    fn full_proxy_composition_never_consults_target() {
        let mdp = toy_mdp();
        let h = mdp.partition().taboo_states();
        let target = PolicyTable::uniform(&mdp, PolicyKind::Target, &h);
        let proxy = ProxySet::new(&mdp, h.clone()).unwrap();
        let rows: Vec<_> = h.iter().map(|&x| (x, vec![0.96, 0.04])).collect();
        let baseline =
            PolicyTable::new(&mdp, PolicyKind::BaselineSubPolicy, proxy.states(), &rows).unwrap();
        let b = compose_behavior_policy(&mdp, &target, &baseline, &proxy).unwrap();
        for &x in proxy.states() {
            assert_eq!(b.prob(x, ActionId(0)), 0.96);
        }
    }

    #[test]
    fn coverage_fails_on_deterministic_baseline_under_uniform_target() {
        let mdp = toy_mdp();
        let h = mdp.partition().taboo_states();
        let target = PolicyTable::uniform(&mdp, PolicyKind::Target, &h);
        let proxy = ProxySet::new(&mdp, vec![StateId(1)]).unwrap();
        let det = PolicyTable::new(
            &mdp,
            PolicyKind::BaselineSubPolicy,
            proxy.states(),
            &[(StateId(1), vec![1.0, 0.0])],
        )
        .unwrap();
        assert!(!coverage_check(&mdp, &target, &det, &proxy));

        let full = PolicyTable::new(
            &mdp,
            PolicyKind::BaselineSubPolicy,
            proxy.states(),
            &[(StateId(1), vec![0.96, 0.04])],
        )
        .unwrap();
        assert!(coverage_check(&mdp, &target, &full, &proxy));

        // π = π^S
        let same = PolicyTable::new(
            &mdp,
            PolicyKind::BaselineSubPolicy,
            proxy.states(),
            &[(StateId(1), vec![0.5, 0.5])],
        )
        .unwrap();
        assert!(coverage_check(&mdp, &target, &same, &proxy));
    }
}
