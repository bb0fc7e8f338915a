//! Exact safety computation: the ground-truth oracle.
//!
//! The safety function S_π(x) is the probability of hitting the forbidden
//! set U before the target set E. On the taboo set it solves
//!
//! ```text
//! s(x) = Σ_a π(a|x) [ κ(x,a) + Σ_{y∈H} p(x,a,y) s(y) ]
//! ```
//!
//! with κ(x,a) = Σ_{y∈U} p(x,a,y), i.e. the dense linear system
//! (I − P_H) s = b. Everything here is a pure function of immutable inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linsolve::{residual_inf, solve_dense};
use crate::mdp::{ActionId, Mdp, ProxySet, Role, StateId};
use crate::policy::{compose_behavior_policy, coverage_check, PolicyTable};

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const MAX_TABOO_DENSE: usize = 10_000;

/// Map state → safety value in [0,1]. Oracle outputs pin U to 1 and E to 0;
/// learner outputs pin all terminals to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyVector {
    values: Vec<f64>,
    policy_tag: String,
}

impl SafetyVector {
    pub fn new(values: Vec<f64>, policy_tag: impl Into<String>) -> Self {
        SafetyVector {
            values,
            policy_tag: policy_tag.into(),
        }
    }

    pub fn get(&self, x: StateId) -> f64 {
        self.values[x.0]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn policy_tag(&self) -> &str {
        &self.policy_tag
    }

    /// max |self − other| over the taboo set.
    pub fn sup_distance_on_taboo(&self, other: &SafetyVector, mdp: &Mdp) -> f64 {
        mdp.partition()
            .taboo_states()
            .iter()
            .map(|&x| (self.get(x) - other.get(x)).abs())
            .fold(0.0, f64::max)
    }
}

/// κ(x,a) = Σ_{y∈U} p(x,a,y): one-step probability of falling into U.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaTable {
    values: Vec<Vec<f64>>, // [x][a]
}

impl KappaTable {
    pub fn get(&self, x: StateId, a: ActionId) -> f64 {
        self.values[x.0][a.0]
    }
}

pub fn kappa(mdp: &Mdp) -> KappaTable {
    let values = mdp
        .states()
        .map(|x| {
            mdp.actions()
                .map(|a| {
                    mdp.row(x, a)
                        .iter()
                        .filter(|&&(y, _)| mdp.partition().is_forbidden(StateId(y)))
                        .map(|&(_, p)| p)
                        .sum()
                })
                .collect()
        })
        .collect();
    KappaTable { values }
}

/// True iff every taboo state reaches E ∪ U with probability 1 under the
/// policy-induced chain: reverse reachability over the support graph, which
/// for a finite chain is equivalent to almost-sure absorption (no closed
/// recurrent class inside H).
pub fn certify_termination(mdp: &Mdp, policy: &PolicyTable) -> bool {
    let n = mdp.n_states();
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for x in mdp.partition().taboo_states() {
        for a in mdp.actions() {
            if policy.prob(x, a) == 0.0 {
                continue;
            }
            for &(y, p) in mdp.row(x, a) {
                if p > 0.0 {
                    rev[y].push(x.0);
                }
            }
        }
    }
    let mut reaches = vec![false; n];
    let mut queue: Vec<usize> = Vec::new();
    for x in mdp.states() {
        if mdp.partition().is_terminal(x) {
            reaches[x.0] = true;
            queue.push(x.0);
        }
    }
    while let Some(y) = queue.pop() {
        for &x in &rev[y] {
            if !reaches[x] {
                reaches[x] = true;
                queue.push(x);
            }
        }
    }
    mdp.partition().taboo_states().iter().all(|&x| reaches[x.0])
}

/// First taboo state that cannot reach a terminal, for error reporting.
pub fn find_trapped_state(mdp: &Mdp, policy: &PolicyTable) -> Option<StateId> {
    if certify_termination(mdp, policy) {
        return None;
    }
    // recompute reachability to name a witness
    let n = mdp.n_states();
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for x in mdp.partition().taboo_states() {
        for a in mdp.actions() {
            if policy.prob(x, a) == 0.0 {
                continue;
            }
            for &(y, p) in mdp.row(x, a) {
                if p > 0.0 {
                    rev[y].push(x.0);
                }
            }
        }
    }
    let mut reaches = vec![false; n];
    let mut queue: Vec<usize> = Vec::new();
    for x in mdp.states() {
        if mdp.partition().is_terminal(x) {
            reaches[x.0] = true;
            queue.push(x.0);
        }
    }
    while let Some(y) = queue.pop() {
        for &x in &rev[y] {
            if !reaches[x] {
                reaches[x] = true;
                queue.push(x);
            }
        }
    }
    mdp.partition()
        .taboo_states()
        .into_iter()
        .find(|&x| !reaches[x.0])
}

/// Exact safety function under `policy` via the dense hitting-probability
/// system; residual checked against 1e-10.
pub fn solve_safety(mdp: &Mdp, policy: &PolicyTable) -> Result<SafetyVector> {
    if let Some(x) = find_trapped_state(mdp, policy) {
        return Err(Error::TerminationUncertified(
            mdp.state_label(x).to_string(),
        ));
    }
    let h = mdp.partition().taboo_states();
    let n = h.len();
    if n > MAX_TABOO_DENSE {
        return Err(Error::TabooSetTooLarge(n));
    }
    let mut hidx = vec![usize::MAX; mdp.n_states()];
    for (i, &x) in h.iter().enumerate() {
        hidx[x.0] = i;
    }

    let kap = kappa(mdp);
    // A = I − P_H, b(x) = Σ_a π(a|x) κ(x,a)
    let mut a_mat = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for (i, &x) in h.iter().enumerate() {
        a_mat[i * n + i] = 1.0;
        for act in mdp.actions() {
            let pa = policy.prob(x, act);
            if pa == 0.0 {
                continue;
            }
            b[i] += pa * kap.get(x, act);
            for &(y, p) in mdp.row(x, act) {
                if mdp.partition().is_taboo(StateId(y)) {
                    a_mat[i * n + hidx[y]] -= pa * p;
                }
            }
        }
    }

    let solution = solve_dense(a_mat.clone(), b.clone())?;
    let res = residual_inf(&a_mat, &solution, &b);
    if res > RESIDUAL_TOLERANCE {
        return Err(Error::ResidualTooLarge(res));
    }

    let mut values = vec![0.0; mdp.n_states()];
    for x in mdp.states() {
        match mdp.partition().role(x) {
            Role::Forbidden => values[x.0] = 1.0,
            Role::Target => values[x.0] = 0.0,
            Role::Taboo => {
                // elimination may overshoot [0,1] by a few ulp
                values[x.0] = solution[hidx[x.0]].clamp(0.0, 1.0);
            }
        }
    }
    Ok(SafetyVector::new(values, "exact"))
}

/// Monte-Carlo estimate of S_policy(start) with a 95% half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub half_width: f64,
    pub episodes: u64,
    pub completed: u64,
    pub forbidden_hits: u64,
    /// Episodes cut at the horizon cap; reported, never folded in.
    pub truncated: u64,
}

/// Indicator-cost estimator: fraction of completed episodes whose
/// accumulated cost Σ c_t is 1 (hit U before E). Per-episode RNG streams are
/// derived from (seed, episode index), so results are schedule-independent.
pub fn monte_carlo_safety(
    mdp: &Mdp,
    policy: &PolicyTable,
    start: StateId,
    episodes: u64,
    seed: u64,
    horizon_cap: u64,
) -> McEstimate {
    debug_assert!(episodes >= 1);
    let mut hits = 0u64;
    let mut truncated = 0u64;
    for ep in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ep + 1);
        let mut x = start;
        let mut outcome = None;
        for _ in 0..horizon_cap {
            let a = policy.sample(x, rng.gen::<f64>());
            let y = sample_row(mdp.row(x, a), rng.gen::<f64>());
            if mdp.partition().is_terminal(StateId(y)) {
                outcome = Some(mdp.partition().is_forbidden(StateId(y)));
                break;
            }
            x = StateId(y);
        }
        match outcome {
            Some(true) => hits += 1,
            Some(false) => {}
            None => truncated += 1,
        }
    }
    let completed = episodes - truncated;
    let estimate = if completed > 0 {
        hits as f64 / completed as f64
    } else {
        f64::NAN
    };
    let half_width = if completed == 0 {
        f64::NAN
    } else if hits == 0 || hits == completed {
        // normal approximation collapses at the boundary; rule of three
        3.0 / completed as f64
    } else {
        1.96 * (estimate * (1.0 - estimate) / completed as f64).sqrt()
    };
    McEstimate {
        estimate,
        half_width,
        episodes,
        completed,
        forbidden_hits: hits,
        truncated,
    }
}

/// Samples a sparse kernel row given a uniform draw in [0,1).
pub(crate) fn sample_row(row: &[(usize, f64)], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = row[0].0;
    for &(y, p) in row {
        acc += p;
        last = y;
        if u < acc {
            return y;
        }
    }
    last
}

/// Definition-2 verdict: safe iff max over H of the safety values ≤ p
/// (exact comparison, no slack; margin reported for callers).
#[derive(Debug, Clone, PartialEq)]
pub enum SafetyVerdict {
    Safe {
        max: f64,
        argmax: StateId,
        margin: f64,
    },
    Unsafe {
        worst_state: StateId,
        value: f64,
    },
}

impl SafetyVerdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, SafetyVerdict::Safe { .. })
    }
}

pub fn certify_p_safety(mdp: &Mdp, safety: &SafetyVector, p: f64) -> SafetyVerdict {
    let h = mdp.partition().taboo_states();
    // ties broken by lowest state index: strict > keeps the first argmax
    let mut argmax = h[0];
    let mut max = safety.get(argmax);
    for &x in &h[1..] {
        if safety.get(x) > max {
            max = safety.get(x);
            argmax = x;
        }
    }
    if max <= p {
        SafetyVerdict::Safe {
            max,
            argmax,
            margin: p - max,
        }
    } else {
        SafetyVerdict::Unsafe {
            worst_state: argmax,
            value: max,
        }
    }
}

/// Failure witness for a proxy-set check.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxyWitness {
    /// N.1 violated: a non-proxy taboo state can step straight into U.
    LeakToForbidden {
        state: StateId,
        action: ActionId,
        forbidden: StateId,
    },
    /// N.2 violated: every action at this proxy state leads into U surely.
    NoEscape { state: StateId },
}

/// Validation result for a candidate proxy set (Definition 3 N.1/N.2 plus
/// the Definition 4 safe-action inventory).
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyCertificate {
    pub proxy: ProxySet,
    pub n1_holds: bool,
    pub n2_holds: bool,
    /// Per proxy state: actions with κ(x',a) = 0.
    pub safe_actions: Vec<(StateId, Vec<ActionId>)>,
    pub witness: Option<ProxyWitness>,
}

impl ProxyCertificate {
    pub fn holds(&self) -> bool {
        self.n1_holds && self.n2_holds
    }
}

/// Structural N.1/N.2 check over the full action support (conservative,
/// policy-independent). N.1 reduces to: no taboo state outside U' has any
/// positive one-step probability into U, under any action — U is absorbing,
/// so any path avoiding U' would end with exactly such an edge.
pub fn validate_proxy(mdp: &Mdp, proxy: &ProxySet) -> ProxyCertificate {
    validate_proxy_impl(mdp, proxy, None)
}

/// N.1 restricted to the support of a specific policy (the option-flag
/// variant; `validate_proxy` is the default).
pub fn validate_proxy_under_policy(
    mdp: &Mdp,
    proxy: &ProxySet,
    policy: &PolicyTable,
) -> ProxyCertificate {
    validate_proxy_impl(mdp, proxy, Some(policy))
}

fn validate_proxy_impl(
    mdp: &Mdp,
    proxy: &ProxySet,
    policy: Option<&PolicyTable>,
) -> ProxyCertificate {
    let kap = kappa(mdp);
    let mut witness = None;

    let mut n1_holds = true;
    'outer: for x in mdp.partition().taboo_states() {
        if proxy.contains(x) {
            continue;
        }
        for a in mdp.actions() {
            if let Some(pol) = policy {
                if pol.prob(x, a) == 0.0 {
                    continue;
                }
            }
            for &(y, p) in mdp.row(x, a) {
                if p > 0.0 && mdp.partition().is_forbidden(StateId(y)) {
                    n1_holds = false;
                    witness = Some(ProxyWitness::LeakToForbidden {
                        state: x,
                        action: a,
                        forbidden: StateId(y),
                    });
                    break 'outer;
                }
            }
        }
    }

    let mut n2_holds = true;
    for &x in proxy.states() {
        let escapes = mdp.actions().any(|a| {
            mdp.row(x, a)
                .iter()
                .any(|&(y, p)| p > 0.0 && !mdp.partition().is_forbidden(StateId(y)))
        });
        if !escapes {
            n2_holds = false;
            if witness.is_none() {
                witness = Some(ProxyWitness::NoEscape { state: x });
            }
        }
    }

    let safe_actions = proxy
        .states()
        .iter()
        .map(|&x| {
            let actions = mdp.actions().filter(|&a| kap.get(x, a) == 0.0).collect();
            (x, actions)
        })
        .collect();

    ProxyCertificate {
        proxy: proxy.clone(),
        n1_holds,
        n2_holds,
        safe_actions,
        witness,
    }
}

/// Baseline certification under the composed behavior policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineCertificate {
    pub safe: bool,
    /// max_{x'∈U'} S_{π^b}(x'): by the proxy bound this dominates every
    /// taboo state, so it certifies the whole MDP.
    pub bound: f64,
    pub bound_state: Option<StateId>,
    pub coverage_ok: bool,
    pub safety: SafetyVector,
}

pub fn certify_baseline(
    mdp: &Mdp,
    target: &PolicyTable,
    baseline: &PolicyTable,
    proxy: &ProxySet,
    p: f64,
) -> Result<BaselineCertificate> {
    let behavior = compose_behavior_policy(mdp, target, baseline, proxy)?;
    let mut safety = solve_safety(mdp, &behavior)?;
    safety = SafetyVector::new(safety.values().to_vec(), "behavior");
    let coverage_ok = coverage_check(mdp, target, baseline, proxy);

    let mut bound = 0.0;
    let mut bound_state = None;
    for &x in proxy.states() {
        if bound_state.is_none() || safety.get(x) > bound {
            bound = safety.get(x);
            bound_state = Some(x);
        }
    }
    Ok(BaselineCertificate {
        safe: bound <= p,
        bound,
        bound_state,
        coverage_ok,
        safety,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{Partition, Role};
    use crate::policy::PolicyKind;

    fn chain_mdp(rows: &[(usize, usize, usize, f64)], n_taboo: usize) -> Mdp {
        // taboo states first, then one target and one forbidden
        let mut roles = vec![Role::Taboo; n_taboo];
        roles.push(Role::Target);
        roles.push(Role::Forbidden);
        let labels = (0..n_taboo)
            .map(|i| format!("h{i}"))
            .chain(["e".to_string(), "u".to_string()])
            .collect();
        Mdp::new(
            labels,
            vec!["a".into()],
            Partition::new(roles).unwrap(),
            rows,
        )
        .unwrap()
    }

    fn gambler() -> Mdp {
        // h0: 0.5→e, 0.5→h1; h1: 0.5→h0, 0.5→u
        chain_mdp(
            &[
                (0, 0, 2, 0.5),
                (0, 0, 1, 0.5),
                (1, 0, 0, 0.5),
                (1, 0, 3, 0.5),
            ],
            2,
        )
    }

    #[test]
    fn kappa_sums_forbidden_mass() {
        let mdp = chain_mdp(
            &[
                (0, 0, 1, 0.5),
                (0, 0, 3, 0.5),
                (1, 0, 2, 1.0),
            ],
            2,
        );
        let k = kappa(&mdp);
        assert_eq!(k.get(StateId(0), ActionId(0)), 0.5);
        assert_eq!(k.get(StateId(1), ActionId(0)), 0.0);
    }

    #[test]
    fn kappa_is_one_for_sure_fall() {
        let mdp = chain_mdp(&[(0, 0, 3, 1.0), (1, 0, 2, 1.0)], 2);
        assert_eq!(kappa(&mdp).get(StateId(0), ActionId(0)), 1.0);
    }

    #[test]
    fn termination_fails_on_taboo_cycle() {
        let mdp = chain_mdp(&[(0, 0, 1, 1.0), (1, 0, 0, 1.0)], 2);
        let pol = PolicyTable::uniform(&mdp, PolicyKind::Target, &mdp.partition().taboo_states());
        assert!(!certify_termination(&mdp, &pol));
        assert!(find_trapped_state(&mdp, &pol).is_some());
    }

    #[test]
    fn termination_holds_on_direct_exit() {
        let mdp = chain_mdp(&[(0, 0, 2, 1.0), (1, 0, 2, 1.0)], 2);
        let pol = PolicyTable::uniform(&mdp, PolicyKind::Target, &mdp.partition().taboo_states());
        assert!(certify_termination(&mdp, &pol));
    }

    #[test]
    fn solve_trivial_values() {
        let to_u = chain_mdp(&[(0, 0, 3, 1.0), (1, 0, 2, 1.0)], 2);
        let pol = PolicyTable::uniform(&to_u, PolicyKind::Target, &to_u.partition().taboo_states());
        let s = solve_safety(&to_u, &pol).unwrap();
        assert_eq!(s.get(StateId(0)), 1.0);
        assert_eq!(s.get(StateId(1)), 0.0);
    }

    #[test]
    fn solve_gambler_chain() {
        let mdp = gambler();
        let pol = PolicyTable::uniform(&mdp, PolicyKind::Target, &mdp.partition().taboo_states());
        let s = solve_safety(&mdp, &pol).unwrap();
        assert!((s.get(StateId(0)) - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.get(StateId(1)) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_matches_gambler_oracle() {
        let mdp = gambler();
        let pol = PolicyTable::uniform(&mdp, PolicyKind::Target, &mdp.partition().taboo_states());
        let mc = monte_carlo_safety(&mdp, &pol, StateId(0), 200_000, 7, 1_000_000);
        assert_eq!(mc.truncated, 0);
        assert!((mc.estimate - 1.0 / 3.0).abs() <= 3.0 * mc.half_width);
    }

    #[test]
    fn monte_carlo_deterministic_chains() {
        let to_e = chain_mdp(&[(0, 0, 2, 1.0), (1, 0, 2, 1.0)], 2);
        let pol = PolicyTable::uniform(&to_e, PolicyKind::Target, &to_e.partition().taboo_states());
        let mc = monte_carlo_safety(&to_e, &pol, StateId(0), 100, 1, 100);
        assert_eq!(mc.estimate, 0.0);
        let to_u = chain_mdp(&[(0, 0, 3, 1.0), (1, 0, 2, 1.0)], 2);
        let pol = PolicyTable::uniform(&to_u, PolicyKind::Target, &to_u.partition().taboo_states());
        let mc = monte_carlo_safety(&to_u, &pol, StateId(0), 100, 1, 100);
        assert_eq!(mc.estimate, 1.0);
    }

    #[test]
    fn p_safety_verdicts() {
        let mdp = gambler();
        let zeros = SafetyVector::new(vec![0.0; 4], "zeros");
        assert!(certify_p_safety(&mdp, &zeros, 0.0).is_safe());

        let s = SafetyVector::new(vec![0.2, 0.7, 0.0, 1.0], "t");
        match certify_p_safety(&mdp, &s, 0.1) {
            SafetyVerdict::Unsafe { worst_state, value } => {
                assert_eq!(worst_state, StateId(1));
                assert_eq!(value, 0.7);
            }
            v => panic!("expected unsafe, got {v:?}"),
        }
    }

    #[test]
    fn proxy_buffer_certifies_and_leak_is_witnessed() {
        // h0 → h1 → u, with h1 the one-step buffer
        let mdp = chain_mdp(
            &[
                (0, 0, 1, 0.5),
                (0, 0, 2, 0.5),
                (1, 0, 3, 0.5),
                (1, 0, 2, 0.5),
            ],
            2,
        );
        let buffer = ProxySet::new(&mdp, vec![StateId(1)]).unwrap();
        let cert = validate_proxy(&mdp, &buffer);
        assert!(cert.n1_holds && cert.n2_holds);
        assert_eq!(cert.safe_actions, vec![(StateId(1), vec![])]);

        let empty = ProxySet::new(&mdp, vec![]).unwrap();
        let cert = validate_proxy(&mdp, &empty);
        assert!(!cert.n1_holds);
        assert!(matches!(
            cert.witness,
            Some(ProxyWitness::LeakToForbidden {
                state: StateId(1),
                ..
            })
        ));
    }
}
