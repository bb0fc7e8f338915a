//! Seeded random instance generation with certification and rejection.
//!
//! Every emitted instance comes with a structurally valid proxy set, a
//! uniform target policy, a baseline sub-policy concentrated on a safe
//! action, and a full certificate (proxy soundness, termination under both
//! policies, coverage, baseline p-safety). Instances failing any check are
//! rejected and regenerated from the next derived seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exact::{
    certify_baseline, certify_termination, kappa, validate_proxy, BaselineCertificate,
};
use crate::mdp::{ActionId, Mdp, Partition, ProxySet, Role, StateId};
use crate::policy::{compose_behavior_policy, coverage_check, PolicyKind, PolicyTable};

/// Shape of a random instance. `leak` is the minimum per-(state, action)
/// one-step probability of terminating, which certifies episode lengths are
/// geometric.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMdpSpec {
    pub n_taboo: usize,
    pub n_actions: usize,
    /// Minimum terminal mass per (x, a); must be positive.
    pub leak: f64,
    /// Safety level the baseline must certify at.
    pub p: f64,
    /// Baseline mass on the chosen safe action at each proxy state.
    pub q: f64,
    pub max_attempts: usize,
}

impl RandomMdpSpec {
    pub fn new(n_taboo: usize, n_actions: usize, p: f64) -> Self {
        RandomMdpSpec {
            n_taboo,
            n_actions,
            leak: 0.05,
            p,
            q: 0.96,
            max_attempts: 200,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_taboo < 1 || self.n_actions < 2 {
            // a proxy state needs both an unsafe action (into U) and a safe
            // one, so one action can never yield a certifiable instance
            return Err(Error::InvalidConfig(
                "generator needs at least 1 taboo state and 2 actions".into(),
            ));
        }
        if !(self.leak > 0.0 && self.leak <= 0.3) {
            return Err(Error::InvalidConfig("leak must be in (0, 0.3]".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) || !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidConfig("p and q must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// A certified random instance.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub mdp: Mdp,
    pub target: PolicyTable,
    pub baseline: PolicyTable,
    pub proxy: ProxySet,
    pub certificate: BaselineCertificate,
    /// Seed of the accepted attempt (derived from the caller's seed).
    pub accepted_seed: u64,
    pub attempts: usize,
}

pub fn generate_instance(spec: &RandomMdpSpec, seed: u64) -> Result<GeneratedInstance> {
    spec.validate()?;
    for attempt in 0..spec.max_attempts {
        // odd multiplier keeps derived seeds distinct across attempts
        let derived = seed.wrapping_add((attempt as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        if let Some(inst) = try_generate(spec, derived, attempt + 1)? {
            return Ok(inst);
        }
    }
    Err(Error::GenerationExhausted {
        attempts: spec.max_attempts,
        n_taboo: spec.n_taboo,
        n_actions: spec.n_actions,
        p: spec.p,
    })
}

fn try_generate(
    spec: &RandomMdpSpec,
    derived_seed: u64,
    attempt: usize,
) -> Result<Option<GeneratedInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derived_seed);
    let n = spec.n_taboo;
    let e = n; // target index
    let u = n + 1; // forbidden index

    let mut triples: Vec<(usize, usize, usize, f64)> = Vec::new();
    for x in 0..n {
        for a in 0..spec.n_actions {
            // terminal mass in [leak, min(3·leak, 1)], split between E and U
            let total = rng.gen_range(spec.leak..=(3.0 * spec.leak).min(1.0));
            let to_u = total * rng.gen::<f64>();
            let to_e = total - to_u;
            let mut row = vec![0.0; n + 2];
            row[e] = to_e;
            row[u] = to_u;
            // remaining mass over up to 3 taboo successors
            let rest = 1.0 - total;
            if rest > 0.0 && n > 0 {
                let k = rng.gen_range(1..=3.min(n));
                let mut weights = vec![0.0; k];
                let mut sum = 0.0;
                for w in weights.iter_mut() {
                    *w = rng.gen::<f64>() + 1e-3;
                    sum += *w;
                }
                for w in weights.iter() {
                    let y = rng.gen_range(0..n);
                    row[y] += rest * w / sum;
                }
            }
            for (y, p) in row.into_iter().enumerate() {
                if p > 0.0 {
                    triples.push((x, a, y, p));
                }
            }
        }
    }

    // the proxy set is forced to be exactly the states with one-step U mass;
    // every proxy state must then own a safe action, so strip action 0's U
    // mass (moved onto E) where none exists
    let mut row_u = vec![vec![0.0; spec.n_actions]; n];
    for &(x, a, y, p) in &triples {
        if y == u {
            row_u[x][a] += p;
        }
    }
    for x in 0..n {
        let in_proxy = row_u[x].iter().any(|&m| m > 0.0);
        let has_safe = row_u[x].iter().any(|&m| m == 0.0);
        if in_proxy && !has_safe {
            let moved = row_u[x][0];
            row_u[x][0] = 0.0;
            for t in triples.iter_mut() {
                if t.0 == x && t.1 == 0 {
                    if t.2 == u {
                        t.3 = 0.0;
                    } else if t.2 == e {
                        t.3 += moved;
                    }
                }
            }
            // the row may have had no E entry to absorb the mass
            if !triples.iter().any(|t| t.0 == x && t.1 == 0 && t.2 == e && t.3 > 0.0) {
                triples.push((x, 0, e, moved));
            }
        }
    }

    let mut roles = vec![Role::Taboo; n];
    roles.push(Role::Target);
    roles.push(Role::Forbidden);
    let state_labels: Vec<String> = (0..n)
        .map(|i| format!("h{i}"))
        .chain(["e".to_string(), "u".to_string()])
        .collect();
    let action_labels: Vec<String> = (0..spec.n_actions).map(|i| format!("a{i}")).collect();
    let mdp = Mdp::new(state_labels, action_labels, Partition::new(roles)?, &triples)?;

    let kap = kappa(&mdp);
    let proxy_states: Vec<StateId> = mdp
        .partition()
        .taboo_states()
        .into_iter()
        .filter(|&x| mdp.actions().any(|a| kap.get(x, a) > 0.0))
        .collect();
    if proxy_states.is_empty() {
        return Ok(None); // degenerate: nothing to learn off-policy from
    }
    let proxy = ProxySet::new(&mdp, proxy_states)?;

    let h = mdp.partition().taboo_states();
    let target = PolicyTable::uniform(&mdp, PolicyKind::Target, &h);

    // baseline: q on one uniformly chosen safe action, rest spread evenly
    let mut rows: Vec<(StateId, Vec<f64>)> = Vec::new();
    for &x in proxy.states() {
        let safe: Vec<ActionId> = mdp.actions().filter(|&a| kap.get(x, a) == 0.0).collect();
        if safe.is_empty() {
            return Ok(None);
        }
        let pick = safe[rng.gen_range(0..safe.len())];
        let m = mdp.n_actions();
        let dist = if m == 1 {
            vec![1.0]
        } else {
            let mut d = vec![(1.0 - spec.q) / (m - 1) as f64; m];
            d[pick.0] = spec.q;
            d
        };
        rows.push((x, dist));
    }
    let baseline = PolicyTable::new(&mdp, PolicyKind::BaselineSubPolicy, proxy.states(), &rows)?;

    // certification chain; any failure rejects the attempt
    if !validate_proxy(&mdp, &proxy).holds() {
        return Ok(None);
    }
    if !coverage_check(&mdp, &target, &baseline, &proxy) {
        return Ok(None);
    }
    let behavior = compose_behavior_policy(&mdp, &target, &baseline, &proxy)?;
    if !certify_termination(&mdp, &target) || !certify_termination(&mdp, &behavior) {
        return Ok(None);
    }
    let certificate = match certify_baseline(&mdp, &target, &baseline, &proxy, spec.p) {
        Ok(c) if c.safe => c,
        Ok(_) => return Ok(None),
        Err(_) => return Ok(None),
    };

    Ok(Some(GeneratedInstance {
        mdp,
        target,
        baseline,
        proxy,
        certificate,
        accepted_seed: derived_seed,
        attempts: attempt,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{certify_p_safety, solve_safety};

    #[test]
    fn generated_instances_are_certified() {
        let spec = RandomMdpSpec::new(6, 3, 0.1);
        for seed in 0..20 {
            let inst = generate_instance(&spec, seed).unwrap();
            assert!(validate_proxy(&inst.mdp, &inst.proxy).holds());
            assert!(inst.certificate.safe);
            assert!(inst.certificate.bound <= 0.1);
            assert!(inst.certificate.coverage_ok);
            // behavior policy is p-safe over the whole taboo set
            let b = compose_behavior_policy(&inst.mdp, &inst.target, &inst.baseline, &inst.proxy)
                .unwrap();
            let s = solve_safety(&inst.mdp, &b).unwrap();
            assert!(certify_p_safety(&inst.mdp, &s, 0.1).is_safe());
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = RandomMdpSpec::new(5, 2, 0.1);
        let a = generate_instance(&spec, 42).unwrap();
        let b = generate_instance(&spec, 42).unwrap();
        assert_eq!(a.mdp, b.mdp);
        assert_eq!(a.baseline, b.baseline);
        assert_eq!(a.accepted_seed, b.accepted_seed);
    }

    #[test]
    fn invalid_spec_rejected() {
        let mut spec = RandomMdpSpec::new(0, 2, 0.1);
        assert!(generate_instance(&spec, 1).is_err());
        spec = RandomMdpSpec::new(4, 2, 0.1);
        spec.leak = 0.0;
        assert!(generate_instance(&spec, 1).is_err());
    }
}
