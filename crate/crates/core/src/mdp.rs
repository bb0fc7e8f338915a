//! Finite MDP with a target/forbidden/taboo state partition.
//!
//! States and actions are dense indices; display labels come from the input
//! file and are kept alongside. Terminal states (target and forbidden) are
//! absorbing self-loops by construction, so the kernel is total.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Leave parsed probabilities untouched when the row sum is already this
/// close to 1; keeps canonical serialization round-trips bit-exact.
const RENORM_SKIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

/// Partition class of a state: exactly one of E, U, H.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Target,
    Forbidden,
    Taboo,
}

/// State partition into target E, forbidden U and taboo (living) H.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    roles: Vec<Role>,
}

impl Partition {
    pub fn new(roles: Vec<Role>) -> Result<Self> {
        if !roles.iter().any(|r| *r == Role::Target) {
            return Err(Error::EmptyTarget);
        }
        if !roles.iter().any(|r| *r == Role::Forbidden) {
            return Err(Error::EmptyForbidden);
        }
        Ok(Partition { roles })
    }

    pub fn role(&self, x: StateId) -> Role {
        self.roles[x.0]
    }

    pub fn is_terminal(&self, x: StateId) -> bool {
        self.roles[x.0] != Role::Taboo
    }

    pub fn is_forbidden(&self, x: StateId) -> bool {
        self.roles[x.0] == Role::Forbidden
    }

    pub fn is_target(&self, x: StateId) -> bool {
        self.roles[x.0] == Role::Target
    }

    pub fn is_taboo(&self, x: StateId) -> bool {
        self.roles[x.0] == Role::Taboo
    }

    fn states_with(&self, role: Role) -> Vec<StateId> {
        (0..self.roles.len())
            .filter(|&i| self.roles[i] == role)
            .map(StateId)
            .collect()
    }

    pub fn target_states(&self) -> Vec<StateId> {
        self.states_with(Role::Target)
    }

    pub fn forbidden_states(&self) -> Vec<StateId> {
        self.states_with(Role::Forbidden)
    }

    pub fn taboo_states(&self) -> Vec<StateId> {
        self.states_with(Role::Taboo)
    }
}

/// A sparse transition row: (next state, probability), sorted by next state,
/// zero entries omitted.
pub type KernelRow = Vec<(usize, f64)>;

/// Validated finite MDP. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    state_labels: Vec<String>,
    action_labels: Vec<String>,
    state_index: HashMap<String, usize>,
    action_index: HashMap<String, usize>,
    /// kernel[x][a] = sparse row over next states.
    kernel: Vec<Vec<KernelRow>>,
    partition: Partition,
}

impl Mdp {
    /// Builds and validates an MDP from raw triples `(x, a, y, prob)`.
    ///
    /// Taboo rows must sum to 1 within `1e-9` (then renormalized exactly);
    /// terminal rows are replaced by absorbing self-loops regardless of
    /// input.
    pub fn new(
        state_labels: Vec<String>,
        action_labels: Vec<String>,
        partition: Partition,
        triples: &[(usize, usize, usize, f64)],
    ) -> Result<Self> {
        let n_states = state_labels.len();
        let n_actions = action_labels.len();

        let mut kernel: Vec<Vec<KernelRow>> = vec![vec![Vec::new(); n_actions]; n_states];
        for &(x, a, y, prob) in triples {
            if prob < 0.0 {
                return Err(Error::NegativeProbability {
                    state: state_labels[x].clone(),
                    action: action_labels[a].clone(),
                    prob,
                });
            }
            if prob == 0.0 {
                continue;
            }
            let row = &mut kernel[x][a];
            match row.binary_search_by(|&(ry, _)| ry.cmp(&y)) {
                Ok(i) => row[i].1 += prob,
                Err(i) => row.insert(i, (y, prob)),
            }
        }

        for x in 0..n_states {
            if partition.is_terminal(StateId(x)) {
                // terminals absorb; whatever the file said is overridden
                for a in 0..n_actions {
                    kernel[x][a] = vec![(x, 1.0)];
                }
                continue;
            }
            for a in 0..n_actions {
                let row = &mut kernel[x][a];
                let sum: f64 = row.iter().map(|&(_, p)| p).sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::NonStochasticRow {
                        state: state_labels[x].clone(),
                        action: action_labels[a].clone(),
                        sum,
                    });
                }
                if (sum - 1.0).abs() > RENORM_SKIP {
                    for entry in row.iter_mut() {
                        entry.1 /= sum;
                    }
                }
            }
        }

        let state_index = state_labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        let action_index = action_labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();

        Ok(Mdp {
            state_labels,
            action_labels,
            state_index,
            action_index,
            kernel,
            partition,
        })
    }

    pub fn n_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_labels.len()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn row(&self, x: StateId, a: ActionId) -> &[(usize, f64)] {
        &self.kernel[x.0][a.0]
    }

    pub fn prob(&self, x: StateId, a: ActionId, y: StateId) -> f64 {
        self.kernel[x.0][a.0]
            .binary_search_by(|&(ry, _)| ry.cmp(&y.0))
            .map(|i| self.kernel[x.0][a.0][i].1)
            .unwrap_or(0.0)
    }

    pub fn state_label(&self, x: StateId) -> &str {
        &self.state_labels[x.0]
    }

    pub fn action_label(&self, a: ActionId) -> &str {
        &self.action_labels[a.0]
    }

    pub fn state_by_label(&self, label: &str) -> Result<StateId> {
        self.state_index
            .get(label)
            .map(|&i| StateId(i))
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }

    pub fn action_by_label(&self, label: &str) -> Result<ActionId> {
        self.action_index
            .get(label)
            .map(|&i| ActionId(i))
            .ok_or_else(|| Error::UnknownAction(label.to_string()))
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.n_states()).map(StateId)
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> {
        (0..self.n_actions()).map(ActionId)
    }
}

/// A candidate proxy set U' ⊆ H. Structural soundness (N.1/N.2) is checked
/// separately by `validate_proxy`; membership in H is checked here.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxySet {
    states: Vec<StateId>, // sorted, deduped
}

impl ProxySet {
    pub fn new(mdp: &Mdp, mut states: Vec<StateId>) -> Result<Self> {
        states.sort();
        states.dedup();
        for &x in &states {
            if !mdp.partition().is_taboo(x) {
                return Err(Error::ProxyOutsideTaboo(mdp.state_label(x).to_string()));
            }
        }
        Ok(ProxySet { states })
    }

    pub fn from_labels(mdp: &Mdp, labels: &[&str]) -> Result<Self> {
        let states = labels
            .iter()
            .map(|l| mdp.state_by_label(l))
            .collect::<Result<Vec<_>>>()?;
        Self::new(mdp, states)
    }

    pub fn contains(&self, x: StateId) -> bool {
        self.states.binary_search(&x).is_ok()
    }

    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn rejects_empty_forbidden_set() {
        let part = Partition::new(vec![Role::Taboo, Role::Target]);
        assert!(matches!(part, Err(Error::EmptyForbidden)));
    }

    #[test]
    fn accepts_row_sum_within_tolerance() {
        let part = Partition::new(vec![Role::Taboo, Role::Target, Role::Forbidden]).unwrap();
        let mdp = Mdp::new(
            labels("s", 3),
            labels("a", 1),
            part,
            &[(0, 0, 1, 0.999999999)],
        )
        .unwrap();
        let row = mdp.row(StateId(0), ActionId(0));
        let sum: f64 = row.iter().map(|&(_, p)| p).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_row_sum_outside_tolerance() {
        let part = Partition::new(vec![Role::Taboo, Role::Target, Role::Forbidden]).unwrap();
        let err = Mdp::new(labels("s", 3), labels("a", 1), part, &[(0, 0, 1, 0.9)]);
        assert!(matches!(err, Err(Error::NonStochasticRow { .. })));
    }

    #[test]
    fn terminals_become_absorbing() {
        let part = Partition::new(vec![Role::Taboo, Role::Target, Role::Forbidden]).unwrap();
        let mdp = Mdp::new(
            labels("s", 3),
            labels("a", 1),
            part,
            // file claims the target state moves away; load overrides it
            &[(0, 0, 1, 1.0), (1, 0, 0, 1.0)],
        )
        .unwrap();
        assert_eq!(mdp.prob(StateId(1), ActionId(0), StateId(1)), 1.0);
        assert_eq!(mdp.prob(StateId(2), ActionId(0), StateId(2)), 1.0);
    }

    #[test]
    fn proxy_must_be_taboo() {
        let part = Partition::new(vec![Role::Taboo, Role::Target, Role::Forbidden]).unwrap();
        let mdp = Mdp::new(labels("s", 3), labels("a", 1), part, &[(0, 0, 1, 1.0)]).unwrap();
        assert!(ProxySet::new(&mdp, vec![StateId(1)]).is_err());
        assert!(ProxySet::new(&mdp, vec![StateId(0)]).is_ok());
    }
}
