//! Safe episodic TD(0) learning of the safety function.
//!
//! The learner runs episodes under the behavior policy (baseline sub-policy
//! on the proxy set, target policy elsewhere) and maintains two estimates:
//! the target-policy estimate S, updated with per-decision importance
//! sampling on proxy states and the plain TD(0) rule elsewhere, and the
//! behavior-policy estimate S^b, updated with the plain rule everywhere.
//! Terminal estimates are pinned to 0 and never touched. Runs are fully
//! deterministic given the seed; a single run is strictly sequential.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exact::{certify_termination, find_trapped_state, sample_row, SafetyVector};
use crate::mdp::{Mdp, ProxySet, StateId};
use crate::policy::{compose_behavior_policy, coverage_check, PolicyTable};

/// Step-size schedule. The two-phase and harmonic variants satisfy the
/// stochastic-approximation step conditions at desk scale (Σα large, Σα²
/// bounded); constant α does not converge in theory and is allowed for
/// experimentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRateSchedule {
    Constant { alpha: f64 },
    /// α_k = α₀ for k ≤ L/2, then α_k = α_{k−1} / (1 + decay·ln(k+1)),
    /// indexed by episode k globally. Defaults: α₀ = 0.001, decay = 1e-6.
    TwoPhase { alpha0: f64, decay: f64 },
    /// α = c / (c + N(x)) with N(x) the visit count of the updated state.
    PerStateHarmonic { c: f64 },
}

impl LearningRateSchedule {
    pub fn two_phase_default() -> Self {
        LearningRateSchedule::TwoPhase {
            alpha0: 0.001,
            decay: 1e-6,
        }
    }

    /// (Σ α_t, Σ α_t²) over the first `t` steps of the global sequence
    /// (for the harmonic variant: `t` visits to one state). Numeric
    /// check of the step-size conditions at desk scale.
    pub fn partial_sums(&self, t: u64, total_episodes: u64) -> (f64, f64) {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        match *self {
            LearningRateSchedule::Constant { alpha } => {
                sum = alpha * t as f64;
                sum_sq = alpha * alpha * t as f64;
            }
            LearningRateSchedule::TwoPhase { alpha0, decay } => {
                let mut alpha = alpha0;
                for k in 1..=t {
                    if k > total_episodes / 2 {
                        alpha /= 1.0 + decay * ((k + 1) as f64).ln();
                    }
                    sum += alpha;
                    sum_sq += alpha * alpha;
                }
            }
            LearningRateSchedule::PerStateHarmonic { c } => {
                for n in 0..t {
                    let alpha = c / (c + n as f64);
                    sum += alpha;
                    sum_sq += alpha * alpha;
                }
            }
        }
        (sum, sum_sq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialEstimate {
    Zeros,
    /// Uniform-random in [0,1] on taboo states, from a sub-seeded stream.
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub episodes: u64,
    pub max_steps_per_episode: u64,
    pub seed: u64,
    pub schedule: LearningRateSchedule,
    pub initial_estimate: InitialEstimate,
    /// Optional cap on the importance-sampling ratio; off by default.
    pub is_ratio_cap: Option<f64>,
    /// Snapshot cadence in episodes; a final snapshot is always taken.
    pub eval_every: u64,
    /// Keep the per-episode record vector (start, steps, terminal kind).
    /// Aggregate counters are kept regardless.
    pub record_episodes: bool,
}

impl LearnerConfig {
    pub fn new(episodes: u64, seed: u64) -> Self {
        LearnerConfig {
            episodes,
            max_steps_per_episode: 1_000_000,
            seed,
            schedule: LearningRateSchedule::two_phase_default(),
            initial_estimate: InitialEstimate::UniformRandom,
            is_ratio_cap: None,
            eval_every: u64::MAX,
            record_episodes: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes < 1 {
            return Err(Error::InvalidConfig("episodes must be >= 1".into()));
        }
        if self.max_steps_per_episode < 1 {
            return Err(Error::InvalidConfig("max_steps_per_episode must be >= 1".into()));
        }
        if self.eval_every < 1 {
            return Err(Error::InvalidConfig("eval_every must be >= 1".into()));
        }
        if let Some(cap) = self.is_ratio_cap {
            if !(cap > 0.0) {
                return Err(Error::InvalidConfig("is_ratio_cap must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Plain TD(0) update at a taboo state: S(x) += α (c + S(y) − S(x)).
pub fn step_on_policy(estimate: &mut [f64], x: StateId, y: StateId, c: f64, alpha: f64) {
    let delta = c + estimate[y.0] - estimate[x.0];
    estimate[x.0] += alpha * delta;
}

/// Per-decision importance-sampling update at a proxy state:
/// S(x') += α ρ (c + S(y) − S(x')) with ρ = π(a|x')/π^S(a|x').
pub fn step_off_policy(estimate: &mut [f64], x: StateId, y: StateId, c: f64, alpha: f64, rho: f64) {
    let delta = c + estimate[y.0] - estimate[x.0];
    estimate[x.0] += alpha * rho * delta;
}

/// ρ = π(a|x')/π^S(a|x'), hard error on a zero denominator, optionally
/// capped.
pub fn importance_ratio(
    mdp: &Mdp,
    target: &PolicyTable,
    baseline: &PolicyTable,
    x: StateId,
    a: crate::mdp::ActionId,
    cap: Option<f64>,
) -> Result<f64> {
    let denom = baseline.prob(x, a);
    if denom == 0.0 {
        return Err(Error::ZeroImportanceDenominator {
            state: mdp.state_label(x).to_string(),
            action: mdp.action_label(a).to_string(),
        });
    }
    let mut rho = target.prob(x, a) / denom;
    if let Some(cap) = cap {
        rho = rho.min(cap);
    }
    Ok(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalKind {
    HitTarget,
    HitForbidden,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub start: u32,
    pub steps: u32,
    pub terminal: TerminalKind,
}

/// Estimates snapshotted at the eval cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub episode: u64,
    pub s_target: Vec<f64>,
    pub s_behavior: Vec<f64>,
    /// Fraction of episodes so far that terminated in U.
    pub unsafe_frac: f64,
}

/// Seeded learning run record.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub config: LearnerConfig,
    pub episodes: Vec<EpisodeRecord>,
    pub snapshots: Vec<Snapshot>,
    pub visits: Vec<u64>,
    pub episodes_hit_target: u64,
    pub episodes_hit_forbidden: u64,
    pub episodes_truncated: u64,
    /// Safety audit: actions drawn from the target policy at proxy states
    /// (must stay 0 for the safe learner) and transitions entering U from
    /// outside the proxy set.
    pub target_draws_at_proxy: u64,
    pub baseline_draws_at_proxy: u64,
    pub forbidden_entries_from_nonproxy: u64,
    pub truncation_warning: bool,
}

impl RunTrace {
    pub fn unsafe_episode_frac(&self) -> f64 {
        let total = self.episodes_hit_target + self.episodes_hit_forbidden + self.episodes_truncated;
        if total == 0 {
            0.0
        } else {
            self.episodes_hit_forbidden as f64 / total as f64
        }
    }
}

/// The safe episodic off-policy learner.
///
/// Preconditions (checked): nonempty taboo set, coverage (unless a ratio
/// cap is configured) and almost-sure termination under the behavior
/// policy. Proxy validation and baseline certification are the harness's
/// gate and are not re-run here.
pub fn run_algorithm1(
    mdp: &Mdp,
    target: &PolicyTable,
    baseline: &PolicyTable,
    proxy: &ProxySet,
    config: &LearnerConfig,
) -> Result<(SafetyVector, SafetyVector, RunTrace)> {
    config.validate()?;
    let behavior = compose_behavior_policy(mdp, target, baseline, proxy)?;
    if config.is_ratio_cap.is_none() && !coverage_check(mdp, target, baseline, proxy) {
        for &x in proxy.states() {
            for a in mdp.actions() {
                if target.prob(x, a) > 0.0 && baseline.prob(x, a) == 0.0 {
                    return Err(Error::CoverageViolation {
                        state: mdp.state_label(x).to_string(),
                        action: mdp.action_label(a).to_string(),
                        target_prob: target.prob(x, a),
                    });
                }
            }
        }
    }
    if !certify_termination(mdp, &behavior) {
        let x = find_trapped_state(mdp, &behavior).expect("trapped state exists");
        return Err(Error::TerminationUncertified(
            mdp.state_label(x).to_string(),
        ));
    }
    run_loop(mdp, target, Some((baseline, proxy)), config)
}

/// Plain on-policy TD(0): behaves with `policy` everywhere, single
/// estimate, no safety wrapper. Reference learner for comparisons.
pub fn run_on_policy(
    mdp: &Mdp,
    policy: &PolicyTable,
    config: &LearnerConfig,
) -> Result<(SafetyVector, RunTrace)> {
    config.validate()?;
    if !certify_termination(mdp, policy) {
        let x = find_trapped_state(mdp, policy).expect("trapped state exists");
        return Err(Error::TerminationUncertified(
            mdp.state_label(x).to_string(),
        ));
    }
    let (s, _sb, trace) = run_loop(mdp, policy, None, config)?;
    Ok((s, trace))
}

fn run_loop(
    mdp: &Mdp,
    target: &PolicyTable,
    off_policy: Option<(&PolicyTable, &ProxySet)>,
    config: &LearnerConfig,
) -> Result<(SafetyVector, SafetyVector, RunTrace)> {
    let h = mdp.partition().taboo_states();
    if h.is_empty() {
        return Err(Error::InvalidConfig("taboo set is empty".into()));
    }

    let n = mdp.n_states();
    let mut s = vec![0.0; n];
    let mut sb = vec![0.0; n];
    if config.initial_estimate == InitialEstimate::UniformRandom {
        // sub-seeded streams so the init is deterministic and independent
        // of the episode stream
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
        init_rng.set_stream(u64::MAX);
        for &x in &h {
            s[x.0] = init_rng.gen::<f64>();
        }
        let mut init_rng_b = ChaCha8Rng::seed_from_u64(config.seed);
        init_rng_b.set_stream(u64::MAX - 1);
        for &x in &h {
            sb[x.0] = init_rng_b.gen::<f64>();
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut trace = RunTrace {
        config: config.clone(),
        episodes: Vec::new(),
        snapshots: Vec::new(),
        visits: vec![0; n],
        episodes_hit_target: 0,
        episodes_hit_forbidden: 0,
        episodes_truncated: 0,
        target_draws_at_proxy: 0,
        baseline_draws_at_proxy: 0,
        forbidden_entries_from_nonproxy: 0,
        truncation_warning: false,
    };

    let mut alpha_k = match config.schedule {
        LearningRateSchedule::Constant { alpha } => alpha,
        LearningRateSchedule::TwoPhase { alpha0, .. } => alpha0,
        LearningRateSchedule::PerStateHarmonic { .. } => 0.0,
    };

    for k in 1..=config.episodes {
        if let LearningRateSchedule::TwoPhase { decay, .. } = config.schedule {
            if k > config.episodes / 2 {
                alpha_k /= 1.0 + decay * ((k + 1) as f64).ln();
            }
        }

        let start = h[rng.gen_range(0..h.len())];
        let mut x = start;
        let mut steps = 0u32;
        let mut terminal = TerminalKind::Truncated;

        for _ in 0..config.max_steps_per_episode {
            steps += 1;
            let on_proxy = off_policy
                .map(|(_, proxy)| proxy.contains(x))
                .unwrap_or(false);

            let a = if on_proxy {
                trace.baseline_draws_at_proxy += 1;
                let (baseline, _) = off_policy.unwrap();
                baseline.sample(x, rng.gen::<f64>())
            } else {
                // off the proxy set the behavior policy IS the target policy
                target.sample(x, rng.gen::<f64>())
            };

            let y = StateId(sample_row(mdp.row(x, a), rng.gen::<f64>()));
            let c = if mdp.partition().is_forbidden(y) { 1.0 } else { 0.0 };
            if c == 1.0 && !on_proxy {
                trace.forbidden_entries_from_nonproxy += 1;
            }

            let alpha = match config.schedule {
                LearningRateSchedule::PerStateHarmonic { c } => {
                    c / (c + trace.visits[x.0] as f64)
                }
                _ => alpha_k,
            };

            if on_proxy {
                let (baseline, _) = off_policy.unwrap();
                let rho = importance_ratio(mdp, target, baseline, x, a, config.is_ratio_cap)?;
                step_off_policy(&mut s, x, y, c, alpha, rho);
            } else {
                step_on_policy(&mut s, x, y, c, alpha);
            }
            step_on_policy(&mut sb, x, y, c, alpha);
            trace.visits[x.0] += 1;

            if mdp.partition().is_terminal(y) {
                terminal = if c == 1.0 {
                    TerminalKind::HitForbidden
                } else {
                    TerminalKind::HitTarget
                };
                break;
            }
            x = y;
        }

        match terminal {
            TerminalKind::HitTarget => trace.episodes_hit_target += 1,
            TerminalKind::HitForbidden => trace.episodes_hit_forbidden += 1,
            TerminalKind::Truncated => trace.episodes_truncated += 1,
        }
        if config.record_episodes {
            trace.episodes.push(EpisodeRecord {
                start: start.0 as u32,
                steps,
                terminal,
            });
        }
        if k % config.eval_every == 0 || k == config.episodes {
            trace.snapshots.push(Snapshot {
                episode: k,
                s_target: s.clone(),
                s_behavior: sb.clone(),
                unsafe_frac: trace.episodes_hit_forbidden as f64 / k as f64,
            });
        }
    }

    trace.truncation_warning =
        trace.episodes_truncated as f64 > 0.5 * config.episodes as f64;

    let tag_b = if off_policy.is_some() { "behavior-estimate" } else { "on-policy-estimate" };
    Ok((
        SafetyVector::new(s, "target-estimate"),
        SafetyVector::new(sb, tag_b),
        trace,
    ))
}

/// Per-snapshot error series against an exact oracle (target estimate).
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub episode: u64,
    pub sup_err: f64,
    /// (state, |estimate − oracle|) over the taboo set.
    pub per_state: Vec<(StateId, f64)>,
}

pub fn convergence_report(trace: &RunTrace, mdp: &Mdp, oracle: &SafetyVector) -> Vec<ReportRow> {
    trace
        .snapshots
        .iter()
        .map(|snap| {
            let per_state: Vec<(StateId, f64)> = mdp
                .partition()
                .taboo_states()
                .into_iter()
                .map(|x| (x, (snap.s_target[x.0] - oracle.get(x)).abs()))
                .collect();
            let sup_err = per_state.iter().map(|&(_, e)| e).fold(0.0, f64::max);
            ReportRow {
                episode: snap.episode,
                sup_err,
                per_state,
            }
        })
        .collect()
}
