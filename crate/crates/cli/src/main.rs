//! `verify`: certify p-safety of policies on finite MDPs and learn safety
//! functions online without behaving unsafely.
//!
//! Subcommands: `validate` (check files and certificates), `solve` (exact
//! safety via the hitting-probability system), `learn` (safe off-policy
//! TD(0); refuses to run a single episode unless the full certification
//! chain passes), `generate` (seeded certified random instances) and
//! `report` (summarize trace CSVs).
//!
//! Exit codes: 0 success / certified safe, 1 validation or certification
//! failure (including an unsafe verdict), 2 malformed input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use psafe_core::*;

#[derive(Parser)]
#[command(name = "verify", version, about = "p-safety certification and safe online learning on finite MDPs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ModelArgs {
    /// MDP description file
    #[arg(long)]
    mdp: PathBuf,
    /// Target policy file (domain: all taboo states)
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Baseline sub-policy file (domain: the proxy set)
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Proxy states: comma-separated labels, or @FILE with one label per
    /// token
    #[arg(long)]
    proxy: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check that the given files parse, validate, and (when a baseline and
    /// proxy are given) certify.
    Validate {
        #[command(flatten)]
        model: ModelArgs,
        /// Safety level for baseline certification
        #[arg(long, default_value_t = 0.1)]
        p: f64,
    },
    /// Compute the exact safety function of a policy.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        /// Also emit a p-safety verdict (exit 1 when unsafe)
        #[arg(long)]
        p: Option<f64>,
        /// Write the solution CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn the target policy's safety function online; behaves only as
    /// the certified behavior policy.
    Learn {
        #[command(flatten)]
        model: ModelArgs,
        /// Safety level the baseline must certify at
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        #[arg(long, default_value_t = 100_000)]
        episodes: u64,
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: u64,
        /// One or more comma-separated seeds; each runs independently
        #[arg(long, default_value = "0")]
        seed: String,
        /// two-phase | constant:ALPHA | harmonic:C
        #[arg(long, default_value = "two-phase")]
        schedule: String,
        /// Cap on the importance-sampling ratio (waives the coverage check)
        #[arg(long)]
        is_cap: Option<f64>,
        /// Snapshot cadence in episodes
        #[arg(long, default_value_t = 10_000)]
        eval_every: u64,
        /// Output directory; one run-<seed>/ subdirectory per seed
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a certified random instance.
    Generate {
        #[arg(long, default_value_t = 8)]
        n_taboo: usize,
        #[arg(long, default_value_t = 2)]
        n_actions: usize,
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for mdp.txt, target.policy, baseline.policy,
        /// proxy.txt
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a learning trace CSV.
    Report {
        /// Trace CSV produced by `learn`
        #[arg(long)]
        trace: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::Io)
}

fn load_model(args: &ModelArgs) -> Result<(Mdp, Option<PolicyTable>, Option<(PolicyTable, ProxySet)>)> {
    let mdp = load_mdp(&read(&args.mdp)?)?;
    let h = mdp.partition().taboo_states();
    let target = match &args.policy {
        Some(p) => Some(load_policy(&read(p)?, &mdp, &h, PolicyKind::Target)?),
        None => None,
    };
    let sub = match (&args.baseline, &args.proxy) {
        (Some(b), Some(spec)) => {
            let proxy = parse_proxy(&mdp, spec)?;
            let baseline =
                load_policy(&read(b)?, &mdp, proxy.states(), PolicyKind::BaselineSubPolicy)?;
            Some((baseline, proxy))
        }
        (None, None) => None,
        _ => {
            return Err(Error::InvalidConfig(
                "--baseline and --proxy must be given together".into(),
            ))
        }
    };
    Ok((mdp, target, sub))
}

fn parse_proxy(mdp: &Mdp, spec: &str) -> Result<ProxySet> {
    let labels: Vec<String> = if let Some(path) = spec.strip_prefix('@') {
        read(Path::new(path))?
            .lines()
            .flat_map(|l| {
                l.split('#')
                    .next()
                    .unwrap_or("")
                    .split_whitespace()
                    .map(str::to_string)
                    .collect::<Vec<_>>()
            })
            .collect()
    } else {
        spec.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    };
    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    ProxySet::from_labels(mdp, &refs)
}

fn parse_schedule(spec: &str) -> Result<LearningRateSchedule> {
    if spec == "two-phase" {
        return Ok(LearningRateSchedule::two_phase_default());
    }
    if let Some(a) = spec.strip_prefix("constant:") {
        let alpha: f64 = a
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad constant schedule '{spec}'")))?;
        return Ok(LearningRateSchedule::Constant { alpha });
    }
    if let Some(c) = spec.strip_prefix("harmonic:") {
        let c: f64 = c
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad harmonic schedule '{spec}'")))?;
        return Ok(LearningRateSchedule::PerStateHarmonic { c });
    }
    Err(Error::InvalidConfig(format!(
        "unknown schedule '{spec}' (expected two-phase, constant:ALPHA or harmonic:C)"
    )))
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Validate { model, p } => cmd_validate(&model, p),
        Cmd::Solve { model, p, out } => cmd_solve(&model, p, out.as_deref()),
        Cmd::Learn {
            model,
            p,
            episodes,
            max_steps,
            seed,
            schedule,
            is_cap,
            eval_every,
            out,
        } => cmd_learn(
            &model, p, episodes, max_steps, &seed, &schedule, is_cap, eval_every, &out,
        ),
        Cmd::Generate {
            n_taboo,
            n_actions,
            p,
            seed,
            out,
        } => cmd_generate(n_taboo, n_actions, p, seed, &out),
        Cmd::Report { trace } => cmd_report(&trace),
    }
}

fn cmd_validate(model: &ModelArgs, p: f64) -> Result<u8> {
    let (mdp, target, sub) = load_model(model)?;
    println!(
        "mdp ok: {} states ({} taboo), {} actions",
        mdp.n_states(),
        mdp.partition().taboo_states().len(),
        mdp.n_actions()
    );
    if let Some(target) = &target {
        println!("target policy ok: covers all taboo states");
        if certify_termination(&mdp, target) {
            println!("termination certified under target policy");
        } else {
            return Err(Error::TerminationUncertified(
                mdp.state_label(exact::find_trapped_state(&mdp, target).unwrap())
                    .to_string(),
            ));
        }
    }
    if let Some((baseline, proxy)) = &sub {
        let cert = validate_proxy(&mdp, proxy);
        if !cert.holds() {
            return Err(Error::ProxyInvalid(format!("{:?}", cert.witness)));
        }
        println!("proxy set ok: {} states, N.1 and N.2 hold", proxy.len());
        if let Some(target) = &target {
            if !coverage_check(&mdp, target, baseline, proxy) {
                return Err(Error::InvalidConfig(
                    "baseline does not cover the target policy on the proxy set".into(),
                ));
            }
            println!("coverage ok");
            let cert = certify_baseline(&mdp, target, baseline, proxy, p)?;
            if !cert.safe {
                return Err(Error::BaselineUnsafe {
                    p,
                    bound: cert.bound,
                    state: mdp.state_label(cert.bound_state.unwrap()).to_string(),
                });
            }
            println!(
                "baseline certified {p}-safe: bound {} at state {}",
                fmt17(cert.bound),
                mdp.state_label(cert.bound_state.unwrap())
            );
        }
    }
    Ok(0)
}

fn cmd_solve(model: &ModelArgs, p: Option<f64>, out: Option<&Path>) -> Result<u8> {
    let (mdp, target, _) = load_model(model)?;
    let target = target.ok_or_else(|| Error::InvalidConfig("solve requires --policy".into()))?;
    let safety = solve_safety(&mdp, &target)?;
    let csv = write_solve_csv(&mdp, &safety);
    match out {
        Some(path) => fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(p) = p {
        match certify_p_safety(&mdp, &safety, p) {
            SafetyVerdict::Safe { max, argmax, .. } => {
                println!(
                    "verdict: SAFE at p = {p} (max {} at state {})",
                    fmt17(max),
                    mdp.state_label(argmax)
                );
            }
            SafetyVerdict::Unsafe { worst_state, value } => {
                println!(
                    "verdict: UNSAFE at p = {p} (max {} at state {})",
                    fmt17(value),
                    mdp.state_label(worst_state)
                );
                return Ok(1);
            }
        }
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_learn(
    model: &ModelArgs,
    p: f64,
    episodes: u64,
    max_steps: u64,
    seed_spec: &str,
    schedule: &str,
    is_cap: Option<f64>,
    eval_every: u64,
    out: &Path,
) -> Result<u8> {
    let (mdp, target, sub) = load_model(model)?;
    let target =
        target.ok_or_else(|| Error::InvalidConfig("learn requires --policy".into()))?;
    let (baseline, proxy) = sub.ok_or_else(|| {
        Error::InvalidConfig("learn requires --baseline and --proxy".into())
    })?;
    let schedule = parse_schedule(schedule)?;
    let seeds: Vec<u64> = seed_spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::InvalidConfig(format!("bad seed '{s}'")))
        })
        .collect::<Result<_>>()?;

    // the certification chain gates every episode: a failure here means the
    // learner never acts in the environment
    let cert = validate_proxy(&mdp, &proxy);
    if !cert.holds() {
        return Err(Error::ProxyInvalid(format!("{:?}", cert.witness)));
    }
    if is_cap.is_none() && !coverage_check(&mdp, &target, &baseline, &proxy) {
        return Err(Error::InvalidConfig(
            "baseline does not cover the target policy on the proxy set".into(),
        ));
    }
    let baseline_cert = certify_baseline(&mdp, &target, &baseline, &proxy, p)?;
    if !baseline_cert.safe {
        return Err(Error::BaselineUnsafe {
            p,
            bound: baseline_cert.bound,
            state: mdp
                .state_label(baseline_cert.bound_state.unwrap())
                .to_string(),
        });
    }

    let behavior = compose_behavior_policy(&mdp, &target, &baseline, &proxy)?;
    let exact_target = solve_safety(&mdp, &target)?;
    let exact_behavior = solve_safety(&mdp, &behavior)?;

    fs::create_dir_all(out)?;
    let results: Vec<Result<(u64, f64, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let mdp = &mdp;
                let target = &target;
                let baseline = &baseline;
                let proxy = &proxy;
                let exact_target = &exact_target;
                let exact_behavior = &exact_behavior;
                let baseline_cert = &baseline_cert;
                scope.spawn(move || {
                    let mut cfg = LearnerConfig::new(episodes, seed);
                    cfg.max_steps_per_episode = max_steps;
                    cfg.schedule = schedule;
                    cfg.is_ratio_cap = is_cap;
                    cfg.eval_every = eval_every;
                    cfg.record_episodes = false;
                    let (s, sb, trace) =
                        run_algorithm1(mdp, target, baseline, proxy, &cfg)?;
                    let dir = out.join(format!("run-{seed}"));
                    fs::create_dir_all(&dir)?;
                    fs::write(
                        dir.join("trace.csv"),
                        write_trace_csv(mdp, &trace, exact_target, exact_behavior),
                    )?;
                    let err_t = s.sup_distance_on_taboo(exact_target, mdp);
                    let err_b = sb.sup_distance_on_taboo(exact_behavior, mdp);
                    fs::write(
                        dir.join("summary.txt"),
                        render_summary(
                            mdp, &cfg, p, baseline_cert, &s, exact_target, err_t, err_b, &trace,
                        ),
                    )?;
                    fs::write(dir.join("audit.log"), render_audit(&trace))?;
                    Ok((seed, err_t, err_b))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("learner thread panicked"))
            .collect()
    });

    for r in results {
        let (seed, err_t, err_b) = r?;
        println!(
            "seed {seed}: sup error target {} behavior {}",
            fmt17(err_t),
            fmt17(err_b)
        );
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn render_summary(
    mdp: &Mdp,
    cfg: &LearnerConfig,
    p: f64,
    baseline_cert: &BaselineCertificate,
    learned: &SafetyVector,
    exact_target: &SafetyVector,
    err_t: f64,
    err_b: f64,
    trace: &RunTrace,
) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "states: {} ({} taboo), actions: {}\n",
        mdp.n_states(),
        mdp.partition().taboo_states().len(),
        mdp.n_actions()
    ));
    out.push_str(&format!("seed: {}\n", cfg.seed));
    out.push_str(&format!("episodes: {}\n", cfg.episodes));
    out.push_str(&format!("schedule: {:?}\n", cfg.schedule));
    out.push_str(&format!("p: {}\n", fmt17(p)));
    out.push_str(&format!(
        "baseline bound: {} (certified {}-safe)\n",
        fmt17(baseline_cert.bound),
        p
    ));
    out.push_str(&format!("final sup error (target estimate): {}\n", fmt17(err_t)));
    out.push_str(&format!("final sup error (behavior estimate): {}\n", fmt17(err_b)));
    out.push_str(&format!(
        "unsafe episode fraction: {}\n",
        fmt17(trace.unsafe_episode_frac())
    ));
    match certify_p_safety(mdp, exact_target, p) {
        SafetyVerdict::Safe { max, argmax, .. } => out.push_str(&format!(
            "target policy exact verdict: SAFE (max {} at {})\n",
            fmt17(max),
            mdp.state_label(argmax)
        )),
        SafetyVerdict::Unsafe { worst_state, value } => out.push_str(&format!(
            "target policy exact verdict: UNSAFE (max {} at {})\n",
            fmt17(value),
            mdp.state_label(worst_state)
        )),
    }
    out.push_str("learned safety (taboo states):\n");
    for x in mdp.partition().taboo_states() {
        out.push_str(&format!(
            "  {} {} (exact {})\n",
            mdp.state_label(x),
            fmt17(learned.get(x)),
            fmt17(exact_target.get(x))
        ));
    }
    out
}

fn render_audit(trace: &RunTrace) -> String {
    format!(
        "target_draws_at_proxy: {}\n\
         baseline_draws_at_proxy: {}\n\
         forbidden_entries_from_nonproxy: {}\n\
         episodes_hit_target: {}\n\
         episodes_hit_forbidden: {}\n\
         episodes_truncated: {}\n\
         truncation_warning: {}\n",
        trace.target_draws_at_proxy,
        trace.baseline_draws_at_proxy,
        trace.forbidden_entries_from_nonproxy,
        trace.episodes_hit_target,
        trace.episodes_hit_forbidden,
        trace.episodes_truncated,
        trace.truncation_warning,
    )
}

fn cmd_generate(n_taboo: usize, n_actions: usize, p: f64, seed: u64, out: &Path) -> Result<u8> {
    let spec = RandomMdpSpec::new(n_taboo, n_actions, p);
    let inst = generate_instance(&spec, seed)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("mdp.txt"), serialize_mdp(&inst.mdp))?;
    fs::write(
        out.join("target.policy"),
        serialize_policy(&inst.mdp, &inst.target),
    )?;
    fs::write(
        out.join("baseline.policy"),
        serialize_policy(&inst.mdp, &inst.baseline),
    )?;
    let proxy_labels: Vec<&str> = inst
        .proxy
        .states()
        .iter()
        .map(|&x| inst.mdp.state_label(x))
        .collect();
    fs::write(out.join("proxy.txt"), format!("{}\n", proxy_labels.join(" ")))?;
    println!(
        "generated certified instance: {} taboo states, {} proxy states, baseline bound {} (attempt {})",
        n_taboo,
        inst.proxy.len(),
        fmt17(inst.certificate.bound),
        inst.attempts
    );
    Ok(0)
}

fn cmd_report(trace: &Path) -> Result<u8> {
    let rows = read_trace_csv(&read(trace)?)?;
    let s = summarize_trace(&rows)?;
    println!("episodes: {}", s.final_episode);
    println!("snapshots: {}", s.snapshots);
    println!("final sup error (target estimate): {}", fmt17(s.final_sup_err_target));
    println!(
        "final sup error (behavior estimate): {}",
        fmt17(s.final_sup_err_behavior)
    );
    println!("unsafe episode fraction: {}", fmt17(s.final_unsafe_frac));
    Ok(0)
}
