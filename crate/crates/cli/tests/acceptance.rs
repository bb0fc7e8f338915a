//! Acceptance gate: one test per criterion, each printing a single
//! `criterion N: PASS` / `criterion N: FAIL` line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::process::Command;
use std::time::{Duration, Instant};

use psafe_core::*;

fn verdict(n: usize, ok: bool) {
    println!("criterion {n}: {}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed");
}

fn behavior_of(fix: &Fixture) -> PolicyTable {
    compose_behavior_policy(&fix.mdp, &fix.target, &fix.baseline, &fix.proxy).unwrap()
}

/// 1. Exact solver: 200 seeded random instances (|H| ≤ 10, |A| ≤ 3,
///    leak ≥ 0.05) solve with residual ≤ 1e-10 and values in [0, 1],
///    within 10 seconds.
#[test]
fn criterion_1_exact_solver_on_random_instances() {
    let start = Instant::now();
    let mut ok = true;
    for i in 0..200u64 {
        let n_taboo = 2 + (i % 9) as usize; // 2..=10
        let n_actions = 2 + (i % 2) as usize; // 2..=3
        let spec = RandomMdpSpec::new(n_taboo, n_actions, 0.5);
        let inst = generate_instance(&spec, 10_000 + i).unwrap();
        // solve_safety enforces the 1e-10 residual internally; a residual
        // breach surfaces as an error here
        let s = match solve_safety(&inst.mdp, &inst.target) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("instance {i}: solve failed: {e}");
                ok = false;
                continue;
            }
        };
        if !inst.mdp.states().all(|x| (0.0..=1.0).contains(&s.get(x))) {
            eprintln!("instance {i}: value outside [0,1]");
            ok = false;
        }
    }
    ok &= start.elapsed() <= Duration::from_secs(10);
    verdict(1, ok);
}

/// 2. Monte-Carlo cross-validation: on 20 instances, the exact solution
///    lies within 3 half-widths of the 1e5-episode estimate at every taboo
///    start state, within 60 seconds.
#[test]
fn criterion_2_monte_carlo_cross_validation() {
    let start = Instant::now();
    let mut ok = true;
    for i in 0..20u64 {
        let spec = RandomMdpSpec::new(4 + (i % 5) as usize, 2, 0.5);
        let inst = generate_instance(&spec, 20_000 + i).unwrap();
        let s = solve_safety(&inst.mdp, &inst.target).unwrap();
        for x in inst.mdp.partition().taboo_states() {
            let mc = monte_carlo_safety(&inst.mdp, &inst.target, x, 100_000, 31 + i, 100_000);
            if mc.truncated > 0 || (mc.estimate - s.get(x)).abs() > 3.0 * mc.half_width {
                eprintln!(
                    "instance {i} state {}: mc {} vs exact {} (hw {})",
                    inst.mdp.state_label(x),
                    mc.estimate,
                    s.get(x),
                    mc.half_width
                );
                ok = false;
            }
        }
    }
    ok &= start.elapsed() <= Duration::from_secs(60);
    verdict(2, ok);
}

/// 3. Proxy bound: under the certified behavior policy, every taboo state's
///    safety is dominated by the proxy-set maximum (tolerance 1e-9), with
///    zero violations across 200 instances.
#[test]
fn criterion_3_proxy_bound_dominates() {
    let mut violations = 0u32;
    for i in 0..200u64 {
        let spec = RandomMdpSpec::new(2 + (i % 9) as usize, 2 + (i % 2) as usize, 0.5);
        let inst = generate_instance(&spec, 30_000 + i).unwrap();
        let cert = &inst.certificate;
        for x in inst.mdp.partition().taboo_states() {
            if cert.safety.get(x) > cert.bound + 1e-9 {
                violations += 1;
            }
        }
    }
    verdict(3, violations == 0);
}

/// 4. Learning accuracy: at 1e6 episodes with the two-phase schedule, both
///    the target and behavior estimates land within 0.02 sup error of the
///    exact solutions, for at least 9 of 10 seeds on the bundled walk model
///    and at least 9 of 10 generated instances, within 5 minutes.
#[test]
fn criterion_4_learning_converges() {
    let start = Instant::now();

    let run = |mdp: &Mdp,
               target: &PolicyTable,
               baseline: &PolicyTable,
               proxy: &ProxySet,
               seed: u64|
     -> bool {
        let behavior = compose_behavior_policy(mdp, target, baseline, proxy).unwrap();
        let exact_t = solve_safety(mdp, target).unwrap();
        let exact_b = solve_safety(mdp, &behavior).unwrap();
        let mut cfg = LearnerConfig::new(1_000_000, seed);
        cfg.schedule = LearningRateSchedule::two_phase_default();
        cfg.record_episodes = false;
        cfg.eval_every = u64::MAX;
        let (s, sb, _) = run_algorithm1(mdp, target, baseline, proxy, &cfg).unwrap();
        let err_t = s.sup_distance_on_taboo(&exact_t, mdp);
        let err_b = sb.sup_distance_on_taboo(&exact_b, mdp);
        if err_t > 0.02 || err_b > 0.02 {
            eprintln!("seed {seed}: sup errors target {err_t} behavior {err_b}");
            false
        } else {
            true
        }
    };

    let results: Vec<bool> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for seed in 0..10u64 {
            handles.push(scope.spawn(move || {
                let fix = gambler_buffer();
                run(&fix.mdp, &fix.target, &fix.baseline, &fix.proxy, seed)
            }));
        }
        for i in 0..10u64 {
            handles.push(scope.spawn(move || {
                let spec = RandomMdpSpec::new(6, 2, 0.1);
                let inst = generate_instance(&spec, 40_000 + i).unwrap();
                run(&inst.mdp, &inst.target, &inst.baseline, &inst.proxy, 100 + i)
            }));
        }
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let fixture_passes = results[..10].iter().filter(|&&b| b).count();
    let generated_passes = results[10..].iter().filter(|&&b| b).count();
    let in_budget = start.elapsed() <= Duration::from_secs(300);
    if !in_budget {
        eprintln!("criterion 4 exceeded the 5-minute budget");
    }
    verdict(4, fixture_passes >= 9 && generated_passes >= 9 && in_budget);
}

/// 5. Safety during learning: across 100 seeded runs at p = 0.1, the audit
///    counters show zero target-policy draws at proxy states, and the
///    pooled fraction of episodes ending in the forbidden set stays within
///    3 standard errors of the behavior policy's mean taboo-state safety.
#[test]
fn criterion_5_learning_never_behaves_unsafely() {
    let fix = gambler_buffer();
    let behavior = behavior_of(&fix);
    let exact_b = solve_safety(&fix.mdp, &behavior).unwrap();
    let h = fix.mdp.partition().taboo_states();
    let mean_sb: f64 =
        h.iter().map(|&x| exact_b.get(x)).sum::<f64>() / h.len() as f64;

    let episodes_per_run = 5_000u64;
    let mut total_forbidden = 0u64;
    let mut total_episodes = 0u64;
    let mut audit_clean = true;
    for seed in 0..100u64 {
        let mut cfg = LearnerConfig::new(episodes_per_run, seed);
        cfg.record_episodes = false;
        cfg.eval_every = u64::MAX;
        let (_, _, trace) =
            run_algorithm1(&fix.mdp, &fix.target, &fix.baseline, &fix.proxy, &cfg).unwrap();
        audit_clean &= trace.target_draws_at_proxy == 0;
        audit_clean &= trace.forbidden_entries_from_nonproxy == 0;
        audit_clean &= trace.episodes_truncated == 0;
        total_forbidden += trace.episodes_hit_forbidden;
        total_episodes += episodes_per_run;
    }
    let frac = total_forbidden as f64 / total_episodes as f64;
    let se = (mean_sb * (1.0 - mean_sb) / total_episodes as f64).sqrt();
    let within = frac <= mean_sb + 3.0 * se;
    if !within {
        eprintln!("unsafe fraction {frac} vs mean {mean_sb} + 3·{se}");
    }
    verdict(5, audit_clean && within);
}

/// 6. Benchmark reproduction: the exact solver matches the published
///    taboo-state safety values of the 12-state model within 5e-5 each,
///    and a 1e7-episode learning run lands within 0.015 of the exact target
///    and behavior safety functions.
#[test]
fn criterion_6_twelve_state_benchmark() {
    let fix = twelve_state();
    let s = solve_safety(&fix.mdp, &fix.target).unwrap();
    let published = [0.7144, 0.7387, 0.69, 0.7875, 0.5, 0.3, 0.625, 0.5];
    let mut ok = true;
    for (i, &x) in fix.mdp.partition().taboo_states().iter().enumerate() {
        if (s.get(x) - published[i]).abs() > 5.0001e-5 {
            eprintln!(
                "state {}: exact {} vs published {}",
                fix.mdp.state_label(x),
                s.get(x),
                published[i]
            );
            ok = false;
        }
    }

    let behavior = behavior_of(&fix);
    let exact_b = solve_safety(&fix.mdp, &behavior).unwrap();
    let mut cfg = LearnerConfig::new(10_000_000, 1);
    cfg.schedule = LearningRateSchedule::two_phase_default();
    cfg.record_episodes = false;
    cfg.eval_every = u64::MAX;
    let (learned_t, learned_b, trace) =
        run_algorithm1(&fix.mdp, &fix.target, &fix.baseline, &fix.proxy, &cfg).unwrap();
    let err_t = learned_t.sup_distance_on_taboo(&s, &fix.mdp);
    let err_b = learned_b.sup_distance_on_taboo(&exact_b, &fix.mdp);
    if err_t > 0.015 || err_b > 0.015 {
        eprintln!("learning errors: target {err_t}, behavior {err_b}");
        ok = false;
    }
    ok &= trace.target_draws_at_proxy == 0;
    verdict(6, ok);
}

/// 7. Determinism: repeated CLI invocations with the same seed produce
///    byte-identical outputs.
#[test]
fn criterion_7_cli_outputs_are_reproducible() {
    let models = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models");
    let p = |rel: &str| models.join(rel).to_str().unwrap().to_string();
    let mut ok = true;

    let solve_args = [
        "solve".to_string(),
        "--mdp".into(),
        p("twelve-state/mdp.txt"),
        "--policy".into(),
        p("twelve-state/target.policy"),
        "--p".into(),
        "0.8".into(),
    ];
    let run = |args: &[String]| {
        Command::new(env!("CARGO_BIN_EXE_verify"))
            .args(args)
            .output()
            .unwrap()
    };
    let a = run(&solve_args);
    let b = run(&solve_args);
    ok &= a.stdout == b.stdout && !a.stdout.is_empty();

    let dir = tempfile::tempdir().unwrap();
    for sub in ["x", "y"] {
        let out = Command::new(env!("CARGO_BIN_EXE_verify"))
            .args([
                "learn",
                "--mdp",
                &p("gambler-buffer/mdp.txt"),
                "--policy",
                &p("gambler-buffer/target.policy"),
                "--baseline",
                &p("gambler-buffer/baseline.policy"),
                "--proxy",
                "buf",
                "--episodes",
                "20000",
                "--eval-every",
                "5000",
                "--seed",
                "42",
                "--out",
                dir.path().join(sub).to_str().unwrap(),
            ])
            .output()
            .unwrap();
        ok &= out.status.success();
    }
    for file in ["trace.csv", "summary.txt", "audit.log"] {
        let x = std::fs::read(dir.path().join("x/run-42").join(file)).unwrap();
        let y = std::fs::read(dir.path().join("y/run-42").join(file)).unwrap();
        ok &= x == y && !x.is_empty();
    }

    for sub in ["g1", "g2"] {
        let out = Command::new(env!("CARGO_BIN_EXE_verify"))
            .args([
                "generate",
                "--seed",
                "5",
                "--out",
                dir.path().join(sub).to_str().unwrap(),
            ])
            .output()
            .unwrap();
        ok &= out.status.success();
    }
    for file in ["mdp.txt", "target.policy", "baseline.policy", "proxy.txt"] {
        let x = std::fs::read(dir.path().join("g1").join(file)).unwrap();
        let y = std::fs::read(dir.path().join("g2").join(file)).unwrap();
        ok &= x == y && !x.is_empty();
    }

    verdict(7, ok);
}
