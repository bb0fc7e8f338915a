//! Throughput of the exact solver, the Monte-Carlo estimator and the safe
//! learner on representative instance sizes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use psafe_core::*;

fn bench_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_safety");
    for n_taboo in [10usize, 50, 200] {
        let spec = RandomMdpSpec::new(n_taboo, 3, 0.5);
        let inst = generate_instance(&spec, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n_taboo), &inst, |b, inst| {
            b.iter(|| solve_safety(black_box(&inst.mdp), black_box(&inst.target)).unwrap())
        });
    }
    group.finish();
}

fn bench_monte_carlo(c: &mut Criterion) {
    let fix = twelve_state();
    let start = fix.mdp.partition().taboo_states()[0];
    c.bench_function("monte_carlo_10k_episodes", |b| {
        b.iter(|| {
            monte_carlo_safety(
                black_box(&fix.mdp),
                black_box(&fix.target),
                start,
                10_000,
                7,
                100_000,
            )
        })
    });
}

fn bench_learner(c: &mut Criterion) {
    let fix = twelve_state();
    let mut cfg = LearnerConfig::new(10_000, 3);
    cfg.record_episodes = false;
    cfg.eval_every = u64::MAX;
    c.bench_function("run_algorithm1_10k_episodes", |b| {
        b.iter(|| {
            run_algorithm1(
                black_box(&fix.mdp),
                black_box(&fix.target),
                &fix.baseline,
                &fix.proxy,
                &cfg,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, bench_solve, bench_monte_carlo, bench_learner);
criterion_main!(benches);
