use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use boardpush::config::RunConfig;
use boardpush::learn::{Collector, Policy};

const N_ENVS: usize = 16;
const HORIZON: usize = 16;

fn bench_physics_step(c: &mut Criterion) {
    let env = RunConfig::default().skate_env().unwrap();
    let world = env.world();
    let targets = env.nominal_targets();
    let dt = env.config().dt;
    let mut group = c.benchmark_group("physics");
    group.throughput(Throughput::Elements(1));
    group.bench_function("step_nv26", |b| {
        let mut state = env.nominal_state().clone();
        b.iter(|| {
            let tau = env.apply_action(&targets, &state);
            state = world.step(black_box(&state), &tau, dt).unwrap_or_else(|_| env.nominal_state().clone());
        })
    });
    group.finish();
}

fn bench_rollout(c: &mut Criterion) {
    let mut run = RunConfig::default();
    run.train.hidden = vec![64, 64];
    let proto = run.build_envs(1).unwrap().remove(0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let policy = Policy::new(proto.obs_dim(), &run.train.hidden, &proto.nominal_action(), -1.0, &mut rng);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());

    let mut group = c.benchmark_group("rollout");
    group.sample_size(10);
    group.throughput(Throughput::Elements((N_ENVS * HORIZON) as u64));
    let mut workers = vec![1, 2, 8];
    if !workers.contains(&cores) {
        workers.push(cores);
    }
    for threads in workers {
        let mut collector = Collector::new(run.build_envs(N_ENVS).unwrap(), 0, threads);
        let label = if threads == 1 { "sequential".to_string() } else { format!("rayon_{threads}") };
        group.bench_with_input(BenchmarkId::new(label, N_ENVS), &HORIZON, |b, &h| {
            b.iter(|| black_box(collector.rollout(&policy, h)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_physics_step, bench_rollout);
criterion_main!(benches);
