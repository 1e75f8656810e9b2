use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use inertial_core::equilibrium::{is_inertial, vi_gap};
use inertial_core::experiment::{run_experiment, Algorithm, ExperimentConfig};
use inertial_core::par::{map_indexed, sub_seed};
use inertial_core::probe::{monotonicity_probe, GameOperator, OperatorKind, ProbeConfig};
use inertial_core::scenarios::{build_ridehailing, random_simplex_point, recommended_params, synthetic_city};
use inertial_core::solvers::{BetterResponseConfig, ProjectionConfig, RedistributionPolicy};
use inertial_core::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn probe(c: &mut Criterion) {
    let game = build_ridehailing(&synthetic_city(), 1.0).unwrap();
    let mut group = c.benchmark_group("probe_18_nodes");
    group.sample_size(10);
    for (name, execution) in MODES {
        let cfg = ProbeConfig { samples: 2_000, execution, ..ProbeConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| monotonicity_probe(&GameOperator { game: &game, kind: OperatorKind::F }, black_box(&cfg)))
        });
    }
    group.finish();
}

fn equivalence_sweep(c: &mut Criterion) {
    let game = build_ridehailing(&synthetic_city(), 1.0).unwrap();
    let mut group = c.benchmark_group("gap_sweep_18_nodes");
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                map_indexed(execution, 20_000, |k| {
                    let x = random_simplex_point(sub_seed(1, k as u64), game.n(), game.gamma());
                    is_inertial(&game, &x, 1e-9).unwrap().inertial == (vi_gap(&game, &x).unwrap() <= 1e-9)
                })
            })
        });
    }
    group.finish();
}

fn experiment(c: &mut Criterion) {
    let game = build_ridehailing(&synthetic_city(), 1.0).unwrap();
    let p = recommended_params(&game).unwrap();
    let mut group = c.benchmark_group("experiment_18_nodes");
    group.sample_size(10);
    for (name, execution) in MODES {
        let cfg = ExperimentConfig {
            repetitions: 32,
            seed: 0,
            algorithms: vec![Algorithm::Projection, Algorithm::BetterResponse],
            projection: ProjectionConfig { rho: p.rho, ..ProjectionConfig::default() },
            policy: RedistributionPolicy::EqualShare { tau: p.tau },
            better_response: BetterResponseConfig::new(p.epsilon),
            execution,
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_experiment(&game, black_box(&cfg)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, probe, equivalence_sweep, experiment);
criterion_main!(benches);
