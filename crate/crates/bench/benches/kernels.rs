use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gsmgrad_core::optimizers::{gsmgrad_fa_step, gsmgrad_step, sgsmgrad_step};
use gsmgrad_core::subproblem::{solve_gram, SolverSettings};
use gsmgrad_core::{
    builtin_problem, project_simplex, uniform_weights, Algorithm, BuiltinProblem, GradientMatrix, NoiseModel,
    OptimizerConfig, OptimizerState, ProblemParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn projection(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("project_simplex");
    for k in [2, 8, 64] {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        group.bench_with_input(BenchmarkId::from_parameter(k), &v, |b, v| {
            b.iter(|| project_simplex(black_box(v)))
        });
    }
    group.finish();
}

fn weight_solver(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("solve_gram");
    for k in [2, 5, 10] {
        let g = GradientMatrix::from_columns(
            (0..k)
                .map(|_| (0..20).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap();
        let gram = g.gram();
        for (label, settings) in [("fast", SolverSettings::FAST), ("reference", SolverSettings::REFERENCE)] {
            group.bench_with_input(BenchmarkId::new(label, k), &gram, |b, gram| {
                b.iter(|| solve_gram(black_box(gram), 1e-3, settings))
            });
        }
    }
    group.finish();
}

fn steps(c: &mut Criterion) {
    let problem = builtin_problem(BuiltinProblem::MixedSmooth, 16, &ProblemParams::new()).unwrap();
    let state = OptimizerState::new(problem.default_start(), uniform_weights(2).unwrap());
    let cfg = OptimizerConfig::new(Algorithm::Gsmgrad, 1e-3, 1e-2, 1_000_000).with_rho(1e-3);
    let noise = NoiseModel::gaussian(0.1, 3);
    let mut group = c.benchmark_group("step");
    group.bench_function("gsmgrad", |b| {
        b.iter(|| gsmgrad_step(&problem, black_box(&state), &cfg))
    });
    let sto = OptimizerConfig {
        algorithm: Algorithm::Sgsmgrad,
        ..cfg.clone()
    };
    group.bench_function("sgsmgrad", |b| {
        b.iter(|| sgsmgrad_step(&problem, black_box(&state), &sto, &noise))
    });
    let fa = OptimizerConfig {
        algorithm: Algorithm::GsmgradFa,
        ..cfg.clone()
    };
    group.bench_function("gsmgrad_fa", |b| {
        b.iter(|| gsmgrad_fa_step(&problem, black_box(&state), &fa))
    });
    group.finish();
}

criterion_group!(benches, projection, weight_solver, steps);
criterion_main!(benches);
