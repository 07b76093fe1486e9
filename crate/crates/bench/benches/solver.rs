use bsa_core::experiments::{sim1_problem, solve_multistart, Settings, SIM1_HORIZON};
use bsa_core::nlp::InteriorPoint;
use bsa_core::ocp::{initial_guess, CollocationKind, GuessStrategy, OcpModel};
use bsa_core::verify::{linear_test_system, transcribed_endpoint};
use criterion::{criterion_group, criterion_main, Criterion};

fn linear(c: &mut Criterion) {
    let sys = linear_test_system();
    c.bench_function("linear system, 16 intervals", |b| {
        b.iter(|| transcribed_endpoint(&sys, &[1.0, 0.0], 2.0, 16, 3, CollocationKind::Legendre).unwrap())
    });
}

fn launch(c: &mut Criterion) {
    let s = Settings {
        intervals: 8,
        ..Settings::default()
    };
    let ocp = sim1_problem(OcpModel::Bsa, SIM1_HORIZON, &s);
    let guess = initial_guess(&ocp, GuessStrategy::ForwardSim { seed: 1 }).unwrap();
    let solver = InteriorPoint::default();
    let mut group = c.benchmark_group("launch");
    group.sample_size(10);
    group.bench_function("single start, 8 intervals", |b| {
        b.iter(|| solve_multistart(&ocp, &solver, std::slice::from_ref(&guess)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, linear, launch);
criterion_main!(benches);
