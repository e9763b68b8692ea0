//! Parallel versus sequential execution of the hot paths.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use kfp_lab::equilibria::{build_equilibrium, Equilibrium, PotentialSpec};
use kfp_lab::evolution::{bump_initial, KineticStepper, Scheme};
use kfp_lab::exec;
use kfp_lab::grid::PhaseGrid;
use kfp_lab::hypocoercivity::{estimate_c_m, random_states};
use kfp_lab::operators::{assemble, OperatorSet};

fn model(n: usize) -> (Equilibrium, OperatorSet) {
    let grid = PhaseGrid::new(8.0, 8.0, n, n).unwrap();
    let eq = build_equilibrium(&PotentialSpec::power(2.0, 2.0), &grid).unwrap();
    let ops = assemble(&eq).unwrap();
    (eq, ops)
}

const MODES: [(&str, bool); 2] = [("parallel", false), ("sequential", true)];

fn matvec(c: &mut Criterion) {
    let (eq, ops) = model(257);
    let a = ops.collision_y(&eq).combine(1.0, &ops.transport_y(&eq), -1.0);
    let x = vec![1.0; a.n_cols()];
    let mut y = vec![0.0; a.n_rows()];
    let mut g = c.benchmark_group("csr_matvec_257");
    for (name, seq) in MODES {
        exec::set_sequential(seq);
        g.bench_function(name, |b| b.iter(|| a.matvec(black_box(&x), &mut y)));
    }
    exec::set_sequential(false);
    g.finish();
}

fn kinetic_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("kinetic_step");
    g.sample_size(10);
    for n in [129, 257] {
        let (eq, ops) = model(n);
        let stepper = KineticStepper::new(&eq, &ops, 0.05, Scheme::ImplicitEuler).unwrap();
        let f = bump_initial(&eq, 0.8, 0.0, 0.0, 1.5, 2.0);
        for (name, seq) in MODES {
            exec::set_sequential(seq);
            g.bench_with_input(BenchmarkId::new(name, n), &f, |b, f| {
                b.iter(|| stepper.step(f).unwrap())
            });
        }
    }
    exec::set_sequential(false);
    g.finish();
}

fn constant_suite(c: &mut Criterion) {
    let (eq, ops) = model(129);
    let states = random_states(&eq, 32, 1);
    let mut g = c.benchmark_group("c_m_suite_129");
    g.sample_size(10);
    for (name, seq) in MODES {
        exec::set_sequential(seq);
        g.bench_function(name, |b| b.iter(|| estimate_c_m(&states, &eq, &ops).unwrap()));
    }
    exec::set_sequential(false);
    g.finish();
}

criterion_group!(benches, matvec, kinetic_step, constant_suite);
criterion_main!(benches);
