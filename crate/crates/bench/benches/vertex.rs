use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use waveqed::params::linspace;
use waveqed::{
    f_functions, nystrom_solve, s1_matrix, EnergyShell, InputState, Mode, Photon, TwoPhotonResult, TwoPhotonSolver,
    VertexContext,
};
use waveqed_bench::{generic, transparency_sweep};

fn single_photon(c: &mut Criterion) {
    let p = generic();
    c.bench_function("s1_matrix", |b| b.iter(|| s1_matrix(black_box(0.4), &p)));
}

fn vertex(c: &mut Criterion) {
    let mut g = c.benchmark_group("vertex");
    for (name, p) in transparency_sweep() {
        g.bench_with_input(BenchmarkId::new("context", &name), &p, |b, p| {
            b.iter(|| VertexContext::new(black_box(0.3), p).unwrap())
        });
        let ctx = VertexContext::new(0.3, &p).unwrap();
        g.bench_with_input(BenchmarkId::new("kernel_eval", &name), &ctx, |b, ctx| {
            b.iter(|| ctx.f(black_box(0.3 * p.separation), black_box(0.1 * p.separation)))
        });
        g.bench_with_input(BenchmarkId::new("effective_functions", &name), &p, |b, p| {
            b.iter(|| f_functions(black_box(0.3), p).unwrap())
        });
    }
    g.finish();
}

fn amplitude(c: &mut Criterion) {
    let p = generic();
    let solver = TwoPhotonSolver::new(0.5, &p, Mode::Exact).unwrap();
    let inp = [Photon::new(1, 0.4), Photon::new(0, 0.1)];
    let out = [Photon::new(0, 0.9), Photon::new(1, -0.4)];
    c.bench_function("t4", |b| b.iter(|| solver.t4(black_box(out), inp).unwrap()));

    let shell = EnergyShell::new(0.5, 0.3, linspace(-20.0, 20.0, 801)).unwrap();
    let state = InputState::new((1, 0), shell).unwrap();
    let mut g = c.benchmark_group("shell");
    g.sample_size(10);
    g.bench_function("result_801", |b| b.iter(|| TwoPhotonResult::compute(&state, &p, Mode::Exact).unwrap()));
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    for (name, p) in transparency_sweep() {
        g.bench_with_input(BenchmarkId::new("nystrom_64", &name), &p, |b, p| {
            b.iter(|| nystrom_solve(p, 0.0, 64).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, single_photon, vertex, amplitude, oracle);
criterion_main!(benches);
