use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use swe_carleman::{
    assemble, condition_number, embed_state, initial_field, inverse_poly, solve, CarlemanMatrix,
    KappaMethod, PhysParams, SolveMethod,
};

fn params(n: usize, nt: usize) -> PhysParams {
    PhysParams {
        grid_points: n,
        length: (n - 1) as f64,
        timesteps: nt,
        ..PhysParams::default()
    }
}

fn carleman_build(c: &mut Criterion) {
    let mut g = c.benchmark_group("carleman_build");
    for n in [3usize, 4, 6] {
        let p = params(n, 4);
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| {
            b.iter(|| CarlemanMatrix::build(black_box(p)).unwrap())
        });
    }
    g.finish();
}

fn euler_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("euler_solve");
    g.sample_size(10);
    for nt in [4usize, 16] {
        let p = params(3, nt);
        let cm = CarlemanMatrix::build(&p).unwrap();
        let f0 = initial_field(&[1.01, 1.0, 1.0], &[0.0; 3]).unwrap();
        let sys = assemble(&cm.total, &embed_state(&f0), p.dt, nt).unwrap();
        for method in [SolveMethod::BlockForward, SolveMethod::SparseDirect] {
            g.bench_with_input(BenchmarkId::new(method.as_str(), nt), &sys, |b, sys| {
                b.iter(|| solve(black_box(sys), method).unwrap())
            });
        }
    }
    g.finish();
}

fn kappa(c: &mut Criterion) {
    let mut g = c.benchmark_group("kappa_iterative");
    g.sample_size(10);
    for nt in [2usize, 8] {
        let p = params(3, nt);
        let cm = CarlemanMatrix::build(&p).unwrap();
        let f0 = initial_field(&[1.0; 3], &[0.0; 3]).unwrap();
        let sys = assemble(&cm.total, &embed_state(&f0), p.dt, nt).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(nt), &sys.matrix, |b, e| {
            b.iter(|| condition_number(black_box(e), KappaMethod::Iterative).unwrap())
        });
    }
    g.finish();
}

fn qsvt_degree(c: &mut Criterion) {
    let mut g = c.benchmark_group("inverse_poly");
    g.sample_size(10);
    for kappa in [4.0f64, 16.0, 64.0] {
        g.bench_with_input(BenchmarkId::from_parameter(kappa), &kappa, |b, &k| {
            b.iter(|| inverse_poly(black_box(k), 0.01).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, carleman_build, euler_solve, kappa, qsvt_degree);
criterion_main!(benches);
