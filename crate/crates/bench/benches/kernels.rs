use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use emth_bench::{state, waves};
use emth_core::dressing::DressingPair;
use emth_core::dressing::default_policy;
use emth_core::{darboux_nfold, rk4_step, Boundary, FlowOptions, FlowSpec, Lattice};
use std::hint::black_box;

fn operator_product(c: &mut Criterion) {
    let mut group = c.benchmark_group("lax_power");
    for dim in [2, 4] {
        let s = state(dim, 32, Boundary::Periodic).unwrap();
        let l = s.lax();
        group.bench_with_input(BenchmarkId::from_parameter(dim), &l, |b, l| {
            b.iter(|| black_box(l.mul(l).unwrap()))
        });
    }
    group.finish();
}

fn dressing(c: &mut Criterion) {
    let mut group = c.benchmark_group("dressing_pair");
    let s = state(2, 32, Boundary::Periodic).unwrap();
    let policy = default_policy(s.lattice());
    for order in [4, 8] {
        group.bench_with_input(BenchmarkId::from_parameter(order), &order, |b, &order| {
            b.iter(|| black_box(DressingPair::new(&s, order, policy).unwrap()))
        });
    }
    group.finish();
}

fn rk4(c: &mut Criterion) {
    let mut group = c.benchmark_group("rk4_step");
    let s = state(2, 32, Boundary::Decaying).unwrap();
    let opts = FlowOptions::for_lattice(s.lattice());
    for flow in [FlowSpec::t(1, 1), FlowSpec::t(2, 1), FlowSpec::tbar(1, 1)] {
        group.bench_function(flow.to_string(), |b| {
            b.iter(|| black_box(rk4_step(&s, flow, 1e-3, &opts).unwrap()))
        });
    }
    group.finish();
}

fn darboux(c: &mut Criterion) {
    let mut group = c.benchmark_group("darboux_nfold");
    let lattice = Lattice::centered(32, 0.5, 1, Boundary::Decaying).unwrap();
    for n in [1, 2, 4] {
        let w = waves(2, n, 0.5).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| {
            b.iter(|| black_box(darboux_nfold(lattice, 1.0, w, (1, 1)).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, operator_product, dressing, rk4, darboux);
criterion_main!(benches);
