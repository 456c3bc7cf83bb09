use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kyorbit::dde::{monodromy, orbit_spectrum};
use kyorbit::expr::parse;
use kyorbit::orbit::{find_orbits, OrbitOptions};
use kyorbit::periodmap::sample;
use kyorbit::planar::return_time;
use kyorbit::{Bindings, Tolerances};
use kyorbit_bench::{hard_spring, soft_spring};

fn planar(c: &mut Criterion) {
    let nl = hard_spring();
    c.bench_function("return_time a=2", |b| {
        b.iter(|| return_time(&nl, black_box(2.0), Tolerances::new(1e-10, 1e-12)).unwrap())
    });
    c.bench_function("period map m=32", |b| b.iter(|| sample(&nl, black_box(8.0), 32).unwrap()));
}

fn floquet(c: &mut Criterion) {
    let nl = soft_spring();
    let table = sample(&nl, 8.0, 32).unwrap();
    let rec = find_orbits(&nl, &table, 1, OrbitOptions::default()).unwrap().records.remove(0);
    let x = rec.construct_solution();
    let mut group = c.benchmark_group("floquet");
    group.sample_size(10);
    group.bench_function("monodromy N=64", |b| b.iter(|| monodromy(&nl, &x, rec.period, 64).unwrap()));
    group.bench_function("spectrum N=64", |b| b.iter(|| orbit_spectrum(&nl, &x, rec.period, 64, 1e-3).unwrap()));
    group.finish();
}

fn expressions(c: &mut Criterion) {
    let text = "alpha*tanh(eta) + 0.05*eta^3*cos(xi)";
    c.bench_function("parse", |b| b.iter(|| parse(black_box(text)).unwrap()));
    let e = parse(text).unwrap();
    let mut params = Bindings::new();
    params.insert("alpha".into(), -2.0);
    c.bench_function("eval", |b| b.iter(|| e.eval(black_box(0.3), black_box(-1.2), &params).unwrap()));
}

criterion_group!(benches, planar, floquet, expressions);
criterion_main!(benches);
