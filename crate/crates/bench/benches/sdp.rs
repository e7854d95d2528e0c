use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hlc_bench::{protocol1, tetrahedral_povm};
use hlc_core::conic::InteriorPoint;
use hlc_core::lhs_sdp::{solve_bisection, solve_direct, BISECTION_TOL};
use hlc_core::measurements::{icosahedron_family, max_eta_lp};

fn sdp(c: &mut Criterion) {
    let mut g = c.benchmark_group("protocol1");
    g.sample_size(10);
    let backend = InteriorPoint::default();
    for theta in [0.3, 0.7365] {
        let problem = protocol1(theta, 0.0);
        g.bench_function(format!("direct/theta={theta}"), |b| {
            b.iter(|| solve_direct(black_box(&problem), &backend).unwrap())
        });
    }
    let problem = protocol1(0.5, 0.0);
    g.bench_function("bisection/theta=0.5", |b| {
        b.iter(|| solve_bisection(black_box(&problem), &backend, BISECTION_TOL).unwrap())
    });
    g.finish();
}

fn membership(c: &mut Criterion) {
    let family = icosahedron_family();
    let m = tetrahedral_povm();
    c.bench_function("max_eta_lp/p=0.5", |b| {
        b.iter(|| max_eta_lp(black_box(&m), &family, 0.5).unwrap())
    });
}

criterion_group!(benches, sdp, membership);
criterion_main!(benches);
