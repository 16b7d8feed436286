use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hyperscen_bench::instance;
use hyperscen_core::allocator::{backtrack_allocate_with, generate_candidates, SearchOptions};
use hyperscen_core::{brute_force_allocate, default_quanta};

fn candidates(c: &mut Criterion) {
    let inst = instance(3, 512);
    let q = default_quanta(&inst.cap);
    c.bench_function("generate_candidates", |b| {
        b.iter(|| generate_candidates(black_box(&inst.specs[1]), &inst.cap, &q).unwrap())
    });
}

fn search(c: &mut Criterion) {
    let mut g = c.benchmark_group("search");
    for n in [2, 3, 4] {
        let inst = instance(n, 64);
        for (name, prune) in [("pruned", true), ("unpruned", false)] {
            let opts = SearchOptions {
                prune,
                time_budget: None,
            };
            g.bench_with_input(BenchmarkId::new(name, n), &inst, |b, inst| {
                b.iter(|| backtrack_allocate_with(black_box(&inst.specs), &inst.cap, &inst.sets, &opts).unwrap())
            });
        }
        if n <= 3 {
            g.bench_with_input(BenchmarkId::new("brute_force", n), &inst, |b, inst| {
                b.iter(|| brute_force_allocate(black_box(&inst.specs), &inst.cap, &inst.sets).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, candidates, search);
criterion_main!(benches);
