use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gerber_shiu::montecarlo::estimate_densities;
use gerber_shiu::{fixtures, SimConfig};

fn densities(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimate_densities");
    g.sample_size(10);
    for (name, sigma) in [("exp1", 0.0), ("exp1", 1.0), ("pareto", 0.0)] {
        let m = fixtures::load(name).unwrap().with_sigma(sigma).unwrap();
        let cfg = SimConfig::new(m, 5.0, 0.05).with_samples(20_000).with_seed(1);
        g.bench_function(format!("{name}/sigma={sigma}/20k"), |b| {
            b.iter(|| estimate_densities(black_box(&cfg)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, densities);
criterion_main!(benches);
