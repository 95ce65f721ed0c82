use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use weakident::{assemble, subsample_centers, weak_ident, SubsampleSpec};
use weakident_bench::noisy_system;

fn assembly(c: &mut Criterion) {
    let (data, cfg) = noisy_system("ks", 0.1);
    let ident = cfg.ident_config(&data).unwrap();
    let dict = ident.dictionary(data.num_vars(), data.grid.spatial_dims()).unwrap();
    let tf = weakident::size_test_function(&data, &dict, ident.sizing)
        .unwrap()
        .test_function;
    let centers = subsample_centers(&data.grid, &tf, &SubsampleSpec::new(&data.grid, 50, 50)).unwrap();
    c.bench_function("assemble_ks_43_features", |b| {
        b.iter(|| assemble(black_box(&data), &dict, &tf, &centers).unwrap())
    });
}

fn identification(c: &mut Criterion) {
    let mut group = c.benchmark_group("weak_ident");
    group.sample_size(10);
    for (name, sigma) in [("transport", 0.1), ("ks", 0.5), ("lotka_volterra", 0.1)] {
        let (data, cfg) = noisy_system(name, sigma);
        let ident = cfg.ident_config(&data).unwrap();
        group.bench_function(name, |b| b.iter(|| weak_ident(black_box(&data), &ident).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, assembly, identification);
criterion_main!(benches);
