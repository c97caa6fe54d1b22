use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use momsos_bench::objectives;
use momsos_core::exactness::{s_cone_member, Certifier, Tolerances};
use momsos_core::poly::Polynomial;
use momsos_core::relaxation::{build_moment_relaxation, fixture};
use momsos_core::scan::scan_with;

fn build(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_moment_relaxation");
    for name in ["four-points", "nonconvex"] {
        let pop = fixture(name).unwrap();
        let f = &objectives(1)[0];
        for r in 1..=3 {
            group.bench_with_input(BenchmarkId::new(name, r), &r, |b, &r| {
                b.iter(|| build_moment_relaxation(black_box(&pop), f, r).unwrap())
            });
        }
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    for name in ["four-points", "nonconvex"] {
        let pop = fixture(name).unwrap();
        for r in 1..=2 {
            let certifier = Certifier::new(&pop, r, Tolerances::default()).unwrap();
            let fs = objectives(8);
            group.bench_with_input(BenchmarkId::new(name, r), &r, |b, _| {
                b.iter(|| fs.iter().map(|f| certifier.solve(f).unwrap().value).sum::<f64>())
            });
        }
    }
    group.finish();
}

fn certify(c: &mut Criterion) {
    let mut group = c.benchmark_group("certify");
    group.sample_size(20);
    let pop = fixture("four-points").unwrap();
    let certifier = Certifier::new(&pop, 2, Tolerances::default()).unwrap();
    let fs = objectives(8);
    group.bench_function("four-points/r2/8-angles", |b| {
        b.iter(|| fs.iter().filter(|f| certifier.certify(f).unwrap().is_exact()).count())
    });
    let f0 = Polynomial::linear(&[4.0, -1.0, -1.0]).unwrap();
    group.bench_function("s-cone/four-points/(2,2)", |b| {
        b.iter(|| s_cone_member(&pop, 1, &[2.0, 2.0], black_box(&f0), Tolerances::default()).unwrap())
    });
    group.finish();
}

fn scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("scan");
    group.sample_size(10);
    let pop = fixture("four-points").unwrap();
    let certifier = Certifier::new(&pop, 1, Tolerances::default()).unwrap().with_grid_resolution(201).unwrap();
    group.bench_function("four-points/r1/36-angles", |b| b.iter(|| scan_with(&certifier, 36).unwrap()));
    group.finish();
}

criterion_group!(benches, build, solve, certify, scan);
criterion_main!(benches);
