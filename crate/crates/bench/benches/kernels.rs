use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use spiderweb_core::periodic::{NewtonConfig, Region};
use spiderweb_core::{
    build_ladder, classify_grid, extract_hole, find_periodic_points, max_modulus, trace_loop, validate_radius,
    Complex64, EntireFunction, GridSpec, RadiusLadder,
};

fn setup() -> (EntireFunction, RadiusLadder) {
    let f = EntireFunction::gap_series();
    let cert = validate_radius(&f, 1.0, 100.0).unwrap();
    let ladder = build_ladder(&f, &cert, 20).unwrap();
    (f, ladder)
}

fn kernels(c: &mut Criterion) {
    let (f, ladder) = setup();
    let origin = Complex64::new(0.0, 0.0);

    c.bench_function("max_modulus r=5", |b| b.iter(|| max_modulus(&f, black_box(5.0)).unwrap()));

    let spec = GridSpec::new(origin, 6.0, 256, 10, 0);
    c.bench_function("classify_grid 256^2 depth 10", |b| {
        b.iter(|| classify_grid(&f, &ladder, black_box(&spec), 0).unwrap())
    });

    let gc = classify_grid(&f, &ladder, &GridSpec::new(origin, 6.0, 512, 10, 0), 0).unwrap();
    let hole = extract_hole(&gc).unwrap();
    c.bench_function("trace_loop 512^2", |b| b.iter(|| trace_loop(black_box(&hole)).unwrap()));

    let region = Region::square(origin, 6.0).unwrap();
    let cfg = NewtonConfig { seeds_per_side: 32, ..NewtonConfig::default() };
    c.bench_function("find_periodic_points p=1 32^2 seeds", |b| {
        b.iter(|| find_periodic_points(&f, black_box(&region), 1, &cfg).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels
}
criterion_main!(benches);
