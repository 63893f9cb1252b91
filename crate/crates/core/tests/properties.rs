use std::f64::consts::TAU;
use std::sync::OnceLock;

use proptest::prelude::*;
use spiderweb_core::mask::Mask;
use spiderweb_core::orbit::determinable_length;
use spiderweb_core::periodic::{winding_degree, NewtonConfig, Region};
use spiderweb_core::{
    build_ladder, classify_grid, classify_point, compute_itinerary, find_periodic_points, generate_itinerary,
    max_modulus, min_modulus, validate_itinerary_rule, validate_radius, Complex64, EntireFunction, EntireMap,
    ExpandingSet, GridSpec, OrbitKind, OrbitTypeParams, PartitionIndexer, RadiusLadder,
};

fn c(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y)
}

fn gap() -> &'static EntireFunction {
    static F: OnceLock<EntireFunction> = OnceLock::new();
    F.get_or_init(EntireFunction::gap_series)
}

fn ladder() -> &'static RadiusLadder {
    static L: OnceLock<RadiusLadder> = OnceLock::new();
    L.get_or_init(|| build_ladder(gap(), &validate_radius(gap(), 1.0, 100.0).unwrap(), 20).unwrap())
}

fn functions() -> Vec<EntireFunction> {
    vec![
        EntireFunction::gap_series(),
        EntireFunction::exponential(c(0.3, 0.1)).unwrap(),
        EntireFunction::polynomial(vec![c(0.5, -1.0), c(0.0, 2.0), c(1.0, 0.0), c(0.25, 0.25)]).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_matches_central_difference(re in -4.0..4.0f64, im in -4.0..4.0f64) {
        let z = c(re, im);
        for f in functions() {
            let h = 1e-5;
            let fd = (f.evaluate(z + h).unwrap() - f.evaluate(z - h).unwrap()) / (2.0 * h);
            let d = f.derivative(z).unwrap();
            prop_assert!((fd - d).norm() <= 1e-6 * d.norm().max(1.0), "{}: {d} vs {fd}", f.family_id());
        }
    }

    #[test]
    fn modulus_bounds_bracket_the_circle(r in 0.1..8.0f64, t in 0.0..TAU) {
        for f in functions() {
            let v = f.evaluate(Complex64::from_polar(r, t)).unwrap().norm();
            let hi = max_modulus(&f, r).unwrap();
            let lo = min_modulus(&f, r).unwrap();
            prop_assert!(v <= hi * (1.0 + 1e-9), "{}: |f| {v} above M {hi}", f.family_id());
            prop_assert!(v >= lo * (1.0 - 1e-9), "{}: |f| {v} below m {lo}", f.family_id());
        }
    }

    #[test]
    fn max_modulus_is_increasing(r in 0.1..8.0f64, dr in 0.01..2.0f64) {
        for f in functions() {
            prop_assert!(max_modulus(&f, r).unwrap() <= max_modulus(&f, r + dr).unwrap() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn deeper_tests_shrink_the_level(re in -6.0..6.0f64, im in -6.0..6.0f64, level in -2i32..=2, depth in 0usize..=12) {
        let z = c(re, im);
        let deep = classify_point(gap(), ladder(), z, level, depth + 1).unwrap();
        let shallow = classify_point(gap(), ladder(), z, level, depth).unwrap();
        prop_assert!(!deep.is_in_level() || shallow.is_in_level(), "{z}: {deep:?} at {} but {shallow:?} at {depth}", depth + 1);
    }

    #[test]
    fn levels_are_nested(re in -6.0..6.0f64, im in -6.0..6.0f64, level in -3i32..=3, depth in 0usize..=10) {
        let z = c(re, im);
        let upper = classify_point(gap(), ladder(), z, level + 1, depth).unwrap();
        let lower = classify_point(gap(), ladder(), z, level, depth).unwrap();
        prop_assert!(!upper.is_in_level() || lower.is_in_level(), "{z}: in level {} but not {level}", level + 1);
    }

    #[test]
    fn grid_output_ignores_thread_count(cx in -3.0..3.0f64, cy in -3.0..3.0f64, hw in 0.5..6.0f64, res in 8usize..48, level in 0i32..3) {
        let spec = GridSpec::new(c(cx, cy), hw, res, 8, level);
        let one = classify_grid(gap(), ladder(), &spec, 1).unwrap();
        let three = classify_grid(gap(), ladder(), &spec, 3).unwrap();
        prop_assert_eq!(one.to_raster(), three.to_raster());
    }

    #[test]
    fn winding_degree_ignores_base_point(d in 2usize..6, r in 0.0..0.6f64, t in 0.0..TAU) {
        let f = EntireFunction::monomial(d).unwrap();
        let mut circle: Vec<Complex64> = (0..64).map(|k| Complex64::from_polar(1.0, TAU * k as f64 / 64.0)).collect();
        circle.push(circle[0]);
        let w = Complex64::from_polar(r, t);
        prop_assert_eq!(winding_degree(&f, &circle, 1, w, 512).unwrap(), d as i64);
    }
}

/// Multiplication by `a`, a map whose itineraries are easy to predict.
struct Scale(Complex64);

impl EntireMap for Scale {
    fn apply(&self, z: Complex64) -> Complex64 {
        self.0 * z
    }
    fn deriv(&self, _: Complex64) -> Complex64 {
        self.0
    }
}

fn circle_partition() -> &'static PartitionIndexer {
    static P: OnceLock<PartitionIndexer> = OnceLock::new();
    P.get_or_init(|| {
        let g = GridSpec::new(c(0.0, 0.0), 40.0, 160, 1, 0);
        let disk = |r: f64| Mask::from_fn(160, |i, j| g.cell_center(i, j).norm() < r);
        PartitionIndexer::from_regions(&g, 1, vec![disk(4.0), disk(8.0), disk(16.0), disk(32.0)]).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn itineraries_shift_under_the_map(re in -30.0..30.0f64, im in -30.0..30.0f64, scale in 0.6..1.6f64, t in 0.0..TAU, depth in 1usize..8) {
        let f = Scale(Complex64::from_polar(scale, t));
        let p = circle_partition();
        let ms = ExpandingSet::new(1, [0, 1, 2, 3], 3);
        let z = c(re, im);
        let whole = compute_itinerary(&f, p, &ms, z, depth + 1);
        let tail = compute_itinerary(&f, p, &ms, f.apply(z), depth);
        let n = whole.symbols.len().saturating_sub(1).min(tail.symbols.len());
        prop_assert_eq!(&whole.symbols[1.min(whole.symbols.len())..][..n], &tail.symbols[..n]);
    }

    #[test]
    fn generated_itineraries_obey_the_rule(extra in proptest::collection::btree_set(1usize..24, 2..6), length in 2usize..40) {
        let top = 30;
        let ms = ExpandingSet::new(1, std::iter::once(0).chain(extra.iter().copied()), top);
        let mut made = 0;
        for j0 in 2..ms.indices.len() {
            let params = OrbitTypeParams { j0: Some(j0), ..OrbitTypeParams::new(OrbitKind::BoundedA, length) };
            let it = generate_itinerary(&params, &ms, length).unwrap();
            prop_assert!(validate_itinerary_rule(&it).valid, "kind A j0 {j0}: {:?}", it.symbols);
            made += 1;
        }
        let params = OrbitTypeParams::new(OrbitKind::BoundedSuborbitB, length);
        if determinable_length(&params, &ms, length) == length {
            if let Ok(it) = generate_itinerary(&params, &ms, length) {
                prop_assert!(validate_itinerary_rule(&it).valid, "kind B: {:?}", it.symbols);
                made += 1;
            }
        }
        prop_assert!(made >= 1);
    }
}

#[test]
fn multipliers_match_numerical_derivatives() {
    let region = Region::square(c(0.0, 0.0), 6.0).unwrap();
    for p in [1, 2] {
        let search = find_periodic_points(gap(), &region, p, &NewtonConfig::default()).unwrap();
        assert!(!search.records.is_empty());
        for r in &search.records {
            let h = 1e-6 * r.z0.norm().max(1.0);
            let fp = |z: Complex64| gap().iterate(z, p).unwrap();
            let fd = (fp(r.z0 + h) - fp(r.z0 - h)) / (2.0 * h);
            assert!(
                (fd - r.multiplier).norm() <= 1e-6 * r.multiplier.norm().max(1.0),
                "p = {p}, z0 = {}: {} vs {fd}",
                r.z0,
                r.multiplier
            );
            assert!(r.residual <= 1e-10 * r.z0.norm().max(1.0));
        }
    }
}

#[test]
fn repelling_flags_survive_tolerance_halving() {
    let region = Region::square(c(0.0, 0.0), 6.0).unwrap();
    let base = NewtonConfig::default();
    let tight = NewtonConfig { root_tol: base.root_tol / 2.0, ..base };
    let a = find_periodic_points(gap(), &region, 1, &base).unwrap();
    let b = find_periodic_points(gap(), &region, 1, &tight).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert!((x.z0 - y.z0).norm() < 1e-9);
        assert_eq!(x.repelling, y.repelling);
        assert!((x.multiplier.norm() - 1.0).abs() > 1e-3, "multiplier too close to the unit circle");
    }
}

/// Frozen regression values for the gap-series fixed points.
#[test]
fn gap_series_fixed_points_regression() {
    let region = Region::square(c(0.0, 0.0), 6.0).unwrap();
    let s = find_periodic_points(gap(), &region, 1, &NewtonConfig::default()).unwrap();
    let expected = [
        (c(4.714907785262947, 4.794244507043137), 85.62),
        (c(1.6196, 0.8721), 2.06),
        (c(-1.6189, 2.1392), 6.10),
        (c(-4.7156, 4.6249), 72.4),
    ];
    let repelling: Vec<_> = s.records.iter().filter(|r| r.repelling).collect();
    assert_eq!(repelling.len(), 8);
    for (z, lam) in expected {
        for w in [z, z.conj()] {
            let r = repelling
                .iter()
                .find(|r| (r.z0 - w).norm() < 1e-3)
                .unwrap_or_else(|| panic!("no fixed point near {w}"));
            assert!((r.multiplier.norm() - lam).abs() < 0.01 * lam, "{w}: |multiplier| {}", r.multiplier.norm());
        }
    }
}
