use pinlab_core::pinning::{
    empirical_mean_drift, random_cell_value, sample_periodic, sample_random, sample_random_shifted, CellFunction, RandomCellLaw,
};
use pinlab_core::Grid;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sampled_values_stay_in_bounds(v0 in 0.1f64..3.0, v1 in 0.1f64..3.0, delta in 0.01f64..0.5, sym in any::<bool>()) {
        let cell = CellFunction::checkerboard([v0, v1], sym).unwrap();
        let p = sample_periodic(&cell, delta, Grid::square(1.0, 40).unwrap()).unwrap();
        let (m, big_m) = p.bounds();
        prop_assert!(p.field.values.iter().all(|v| *v >= m && *v <= big_m));
        prop_assert!(m > 0.0);
    }

    #[test]
    fn random_field_is_deterministic(seed in any::<u64>(), delta in 0.02f64..0.3) {
        let law = RandomCellLaw::new(vec![0.5, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let g = Grid::square(1.0, 32).unwrap();
        let a = sample_random(&law, delta, seed, g).unwrap();
        let b = sample_random(&law, delta, seed, g).unwrap();
        prop_assert_eq!(&a.field.values, &b.field.values);
        prop_assert!(a.field.values.iter().all(|v| law.values.contains(v)));
    }

    #[test]
    fn cell_values_do_not_depend_on_the_window(seed in any::<u64>(), shift in 0.0f64..0.1) {
        // the same lattice seen through two different domains agrees on the overlap
        let law = RandomCellLaw::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let delta = 0.1;
        let big = Grid::square(1.0, 40).unwrap();
        let small = Grid::square(0.5, 20).unwrap().with_origin(0.25, 0.25);
        let a = sample_random_shifted(&law, delta, seed, [shift, shift], big).unwrap();
        let b = sample_random_shifted(&law, delta, seed, [shift, shift], small).unwrap();
        for j in 0..small.ny() {
            for i in 0..small.nx() {
                prop_assert_eq!(b.field.at(i, j), a.field.at(i + 10, j + 10));
            }
        }
    }
}

#[test]
fn cell_value_frequencies_match_the_law() {
    let law = RandomCellLaw::new(vec![0.5, 1.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
    let n = 100;
    let total = (n * n) as f64;
    let mut counts = [0usize; 3];
    for k in 0..n as i64 {
        for l in 0..n as i64 {
            let v = random_cell_value(&law, 42, k, l);
            counts[law.values.iter().position(|x| *x == v).unwrap()] += 1;
        }
    }
    for (c, p) in counts.iter().zip(&law.probs) {
        let se = (p * (1.0 - p) / total).sqrt();
        assert!((*c as f64 / total - p).abs() <= 3.0 * se, "{counts:?}");
    }
}

#[test]
fn random_drift_shrinks_with_delta() {
    let law = RandomCellLaw::new(vec![0.5, 1.5], vec![0.5, 0.5]).unwrap();
    let g = Grid::square(1.0, 400).unwrap();
    let mean_drift = |delta: f64| {
        (0..16u64).map(|s| empirical_mean_drift(&sample_random(&law, delta, s, g).unwrap())).sum::<f64>() / 16.0
    };
    let (a, b) = (mean_drift(0.08), mean_drift(0.02));
    assert!(b < a / 2.0, "{a} {b}");
}

#[test]
fn periodic_mean_converges_to_cell_mean() {
    let cell = CellFunction::checkerboard([0.5, 1.5], false).unwrap();
    let g = Grid::square(1.0, 200).unwrap();
    let p = sample_periodic(&cell, 0.1, g).unwrap();
    assert!(empirical_mean_drift(&p) < 1e-3);
    assert!((p.target_mean() - 1.0).abs() < 1e-15);
}
