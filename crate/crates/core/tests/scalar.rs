use pinlab_core::magnetic::VectorPotential;
use pinlab_core::mesh::integrate_values;
use pinlab_core::pinning::{sample_periodic, CellFunction, PinningField};
use pinlab_core::scalar::{
    cell_minimize, decomposition_residual, minimize_scalar, scalar_diagnostics, scalar_energy, tile_cell, Init,
    ScalarOptions,
};
use pinlab_core::{ComplexField, Grid, ScalarField};
use proptest::prelude::*;

fn checkerboard(delta: f64, side: f64, per_delta: usize) -> PinningField {
    let n = (per_delta as f64 * side / delta).round() as usize;
    let cell = CellFunction::checkerboard([0.5, 1.5], false).unwrap();
    sample_periodic(&cell, delta, Grid::square(side, n).unwrap()).unwrap()
}

#[test]
fn range_and_energy_history_on_checkerboard() {
    let p = checkerboard(0.02, 0.2, 8);
    let s = minimize_scalar(&p, 0.05, &ScalarOptions::default()).unwrap();
    let (m, big_m) = p.bounds();
    assert!(s.el_residual <= 1e-10);
    for (lo, hi) in &s.range_history {
        assert!(*lo >= m.min(m.sqrt()) - 1e-8 && *hi <= big_m.max(big_m.sqrt()) + 1e-8);
        assert!(*lo > 0.0);
    }
    assert!(s.u.min() >= m - 1e-8 && s.u.max() <= big_m + 1e-8);
    assert!(s.energy_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15));
    // minimality against the homogenized constant
    let m_field = ScalarField::constant(p.field.grid, p.target_mean().sqrt());
    assert!(scalar_energy(&p, &m_field, 0.05).unwrap() >= s.energy);
}

#[test]
fn uniqueness_from_three_starts() {
    let p = checkerboard(0.02, 0.2, 8);
    let base = minimize_scalar(&p, 0.05, &ScalarOptions::default()).unwrap();
    for init in [Init::MaxA, Init::Constant(0.3), Init::Constant(1.7)] {
        let s = minimize_scalar(&p, 0.05, &ScalarOptions::default().with_init(init)).unwrap();
        assert!(s.u.values.iter().zip(&base.u.values).all(|(a, b)| (a - b).abs() <= 1e-9));
    }
}

#[test]
fn sup_error_decreases_with_delta() {
    let eps = 0.05;
    let errs: Vec<f64> = [0.002, 0.001, 0.0005]
        .iter()
        .map(|&d| minimize_scalar(&checkerboard(d, 0.1, 8), eps, &ScalarOptions::default()).unwrap().sup_error)
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
}

#[test]
fn cell_deficit_is_quadratic_in_chi() {
    let cell = CellFunction::checkerboard([0.5, 1.5], false).unwrap();
    let d: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&chi| cell_minimize(&cell, chi, 64, &ScalarOptions::default()).unwrap().w1p_deficit)
        .collect();
    for w in d.windows(2) {
        let r = w[0] / w[1];
        assert!((3.0..=5.0).contains(&r), "{d:?}");
    }
}

#[test]
fn cell_mean_square_tracks_cell_average() {
    let cell = CellFunction::checkerboard([0.5, 1.5], false).unwrap();
    for chi in [0.2, 0.1] {
        let c = cell_minimize(&cell, chi, 64, &ScalarOptions::default()).unwrap();
        let (m, big_m) = (cell.m, cell.big_m);
        assert!(c.ell > m && c.ell < big_m);
        assert!((c.ell * c.ell - cell.mean()).abs() <= 2.0 * chi * chi);
    }
}

#[test]
fn cell_energy_gap_is_quartic_in_chi() {
    // oracle: the gap E(Uhat) - E(1) relative to chi^4 settles to a constant
    let cell = CellFunction::trig(0.5).unwrap();
    let gap = |chi: f64| {
        let c = cell_minimize(&cell, chi, 64, &ScalarOptions::default().with_tol(1e-13)).unwrap();
        c.energy_at_mean - c.energy
    };
    let g: Vec<f64> = [0.4, 0.2, 0.1, 0.05].iter().map(|&c| gap(c)).collect();
    assert!(g.iter().all(|v| *v >= 0.0));
    let r: Vec<f64> = g.windows(2).map(|w| w[0] / w[1]).collect();
    for x in &r[1..] {
        assert!((12.0..=20.0).contains(x), "{g:?} {r:?}");
    }
}

#[test]
fn tiling_range_does_not_depend_on_reps() {
    let cell = CellFunction::checkerboard([0.5, 1.5], true).unwrap();
    let c = cell_minimize(&cell, 0.1, 32, &ScalarOptions::default()).unwrap();
    let a = tile_cell(&c, 2, 0.01).unwrap();
    let b = tile_cell(&c, 8, 0.01).unwrap();
    assert_eq!(a.sup_distance(1.0), b.sup_distance(1.0));
    assert_eq!(a.sup_distance(1.0), c.uhat.sup_distance(1.0));
}

#[test]
fn tiled_field_solves_the_domain_problem() {
    let cell = CellFunction::checkerboard([0.5, 1.5], true).unwrap();
    let (eps, delta, n) = (0.1, 0.01, 16);
    let c = cell_minimize(&cell, delta / eps, n, &ScalarOptions::default()).unwrap();
    let t = tile_cell(&c, 3, delta).unwrap();
    let g = Grid::with_nodes(3.0 * delta, 3.0 * delta, 3 * n + 1, 3 * n + 1).unwrap();
    let p = sample_periodic(&cell, delta, g).unwrap();
    let res = pinlab_core::scalar::el_residual(&p, &t, eps).unwrap();
    assert!(res <= 1e-9, "{res}");
}

#[test]
fn magnetic_identity_with_zero_potential() {
    let cell = CellFunction::trig(0.5).unwrap();
    let g = Grid::square(1.0, 32).unwrap();
    let p = sample_periodic(&cell, 1.0, g).unwrap();
    let eps = 0.2;
    let s = minimize_scalar(&p, eps, &ScalarOptions::default().with_tol(1e-12)).unwrap();
    let u = ComplexField::from_fn(g, |x, y| {
        let (sn, cs) = (x + 2.0 * y).sin_cos();
        let big = s.u.values[g.index((x / g.h()).round() as usize, (y / g.h()).round() as usize)];
        (big * cs, big * sn)
    });
    let plain = decomposition_residual(&u, None, &s.u, &p, eps, 0.0).unwrap();
    let zero = VectorPotential::zero(g);
    for hex in [0.0, 1.5] {
        let mag = decomposition_residual(&u, Some(&zero), &s.u, &p, eps, hex).unwrap();
        // the field energy hex^2 |G| / 2 enters both sides
        let offset = 0.5 * hex * hex * integrate_values(&g, &vec![1.0; g.len()]);
        assert!((mag - plain).abs() <= 1e-12 * (1.0 + offset), "{mag} {plain}");
    }
}

#[test]
fn diagnostics_of_constant_solve() {
    let p = PinningField::uniform(Grid::square(1.0, 16).unwrap(), 1.0).unwrap();
    let s = minimize_scalar(&p, 0.1, &ScalarOptions::default()).unwrap();
    let d = scalar_diagnostics(&s, 0.1, 1.0);
    assert_eq!(d.sup_error, 0.0);
    assert_eq!(d.grad_bound_ratio, 0.0);
    assert_eq!(d.l2_error, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn constant_pinning_is_exact(c in 0.1f64..5.0, eps in 0.02f64..0.5) {
        let p = PinningField::uniform(Grid::square(1.0, 16).unwrap(), c).unwrap();
        let s = minimize_scalar(&p, eps, &ScalarOptions::default()).unwrap();
        prop_assert!(s.u.sup_distance(c.sqrt()) <= 1e-10);
        prop_assert!(s.energy <= 1e-12);
    }

    #[test]
    fn solution_respects_bounds(v0 in 0.2f64..1.0, v1 in 1.0f64..3.0, eps in 0.05f64..0.3) {
        let cell = CellFunction::checkerboard([v0, v1], false).unwrap();
        let p = sample_periodic(&cell, 0.1, Grid::square(1.0, 40).unwrap()).unwrap();
        let s = minimize_scalar(&p, eps, &ScalarOptions::default()).unwrap();
        let (m, big_m) = p.bounds();
        prop_assert!(s.u.min() >= m - 1e-8);
        prop_assert!(s.u.max() <= big_m + 1e-8);
    }
}
