use pinlab_core::allencahn::{homogenized_ac_check, interface_constant_1d, minimize_ac, AcInit, AcOptions};
use pinlab_core::pinning::{sample_periodic, CellFunction, PinningField};
use pinlab_core::scalar::ScalarOptions;
use pinlab_core::Grid;

fn uniform(eps: f64) -> PinningField {
    PinningField::uniform(Grid::square(1.0, (8.0 / eps) as usize).unwrap(), 1.0).unwrap()
}

#[test]
fn flow_conserves_mass_and_decreases_energy() {
    let g = Grid::square(1.0, 64).unwrap();
    let cell = CellFunction::checkerboard([0.5, 1.5], false).unwrap();
    let p = sample_periodic(&cell, 0.25, g).unwrap();
    let eps = 0.08;
    let s = minimize_ac(&p, eps, 0.2, &AcInit::DiagonalSplit { tilt: 0.3 }, &AcOptions::default()).unwrap();
    assert!(s.max_mass_error <= 1e-10, "{}", s.max_mass_error);
    let bound = 1.5f64.sqrt() + eps;
    assert!(s.u.values.iter().all(|v| v.abs() <= bound));
    for w in s.energy_history[100..].windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn one_dimensional_layer_matches_closed_form() {
    // int_{-1}^{1} 2 (1 - u^2) du = 8/3 for the optimal profile tanh(x / eps)
    let r = interface_constant_1d(&[0.04, 0.02, 0.01]).unwrap();
    assert!((r.constant / (8.0 / 3.0) - 1.0).abs() <= 0.02, "{}", r.constant);
    // the |u| < 0.9 band of tanh(x / eps) has width 2 eps atanh(0.9)
    for &(eps, _, w) in &r.runs {
        let expected = 2.0 * eps * 0.9f64.atanh();
        assert!((w / expected - 1.0).abs() <= 0.05, "{eps}: {w} {expected}");
    }
    for pair in r.runs.windows(2) {
        let ratio = pair[0].2 / pair[1].2;
        assert!((ratio / 2.0 - 1.0).abs() <= 0.15, "{ratio}");
    }
}

#[test]
fn one_dimensional_input_is_validated() {
    assert!(interface_constant_1d(&[]).is_err());
    assert!(interface_constant_1d(&[0.01, 0.02]).is_err());
    assert!(interface_constant_1d(&[0.6]).is_err());
}

#[test]
fn per_length_constant_is_stable_in_eps() {
    let c: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&eps| minimize_ac(&uniform(eps), eps, 0.0, &AcInit::VerticalSplit, &AcOptions::default()).unwrap())
        .map(|s| {
            assert!((s.interface_length - 1.0).abs() <= 1e-6, "{}", s.interface_length);
            s.per_length_constant
        })
        .collect();
    for x in &c {
        assert!((x / c[2] - 1.0).abs() <= 0.05, "{c:?}");
    }
}

#[test]
fn tilted_start_relaxes_to_the_straight_interface() {
    let eps = 0.04;
    let p = uniform(eps);
    let opts = AcOptions::default();
    let a = minimize_ac(&p, eps, 0.0, &AcInit::VerticalSplit, &opts).unwrap();
    let b = minimize_ac(&p, eps, 0.0, &AcInit::DiagonalSplit { tilt: 0.05 }, &opts).unwrap();
    assert!(b.energy <= 1.02 * a.energy && b.energy >= a.energy * (1.0 - 1e-6), "{} {}", a.energy, b.energy);
}

#[test]
fn constant_pinning_leaves_u_unchanged() {
    let eps = 0.05;
    let r = homogenized_ac_check(&uniform(eps), eps, 0.0, &AcInit::VerticalSplit, &AcOptions::default(), &ScalarOptions::default()).unwrap();
    assert!(r.u_sup_error <= 1e-12);
    for (v, u) in r.v.values.iter().zip(&r.solve.u.values) {
        assert!((v - u).abs() <= 1e-12);
    }
}

#[test]
fn checkerboard_interface_follows_the_homogenized_one() {
    // side 2 so that nodes exist outside the 5 eps band around x = 1
    let eps = 0.1;
    let delta = 0.025;
    let g = Grid::square(2.0, 480).unwrap();
    let cell = CellFunction::checkerboard([0.5, 1.5], true).unwrap();
    let p = sample_periodic(&cell, delta, g).unwrap();
    let r = homogenized_ac_check(&p, eps, 0.0, &AcInit::VerticalSplit, &AcOptions::default(), &ScalarOptions::default()).unwrap();
    assert!((r.interface_length_v / 2.0 - 1.0).abs() <= 0.05);
    assert!(r.v_deviation <= 0.01, "{}", r.v_deviation);
}
