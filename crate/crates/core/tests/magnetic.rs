use std::f64::consts::PI;

use pinlab_core::magnetic::{
    gl_energy, imprint_vortices, minimize_gl, quasiminimizer_report, random_gauge_state, read_checkpoint, vorticity,
    write_checkpoint, CheckpointManifest, GLInit, GLOptions, VectorPotential,
};
use pinlab_core::pinning::{sample_periodic, CellFunction};
use pinlab_core::scalar::{minimize_scalar, ScalarOptions};
use pinlab_core::{ComplexField, Grid};
use proptest::prelude::*;

/// `|GL(u e^{i phi}, A + grad phi) - GL(u, A)|` on an `n`-interval grid.
fn gauge_defect(n: usize) -> f64 {
    let g = Grid::square(1.0, n).unwrap();
    let eps = 0.2;
    let u = ComplexField::from_fn(g, |x, y| (1.0 + 0.3 * x * y, 0.2 * (PI * x).sin()));
    let a = VectorPotential::from_fn(g, |x, y| (0.5 * y, -0.3 * x * x));
    let phi = |x: f64, y: f64| (2.0 * x).sin() * (1.5 * y).cos();
    let dphi = |x: f64, y: f64| (2.0 * (2.0 * x).cos() * (1.5 * y).cos(), -1.5 * (2.0 * x).sin() * (1.5 * y).sin());
    let mut v = u.clone();
    for k in 0..g.len() {
        let [x, y] = g.point(k);
        let (s, c) = phi(x, y).sin_cos();
        v.re[k] = u.re[k] * c - u.im[k] * s;
        v.im[k] = u.re[k] * s + u.im[k] * c;
    }
    let b = VectorPotential::from_fn(g, |x, y| {
        let (p, q) = dphi(x, y);
        (0.5 * y + p, -0.3 * x * x + q)
    });
    let e1 = gl_energy(&u, &a, None, eps, 0.7).total;
    let e2 = gl_energy(&v, &b, None, eps, 0.7).total;
    (e1 - e2).abs()
}

#[test]
fn gauge_invariance_is_second_order() {
    let d: Vec<f64> = [32, 64, 128].iter().map(|&n| gauge_defect(n)).collect();
    for w in d.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{d:?}");
    }
    assert!(d[2] < 1e-3);
}

#[test]
fn vortex_degrees_give_circulations() {
    let g = Grid::square(1.0, 256).unwrap();
    let a = VectorPotential::zero(g);
    let u = imprint_vortices(g, &[([0.3, 0.5], 1), ([0.7, 0.5], -1)], 0.03);
    let r = vorticity(&u, &a, &[([0.3, 0.5], 0.15), ([0.7, 0.5], 0.15)]);
    assert!((r.ball_sums[0].circulation - 2.0 * PI).abs() < 0.05 * 2.0 * PI);
    assert!((r.ball_sums[1].circulation + 2.0 * PI).abs() < 0.05 * 2.0 * PI);
}

#[test]
fn one_vortex_energy_grows_like_pi_log() {
    // oracle: the core contributes an eps-independent constant, so halving eps
    // adds pi log 2 to the kinetic energy
    let g = Grid::square(1.0, 512).unwrap();
    let a = VectorPotential::zero(g);
    let e = |eps: f64| {
        let u = imprint_vortices(g, &[([0.5, 0.5], 1)], eps);
        gl_energy(&u, &a, None, eps, 0.0).kinetic
    };
    let d = e(0.025) - e(0.05);
    assert!((d / (PI * 2f64.ln()) - 1.0).abs() < 0.1, "{d}");
}

#[test]
fn descent_lowers_energy_monotonically() {
    let g = Grid::square(1.0, 32).unwrap();
    let cell = CellFunction::checkerboard([0.5, 1.5], true).unwrap();
    let p = sample_periodic(&cell, 0.25, g).unwrap();
    let opts = GLOptions { max_sweeps: 400, ..GLOptions::default() };
    let st = minimize_gl(Some(&p), 0.15, 2.0, g, GLInit::Vortices(vec![([0.5, 0.5], 1)]), &opts).unwrap();
    let h = &st.energy_history;
    assert!(h.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));
    assert!(st.energy.total <= h[0]);
    let fresh = gl_energy(&st.u, &st.a, Some(&p), 0.15, 2.0).total;
    assert!((fresh - st.energy.total).abs() <= 1e-10 * fresh.abs());
}

#[test]
fn checkpoint_round_trip_of_a_test_state() {
    let g = Grid::new(0.5, 0.25, 40).unwrap();
    let (u, a) = random_gauge_state(g, 0.05, 9);
    let m = CheckpointManifest { eps: 0.05, hex: 1.25, delta: 0.001, kind: "checkerboard".into(), seed: 9 };
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &u, &a, &m).unwrap();
    let (u2, a2, m2) = read_checkpoint(&buf[..]).unwrap();
    assert_eq!(u2.re, u.re);
    assert_eq!(u2.im, u.im);
    assert_eq!(a2, a);
    assert_eq!(m2, m);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sandwich_bounds_hold(seed in any::<u64>(), hex in 0.0f64..3.0) {
        let g = Grid::square(0.2, 80).unwrap();
        let cell = CellFunction::checkerboard([0.5, 1.5], true).unwrap();
        let eps = 0.05;
        let p = sample_periodic(&cell, 0.01, g).unwrap();
        let s = minimize_scalar(&p, eps, &ScalarOptions::default()).unwrap();
        let (u, a) = random_gauge_state(g, eps, seed);
        let r = quasiminimizer_report(&u, &a, &p, &s.u, eps, hex).unwrap();
        prop_assert!(r.sandwich_holds);
        prop_assert!(r.m <= 1.0 && r.big_m >= 1.0);
        // the decomposition turns the denoised energy into the weighted one
        prop_assert!((r.denoised - r.weighted).abs() <= 1e-6 * r.weighted.abs());
    }

    #[test]
    fn test_states_are_reproducible(seed in any::<u64>()) {
        let g = Grid::square(1.0, 16).unwrap();
        let (u1, a1) = random_gauge_state(g, 0.1, seed);
        let (u2, a2) = random_gauge_state(g, 0.1, seed);
        prop_assert_eq!(u1.re, u2.re);
        prop_assert_eq!(a1, a2);
    }
}
