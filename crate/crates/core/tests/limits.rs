use std::f64::consts::PI;

use pinlab_core::limits::{
    e_lambda, i0_quadratic, i_mu_energy, kkt_defect, minimize_e_lambda, minimize_w_n, solve_limit_fields, w_n_energy,
    CriticalData, MeasureDensity, QuadForm, UNIT_SQUARE_LOG_MEAN,
};
use pinlab_core::{Grid, ScalarField};
use proptest::prelude::*;

#[test]
fn j0_converges_at_second_order() {
    let j: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| solve_limit_fields(&Grid::square(1.0, n).unwrap()).unwrap().j0).collect();
    let r1 = (j[1] - j[0]) / (j[2] - j[1]);
    let r2 = (j[2] - j[1]) / (j[3] - j[2]);
    assert!((3.5..=4.5).contains(&r1) && (3.5..=4.5).contains(&r2), "{j:?}");
}

#[test]
fn obstacle_energy_is_monotone_in_lambda() {
    let g = Grid::square(1.0, 32).unwrap();
    let lf = solve_limit_fields(&g).unwrap();
    let thr = lf.h0c1_per_logeps;
    let mut last = f64::INFINITY;
    for f in [0.5, 0.9, 1.1, 1.5, 2.5, 4.0] {
        let s = minimize_e_lambda(f * thr, &lf, &g, 1e-10).unwrap();
        assert!(s.energy <= last + 1e-12);
        assert!(s.kkt_defect <= 1e-6, "{}", s.kkt_defect);
        if f < 1.0 {
            assert!(s.density.total == 0.0 && (s.energy - lf.j0).abs() <= 1e-9);
        } else {
            assert!(s.density.total > 0.0 && s.energy < lf.j0);
        }
        last = s.energy;
    }
}

#[test]
fn obstacle_minimizer_beats_perturbations() {
    let g = Grid::square(1.0, 24).unwrap();
    let lf = solve_limit_fields(&g).unwrap();
    let lam = 2.0 * lf.h0c1_per_logeps;
    let s = minimize_e_lambda(lam, &lf, &g, 1e-10).unwrap();
    assert!((e_lambda(&s.density, lam, &lf, &g).unwrap() - s.energy).abs() <= 1e-10);
    for (scale, bump) in [(1.1, 0.0), (0.9, 0.0), (1.0, 0.5)] {
        let rho: Vec<f64> = (0..g.len())
            .map(|k| {
                let [x, y] = g.point(k);
                let b = if g.is_boundary(k % g.nx(), k / g.nx()) { 0.0 } else { bump * (PI * x).sin() * (PI * y).sin() };
                scale * s.density.rho.values[k] + b
            })
            .collect();
        let mu = MeasureDensity::new(ScalarField::new(g, rho).unwrap()).unwrap();
        assert!(e_lambda(&mu, lam, &lf, &g).unwrap() >= s.energy - 1e-12);
        assert!(kkt_defect(&mu, lam, &lf, &g) >= 0.0);
    }
}

#[test]
fn three_points_form_an_equilateral_triangle() {
    let c = minimize_w_n(3, &QuadForm::identity(), 8, 11).unwrap();
    let p = &c.points;
    let d = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let s = [d(p[0], p[1]), d(p[1], p[2]), d(p[0], p[2])];
    for x in &s {
        assert!((x / s[0] - 1.0).abs() < 1e-6, "{s:?}");
    }
    // oracle: equal radii r with 6 pi n r^2 ... stationarity gives r^2 = 1/3
    let r: Vec<f64> = p.iter().map(|q| q[0].hypot(q[1])).collect();
    assert!(r.iter().all(|r| (r * r - 1.0 / 3.0).abs() < 1e-6), "{r:?}");
}

#[test]
fn minimum_translates_with_the_confinement() {
    let q = QuadForm::new([[1.5, 0.3], [0.3, 0.8]]);
    let a = minimize_w_n(3, &q, 8, 3).unwrap();
    let b = minimize_w_n(3, &q.centered_at([0.4, -1.2]), 8, 3).unwrap();
    assert!((a.value - b.value).abs() < 1e-8);
}

#[test]
fn minimum_shifts_by_log_under_scaling() {
    // x -> x / sqrt(s) maps w_n for s Q onto w_n for Q plus pi n (n - 1) log(s) / 2
    let q = QuadForm::new([[1.2, 0.1], [0.1, 0.9]]);
    for n in [2usize, 4] {
        let s = 3.0;
        let a = minimize_w_n(n, &q, 8, 5).unwrap().value;
        let h = q.h;
        let sq = QuadForm::new([[s * h[0][0], s * h[0][1]], [s * h[1][0], s * h[1][1]]]);
        let b = minimize_w_n(n, &sq, 8, 5).unwrap().value;
        let expected = a + PI * (n * (n - 1)) as f64 * s.ln() / 2.0;
        assert!((b - expected).abs() < 1e-7, "{n}: {b} {expected}");
    }
}

#[test]
fn disk_density_matches_closed_form() {
    // uniform density 1/pi on the unit disk minimizes I for Q = |x|^2
    let n = 160;
    let g = Grid::square(2.4, n).unwrap().with_origin(-1.2, -1.2);
    let raw: Vec<f64> = (0..g.len())
        .map(|k| {
            let [x, y] = g.point(k);
            if x.hypot(y) <= 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mass = pinlab_core::mesh::integrate_values(&g, &raw);
    let rho = ScalarField::new(g, raw.iter().map(|v| v / mass).collect()).unwrap();
    let mu = MeasureDensity::new(rho).unwrap();
    let i = i_mu_energy(&mu, &QuadForm::identity()).unwrap();
    let i0 = i0_quadratic(&QuadForm::identity()).unwrap();
    assert!((i0 - 0.75 * PI).abs() < 1e-14);
    assert!((i - i0).abs() < 1e-2, "{i} {i0}");
}

#[test]
fn point_measures_relate_to_w_n() {
    let g = Grid::square(2.0, 40).unwrap().with_origin(-1.0, -1.0);
    let q = QuadForm::identity();
    let nodes = [(13usize, 20usize), (27, 22), (20, 31)];
    let n = nodes.len();
    let mut rho = vec![0.0; g.len()];
    let mut pts = Vec::new();
    for &(i, j) in &nodes {
        rho[g.index(i, j)] = 1.0 / (n as f64 * g.weight(i, j));
        pts.push(g.point(g.index(i, j)));
    }
    let mu = MeasureDensity::new(ScalarField::new(g, rho).unwrap()).unwrap();
    let i = i_mu_energy(&mu, &q).unwrap();
    let w = w_n_energy(&pts, &q).unwrap();
    let nf = n as f64;
    assert!((nf * nf * i - (w - nf * PI * (g.h().ln() + UNIT_SQUARE_LOG_MEAN))).abs() < 1e-10);
}

#[test]
fn unit_mass_is_required() {
    let g = Grid::square(1.0, 8).unwrap();
    let mu = MeasureDensity::new(ScalarField::constant(g, 2.0)).unwrap();
    assert!(i_mu_energy(&mu, &QuadForm::identity()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn critical_fields_increase(eps_exp in 3.0f64..12.0, n in 1usize..6) {
        let data = CriticalData { j0: 0.0207, xi_abs: 0.0698, sg_pp: -0.25, i0: 2.3, qform: QuadForm::identity() };
        let eps = 10f64.powf(-eps_exp);
        let a = data.h_n_root(n, eps).unwrap();
        let b = data.h_n_root(n + 1, eps).unwrap();
        prop_assert!(b > a);
        // at the root both branches carry the same energy
        let d = data.g_eps(n, eps, a) - data.g_eps(n - 1, eps, a);
        prop_assert!(d.abs() <= 1e-8 * data.g_eps(n, eps, a).abs().max(1.0));
    }
}
