//! Discrete magnetic Ginzburg-Landau energy
//! `1/2 int |grad u - i A u|^2 + 1/(4 eps^2) int (a - |u|^2)^2 + 1/2 int (curl A - hex)^2`,
//! its minimization, vorticity diagnostics and the comparison between pinned
//! and unpinned energies through `v = u / U`.
//!
//! Covariant differences live on grid edges: for an x-edge from node `a` to
//! node `b`, `h psi = (u_b - u_a) - i theta (u_a + u_b)/2` with
//! `theta = h (A1_a + A1_b)/2`. The curl of `A` is taken at cell centres.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::mesh::dump::read_block;
use crate::mesh::{gradient, integrate_values, write_field_block, ComplexField, Grid, NeumannSolver, ScalarField};
use crate::pinning::PinningField;
use crate::scalar::scalar_energy;

/// Nodal vector potential `(A1, A2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPotential {
    pub a1: ScalarField,
    pub a2: ScalarField,
}

impl VectorPotential {
    pub fn zero(grid: Grid) -> Self {
        VectorPotential { a1: ScalarField::constant(grid, 0.0), a2: ScalarField::constant(grid, 0.0) }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let a1 = ScalarField::from_fn(grid, |x, y| f(x, y).0);
        let a2 = ScalarField::from_fn(grid, |x, y| f(x, y).1);
        VectorPotential { a1, a2 }
    }

    fn parts(&self) -> (&[f64], &[f64]) {
        (&self.a1.values, &self.a2.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub potential: f64,
    pub field: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct GLState {
    pub u: ComplexField,
    pub a: VectorPotential,
    pub hex: f64,
    pub energy: EnergyParts,
    pub sweeps: usize,
    /// Max-norm of the L2 gradient at the returned state.
    pub grad_norm: f64,
    pub energy_history: Vec<f64>,
}

/// `1/2 sum_e c_e omega_e h^2 |psi_e|^2`; `omega_e = (w_a + w_b)/2` when node
/// weights are given, otherwise 1.
pub fn kinetic_energy(
    grid: &Grid,
    re: &[f64],
    im: &[f64],
    a: Option<(&[f64], &[f64])>,
    node_weight: Option<&[f64]>,
) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let h = grid.h();
    let mut total = 0.0;
    let mut edge = |ka: usize, kb: usize, c: f64, comp: Option<&[f64]>| {
        let theta = comp.map_or(0.0, |v| 0.5 * h * (v[ka] + v[kb]));
        let dre = re[kb] - re[ka];
        let dim = im[kb] - im[ka];
        let sre = 0.5 * (re[ka] + re[kb]);
        let sim = 0.5 * (im[ka] + im[kb]);
        let zre = dre + theta * sim;
        let zim = dim - theta * sre;
        let omega = node_weight.map_or(1.0, |w| 0.5 * (w[ka] + w[kb]));
        total += c * omega * (zre * zre + zim * zim);
    };
    for j in 0..ny {
        let c = grid.cx(j);
        for i in 0..nx - 1 {
            let k = j * nx + i;
            edge(k, k + 1, c, a.map(|p| p.0));
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let k = j * nx + i;
            edge(k, k + nx, grid.cy(i), a.map(|p| p.1));
        }
    }
    0.5 * total
}

/// `1/(4 eps^2) int (a - |u|^2)^2`, with `a = 1` when absent.
pub fn potential_energy(grid: &Grid, re: &[f64], im: &[f64], coef: Option<&[f64]>, eps: f64) -> f64 {
    let vals: Vec<f64> = (0..re.len())
        .map(|k| {
            let a = coef.map_or(1.0, |c| c[k]);
            let d = a - re[k] * re[k] - im[k] * im[k];
            d * d
        })
        .collect();
    integrate_values(grid, &vals) / (4.0 * eps * eps)
}

fn cell_curl(a1: &[f64], a2: &[f64], k: usize, nx: usize, h: f64) -> f64 {
    let dx = (a2[k + 1] + a2[k + 1 + nx]) - (a2[k] + a2[k + nx]);
    let dy = (a1[k + nx] + a1[k + nx + 1]) - (a1[k] + a1[k + 1]);
    (dx - dy) / (2.0 * h)
}

/// `1/2 sum_cells h^2 (curl A - hex)^2` with the curl at cell centres.
pub fn field_energy(grid: &Grid, a1: &[f64], a2: &[f64], hex: f64) -> f64 {
    let (nx, ny, h) = (grid.nx(), grid.ny(), grid.h());
    let mut total = 0.0;
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let d = cell_curl(a1, a2, j * nx + i, nx, h) - hex;
            total += d * d;
        }
    }
    0.5 * h * h * total
}

/// Energy of `(u, A)`; `p` absent means `a == 1`.
pub fn gl_energy(u: &ComplexField, a: &VectorPotential, p: Option<&PinningField>, eps: f64, hex: f64) -> EnergyParts {
    let g = &u.grid;
    let kinetic = kinetic_energy(g, &u.re, &u.im, Some(a.parts()), None);
    let potential = potential_energy(g, &u.re, &u.im, p.map(|p| &p.field.values[..]), eps);
    let field = field_energy(g, &a.a1.values, &a.a2.values, hex);
    EnergyParts { kinetic, potential, field, total: kinetic + potential + field }
}

/// Nodal energy density: `1/2 |grad u - i A u|^2 + (a - |u|^2)^2/(4 eps^2)
/// + 1/2 (curl A - hex)^2` with centred differences.
pub fn gl_density(u: &ComplexField, a: &VectorPotential, p: Option<&PinningField>, eps: f64, hex: f64) -> ScalarField {
    let g = u.grid;
    let (rx, ry) = gradient(&g, &u.re);
    let (ix, iy) = gradient(&g, &u.im);
    let (_, a1y) = gradient(&g, &a.a1.values);
    let (a2x, _) = gradient(&g, &a.a2.values);
    let values = (0..g.len())
        .map(|k| {
            let (a1, a2) = (a.a1.values[k], a.a2.values[k]);
            let cx = (rx[k] + a1 * u.im[k], ix[k] - a1 * u.re[k]);
            let cy = (ry[k] + a2 * u.im[k], iy[k] - a2 * u.re[k]);
            let coef = p.map_or(1.0, |p| p.field.values[k]);
            let d = coef - u.re[k] * u.re[k] - u.im[k] * u.im[k];
            let curl = a2x[k] - a1y[k] - hex;
            0.5 * (cx.0 * cx.0 + cx.1 * cx.1 + cy.0 * cy.0 + cy.1 * cy.1)
                + d * d / (4.0 * eps * eps)
                + 0.5 * curl * curl
        })
        .collect();
    ScalarField { grid: g, values }
}

/// Gradients of the discrete energy with respect to nodal values.
struct Gradients {
    ure: Vec<f64>,
    uim: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
}

fn energy_gradients(
    grid: &Grid,
    u: &ComplexField,
    a: &VectorPotential,
    coef: Option<&[f64]>,
    eps: f64,
    hex: f64,
) -> Gradients {
    let (nx, ny, h) = (grid.nx(), grid.ny(), grid.h());
    let n = grid.len();
    let mut g = Gradients { ure: vec![0.0; n], uim: vec![0.0; n], a1: vec![0.0; n], a2: vec![0.0; n] };
    let (re, im) = (&u.re, &u.im);
    let edge = |ka: usize, kb: usize, c: f64, comp: &[f64], ga: &mut [f64], gu: (&mut [f64], &mut [f64])| {
        let theta = 0.5 * h * (comp[ka] + comp[kb]);
        let sre = 0.5 * (re[ka] + re[kb]);
        let sim = 0.5 * (im[ka] + im[kb]);
        let zre = re[kb] - re[ka] + theta * sim;
        let zim = im[kb] - im[ka] - theta * sre;
        // d/du_b: c z (1 + i theta/2); d/du_a: c z (-1 + i theta/2)
        let t2 = 0.5 * theta;
        let (bre, bim) = (c * (zre - t2 * zim), c * (zim + t2 * zre));
        let (are, aim) = (c * (-zre - t2 * zim), c * (-zim + t2 * zre));
        gu.0[kb] += bre;
        gu.1[kb] += bim;
        gu.0[ka] += are;
        gu.1[ka] += aim;
        // dz/dtheta = -i s, so d/dtheta = c Re(conj(z) (-i s)) = c (zre sim - zim sre)
        let dtheta = c * (zre * sim - zim * sre);
        ga[ka] += 0.5 * h * dtheta;
        ga[kb] += 0.5 * h * dtheta;
    };
    for j in 0..ny {
        let c = grid.cx(j);
        for i in 0..nx - 1 {
            let k = j * nx + i;
            edge(k, k + 1, c, &a.a1.values, &mut g.a1, (&mut g.ure, &mut g.uim));
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let k = j * nx + i;
            edge(k, k + nx, grid.cy(i), &a.a2.values, &mut g.a2, (&mut g.ure, &mut g.uim));
        }
    }
    let inv = 1.0 / (eps * eps);
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let w = grid.weight(i, j);
            let c = coef.map_or(1.0, |c| c[k]);
            let d = c - re[k] * re[k] - im[k] * im[k];
            g.ure[k] -= w * inv * d * re[k];
            g.uim[k] -= w * inv * d * im[k];
        }
    }
    let (a1, a2) = (&a.a1.values, &a.a2.values);
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let k = j * nx + i;
            let r = 0.5 * h * (cell_curl(a1, a2, k, nx, h) - hex);
            g.a2[k + 1] += r;
            g.a2[k + 1 + nx] += r;
            g.a2[k] -= r;
            g.a2[k + nx] -= r;
            g.a1[k + nx] -= r;
            g.a1[k + nx + 1] -= r;
            g.a1[k] += r;
            g.a1[k + 1] += r;
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct GLOptions {
    /// Relative energy decrease over `window` sweeps that counts as converged.
    pub tol: f64,
    pub window: usize,
    pub max_sweeps: usize,
    /// Absolute L2-gradient max-norm at which descent stops immediately.
    pub grad_tol: f64,
}

impl Default for GLOptions {
    fn default() -> Self {
        GLOptions { tol: 1e-8, window: 50, max_sweeps: 20_000, grad_tol: 1e-10 }
    }
}

/// Starting point of a descent.
#[derive(Debug, Clone)]
pub enum GLInit {
    /// `u == 1`, `A == 0`.
    Uniform,
    Vortices(Vec<([f64; 2], i32)>),
    State(ComplexField, VectorPotential),
}

/// Product of mollified angle fields `((z - z_k)/|z - z_k|)^{d_k}` with
/// modulus `prod tanh(|z - z_k| / eps)^{|d_k|}`.
pub fn imprint_vortices(grid: Grid, vortices: &[([f64; 2], i32)], eps: f64) -> ComplexField {
    ComplexField::from_fn(grid, |x, y| {
        let mut re = 1.0;
        let mut im = 0.0;
        for &([cx, cy], d) in vortices {
            let (dx, dy) = (x - cx, y - cy);
            let r = dx.hypot(dy);
            if r == 0.0 {
                return (0.0, 0.0);
            }
            let phase = d as f64 * dy.atan2(dx);
            let rho = (r / eps).tanh().powi(d.abs());
            let (s, c) = phase.sin_cos();
            let (nre, nim) = (re * c - im * s, re * s + im * c);
            re = nre * rho;
            im = nim * rho;
        }
        (re, im)
    })
}

/// Reproducible smooth test state: one to three vortices of degree `+-1` in
/// the middle of the domain, a mild modulus ripple, and a vector potential
/// made of a few low Fourier modes.
pub fn random_gauge_state(grid: Grid, eps: f64, seed: u64) -> (ComplexField, VectorPotential) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let o = grid.origin();
    let (lx, ly) = (grid.lx(), grid.ly());
    let count = rng.gen_range(1..=3);
    let vortices: Vec<([f64; 2], i32)> = (0..count)
        .map(|_| {
            let c = [o[0] + lx * rng.gen_range(0.2..0.8), o[1] + ly * rng.gen_range(0.2..0.8)];
            (c, if rng.gen_bool(0.5) { 1 } else { -1 })
        })
        .collect();
    let base = imprint_vortices(grid, &vortices, eps);
    let (kx, ky, amp) = (rng.gen_range(1..4) as f64, rng.gen_range(1..4) as f64, rng.gen_range(0.05..0.2));
    let ripple = |x: f64, y: f64| {
        1.0 + amp * (std::f64::consts::PI * kx * (x - o[0]) / lx).cos() * (std::f64::consts::PI * ky * (y - o[1]) / ly).cos()
    };
    let mut u = base;
    for k in 0..grid.len() {
        let [x, y] = grid.point(k);
        let r = ripple(x, y);
        u.re[k] *= r;
        u.im[k] *= r;
    }
    let modes: Vec<[f64; 4]> = (0..3)
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0) / lx.min(ly),
                rng.gen_range(-1.0..1.0) / lx.min(ly),
                rng.gen_range(1..4) as f64,
                rng.gen_range(1..4) as f64,
            ]
        })
        .collect();
    let a = VectorPotential::from_fn(grid, |x, y| {
        let (sx, sy) = ((x - o[0]) / lx, (y - o[1]) / ly);
        modes.iter().fold((0.0, 0.0), |(a1, a2), m| {
            let pi = std::f64::consts::PI;
            (a1 + m[0] * (pi * m[2] * sy).sin(), a2 + m[1] * (pi * m[3] * sx).cos())
        })
    });
    (u, a)
}

/// Alternating preconditioned descent in `u` and `A`.
pub fn minimize_gl(
    p: Option<&PinningField>,
    eps: f64,
    hex: f64,
    grid: Grid,
    init: GLInit,
    opts: &GLOptions,
) -> Result<GLState> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    if !(hex >= 0.0) {
        return Err(Error::InvalidInput(format!("hex must be nonnegative, got {hex}")));
    }
    if let Some(p) = p {
        if *p.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    let (mut u, mut a) = match init {
        GLInit::Uniform => (
            ComplexField::from_fn(grid, |_, _| (1.0, 0.0)),
            VectorPotential::zero(grid),
        ),
        GLInit::Vortices(v) => (imprint_vortices(grid, &v, eps), VectorPotential::zero(grid)),
        GLInit::State(u, a) => {
            if u.grid != grid || a.a1.grid != grid || a.a2.grid != grid {
                return Err(Error::GridMismatch);
            }
            (u, a)
        }
    };
    let coef = p.map(|p| &p.field.values[..]);
    let weights = grid.weights();
    let solver = NeumannSolver::new(&grid);
    let n = grid.len();
    let energy = |u: &ComplexField, a: &VectorPotential| gl_energy(u, a, p, eps, hex).total;
    let mut e = energy(&u, &a);
    let mut history = vec![e];
    let mut step_u: f64 = 1.0;
    let mut step_a: f64 = 1.0;
    let mut grad_norm = f64::INFINITY;
    let mut sweeps = 0;
    let inv_eps2 = 1.0 / (eps * eps);
    let mut dir1 = vec![0.0; n];
    let mut dir2 = vec![0.0; n];
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let e_start = e;

        // u half-sweep
        let g = energy_gradients(&grid, &u, &a, coef, eps, hex);
        let l2re: Vec<f64> = g.ure.iter().zip(&weights).map(|(g, w)| g / w).collect();
        let l2im: Vec<f64> = g.uim.iter().zip(&weights).map(|(g, w)| g / w).collect();
        grad_norm = l2re
            .iter()
            .chain(&l2im)
            .chain(g.a1.iter().zip(&weights).map(|(g, w)| g / w).collect::<Vec<_>>().iter())
            .chain(g.a2.iter().zip(&weights).map(|(g, w)| g / w).collect::<Vec<_>>().iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if grad_norm <= opts.grad_tol {
            history.push(e);
            break;
        }
        solver.solve(&l2re, 1.0, inv_eps2, &mut dir1);
        solver.solve(&l2im, 1.0, inv_eps2, &mut dir2);
        let slope: f64 = (0..n).map(|k| g.ure[k] * dir1[k] + g.uim[k] * dir2[k]).sum();
        let mut t = (2.0 * step_u).min(1.0);
        let mut trial = u.clone();
        loop {
            for k in 0..n {
                trial.re[k] = u.re[k] - t * dir1[k];
                trial.im[k] = u.im[k] - t * dir2[k];
            }
            let et = energy(&trial, &a);
            if et <= e - 1e-4 * t * slope {
                u = trial;
                e = et;
                step_u = t;
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                break;
            }
        }

        // A half-sweep
        let g = energy_gradients(&grid, &u, &a, coef, eps, hex);
        let l2a1: Vec<f64> = g.a1.iter().zip(&weights).map(|(g, w)| g / w).collect();
        let l2a2: Vec<f64> = g.a2.iter().zip(&weights).map(|(g, w)| g / w).collect();
        solver.solve(&l2a1, 1.0, 1.0, &mut dir1);
        solver.solve(&l2a2, 1.0, 1.0, &mut dir2);
        let slope: f64 = (0..n).map(|k| g.a1[k] * dir1[k] + g.a2[k] * dir2[k]).sum();
        let mut t = (2.0 * step_a).min(1.0);
        let mut trial = a.clone();
        loop {
            for k in 0..n {
                trial.a1.values[k] = a.a1.values[k] - t * dir1[k];
                trial.a2.values[k] = a.a2.values[k] - t * dir2[k];
            }
            let et = energy(&u, &trial);
            if et <= e - 1e-4 * t * slope {
                a = trial;
                e = et;
                step_a = t;
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                break;
            }
        }

        if e > e_start + 1e-12 * (1.0 + e_start.abs()) {
            return Err(Error::Diverged { sweep: sweeps, before: e_start, after: e });
        }
        history.push(e);
        if history.len() > opts.window {
            let old = history[history.len() - 1 - opts.window];
            if old - e <= opts.tol * e.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }
    let energy = gl_energy(&u, &a, p, eps, hex);
    Ok(GLState { u, a, hex, energy, sweeps, grad_norm, energy_history: history })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallSum {
    pub center: [f64; 2],
    pub radius: f64,
    pub circulation: f64,
}

#[derive(Debug, Clone)]
pub struct VorticityReport {
    pub mu: ScalarField,
    pub j: (ScalarField, ScalarField),
    pub total_mu: f64,
    pub ball_sums: Vec<BallSum>,
}

/// Supercurrent `j = (iu, grad u) - |u|^2 A` at nodes.
pub fn supercurrent(u: &ComplexField, a: &VectorPotential) -> (Vec<f64>, Vec<f64>) {
    let g = u.grid;
    let (rx, ry) = gradient(&g, &u.re);
    let (ix, iy) = gradient(&g, &u.im);
    let mut j1 = vec![0.0; g.len()];
    let mut j2 = vec![0.0; g.len()];
    for k in 0..g.len() {
        let m2 = u.re[k] * u.re[k] + u.im[k] * u.im[k];
        j1[k] = u.re[k] * ix[k] - u.im[k] * rx[k] - m2 * a.a1.values[k];
        j2[k] = u.re[k] * iy[k] - u.im[k] * ry[k] - m2 * a.a2.values[k];
    }
    (j1, j2)
}

/// `mu = curl j + curl A` with centred differences, and its integrals over
/// the requested disks.
pub fn vorticity(u: &ComplexField, a: &VectorPotential, balls: &[([f64; 2], f64)]) -> VorticityReport {
    let g = u.grid;
    let (j1, j2) = supercurrent(u, a);
    let s1: Vec<f64> = j1.iter().zip(&a.a1.values).map(|(j, a)| j + a).collect();
    let s2: Vec<f64> = j2.iter().zip(&a.a2.values).map(|(j, a)| j + a).collect();
    let (_, d1y) = gradient(&g, &s1);
    let (d2x, _) = gradient(&g, &s2);
    let mu: Vec<f64> = d2x.iter().zip(&d1y).map(|(a, b)| a - b).collect();
    let total_mu = integrate_values(&g, &mu);
    let ball_sums = balls
        .iter()
        .map(|&(c, r)| {
            let mut s = 0.0;
            for jj in 0..g.ny() {
                for ii in 0..g.nx() {
                    let (x, y) = (g.x(ii), g.y(jj));
                    if (x - c[0]).hypot(y - c[1]) <= r {
                        s += g.weight(ii, jj) * mu[g.index(ii, jj)];
                    }
                }
            }
            BallSum { center: c, radius: r, circulation: s }
        })
        .collect();
    VorticityReport {
        mu: ScalarField { grid: g, values: mu },
        j: (ScalarField { grid: g, values: j1 }, ScalarField { grid: g, values: j2 }),
        total_mu,
        ball_sums,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiReport {
    /// `GL^pin(u, A) - E^pin(U)`.
    pub denoised: f64,
    /// `GL(v, A)`, or its `M`-rescaled version when the cell mean differs from 1.
    pub unpinned_of_v: f64,
    pub ratio: f64,
    /// `1/2 int U^2 |grad v - i A v|^2 + 1/(4 eps^2) int U^4 (1 - |v|^2)^2 + field`.
    pub weighted: f64,
    /// Plain `GL(v, A)` with unit weights.
    pub plain_of_v: f64,
    /// `min(1, min U)` and `max(1, max U)`.
    pub m: f64,
    pub big_m: f64,
    /// `m^4 GL(v,A) <= weighted <= M^4 GL(v,A)`, checked termwise.
    pub sandwich_holds: bool,
    /// `max |U - M|`.
    pub u_sup_error: f64,
}

/// Compares the pinned energy of `u` with the unpinned energy of `v = u / U`.
pub fn quasiminimizer_report(
    u: &ComplexField,
    a: &VectorPotential,
    p: &PinningField,
    big_u: &ScalarField,
    eps: f64,
    hex: f64,
) -> Result<QuasiReport> {
    let g = u.grid;
    if big_u.grid != g || *p.grid() != g || a.a1.grid != g {
        return Err(Error::GridMismatch);
    }
    let umin = big_u.min();
    if !(umin > 0.0) {
        return Err(Error::NotPositive(umin));
    }
    let pinned = gl_energy(u, a, Some(p), eps, hex).total;
    let denoised = pinned - scalar_energy(p, big_u, eps)?;
    let vre: Vec<f64> = u.re.iter().zip(&big_u.values).map(|(a, b)| a / b).collect();
    let vim: Vec<f64> = u.im.iter().zip(&big_u.values).map(|(a, b)| a / b).collect();
    let u2: Vec<f64> = big_u.values.iter().map(|v| v * v).collect();
    let u4: Vec<f64> = u2.iter().map(|v| v * v).collect();
    let field = field_energy(&g, &a.a1.values, &a.a2.values, hex);
    let plain_kin = kinetic_energy(&g, &vre, &vim, Some(a.parts()), None);
    let plain_pot = potential_energy(&g, &vre, &vim, None, eps);
    let w_kin = kinetic_energy(&g, &vre, &vim, Some(a.parts()), Some(&u2));
    let w_pot = {
        let vals: Vec<f64> = (0..g.len())
            .map(|k| {
                let d = 1.0 - vre[k] * vre[k] - vim[k] * vim[k];
                u4[k] * d * d
            })
            .collect();
        integrate_values(&g, &vals) / (4.0 * eps * eps)
    };
    let mean2 = p.target_mean();
    let unpinned_of_v = mean2 * plain_kin + mean2 * mean2 * plain_pot + field;
    let plain = plain_kin + plain_pot + field;
    let weighted = w_kin + w_pot + field;
    let m = umin.min(1.0);
    let big_m = big_u.max().max(1.0);
    let (m4, bm4) = (m.powi(4), big_m.powi(4));
    let slack = |x: f64| 1e-12 * x.abs();
    let sandwich_holds = m4 * plain_kin <= w_kin + slack(w_kin)
        && w_kin <= bm4 * plain_kin + slack(w_kin)
        && m4 * plain_pot <= w_pot + slack(w_pot)
        && w_pot <= bm4 * plain_pot + slack(w_pot)
        && m4 * field <= field
        && field <= bm4 * field;
    Ok(QuasiReport {
        denoised,
        unpinned_of_v,
        ratio: denoised / unpinned_of_v,
        weighted,
        plain_of_v: plain,
        m,
        big_m,
        sandwich_holds,
        u_sup_error: big_u.sup_distance(mean2.sqrt()),
    })
}

/// Manifest of a state checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointManifest {
    pub eps: f64,
    pub hex: f64,
    pub delta: f64,
    pub kind: String,
    pub seed: u64,
}

/// Writes the manifest line followed by four field dumps: `re u`, `im u`,
/// `A1`, `A2`.
pub fn write_checkpoint<W: Write>(
    out: &mut W,
    u: &ComplexField,
    a: &VectorPotential,
    manifest: &CheckpointManifest,
) -> Result<()> {
    writeln!(
        out,
        "# {:.16e} {:.16e} {:.16e} {} {}",
        manifest.eps, manifest.hex, manifest.delta, manifest.kind, manifest.seed
    )?;
    let g = u.grid;
    for block in [&u.re, &u.im, &a.a1.values, &a.a2.values] {
        writeln!(out, "# {} {} {:.16e} {:.16e} {:.16e}", g.nx(), g.ny(), g.h(), g.lx(), g.ly())?;
        write_field_block(out, &g, block)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<(ComplexField, VectorPotential, CheckpointManifest)> {
    let mut lines = input.lines();
    let bad = |s: &str| Error::InvalidInput(format!("bad checkpoint line: {s}"));
    let head = next_line(&mut lines)?;
    let parts: Vec<&str> = head.trim_start_matches('#').split_whitespace().collect();
    if parts.len() != 5 {
        return Err(bad(&head));
    }
    let manifest = CheckpointManifest {
        eps: parts[0].parse().map_err(|_| bad(&head))?,
        hex: parts[1].parse().map_err(|_| bad(&head))?,
        delta: parts[2].parse().map_err(|_| bad(&head))?,
        kind: parts[3].to_string(),
        seed: parts[4].parse().map_err(|_| bad(&head))?,
    };
    let mut blocks = Vec::new();
    let mut grid: Option<Grid> = None;
    for _ in 0..4 {
        let h = next_line(&mut lines)?;
        let f: Vec<&str> = h.trim_start_matches('#').split_whitespace().collect();
        if f.len() != 5 {
            return Err(bad(&h));
        }
        let nx: usize = f[0].parse().map_err(|_| bad(&h))?;
        let ny: usize = f[1].parse().map_err(|_| bad(&h))?;
        let lx: f64 = f[3].parse().map_err(|_| bad(&h))?;
        let ly: f64 = f[4].parse().map_err(|_| bad(&h))?;
        let g = Grid::with_nodes(lx, ly, nx, ny)?;
        if grid.is_some_and(|g0| g0 != g) {
            return Err(Error::GridMismatch);
        }
        grid = Some(g);
        blocks.push(read_block(&mut lines, &g)?);
    }
    let g = grid.expect("four blocks read");
    let mut blocks = blocks.into_iter();
    let mut take = || blocks.next().expect("four blocks read");
    let (re, im, a1, a2) = (take(), take(), take(), take());
    let u = ComplexField::new(g, re, im)?;
    let a = VectorPotential { a1: ScalarField::new(g, a1)?, a2: ScalarField::new(g, a2)? };
    Ok((u, a, manifest))
}

fn next_line<I: Iterator<Item = std::io::Result<String>>>(lines: &mut I) -> Result<String> {
    lines.next().ok_or_else(|| Error::InvalidInput("truncated checkpoint".into()))?.map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid {
        Grid::new(1.0, 1.0, n).unwrap()
    }

    #[test]
    fn energy_examples() {
        let g = unit(16);
        let one = ComplexField::from_fn(g, |_, _| (1.0, 0.0));
        let zero = ComplexField::from_fn(g, |_, _| (0.0, 0.0));
        let a0 = VectorPotential::zero(g);
        assert_eq!(gl_energy(&one, &a0, None, 0.1, 0.0).total, 0.0);
        let e = gl_energy(&zero, &a0, None, 0.5, 1.0);
        assert!((e.total - 1.5).abs() < 1e-14);
        let e = gl_energy(&one, &a0, None, 0.1, 2.0);
        assert!((e.field - 2.0).abs() < 1e-14);
    }

    fn pseudo(k: usize, salt: u64) -> f64 {
        let mut x = (k as u64).wrapping_mul(6364136223846793005).wrapping_add(salt);
        x ^= x >> 33;
        x = x.wrapping_mul(0xff51afd7ed558ccd);
        x ^= x >> 33;
        (x % 10_000) as f64 / 5_000.0 - 1.0
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = Grid::with_nodes(1.0, 0.75, 9, 7).unwrap();
        let n = g.len();
        let u = ComplexField::new(g, (0..n).map(|k| pseudo(k, 1)).collect(), (0..n).map(|k| pseudo(k, 2)).collect()).unwrap();
        let a = VectorPotential {
            a1: ScalarField::new(g, (0..n).map(|k| pseudo(k, 3)).collect()).unwrap(),
            a2: ScalarField::new(g, (0..n).map(|k| pseudo(k, 4)).collect()).unwrap(),
        };
        let coef: Vec<f64> = (0..n).map(|k| 1.0 + 0.3 * pseudo(k, 5)).collect();
        let (eps, hex) = (0.3, 0.7);
        let p = PinningField::uniform(g, 1.0).unwrap();
        let mut p = p;
        p.field.values = coef.clone();
        let e = |u: &ComplexField, a: &VectorPotential| gl_energy(u, a, Some(&p), eps, hex).total;
        let gr = energy_gradients(&g, &u, &a, Some(&coef), eps, hex);
        let step = 1e-6;
        for k in [0, 5, 13, 31, n - 1] {
            let mut up = u.clone();
            up.re[k] += step;
            let mut um = u.clone();
            um.re[k] -= step;
            let fd = (e(&up, &a) - e(&um, &a)) / (2.0 * step);
            assert!((fd - gr.ure[k]).abs() < 1e-6 * (1.0 + fd.abs()), "re {k}");
            let mut up = u.clone();
            up.im[k] += step;
            let mut um = u.clone();
            um.im[k] -= step;
            let fd = (e(&up, &a) - e(&um, &a)) / (2.0 * step);
            assert!((fd - gr.uim[k]).abs() < 1e-6 * (1.0 + fd.abs()), "im {k}");
            let mut ap = a.clone();
            ap.a1.values[k] += step;
            let mut am = a.clone();
            am.a1.values[k] -= step;
            let fd = (e(&u, &ap) - e(&u, &am)) / (2.0 * step);
            assert!((fd - gr.a1[k]).abs() < 1e-6 * (1.0 + fd.abs()), "a1 {k}");
            let mut ap = a.clone();
            ap.a2.values[k] += step;
            let mut am = a.clone();
            am.a2.values[k] -= step;
            let fd = (e(&u, &ap) - e(&u, &am)) / (2.0 * step);
            assert!((fd - gr.a2[k]).abs() < 1e-6 * (1.0 + fd.abs()), "a2 {k}");
        }
    }

    #[test]
    fn uniform_state_is_fixed_point() {
        let g = unit(16);
        let s = minimize_gl(None, 0.1, 0.0, g, GLInit::Uniform, &GLOptions::default()).unwrap();
        assert_eq!(s.energy.total, 0.0);
        assert!(s.u.re.iter().all(|v| *v == 1.0));
        assert!(s.a.a1.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn real_unit_field_has_no_vorticity() {
        let g = unit(32);
        let u = ComplexField::from_fn(g, |_, _| (1.0, 0.0));
        let a = VectorPotential::from_fn(g, |x, y| (y * y - x, x * y.sin()));
        let r = vorticity(&u, &a, &[([0.5, 0.5], 0.3)]);
        assert!(r.mu.max_abs() <= 1e-10);
        assert!((r.total_mu - integrate_values(&g, &r.mu.values)).abs() <= 1e-10);
    }

    #[test]
    fn checkpoint_round_trip() {
        let g = Grid::new(1.0, 1.0, 4).unwrap();
        let u = imprint_vortices(g, &[([0.4, 0.6], 1)], 0.2);
        let a = VectorPotential::from_fn(g, |x, y| (x * y, -x));
        let m = CheckpointManifest { eps: 0.2, hex: 1.5, delta: 0.01, kind: "trig".into(), seed: 9 };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &u, &a, &m).unwrap();
        let (u2, a2, m2) = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(u2, u);
        assert_eq!(a2, a);
        assert_eq!(m2, m);
    }
}
