//! Mass-constrained minimization of the pinned Allen-Cahn energy
//! `AC(u) = eps int |grad u|^2 + (1/eps) int (a - u^2)^2`
//! and measurements of its sharp-interface limit.

use crate::error::{Error, Result};
use crate::mesh::{dirichlet_form, integrate_values, laplacian_into, Grid, NeumannSolver, ScalarField};
use crate::pinning::PinningField;
use crate::scalar::{minimize_scalar, ScalarOptions};

#[derive(Debug, Clone, PartialEq)]
pub enum AcInit {
    /// `tanh((x - c)/eps)` with the line `x = c` placed to match the mean.
    VerticalSplit,
    /// Interface through the domain centre, rotated from the diagonal
    /// `y = x` by `tilt` radians.
    DiagonalSplit { tilt: f64 },
    Field(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcOptions {
    /// Relative energy change over `window` steps that counts as converged.
    pub tol: f64,
    pub window: usize,
    pub max_steps: usize,
    /// Pseudo time step; `f64::INFINITY` gives the pure stabilized iteration.
    pub tau: f64,
}

impl Default for AcOptions {
    fn default() -> Self {
        AcOptions { tol: 1e-10, window: 100, max_steps: 200_000, tau: f64::INFINITY }
    }
}

#[derive(Debug, Clone)]
pub struct AcSolve {
    pub u: ScalarField,
    pub beta: f64,
    pub energy: f64,
    /// Constant value of the unconstrained gradient at the minimizer.
    pub lagrange: f64,
    pub interface_length: f64,
    pub per_length_constant: f64,
    pub steps: usize,
    pub energy_history: Vec<f64>,
    /// `max |mean(u) - beta|` over all projected iterates.
    pub max_mass_error: f64,
}

fn ac_energy(grid: &Grid, a: &[f64], eps: f64, u: &[f64]) -> f64 {
    let pot: Vec<f64> = u.iter().zip(a).map(|(u, a)| (a - u * u) * (a - u * u)).collect();
    eps * dirichlet_form(grid, u, u) + integrate_values(grid, &pot) / eps
}

fn mean(grid: &Grid, u: &[f64]) -> f64 {
    integrate_values(grid, u) / grid.area()
}

pub fn initial_field(grid: &Grid, init: &AcInit, eps: f64, beta: f64) -> Result<Vec<f64>> {
    let (lx, ly) = (grid.lx(), grid.ly());
    let o = grid.origin();
    Ok(match init {
        AcInit::VerticalSplit => {
            let c = o[0] + 0.5 * lx * (1.0 - beta);
            (0..grid.len()).map(|k| ((grid.point(k)[0] - c) / eps).tanh()).collect()
        }
        AcInit::DiagonalSplit { tilt } => {
            let ang = std::f64::consts::FRAC_PI_4 + tilt;
            let (s, c) = ang.sin_cos();
            let (cx, cy) = (o[0] + 0.5 * lx, o[1] + 0.5 * ly);
            (0..grid.len())
                .map(|k| {
                    let [x, y] = grid.point(k);
                    // signed distance to the line through the centre with direction (c, s)
                    let d = (x - cx) * s - (y - cy) * c;
                    (d / eps).tanh()
                })
                .collect()
        }
        AcInit::Field(v) => {
            if v.len() != grid.len() {
                return Err(Error::InvalidInput(format!("initial field has {} values, grid has {}", v.len(), grid.len())));
            }
            v.clone()
        }
    })
}

/// Stabilized semi-implicit gradient flow with additive mean projection:
/// `(1/tau + s - 2 eps Delta) u* = (1/tau + s) u + (4/eps) u (a - u^2)`,
/// then `u = u* + beta - mean(u*)`.
pub fn minimize_ac(p: &PinningField, eps: f64, beta: f64, init: &AcInit, opts: &AcOptions) -> Result<AcSolve> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let grid = *p.grid();
    let a = &p.field.values;
    let amax = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(beta.abs() <= amax) {
        return Err(Error::InfeasibleBeta { beta, lo: -amax, hi: amax });
    }
    let solver = NeumannSolver::new(&grid);
    let s = 8.0 * amax / eps;
    let inv_tau = if opts.tau.is_finite() { 1.0 / opts.tau } else { 0.0 };
    let shift = inv_tau + s;
    let mut u = initial_field(&grid, init, eps, beta)?;
    let m0 = mean(&grid, &u);
    u.iter_mut().for_each(|v| *v += beta - m0);
    let mut e = ac_energy(&grid, a, eps, &u);
    let mut history = vec![e];
    let mut rhs = vec![0.0; u.len()];
    let mut next = vec![0.0; u.len()];
    let mut steps = 0;
    let mut max_mass_error = 0.0f64;
    loop {
        for k in 0..u.len() {
            rhs[k] = shift * u[k] + 4.0 / eps * u[k] * (a[k] - u[k] * u[k]);
        }
        solver.solve(&rhs, 2.0 * eps, shift, &mut next);
        let m = mean(&grid, &next);
        next.iter_mut().for_each(|v| *v += beta - m);
        max_mass_error = max_mass_error.max((mean(&grid, &next) - beta).abs());
        std::mem::swap(&mut u, &mut next);
        e = ac_energy(&grid, a, eps, &u);
        history.push(e);
        steps += 1;
        if steps >= opts.window {
            let old = history[steps - opts.window];
            if (old - e).abs() <= opts.tol * e.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        if steps >= opts.max_steps {
            return Err(Error::NonConvergence { iterations: steps, residual: (history[steps - 1] - e).abs() });
        }
    }
    // lagrange multiplier: mean of the unconstrained L2 gradient
    let mut lap = vec![0.0; u.len()];
    laplacian_into(&grid, &u, &mut lap);
    let grad: Vec<f64> = (0..u.len()).map(|k| -2.0 * eps * lap[k] - 4.0 / eps * u[k] * (a[k] - u[k] * u[k])).collect();
    let lagrange = mean(&grid, &grad);
    let field = ScalarField::new(grid, u)?;
    let interface_length = level_set_length(&field, 0.0);
    Ok(AcSolve {
        beta,
        energy: e,
        lagrange,
        per_length_constant: if interface_length > 0.0 { e / interface_length } else { f64::NAN },
        interface_length,
        steps,
        energy_history: history,
        max_mass_error,
        u: field,
    })
}

/// Segments of the level set `{u = c}` by marching squares with linear
/// interpolation along cell edges.
pub fn level_set_segments(f: &ScalarField, c: f64) -> Vec<[[f64; 2]; 2]> {
    let g = &f.grid;
    let (nx, ny, h) = (g.nx(), g.ny(), g.h());
    let mut segs = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let k = j * nx + i;
            // corners counter-clockwise: (i,j), (i+1,j), (i+1,j+1), (i,j+1)
            let v = [f.values[k] - c, f.values[k + 1] - c, f.values[k + nx + 1] - c, f.values[k + nx] - c];
            let pos = [[g.x(i), g.y(j)], [g.x(i) + h, g.y(j)], [g.x(i) + h, g.y(j) + h], [g.x(i), g.y(j) + h]];
            let mut pts: Vec<[f64; 2]> = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if (v[a] > 0.0) != (v[b] > 0.0) {
                    let t = v[a] / (v[a] - v[b]);
                    pts.push([pos[a][0] + t * (pos[b][0] - pos[a][0]), pos[a][1] + t * (pos[b][1] - pos[a][1])]);
                }
            }
            match pts.len() {
                2 => segs.push([pts[0], pts[1]]),
                4 => {
                    let centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
                    // edges 0..4 crossings are ordered; pair so that the centre sign separates corners
                    if (centre > 0.0) == (v[0] > 0.0) {
                        segs.push([pts[0], pts[1]]);
                        segs.push([pts[2], pts[3]]);
                    } else {
                        segs.push([pts[3], pts[0]]);
                        segs.push([pts[1], pts[2]]);
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

pub fn level_set_length(f: &ScalarField, c: f64) -> f64 {
    level_set_segments(f, c).iter().map(|s| (s[1][0] - s[0][0]).hypot(s[1][1] - s[0][1])).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interface1d {
    /// Extrapolated energy of one transition layer.
    pub constant: f64,
    /// `(eps, energy, width of the |u| < 0.9 band)` per run.
    pub runs: Vec<(f64, f64, f64)>,
}

/// Single-interface minimizer on `[0, 1]` with `a = 1`, mean 0, `h = eps/40`.
fn ac_1d(eps: f64) -> Result<(f64, f64)> {
    let n = (40.0 / eps).round() as usize + 1;
    let h = 1.0 / (n - 1) as f64;
    let w: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect();
    let mean1 = |u: &[f64]| u.iter().zip(&w).map(|(u, w)| u * w).sum::<f64>();
    let energy = |u: &[f64]| {
        let grad: f64 = u.windows(2).map(|p| (p[1] - p[0]) * (p[1] - p[0])).sum::<f64>() / h;
        let pot: f64 = u.iter().zip(&w).map(|(u, w)| w * (1.0 - u * u) * (1.0 - u * u)).sum();
        eps * grad + pot / eps
    };
    let mut u: Vec<f64> = (0..n).map(|i| ((i as f64 * h - 0.5) / eps).tanh()).collect();
    let s = 8.0 / eps;
    let kappa = 2.0 * eps / (h * h);
    // tridiagonal (s + 2 eps (-Delta_h)) with reflected ends
    let diag = s + 2.0 * kappa;
    let mut e_old = energy(&u);
    let mut rhs = vec![0.0; n];
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    for step in 0..1_000_000 {
        for i in 0..n {
            rhs[i] = s * u[i] + 4.0 / eps * u[i] * (1.0 - u[i] * u[i]);
        }
        // Thomas algorithm; row 0 has upper -2 kappa, row n-1 lower -2 kappa.
        let upper = |i: usize| if i == 0 { -2.0 * kappa } else { -kappa };
        let lower = |i: usize| if i == n - 1 { -2.0 * kappa } else { -kappa };
        cp[0] = upper(0) / diag;
        dp[0] = rhs[0] / diag;
        for i in 1..n {
            let m = diag - lower(i) * cp[i - 1];
            cp[i] = if i < n - 1 { upper(i) / m } else { 0.0 };
            dp[i] = (rhs[i] - lower(i) * dp[i - 1]) / m;
        }
        u[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            u[i] = dp[i] - cp[i] * u[i + 1];
        }
        let m = mean1(&u);
        u.iter_mut().for_each(|v| *v -= m);
        let e = energy(&u);
        if step > 10 && (e_old - e).abs() <= 1e-14 * e {
            break;
        }
        e_old = e;
    }
    let e = energy(&u);
    // width of the band |u| < 0.9 by linear interpolation of the crossings
    let cross = |level: f64| {
        (0..n - 1)
            .find(|&i| (u[i] - level) * (u[i + 1] - level) <= 0.0 && u[i] != u[i + 1])
            .map(|i| (i as f64 + (level - u[i]) / (u[i + 1] - u[i])) * h)
    };
    let width = match (cross(-0.9), cross(0.9)) {
        (Some(a), Some(b)) => (b - a).abs(),
        _ => f64::NAN,
    };
    Ok((e, width))
}

/// Richardson-extrapolated single-interface energy from runs at decreasing
/// `eps`, assuming a correction linear in `eps`.
pub fn interface_constant_1d(eps_list: &[f64]) -> Result<Interface1d> {
    if eps_list.is_empty() {
        return Err(Error::InvalidInput("need at least one eps".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) || eps_list.iter().any(|e| !(*e > 0.0 && *e < 0.5)) {
        return Err(Error::InvalidInput("eps values must be decreasing and lie in (0, 0.5)".into()));
    }
    let mut runs = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let (e, w) = ac_1d(eps)?;
        runs.push((eps, e, w));
    }
    let constant = if runs.len() >= 2 {
        let (e1, v1, _) = runs[runs.len() - 2];
        let (e2, v2, _) = runs[runs.len() - 1];
        v2 + (v2 - v1) * e2 / (e1 - e2)
    } else {
        runs[0].1
    };
    Ok(Interface1d { constant, runs })
}

#[derive(Debug, Clone)]
pub struct HomogenizedReport {
    pub solve: AcSolve,
    /// `v = u / U`.
    pub v: ScalarField,
    /// `max ||v| - 1|` over nodes farther than `band` from the interface of `v`.
    pub v_deviation: f64,
    pub band: f64,
    pub interface_length_v: f64,
    /// `max |U - M|`.
    pub u_sup_error: f64,
}

/// Runs the pinned Allen-Cahn problem and divides out the scalar minimizer.
pub fn homogenized_ac_check(
    p: &PinningField,
    eps: f64,
    beta: f64,
    init: &AcInit,
    opts: &AcOptions,
    scalar_opts: &ScalarOptions,
) -> Result<HomogenizedReport> {
    let s = minimize_scalar(p, eps, scalar_opts)?;
    let solve = minimize_ac(p, eps, beta, init, opts)?;
    let grid = *p.grid();
    let v = ScalarField::new(grid, solve.u.values.iter().zip(&s.u.values).map(|(u, b)| u / b).collect())?;
    let segs = level_set_segments(&v, 0.0);
    let band = 5.0 * eps;
    let mut dev = 0.0f64;
    for k in 0..grid.len() {
        let x = grid.point(k);
        let far = segs.iter().all(|s| point_segment_distance(x, s) > band);
        if far {
            dev = dev.max((v.values[k].abs() - 1.0).abs());
        }
    }
    let interface_length_v = segs.iter().map(|s| (s[1][0] - s[0][0]).hypot(s[1][1] - s[0][1])).sum();
    Ok(HomogenizedReport { solve, v, v_deviation: dev, band, interface_length_v, u_sup_error: s.sup_error })
}

fn point_segment_distance(x: [f64; 2], s: &[[f64; 2]; 2]) -> f64 {
    let (dx, dy) = (s[1][0] - s[0][0], s[1][1] - s[0][1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 { (((x[0] - s[0][0]) * dx + (x[1] - s[0][1]) * dy) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (x[0] - s[0][0] - t * dx).hypot(x[1] - s[0][1] - t * dy)
}
