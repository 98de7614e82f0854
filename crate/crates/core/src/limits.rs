//! Limit objects for vortex densities and positions near the first critical
//! field: `h0`, `xi0 = h0 - 1`, the mean-field energy `E_lambda` and its
//! minimizer, the regular part of the Green function, the renormalized
//! energies `w_n` and `I(mu)`, and critical-field bookkeeping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{dirichlet_form, integrate_values, DirichletSolver, Grid, ScalarField};

/// `E log|X - Y|` for `X, Y` independent and uniform on the unit square.
pub const UNIT_SQUARE_LOG_MEAN: f64 = -25.0 / 12.0 + std::f64::consts::FRAC_PI_3 + std::f64::consts::LN_2 / 3.0;

/// Average of `log |x|` over the square `[-1, 1]^2`.
const SQUARE_LOG_AVERAGE: f64 = std::f64::consts::LN_2 / 2.0 - 1.5 + std::f64::consts::FRAC_PI_4;

/// Quadratic form `Q(x) = (x - c)^T H (x - c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadForm {
    pub h: [[f64; 2]; 2],
    pub center: [f64; 2],
}

impl QuadForm {
    pub fn new(h: [[f64; 2]; 2]) -> Self {
        QuadForm { h, center: [0.0, 0.0] }
    }

    pub fn identity() -> Self {
        Self::new([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn centered_at(mut self, c: [f64; 2]) -> Self {
        self.center = c;
        self
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let h = &self.h;
        h[0][0] * d[0] * d[0] + (h[0][1] + h[1][0]) * d[0] * d[1] + h[1][1] * d[1] * d[1]
    }

    fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let h = &self.h;
        let s = 0.5 * (h[0][1] + h[1][0]);
        [2.0 * (h[0][0] * d[0] + s * d[1]), 2.0 * (s * d[0] + h[1][1] * d[1])]
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.h[0][0];
        let d = self.h[1][1];
        let b = 0.5 * (self.h[0][1] + self.h[1][0]);
        let m = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        [m - r, m + r]
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigenvalues()[0] > 0.0
    }
}

#[derive(Debug, Clone)]
pub struct LimitFields {
    pub h0: ScalarField,
    pub xi0: ScalarField,
    /// Interpolated minimum of `xi0`.
    pub xi0_min: f64,
    /// Smallest nodal value of `xi0`.
    pub xi0_node_min: f64,
    pub p: [f64; 2],
    /// Hessian of `xi0` at the minimizing node; `Q(x) = x^T H x`.
    pub qform: QuadForm,
    pub j0: f64,
    pub h0c1_per_logeps: f64,
    pub sg_pp: f64,
    /// Max-norm defect of the discrete problem for `h0`.
    pub residual: f64,
}

fn dirichlet_defect(grid: &Grid, u: &[f64], rhs: &[f64]) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let inv = 1.0 / (grid.h() * grid.h());
    let mut m = 0.0f64;
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            let lap = ((u[k - 1] - u[k]) + (u[k + 1] - u[k]) + (u[k - nx] - u[k]) + (u[k + nx] - u[k])) * inv;
            m = m.max((-lap + u[k] - rhs[k]).abs());
        }
    }
    m
}

/// `1/2 (int |grad xi|^2 + int xi^2)` for `xi` vanishing on the boundary.
fn h1_half(grid: &Grid, xi: &[f64]) -> f64 {
    let sq: Vec<f64> = xi.iter().map(|v| v * v).collect();
    0.5 * (dirichlet_form(grid, xi, xi) + integrate_values(grid, &sq))
}

/// Solves for `h0`, locates the minimum of `xi0` and evaluates `J0`, the
/// Hessian form and `S_G(p, p)`.
pub fn solve_limit_fields(grid: &Grid) -> Result<LimitFields> {
    let (nx, ny, h) = (grid.nx(), grid.ny(), grid.h());
    let solver = DirichletSolver::new(grid);
    let rhs = vec![-1.0; grid.len()];
    let mut xi = vec![0.0; grid.len()];
    solver.solve(&rhs, 1.0, 1.0, &mut xi);
    let residual = dirichlet_defect(grid, &xi, &rhs);

    let node_min = xi.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = node_min.abs().max(f64::MIN_POSITIVE);
    let mut cands: Vec<([f64; 2], f64, usize)> = Vec::new();
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            if xi[k] - node_min <= 1e-12 * scale {
                let fx = |di: isize| xi[(k as isize + di) as usize];
                let fy = |dj: isize| xi[(k as isize + dj * nx as isize) as usize];
                let (d2x, d1x) = (fx(-1) - 2.0 * xi[k] + fx(1), fx(1) - fx(-1));
                let (d2y, d1y) = (fy(-1) - 2.0 * xi[k] + fy(1), fy(1) - fy(-1));
                let ox = if d2x > 0.0 { -0.5 * d1x / d2x } else { 0.0 };
                let oy = if d2y > 0.0 { -0.5 * d1y / d2y } else { 0.0 };
                let val = xi[k]
                    - if d2x > 0.0 { d1x * d1x / (8.0 * d2x) } else { 0.0 }
                    - if d2y > 0.0 { d1y * d1y / (8.0 * d2y) } else { 0.0 };
                cands.push(([grid.x(i) + ox * h, grid.y(j) + oy * h], val, k));
            }
        }
    }
    let (p, xi_min, kmin) = cands[0];
    for c in &cands[1..] {
        let dist = (c.0[0] - p[0]).hypot(c.0[1] - p[1]);
        if dist > 0.25 * h {
            return Err(Error::NonUniqueMinimizer(p, c.0));
        }
    }

    let k = kmin;
    let h2 = h * h;
    let hxx = (xi[k - 1] - 2.0 * xi[k] + xi[k + 1]) / h2;
    let hyy = (xi[k - nx] - 2.0 * xi[k] + xi[k + nx]) / h2;
    let hxy = (xi[k + nx + 1] - xi[k + nx - 1] - xi[k - nx + 1] + xi[k - nx - 1]) / (4.0 * h2);
    let qform = QuadForm::new([[hxx, hxy], [hxy, hyy]]);

    let j0 = h1_half(grid, &xi);
    let sg_pp = green_regular_part(grid, &solver, p);
    let h0 = ScalarField::new(*grid, xi.iter().map(|v| 1.0 + v).collect())?;
    Ok(LimitFields {
        h0,
        xi0: ScalarField::new(*grid, xi)?,
        xi0_min: xi_min,
        xi0_node_min: node_min,
        p,
        qform,
        j0,
        h0c1_per_logeps: 1.0 / (2.0 * xi_min.abs()),
        sg_pp,
        residual,
    })
}

/// `2 pi R(p)` where `R = G(., p) + log|x - p| / (2 pi)` solves
/// `(-Delta + 1) R = log|x - p| / (2 pi)` with boundary data `log|x - p| / (2 pi)`.
fn green_regular_part(grid: &Grid, solver: &DirichletSolver, p: [f64; 2]) -> f64 {
    let (nx, ny, h) = (grid.nx(), grid.ny(), grid.h());
    let tau = 2.0 * std::f64::consts::PI;
    let cell_avg = (0.5 * h).ln() + SQUARE_LOG_AVERAGE;
    let logr = |i: usize, j: usize| {
        let r = (grid.x(i) - p[0]).hypot(grid.y(j) - p[1]);
        if r < 0.5 * h * 1e-6 {
            cell_avg
        } else {
            r.ln()
        }
    };
    let mut boundary = vec![0.0; grid.len()];
    let mut rhs = vec![0.0; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let v = logr(i, j) / tau;
            if grid.is_boundary(i, j) {
                boundary[k] = v;
            } else {
                rhs[k] = v;
            }
        }
    }
    let inv = 1.0 / (h * h);
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            rhs[k] += (boundary[k - 1] + boundary[k + 1] + boundary[k - nx] + boundary[k + nx]) * inv;
        }
    }
    let mut r = vec![0.0; grid.len()];
    solver.solve(&rhs, 1.0, 1.0, &mut r);
    for k in 0..grid.len() {
        if boundary[k] != 0.0 || grid.is_boundary(k % nx, k / nx) {
            r[k] = boundary[k];
        }
    }
    tau * bilinear(grid, &r, p)
}

fn bilinear(grid: &Grid, f: &[f64], p: [f64; 2]) -> f64 {
    let nx = grid.nx();
    let fx = ((p[0] - grid.x(0)) / grid.h()).clamp(0.0, (nx - 1) as f64);
    let fy = ((p[1] - grid.y(0)) / grid.h()).clamp(0.0, (grid.ny() - 1) as f64);
    let i = (fx.floor() as usize).min(nx - 2);
    let j = (fy.floor() as usize).min(grid.ny() - 2);
    let (tx, ty) = (fx - i as f64, fy - j as f64);
    let k = j * nx + i;
    (1.0 - tx) * (1.0 - ty) * f[k] + tx * (1.0 - ty) * f[k + 1] + (1.0 - tx) * ty * f[k + nx] + tx * ty * f[k + nx + 1]
}

/// Nonnegative grid density.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureDensity {
    pub rho: ScalarField,
    pub total: f64,
}

impl MeasureDensity {
    pub fn new(rho: ScalarField) -> Result<Self> {
        if let Some(v) = rho.values.iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidInput(format!("density must be nonnegative, found {v}")));
        }
        let total = integrate_values(&rho.grid, &rho.values);
        Ok(MeasureDensity { rho, total })
    }

    pub fn zero(grid: Grid) -> Self {
        MeasureDensity { rho: ScalarField::constant(grid, 0.0), total: 0.0 }
    }
}

/// `xi_mu = h_mu - 1`: `xi0` plus the Dirichlet solve of `(-Delta + 1) z = rho`.
fn xi_of(mu: &MeasureDensity, lf: &LimitFields, solver: &DirichletSolver) -> Vec<f64> {
    let mut z = vec![0.0; mu.rho.values.len()];
    solver.solve(&mu.rho.values, 1.0, 1.0, &mut z);
    lf.xi0.values.iter().zip(&z).map(|(a, b)| a + b).collect()
}

/// `|mu| / (2 lam) + 1/2 int (|grad h_mu|^2 + |h_mu - 1|^2)`.
pub fn e_lambda(mu: &MeasureDensity, lam: f64, lf: &LimitFields, grid: &Grid) -> Result<f64> {
    if !(lam > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lam}")));
    }
    if mu.rho.grid != *grid || lf.xi0.grid != *grid {
        return Err(Error::GridMismatch);
    }
    let solver = DirichletSolver::new(grid);
    let xi = xi_of(mu, lf, &solver);
    Ok(mu.total / (2.0 * lam) + h1_half(grid, &xi))
}

#[derive(Debug, Clone)]
pub struct ObstacleSolve {
    pub density: MeasureDensity,
    pub energy: f64,
    /// Largest KKT violation of the recomputed `xi_mu` against `-1/(2 lam)`.
    pub kkt_defect: f64,
    pub sweeps: usize,
}

/// Minimizes `E_lambda` over nonnegative densities.
///
/// The optimality system is the obstacle problem `xi >= -1/(2 lam)`,
/// `(-Delta + 1) xi = -1 + rho`, `rho >= 0`, `rho (xi + 1/(2 lam)) = 0`,
/// solved by projected SOR on `xi`; the density is read off as
/// `rho = -Delta_h xi + xi + 1`.
pub fn minimize_e_lambda(lam: f64, lf: &LimitFields, grid: &Grid, tol: f64) -> Result<ObstacleSolve> {
    if !(lam > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lam}")));
    }
    if lf.xi0.grid != *grid {
        return Err(Error::GridMismatch);
    }
    let (nx, ny, h) = (grid.nx(), grid.ny(), grid.h());
    let psi = -1.0 / (2.0 * lam);
    let inv = 1.0 / (h * h);
    let diag = 4.0 * inv + 1.0;
    let mut xi: Vec<f64> = lf.xi0.values.iter().map(|v| v.max(psi)).collect();
    for j in 0..ny {
        for i in 0..nx {
            if grid.is_boundary(i, j) {
                xi[j * nx + i] = 0.0;
            }
        }
    }
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / (nx.max(ny) - 1) as f64).sin());
    let stop = 1e-4 * tol * h;
    let max_sweeps = 1_000_000;
    let mut sweeps = 0;
    loop {
        let mut change = 0.0f64;
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let k = j * nx + i;
                let gs = (-1.0 + (xi[k - 1] + xi[k + 1] + xi[k - nx] + xi[k + nx]) * inv) / diag;
                let new = ((1.0 - omega) * xi[k] + omega * gs).max(psi);
                change = change.max((new - xi[k]).abs());
                xi[k] = new;
            }
        }
        sweeps += 1;
        if change <= stop {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(Error::NonConvergence { iterations: sweeps, residual: change });
        }
    }
    // the density lives on the contact set, where the projection pinned xi to psi
    let mut rho = vec![0.0; grid.len()];
    let contact = psi + 1e-12 * psi.abs();
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let k = j * nx + i;
            if xi[k] > contact {
                continue;
            }
            let lap = ((xi[k - 1] - xi[k]) + (xi[k + 1] - xi[k]) + (xi[k - nx] - xi[k]) + (xi[k + nx] - xi[k])) * inv;
            let r = -lap + xi[k] + 1.0;
            rho[k] = r.max(0.0);
        }
    }
    let density = MeasureDensity::new(ScalarField::new(*grid, rho)?)?;
    let solver = DirichletSolver::new(grid);
    let xi_check = xi_of(&density, lf, &solver);
    let kkt_defect = kkt(&density, &xi_check, psi, grid);
    let energy = density.total / (2.0 * lam) + h1_half(grid, &xi_check);
    Ok(ObstacleSolve { density, energy, kkt_defect, sweeps })
}

fn kkt(mu: &MeasureDensity, xi: &[f64], psi: f64, grid: &Grid) -> f64 {
    let mut defect = 0.0f64;
    for j in 1..grid.ny() - 1 {
        for i in 1..grid.nx() - 1 {
            let k = grid.index(i, j);
            let d = if mu.rho.values[k] > 0.0 { (xi[k] - psi).abs() } else { (psi - xi[k]).max(0.0) };
            defect = defect.max(d);
        }
    }
    defect
}

/// KKT violation of an arbitrary density for `E_lambda`.
pub fn kkt_defect(mu: &MeasureDensity, lam: f64, lf: &LimitFields, grid: &Grid) -> f64 {
    let solver = DirichletSolver::new(grid);
    let xi = xi_of(mu, lf, &solver);
    kkt(mu, &xi, -1.0 / (2.0 * lam), grid)
}

/// `-pi sum_{i != j} log|x_i - x_j| + pi n sum_i Q(x_i)`.
pub fn w_n_energy(points: &[[f64; 2]], q: &QuadForm) -> Result<f64> {
    let n = points.len();
    let mut logs = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = (points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]);
            if d == 0.0 {
                return Err(Error::CoincidentPoints(i, j));
            }
            logs += d.ln();
        }
    }
    let conf: f64 = points.iter().map(|x| q.eval(*x)).sum();
    let pi = std::f64::consts::PI;
    Ok(-2.0 * pi * logs + pi * n as f64 * conf)
}

fn w_n_gradient(points: &[[f64; 2]], q: &QuadForm) -> Vec<[f64; 2]> {
    let n = points.len();
    let pi = std::f64::consts::PI;
    let mut g = vec![[0.0; 2]; n];
    for k in 0..n {
        let gq = q.grad(points[k]);
        g[k] = [pi * n as f64 * gq[0], pi * n as f64 * gq[1]];
        for j in 0..n {
            if j != k {
                let dx = points[k][0] - points[j][0];
                let dy = points[k][1] - points[j][1];
                let r2 = dx * dx + dy * dy;
                g[k][0] -= 2.0 * pi * dx / r2;
                g[k][1] -= 2.0 * pi * dy / r2;
            }
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    pub points: Vec<[f64; 2]>,
    pub value: f64,
    pub grad_norm: f64,
}

fn descend_w_n(mut x: Vec<[f64; 2]>, q: &QuadForm) -> PointConfig {
    let norm = |g: &[[f64; 2]]| g.iter().fold(0.0f64, |m, v| m.max(v[0].abs()).max(v[1].abs()));
    let mut f = w_n_energy(&x, q).unwrap_or(f64::INFINITY);
    let mut g = w_n_gradient(&x, q);
    let mut step = 1e-2;
    for _ in 0..200_000 {
        if norm(&g) <= 1e-10 {
            break;
        }
        let gg: f64 = g.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum();
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<[f64; 2]> = x.iter().zip(&g).map(|(p, d)| [p[0] - t * d[0], p[1] - t * d[1]]).collect();
            if let Ok(ft) = w_n_energy(&trial, q) {
                // near the minimum the Armijo decrease drops below roundoff in f
                let flat = (ft - f).abs() <= 1e-13 * f.abs().max(1.0);
                let gt = w_n_gradient(&trial, q);
                if ft <= f - 1e-4 * t * gg || (flat && norm(&gt) < norm(&g)) {
                    // Barzilai-Borwein estimate for the next trial step
                    let (mut ss, mut sy) = (0.0, 0.0);
                    for k in 0..x.len() {
                        for c in 0..2 {
                            let s = trial[k][c] - x[k][c];
                            let y = gt[k][c] - g[k][c];
                            ss += s * s;
                            sy += s * y;
                        }
                    }
                    step = if sy > 0.0 { (ss / sy).clamp(1e-8, 1e2) } else { 2.0 * t };
                    x = trial;
                    f = ft;
                    g = gt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let grad_norm = norm(&g);
    PointConfig { points: x, value: f, grad_norm }
}

/// Best of `restarts` descents from seeded random starts. Ties in value are
/// broken by lexicographic comparison of the configurations.
pub fn minimize_w_n(n: usize, q: &QuadForm, restarts: usize, seed: u64) -> Result<PointConfig> {
    if n == 0 {
        return Ok(PointConfig { points: Vec::new(), value: 0.0, grad_norm: 0.0 });
    }
    if !q.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    let radius = (n as f64 / q.eigenvalues()[0]).sqrt();
    let runs: Vec<PointConfig> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let pts = (0..n)
                .map(|_| {
                    [
                        q.center[0] + radius * (rng.gen::<f64>() - 0.5),
                        q.center[1] + radius * (rng.gen::<f64>() - 0.5),
                    ]
                })
                .collect();
            descend_w_n(pts, q)
        })
        .collect();
    let best = runs
        .into_iter()
        .min_by(|a, b| {
            a.value.total_cmp(&b.value).then_with(|| {
                let fa = a.points.iter().flatten();
                let fb = b.points.iter().flatten();
                fa.zip(fb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
            })
        })
        .expect("at least one restart");
    if best.grad_norm > 1e-8 {
        return Err(Error::NonConvergence { iterations: restarts, residual: best.grad_norm });
    }
    Ok(best)
}

/// `min I` for a quadratic `Q`: the minimizer is uniform on an ellipse with
/// semi-axes `a, b` fixed by `a + b = sqrt(2 (1/q1 + 1/q2))` and
/// `a q1 (a + b) = 2`, and `I0 = pi (3/4 - log((a + b)/2))`.
pub fn i0_quadratic(q: &QuadForm) -> Result<f64> {
    if !q.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    let [q1, q2] = q.eigenvalues();
    let s = (2.0 * (1.0 / q1 + 1.0 / q2)).sqrt();
    Ok(std::f64::consts::PI * (0.75 - (0.5 * s).ln()))
}

/// `-pi int int log|x - y| dmu dmu + pi int Q dmu` for a probability density.
pub fn i_mu_energy(mu: &MeasureDensity, q: &QuadForm) -> Result<f64> {
    if (mu.total - 1.0).abs() > 1e-8 {
        return Err(Error::MassNotOne(mu.total));
    }
    let g = &mu.rho.grid;
    let h = g.h();
    let atoms: Vec<([f64; 2], f64)> = (0..g.len())
        .filter(|&k| mu.rho.values[k] > 0.0)
        .map(|k| {
            let (i, j) = (k % g.nx(), k / g.nx());
            (g.point(k), g.weight(i, j) * mu.rho.values[k])
        })
        .collect();
    let pi = std::f64::consts::PI;
    let self_log = h.ln() + UNIT_SQUARE_LOG_MEAN;
    let mut logs = 0.0;
    let mut conf = 0.0;
    for (a, (xa, ma)) in atoms.iter().enumerate() {
        conf += ma * q.eval(*xa);
        logs += ma * ma * self_log;
        let mut row = 0.0;
        for (xb, mb) in &atoms[a + 1..] {
            row += mb * (xa[0] - xb[0]).hypot(xa[1] - xb[1]).ln();
        }
        logs += 2.0 * ma * row;
    }
    Ok(-pi * logs + pi * conf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalRow {
    pub n: usize,
    pub f_eps: f64,
    pub g_eps: f64,
    pub h_n_root: f64,
    pub h_n_asymptotic: f64,
    pub k_n: f64,
    pub min_w_n: f64,
}

/// Inputs to the critical-field formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalData {
    pub j0: f64,
    pub xi_abs: f64,
    pub sg_pp: f64,
    pub i0: f64,
    pub qform: QuadForm,
}

impl CriticalData {
    pub fn from_fields(lf: &LimitFields) -> Result<Self> {
        Ok(CriticalData {
            j0: lf.j0,
            xi_abs: lf.xi0_min.abs(),
            sg_pp: lf.sg_pp,
            i0: i0_quadratic(&lf.qform)?,
            qform: QuadForm::new(lf.qform.h),
        })
    }

    /// `g_eps(n)` at applied field `hex`, with `l = sqrt(n / hex)`.
    pub fn g_eps(&self, n: usize, eps: f64, hex: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let nf = n as f64;
        let base = hex * hex * self.j0;
        if n == 0 {
            return base;
        }
        let log_inv_l = 0.5 * (hex / nf).ln();
        base + pi * nf * eps.ln().abs() - 2.0 * pi * nf * hex * self.xi_abs
            + pi * (nf * nf - nf) * log_inv_l
            + pi * nf * nf * self.sg_pp
            + nf * nf * self.i0
    }

    /// `f_eps(n)` at applied field `hex`.
    pub fn f_eps(&self, n: usize, eps: f64, hex: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let nf = n as f64;
        let base = hex * hex * self.j0;
        if n == 0 {
            return base;
        }
        let l = (nf / hex).sqrt();
        base + pi * nf * (l / eps).ln() - 2.0 * pi * nf * hex * self.xi_abs
            + pi * nf * nf * self.sg_pp
            + pi * nf * nf * (1.0 / l).ln()
    }

    /// `hex` at which `g_eps(n) = g_eps(n - 1)` on the branch where the
    /// difference decreases in `hex`.
    pub fn h_n_root(&self, n: usize, eps: f64) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        let d = |hex: f64| self.g_eps(n, eps, hex) - self.g_eps(n - 1, eps, hex);
        let peak = (n as f64 - 1.0) / (2.0 * self.xi_abs);
        let mut lo = peak.max(1e-12);
        if d(lo) < 0.0 {
            return Err(Error::BracketFailure { n, lo, hi: lo });
        }
        let mut hi = lo.max(1.0) * 2.0;
        let mut expand = 0;
        while d(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            expand += 1;
            if expand > 200 {
                return Err(Error::BracketFailure { n, lo: peak, hi });
            }
        }
        while hi - lo > 1e-14 * hi {
            let mid = 0.5 * (lo + hi);
            if d(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `K_n` given the minima of `w_n` and `w_{n-1}`.
    pub fn k_n(&self, n: usize, min_wn: f64, min_wn1: f64, gamma: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let nf = n as f64;
        let first = (nf - 1.0) * (1.0 / nf).ln();
        let second = if n >= 2 { 0.5 * (nf * nf - 3.0 * nf + 2.0) * ((nf - 1.0) / nf).ln() } else { 0.0 };
        first + second + (min_wn - min_wn1 + gamma + (2.0 * nf - 1.0) * pi * self.sg_pp) / pi
    }

    pub fn h_n_asymptotic(&self, n: usize, eps: f64, k_n: f64) -> f64 {
        let le = eps.ln().abs();
        (le + (n as f64 - 1.0) * (le / (2.0 * self.xi_abs)).ln() + k_n) / (2.0 * self.xi_abs)
    }
}

/// Critical-field table for `n = 1..=n_max`. `f_eps` and `g_eps` are evaluated
/// at `hex` (default: the leading-order first critical field).
pub fn critical_fields(
    n_max: usize,
    eps: f64,
    lf: &LimitFields,
    gamma: f64,
    hex: Option<f64>,
) -> Result<Vec<CriticalRow>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("eps must lie in (0, 1), got {eps}")));
    }
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    let data = CriticalData::from_fields(lf)?;
    let hex = hex.unwrap_or(lf.h0c1_per_logeps * eps.ln().abs());
    let mut rows = Vec::with_capacity(n_max);
    let mut prev_w = 0.0;
    for n in 1..=n_max {
        let w = minimize_w_n(n, &data.qform, 8, 2024 + n as u64)?.value;
        let k_n = data.k_n(n, w, prev_w, gamma);
        rows.push(CriticalRow {
            n,
            f_eps: data.f_eps(n, eps, hex),
            g_eps: data.g_eps(n, eps, hex),
            h_n_root: data.h_n_root(n, eps)?,
            h_n_asymptotic: data.h_n_asymptotic(n, eps, k_n),
            k_n,
            min_w_n: w,
        });
        prev_w = w;
    }
    Ok(rows)
}
