//! The positive minimizer of the scalar pinned energy
//! `E(U) = 1/2 int |grad U|^2 + 1/(4 eps^2) int (a - U^2)^2`
//! under Neumann conditions, its unit-cell counterpart, tiling of symmetric
//! cell solutions, and the decomposition identity `u = U v`.
//!
//! Both the domain and the cell problem are solved in the common form
//! `-kappa Delta_h U = U (a - U^2)` with `kappa = eps^2` on the domain and
//! `kappa = 1 / chi^2` on the unit cell.

use crate::error::{Error, Result};
use crate::magnetic::{field_energy, kinetic_energy, VectorPotential};
use crate::mesh::{
    dirichlet_form, gradient_sup, integrate_values, laplacian_into, ComplexField, Grid,
    NeumannSolver, ScalarField,
};
use crate::pinning::{sample_periodic, CellFunction, PinningField};

/// Starting guess for the solver.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Constant `sqrt(mean a)`.
    SqrtMean,
    /// Constant `max a`.
    MaxA,
    Constant(f64),
    Field(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarOptions {
    /// Max-norm tolerance on the Euler-Lagrange defect.
    pub tol: f64,
    pub max_newton: usize,
    pub max_flow: usize,
    pub init: Init,
}

impl Default for ScalarOptions {
    fn default() -> Self {
        ScalarOptions { tol: 1e-10, max_newton: 200, max_flow: 100_000, init: Init::SqrtMean }
    }
}

impl ScalarOptions {
    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Converged domain solve.
#[derive(Debug, Clone)]
pub struct ScalarSolve {
    pub u: ScalarField,
    /// `E^pin_eps(U)`.
    pub energy: f64,
    /// `max |eps^2 (-Delta_h U) - U (a - U^2)|`.
    pub el_residual: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub flow_steps: usize,
    pub grad_sup: f64,
    /// `max |U - M|` with `M^2` the cell mean (or expectation) of `a`.
    pub sup_error: f64,
    /// Energy after the initial guess and after every accepted iterate.
    pub energy_history: Vec<f64>,
    /// `(min U, max U)` after every accepted iterate.
    pub range_history: Vec<(f64, f64)>,
}

/// Converged unit-cell solve of `-Delta U = chi^2 U (a0 - U^2)`.
#[derive(Debug, Clone)]
pub struct CellSolve {
    pub uhat: ScalarField,
    pub cell: CellFunction,
    pub chi: f64,
    /// `int_Q Uhat`.
    pub ell: f64,
    /// Discrete `H^1` norm of `Uhat - ell`.
    pub w1p_deficit: f64,
    /// `1/2 int |grad Uhat|^2 + chi^2/4 int (a0 - Uhat^2)^2`.
    pub energy: f64,
    /// The same energy at the constant `sqrt(int a0)`.
    pub energy_at_mean: f64,
    /// `max |-Delta_h Uhat - chi^2 Uhat (a0 - Uhat^2)|`.
    pub el_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarDiagnostics {
    pub sup_error: f64,
    pub grad_bound_ratio: f64,
    pub l2_error: f64,
}

struct RawSolve {
    u: Vec<f64>,
    energy: f64,
    residual: f64,
    newton_steps: usize,
    flow_steps: usize,
    energy_history: Vec<f64>,
    range_history: Vec<(f64, f64)>,
}

/// `-kappa Delta_h U - U (a - U^2) = 0` together with its energy.
struct Semilinear<'a> {
    grid: Grid,
    a: &'a [f64],
    kappa: f64,
    weights: Vec<f64>,
    solver: NeumannSolver,
    lo: f64,
    hi: f64,
}

impl<'a> Semilinear<'a> {
    fn new(grid: Grid, a: &'a [f64], kappa: f64) -> Self {
        let amin = a.iter().copied().fold(f64::INFINITY, f64::min);
        let amax = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Semilinear {
            grid,
            a,
            kappa,
            weights: grid.weights(),
            solver: NeumannSolver::new(&grid),
            lo: amin.min(amin.sqrt()),
            hi: amax.max(amax.sqrt()),
        }
    }

    fn residual(&self, u: &[f64], out: &mut [f64]) -> f64 {
        laplacian_into(&self.grid, u, out);
        let mut m = 0.0f64;
        for k in 0..u.len() {
            out[k] = -self.kappa * out[k] - u[k] * (self.a[k] - u[k] * u[k]);
            m = m.max(out[k].abs());
        }
        m
    }

    fn energy(&self, u: &[f64]) -> f64 {
        let pot: f64 = u
            .iter()
            .zip(self.a)
            .zip(&self.weights)
            .map(|((u, a), w)| {
                let d = a - u * u;
                w * d * d
            })
            .sum();
        0.5 * self.kappa * dirichlet_form(&self.grid, u, u) + 0.25 * pot
    }

    fn dot(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).zip(&self.weights).map(|((a, b), w)| a * b * w).sum()
    }

    fn in_box(&self, u: &[f64]) -> bool {
        let slack = 1e-8 * self.hi;
        u.iter().all(|v| *v > 0.0 && *v >= self.lo - slack && *v <= self.hi + slack)
    }

    fn roundoff_floor(&self, u: &[f64]) -> f64 {
        let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        64.0 * f64::EPSILON * umax * (1.0 + self.kappa / (self.grid.h() * self.grid.h()))
    }

    /// Inexact Newton direction by preconditioned CG in the weighted inner
    /// product, preconditioned by `(c - kappa Delta_h)^{-1}`.
    fn newton_direction(&self, u: &[f64], f: &[f64], fnorm: f64) -> Vec<f64> {
        let n = u.len();
        let diag: Vec<f64> = u.iter().zip(self.a).map(|(u, a)| 3.0 * u * u - a).collect();
        let mean_diag = integrate_values(&self.grid, &diag) / self.grid.area();
        let amean = integrate_values(&self.grid, self.a) / self.grid.area();
        let shift = mean_diag.max(0.1 * amean);
        let apply = |x: &[f64], out: &mut [f64]| {
            laplacian_into(&self.grid, x, out);
            for k in 0..n {
                out[k] = -self.kappa * out[k] + diag[k] * x[k];
            }
        };
        let target = (fnorm * fnorm.min(0.1)).max(1e-3 * self.roundoff_floor(u));
        let mut x = vec![0.0; n];
        let mut r: Vec<f64> = f.iter().map(|v| -v).collect();
        let mut z = vec![0.0; n];
        self.solver.solve(&r, self.kappa, shift, &mut z);
        let mut p = z.clone();
        let mut rz = self.dot(&r, &z);
        let mut q = vec![0.0; n];
        for it in 0..500 {
            apply(&p, &mut q);
            let pq = self.dot(&p, &q);
            if pq <= 0.0 {
                if it == 0 {
                    return z;
                }
                break;
            }
            let alpha = rz / pq;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * q[k];
            }
            if r.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= target {
                break;
            }
            self.solver.solve(&r, self.kappa, shift, &mut z);
            let rz_new = self.dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        x
    }

    /// Convex-concave splitting step
    /// `(s - kappa Delta_h) U' = U (s + a - U^2)`, energy-stable for
    /// `s >= max (3 U^2 - a)` and positivity preserving.
    fn flow_step(&self, u: &[f64], out: &mut [f64]) {
        let s = 3.0 * self.hi * self.hi;
        let rhs: Vec<f64> = u.iter().zip(self.a).map(|(u, a)| u * (s + a - u * u)).collect();
        self.solver.solve(&rhs, self.kappa, s, out);
    }

    fn solve(&self, u0: Vec<f64>, opts: &ScalarOptions, residual_scale: f64) -> Result<RawSolve> {
        if let Some(v) = u0.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::NotPositive(*v));
        }
        let n = u0.len();
        let mut u = u0;
        let mut f = vec![0.0; n];
        let mut res = self.residual(&u, &mut f);
        let mut energy = self.energy(&u);
        let range = |u: &[f64]| {
            u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)))
        };
        let mut energy_history = vec![energy];
        let mut range_history = vec![range(&u)];
        let mut newton_steps = 0;
        let mut flow_steps = 0;
        let mut last_update = f64::INFINITY;
        let mut trial = vec![0.0; n];
        let mut ftrial = vec![0.0; n];
        let converged = |res: f64, last_update: f64, u: &[f64]| {
            res * residual_scale <= opts.tol
                || (res <= self.roundoff_floor(u) && last_update <= 1e-13 * self.hi)
        };
        while !converged(res, last_update, &u) {
            if newton_steps >= opts.max_newton {
                return Err(Error::NonConvergence {
                    iterations: newton_steps + flow_steps,
                    residual: res * residual_scale,
                });
            }
            newton_steps += 1;
            let dir = self.newton_direction(&u, &f, res);
            let mut t = 1.0;
            let mut accepted = false;
            for _rejections in 0..5 {
                for k in 0..n {
                    trial[k] = u[k] + t * dir[k];
                }
                if self.in_box(&trial) {
                    let e = self.energy(&trial);
                    if e <= energy + 1e-12 * (1.0 + energy.abs()) {
                        accepted = true;
                        energy = e;
                        break;
                    }
                }
                t *= 0.5;
            }
            if accepted {
                last_update = dir.iter().fold(0.0f64, |m, v| m.max(v.abs())) * t;
                std::mem::swap(&mut u, &mut trial);
                res = self.residual(&u, &mut f);
                energy_history.push(energy);
                range_history.push(range(&u));
                continue;
            }
            // Newton rejected five times: take a batch of gradient-flow steps.
            for _ in 0..25 {
                if flow_steps >= opts.max_flow {
                    return Err(Error::NonConvergence {
                        iterations: newton_steps + flow_steps,
                        residual: res * residual_scale,
                    });
                }
                self.flow_step(&u, &mut trial);
                flow_steps += 1;
                last_update = u.iter().zip(&trial).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let e = self.energy(&trial);
                std::mem::swap(&mut u, &mut trial);
                energy = e;
                res = self.residual(&u, &mut ftrial);
                std::mem::swap(&mut f, &mut ftrial);
                energy_history.push(energy);
                range_history.push(range(&u));
                if converged(res, last_update, &u) {
                    break;
                }
            }
        }
        Ok(RawSolve { u, energy, residual: res, newton_steps, flow_steps, energy_history, range_history })
    }
}

fn initial_guess(grid: &Grid, a: &[f64], init: &Init) -> Result<Vec<f64>> {
    let n = grid.len();
    Ok(match init {
        Init::SqrtMean => vec![(integrate_values(grid, a) / grid.area()).sqrt(); n],
        Init::MaxA => vec![a.iter().copied().fold(f64::NEG_INFINITY, f64::max); n],
        Init::Constant(c) => vec![*c; n],
        Init::Field(v) => {
            if v.len() != n {
                return Err(Error::InvalidInput(format!("initial field has {} values, grid has {n}", v.len())));
            }
            v.clone()
        }
    })
}

/// Positive minimizer of the scalar pinned energy on the grid of `p`.
pub fn minimize_scalar(p: &PinningField, eps: f64, opts: &ScalarOptions) -> Result<ScalarSolve> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let grid = *p.grid();
    let a = &p.field.values;
    let prob = Semilinear::new(grid, a, eps * eps);
    let raw = prob.solve(initial_guess(&grid, a, &opts.init)?, opts, 1.0)?;
    let u = ScalarField::new(grid, raw.u)?;
    let target = p.target_mean().sqrt();
    let e2 = eps * eps;
    Ok(ScalarSolve {
        grad_sup: gradient_sup(&u),
        sup_error: u.sup_distance(target),
        energy: raw.energy / e2,
        el_residual: raw.residual,
        iterations: raw.newton_steps + raw.flow_steps,
        newton_steps: raw.newton_steps,
        flow_steps: raw.flow_steps,
        energy_history: raw.energy_history.iter().map(|e| e / e2).collect(),
        range_history: raw.range_history,
        u,
    })
}

/// `E^pin_eps(U)` for an arbitrary positive field.
pub fn scalar_energy(p: &PinningField, u: &ScalarField, eps: f64) -> Result<f64> {
    if u.grid != *p.grid() {
        return Err(Error::GridMismatch);
    }
    let prob = Semilinear::new(u.grid, &p.field.values, eps * eps);
    Ok(prob.energy(&u.values) / (eps * eps))
}

/// `max |eps^2 (-Delta_h U) - U (a - U^2)|`.
pub fn el_residual(p: &PinningField, u: &ScalarField, eps: f64) -> Result<f64> {
    if u.grid != *p.grid() {
        return Err(Error::GridMismatch);
    }
    let prob = Semilinear::new(u.grid, &p.field.values, eps * eps);
    let mut out = vec![0.0; u.values.len()];
    Ok(prob.residual(&u.values, &mut out))
}

/// Unit-cell problem `-Delta U = chi^2 U (a0 - U^2)` with Neumann conditions
/// on `(0,1)^2`, discretized with `n_per_unit` intervals per side.
pub fn cell_minimize(cell: &CellFunction, chi: f64, n_per_unit: usize, opts: &ScalarOptions) -> Result<CellSolve> {
    if chi == 0.0 {
        return Err(Error::ZeroChi);
    }
    if !(chi > 0.0 && chi.is_finite()) {
        return Err(Error::InvalidInput(format!("chi must be positive, got {chi}")));
    }
    let grid = Grid::new(1.0, 1.0, n_per_unit)?;
    let p = sample_periodic(cell, 1.0, grid)?;
    let a = &p.field.values;
    let chi2 = chi * chi;
    let prob = Semilinear::new(grid, a, 1.0 / chi2);
    let raw = prob.solve(initial_guess(&grid, a, &opts.init)?, opts, chi2)?;
    let ell = integrate_values(&grid, &raw.u);
    let dev: Vec<f64> = raw.u.iter().map(|v| v - ell).collect();
    let l2sq = integrate_values(&grid, &dev.iter().map(|d| d * d).collect::<Vec<_>>());
    let w1p_deficit = (l2sq + dirichlet_form(&grid, &raw.u, &raw.u)).sqrt();
    let mean_const = vec![cell.mean().sqrt(); grid.len()];
    let energy_at_mean = chi2 * prob.energy(&mean_const);
    Ok(CellSolve {
        uhat: ScalarField::new(grid, raw.u)?,
        cell: cell.clone(),
        chi,
        ell,
        w1p_deficit,
        energy: chi2 * raw.energy,
        energy_at_mean,
        el_residual: chi2 * raw.residual,
        iterations: raw.newton_steps + raw.flow_steps,
    })
}

/// Extends a symmetric cell solution to the `reps * delta` square by
/// reflection across every cell edge; for symmetric cells this coincides with
/// the periodic extension `Uhat({x / delta})`.
pub fn tile_cell(c: &CellSolve, reps: usize, delta: f64) -> Result<ScalarField> {
    if !c.cell.is_symmetric() {
        return Err(Error::NonSymmetricCell);
    }
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be at least 1".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::NonPositiveDelta(delta));
    }
    let n = c.uhat.grid.nx() - 1;
    let side = reps as f64 * delta;
    let grid = Grid::with_nodes(side, side, reps * n + 1, reps * n + 1)?;
    let fold = |i: usize| {
        let r = i % (2 * n);
        if r > n {
            2 * n - r
        } else {
            r
        }
    };
    let mut values = Vec::with_capacity(grid.len());
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            values.push(c.uhat.at(fold(i), fold(j)));
        }
    }
    Ok(ScalarField::new(grid, values)?)
}

/// `|LHS - RHS|` of the decomposition identity for `v = u / U`.
///
/// Without a vector potential the left side is the discrete pinned energy of
/// `u` and the right side is `E(U) + 1/2 int U^2 |grad v|^2
/// + 1/(4 eps^2) int U^4 (1 - |v|^2)^2`. With a vector potential the
/// covariant gradient replaces `grad` and the field energy
/// `1/2 int (curl A - hex)^2` is added on both sides.
pub fn decomposition_residual(
    u: &ComplexField,
    gauge: Option<&VectorPotential>,
    big_u: &ScalarField,
    p: &PinningField,
    eps: f64,
    hex: f64,
) -> Result<f64> {
    let grid = u.grid;
    if big_u.grid != grid || *p.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let umin = big_u.min();
    if !(umin > 0.0) {
        return Err(Error::NotPositive(umin));
    }
    let a = &p.field.values;
    let e2 = eps * eps;
    let pot_u: f64 = {
        let vals: Vec<f64> = (0..grid.len())
            .map(|k| {
                let d = a[k] - (u.re[k] * u.re[k] + u.im[k] * u.im[k]);
                d * d
            })
            .collect();
        integrate_values(&grid, &vals) / (4.0 * e2)
    };
    let ax = gauge.map(|g| (&g.a1.values[..], &g.a2.values[..]));
    let lhs = kinetic_energy(&grid, &u.re, &u.im, ax, None) + pot_u;

    let vre: Vec<f64> = u.re.iter().zip(&big_u.values).map(|(a, b)| a / b).collect();
    let vim: Vec<f64> = u.im.iter().zip(&big_u.values).map(|(a, b)| a / b).collect();
    let u2: Vec<f64> = big_u.values.iter().map(|v| v * v).collect();
    let weighted_kin = kinetic_energy(&grid, &vre, &vim, ax, Some(&u2));
    let weighted_pot = {
        let vals: Vec<f64> = (0..grid.len())
            .map(|k| {
                let d = 1.0 - (vre[k] * vre[k] + vim[k] * vim[k]);
                u2[k] * u2[k] * d * d
            })
            .collect();
        integrate_values(&grid, &vals) / (4.0 * e2)
    };
    let e_u = scalar_energy(p, big_u, eps)?;
    let rhs = e_u + weighted_kin + weighted_pot;
    let (lhs, rhs) = match gauge {
        Some(g) => {
            let f = field_energy(&grid, &g.a1.values, &g.a2.values, hex);
            (lhs + f, rhs + f)
        }
        None => (lhs, rhs),
    };
    Ok((lhs - rhs).abs())
}

pub fn scalar_diagnostics(s: &ScalarSolve, eps: f64, m_target: f64) -> ScalarDiagnostics {
    let grid = s.u.grid;
    let sq: Vec<f64> = s.u.values.iter().map(|v| (v - m_target) * (v - m_target)).collect();
    ScalarDiagnostics {
        sup_error: s.u.sup_distance(m_target),
        grad_bound_ratio: eps * gradient_sup(&s.u),
        l2_error: integrate_values(&grid, &sq).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pinning::CellFunction;

    #[test]
    fn constant_pinning_is_exact() {
        let g = Grid::new(1.0, 1.0, 32).unwrap();
        for c in [1.0, 4.0, 0.25] {
            let p = PinningField::uniform(g, c).unwrap();
            let s = minimize_scalar(&p, 0.1, &ScalarOptions::default()).unwrap();
            assert!(s.u.sup_distance(c.sqrt()) <= 1e-12);
            assert!(s.energy <= 1e-12);
            assert_eq!(s.sup_error, 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = Grid::new(1.0, 1.0, 8).unwrap();
        let p = PinningField::uniform(g, 1.0).unwrap();
        assert!(minimize_scalar(&p, 0.0, &ScalarOptions::default()).is_err());
        let cell = CellFunction::constant(1.0).unwrap();
        assert!(matches!(cell_minimize(&cell, 0.0, 8, &ScalarOptions::default()), Err(Error::ZeroChi)));
        let opts = ScalarOptions::default().with_init(Init::Constant(-1.0));
        assert!(minimize_scalar(&p, 0.1, &opts).is_err());
    }

    #[test]
    fn newton_converges_on_checkerboard() {
        let g = Grid::new(1.0, 1.0, 64).unwrap();
        let cell = CellFunction::checkerboard([0.5, 1.5], false).unwrap();
        let p = sample_periodic(&cell, 0.125, g).unwrap();
        let s = minimize_scalar(&p, 0.2, &ScalarOptions::default()).unwrap();
        assert!(s.el_residual <= 1e-10);
        assert!(s.u.min() > 0.0);
        for w in s.energy_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn flow_step_descends() {
        let g = Grid::new(1.0, 1.0, 16).unwrap();
        let a: Vec<f64> = (0..g.len()).map(|k| 1.0 + 0.5 * ((k % 7) as f64 / 7.0)).collect();
        let prob = Semilinear::new(g, &a, 0.01);
        let mut u = vec![1.1; g.len()];
        let mut next = vec![0.0; g.len()];
        let mut e = prob.energy(&u);
        for _ in 0..20 {
            prob.flow_step(&u, &mut next);
            let e2 = prob.energy(&next);
            assert!(e2 <= e + 1e-14);
            assert!(next.iter().all(|v| *v > 0.0));
            e = e2;
            std::mem::swap(&mut u, &mut next);
        }
    }

    #[test]
    fn constant_cell_solution() {
        let cell = CellFunction::constant(2.0).unwrap();
        let c = cell_minimize(&cell, 0.3, 16, &ScalarOptions::default()).unwrap();
        assert!(c.uhat.sup_distance(2f64.sqrt()) < 1e-14);
        let t = tile_cell(&c, 3, 0.1).unwrap();
        assert_eq!(t.grid.nx(), 49);
        assert!(t.sup_distance(2f64.sqrt()) < 1e-14);
    }

    #[test]
    fn tile_refuses_asymmetric() {
        let cell = CellFunction::checkerboard([0.5, 1.5], false).unwrap();
        let c = cell_minimize(&cell, 0.3, 16, &ScalarOptions::default()).unwrap();
        assert!(matches!(tile_cell(&c, 2, 0.1), Err(Error::NonSymmetricCell)));
    }

    #[test]
    fn trivial_decomposition() {
        let g = Grid::new(1.0, 1.0, 32).unwrap();
        let cell = CellFunction::trig(0.4).unwrap();
        let p = sample_periodic(&cell, 0.5, g).unwrap();
        let s = minimize_scalar(&p, 0.3, &ScalarOptions::default()).unwrap();
        let u = ComplexField::from_real(&s.u);
        let r = decomposition_residual(&u, None, &s.u, &p, 0.3, 0.0).unwrap();
        assert!(r <= 1e-12, "{r}");
    }
}
