//! Fast direct solvers for `(shift - kappa Delta_h) u = f`.
//!
//! The reflected-ghost Neumann Laplacian is diagonalised by the type-I cosine
//! transform and the Dirichlet interior Laplacian by the type-I sine
//! transform. Both transforms are computed through a complex FFT of the
//! even/odd extension of length `2(N-1)`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Grid;

const ROW_CHUNK: usize = 64;

#[derive(Clone, Copy)]
enum Kind {
    Cos,
    Sin,
}

/// One-dimensional type-I transform along contiguous rows.
struct Transform1 {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    kind: Kind,
}

impl Transform1 {
    fn new(n: usize, kind: Kind, planner: &mut FftPlanner<f64>) -> Self {
        let fft = planner.plan_fft_forward(2 * (n - 1));
        Transform1 { n, fft, kind }
    }

    /// Transforms every row of `data` (row length `n`). For the sine
    /// transform the first and last entries of a row are ignored and set to 0.
    fn apply_rows(&self, data: &mut [f64]) {
        let n = self.n;
        let m = 2 * (n - 1);
        let rows = data.len() / n;
        let mut buf = vec![Complex64::new(0.0, 0.0); m * ROW_CHUNK.min(rows)];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for start in (0..rows).step_by(ROW_CHUNK) {
            let count = ROW_CHUNK.min(rows - start);
            let buf = &mut buf[..m * count];
            for r in 0..count {
                let row = &data[(start + r) * n..(start + r + 1) * n];
                let ext = &mut buf[r * m..(r + 1) * m];
                match self.kind {
                    Kind::Cos => {
                        for k in 0..n {
                            ext[k] = Complex64::new(row[k], 0.0);
                        }
                        for k in 1..n - 1 {
                            ext[m - k] = Complex64::new(row[k], 0.0);
                        }
                    }
                    Kind::Sin => {
                        ext[0] = Complex64::new(0.0, 0.0);
                        ext[n - 1] = Complex64::new(0.0, 0.0);
                        for k in 1..n - 1 {
                            ext[k] = Complex64::new(row[k], 0.0);
                            ext[m - k] = Complex64::new(-row[k], 0.0);
                        }
                    }
                }
            }
            self.fft.process_with_scratch(buf, &mut scratch);
            for r in 0..count {
                let row = &mut data[(start + r) * n..(start + r + 1) * n];
                let ext = &buf[r * m..(r + 1) * m];
                match self.kind {
                    Kind::Cos => {
                        for k in 0..n {
                            row[k] = ext[k].re;
                        }
                    }
                    Kind::Sin => {
                        row[0] = 0.0;
                        row[n - 1] = 0.0;
                        for k in 1..n - 1 {
                            row[k] = -0.5 * ext[k].im;
                        }
                    }
                }
            }
        }
    }
}

fn transpose(src: &[f64], rows: usize, cols: usize, dst: &mut [f64]) {
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

struct Separable {
    nx: usize,
    ny: usize,
    tx: Transform1,
    ty: Transform1,
    lam_x: Vec<f64>,
    lam_y: Vec<f64>,
    norm: f64,
}

impl Separable {
    fn new(grid: &Grid, kind: Kind) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut planner = FftPlanner::new();
        let tx = Transform1::new(nx, kind, &mut planner);
        let ty = Transform1::new(ny, kind, &mut planner);
        let h2 = grid.h() * grid.h();
        let eig = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|k| (2.0 - 2.0 * (std::f64::consts::PI * k as f64 / (n - 1) as f64).cos()) / h2)
                .collect()
        };
        let norm = match kind {
            Kind::Cos => 1.0 / (4.0 * (nx - 1) as f64 * (ny - 1) as f64),
            Kind::Sin => 4.0 / ((nx - 1) as f64 * (ny - 1) as f64),
        };
        Separable { nx, ny, tx, ty, lam_x: eig(nx), lam_y: eig(ny), norm }
    }

    fn forward(&self, data: &mut [f64], scratch: &mut [f64]) {
        self.tx.apply_rows(data);
        transpose(data, self.ny, self.nx, scratch);
        self.ty.apply_rows(scratch);
        transpose(scratch, self.nx, self.ny, data);
    }

    fn solve(&self, rhs: &[f64], kappa: f64, shift: f64, out: &mut [f64], skip_edges: bool) {
        assert_eq!(rhs.len(), self.nx * self.ny);
        out.copy_from_slice(rhs);
        let mut scratch = vec![0.0; out.len()];
        self.forward(out, &mut scratch);
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = j * self.nx + i;
                if skip_edges && (i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1) {
                    out[k] = 0.0;
                    continue;
                }
                let d = kappa * (self.lam_x[i] + self.lam_y[j]) + shift;
                out[k] = if d.abs() > 0.0 { out[k] / d } else { 0.0 };
            }
        }
        self.forward(out, &mut scratch);
        for v in out.iter_mut() {
            *v *= self.norm;
        }
    }
}

/// Solver for `(shift - kappa Delta_h) u = f` under reflected Neumann
/// conditions. When `shift == 0` the constant mode is dropped, which returns
/// the zero-mean solution when `f` is compatible.
pub struct NeumannSolver {
    inner: Separable,
}

impl NeumannSolver {
    pub fn new(grid: &Grid) -> Self {
        NeumannSolver { inner: Separable::new(grid, Kind::Cos) }
    }

    pub fn solve(&self, rhs: &[f64], kappa: f64, shift: f64, out: &mut [f64]) {
        self.inner.solve(rhs, kappa, shift, out, false);
    }
}

/// Solver for `(shift - kappa Delta_h) u = f` on interior nodes with `u = 0`
/// on the boundary. Boundary entries of `rhs` are ignored.
pub struct DirichletSolver {
    inner: Separable,
}

impl DirichletSolver {
    pub fn new(grid: &Grid) -> Self {
        DirichletSolver { inner: Separable::new(grid, Kind::Sin) }
    }

    pub fn solve(&self, rhs: &[f64], kappa: f64, shift: f64, out: &mut [f64]) {
        self.inner.solve(rhs, kappa, shift, out, true);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::laplacian_into;

    fn dirichlet_laplacian(grid: &Grid, u: &[f64]) -> Vec<f64> {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut out = vec![0.0; u.len()];
        let inv = 1.0 / (grid.h() * grid.h());
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let k = j * nx + i;
                out[k] = (u[k - 1] + u[k + 1] + u[k - nx] + u[k + nx] - 4.0 * u[k]) * inv;
            }
        }
        out
    }

    #[test]
    fn neumann_solve_inverts_operator() {
        let g = Grid::with_nodes(1.0, 1.5, 17, 25).unwrap();
        let rhs: Vec<f64> = (0..g.len()).map(|k| ((k * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let s = NeumannSolver::new(&g);
        let mut u = vec![0.0; g.len()];
        s.solve(&rhs, 0.3, 2.0, &mut u);
        let mut lap = vec![0.0; g.len()];
        laplacian_into(&g, &u, &mut lap);
        for k in 0..g.len() {
            let r = 2.0 * u[k] - 0.3 * lap[k];
            assert!((r - rhs[k]).abs() < 1e-10, "{k}: {r} vs {}", rhs[k]);
        }
    }

    #[test]
    fn dirichlet_solve_inverts_operator() {
        let g = Grid::with_nodes(2.0, 1.0, 33, 17).unwrap();
        let rhs: Vec<f64> = (0..g.len()).map(|k| ((k * 104729) % 97) as f64 / 40.0 - 1.0).collect();
        let s = DirichletSolver::new(&g);
        let mut u = vec![0.0; g.len()];
        s.solve(&rhs, 1.0, 1.0, &mut u);
        let lap = dirichlet_laplacian(&g, &u);
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let k = g.index(i, j);
                if g.is_boundary(i, j) {
                    assert_eq!(u[k], 0.0);
                } else {
                    assert!((u[k] - lap[k] - rhs[k]).abs() < 1e-10);
                }
            }
        }
    }
}
