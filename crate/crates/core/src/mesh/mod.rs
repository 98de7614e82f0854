//! Uniform node-centered grids on axis-aligned rectangles.
//!
//! Boundary semantics are homogeneous Neumann by ghost-node reflection: the
//! ghost value across an edge equals the first interior neighbour. With
//! trapezoidal node weights this makes the discrete Laplacian self-adjoint,
//! and the associated Dirichlet form is the edge sum
//! `sum_e c_e (f_b - f_a)(g_b - g_a)` with `c_e = 1/2` on edges running along
//! the boundary and `1` elsewhere.

pub(crate) mod dump;
pub mod spectral;

pub use dump::{read_field, write_field, write_field_block};
pub use spectral::{DirichletSolver, NeumannSolver};

use crate::error::MeshError;

const SPACING_RTOL: f64 = 1e-12;

/// A uniform grid with `nx * ny` nodes at `origin + (i h, j h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    h: f64,
    origin: [f64; 2],
}

impl Grid {
    /// Grid with `n_per_unit` intervals per unit length on `[0,lx] x [0,ly]`.
    pub fn new(lx: f64, ly: f64, n_per_unit: usize) -> Result<Self, MeshError> {
        if n_per_unit < 2 {
            return Err(MeshError::ResolutionTooSmall(n_per_unit));
        }
        check_dims(lx, ly)?;
        let cx = lx * n_per_unit as f64;
        let cy = ly * n_per_unit as f64;
        let nx = cx.round() as usize + 1;
        let ny = cy.round() as usize + 1;
        if (cx - cx.round()).abs() > SPACING_RTOL * cx || (cy - cy.round()).abs() > SPACING_RTOL * cy
        {
            return Err(MeshError::SpacingMismatch {
                hx: lx / (nx as f64 - 1.0).max(1.0),
                hy: ly / (ny as f64 - 1.0).max(1.0),
            });
        }
        Self::with_nodes(lx, ly, nx, ny)
    }

    /// Grid with explicit node counts; the spacing must agree between axes.
    pub fn with_nodes(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self, MeshError> {
        check_dims(lx, ly)?;
        if nx < 3 || ny < 3 {
            return Err(MeshError::TooFewNodes { nx, ny });
        }
        let hx = lx / (nx - 1) as f64;
        let hy = ly / (ny - 1) as f64;
        if (hx - hy).abs() > SPACING_RTOL * hx.max(hy) {
            return Err(MeshError::SpacingMismatch { hx, hy });
        }
        Ok(Grid { lx, ly, nx, ny, h: hx, origin: [0.0, 0.0] })
    }

    /// Square `[0,side]^2` split into `intervals` intervals per side.
    pub fn square(side: f64, intervals: usize) -> Result<Self, MeshError> {
        Self::with_nodes(side, side, intervals + 1, intervals + 1)
    }

    pub fn with_origin(mut self, x0: f64, y0: f64) -> Self {
        self.origin = [x0, y0];
        self
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.h
    }

    #[inline]
    pub fn point(&self, k: usize) -> [f64; 2] {
        [self.x(k % self.nx), self.y(k / self.nx)]
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    /// Trapezoidal quadrature weight of node `(i, j)`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
        wx * wy * self.h * self.h
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                w.push(self.weight(i, j));
            }
        }
        w
    }

    /// Edge coefficient of the x-edge `(i,j)-(i+1,j)`.
    #[inline]
    pub fn cx(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny - 1 {
            0.5
        } else {
            1.0
        }
    }

    /// Edge coefficient of the y-edge `(i,j)-(i,j+1)`.
    #[inline]
    pub fn cy(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx - 1 {
            0.5
        } else {
            1.0
        }
    }
}

fn check_dims(lx: f64, ly: f64) -> Result<(), MeshError> {
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(MeshError::NonPositiveDimensions { lx, ly });
    }
    Ok(())
}

/// Real values at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, MeshError> {
        if values.len() != grid.len() {
            return Err(MeshError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(MeshError::NonFinite(k));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.point(k);
                f(x, y)
            })
            .collect();
        ScalarField { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |f - c|`.
    pub fn sup_distance(&self, c: f64) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max((v - c).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn mean(&self) -> f64 {
        integrate(self) / self.grid.area()
    }
}

/// Complex order parameter stored as two real component arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexField {
    pub fn new(grid: Grid, re: Vec<f64>, im: Vec<f64>) -> Result<Self, MeshError> {
        for part in [&re, &im] {
            if part.len() != grid.len() {
                return Err(MeshError::LengthMismatch { expected: grid.len(), got: part.len() });
            }
            if let Some(k) = part.iter().position(|v| !v.is_finite()) {
                return Err(MeshError::NonFinite(k));
            }
        }
        Ok(ComplexField { grid, re, im })
    }

    pub fn from_real(f: &ScalarField) -> Self {
        ComplexField { grid: f.grid, re: f.values.clone(), im: vec![0.0; f.grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut re = Vec::with_capacity(grid.len());
        let mut im = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let [x, y] = grid.point(k);
            let (a, b) = f(x, y);
            re.push(a);
            im.push(b);
        }
        ComplexField { grid, re, im }
    }

    pub fn modulus_sq(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(a, b)| a * a + b * b).collect()
    }

    pub fn modulus(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.re.iter().zip(&self.im).map(|(a, b)| a.hypot(*b)).collect(),
        }
    }
}

/// Trapezoidal quadrature of `f` over the rectangle.
pub fn integrate(f: &ScalarField) -> f64 {
    integrate_values(&f.grid, &f.values)
}

pub fn integrate_values(grid: &Grid, values: &[f64]) -> f64 {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut total = 0.0;
    for j in 0..ny {
        let row = &values[j * nx..(j + 1) * nx];
        let inner: f64 = row[1..nx - 1].iter().sum::<f64>() + 0.5 * (row[0] + row[nx - 1]);
        let wy = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
        total += wy * inner;
    }
    total * grid.h * grid.h
}

/// Five-point Laplacian `Delta_h f` with ghost-node reflection.
pub fn neumann_laplacian(f: &ScalarField) -> ScalarField {
    let mut out = vec![0.0; f.values.len()];
    laplacian_into(&f.grid, &f.values, &mut out);
    ScalarField { grid: f.grid, values: out }
}

/// Writes `Delta_h u` into `out`. Neighbour differences are formed before
/// summing so that nearly constant fields do not lose precision.
pub fn laplacian_into(grid: &Grid, u: &[f64], out: &mut [f64]) {
    let (nx, ny) = (grid.nx, grid.ny);
    let inv_h2 = 1.0 / (grid.h * grid.h);
    for j in 0..ny {
        let jm = if j == 0 { 1 } else { j - 1 };
        let jp = if j == ny - 1 { ny - 2 } else { j + 1 };
        for i in 0..nx {
            let im = if i == 0 { 1 } else { i - 1 };
            let ip = if i == nx - 1 { nx - 2 } else { i + 1 };
            let c = u[j * nx + i];
            let s = (u[j * nx + im] - c)
                + (u[j * nx + ip] - c)
                + (u[jm * nx + i] - c)
                + (u[jp * nx + i] - c);
            out[j * nx + i] = s * inv_h2;
        }
    }
}

/// Discrete Dirichlet form `int grad f . grad g` as an edge sum.
pub fn dirichlet_form(grid: &Grid, f: &[f64], g: &[f64]) -> f64 {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut total = 0.0;
    for j in 0..ny {
        let c = grid.cx(j);
        for i in 0..nx - 1 {
            let a = j * nx + i;
            total += c * (f[a + 1] - f[a]) * (g[a + 1] - g[a]);
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let a = j * nx + i;
            total += grid.cy(i) * (f[a + nx] - f[a]) * (g[a + nx] - g[a]);
        }
    }
    total
}

/// Nodal gradient: centered in the interior, second-order one-sided on the
/// boundary.
pub fn gradient(grid: &Grid, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny) = (grid.nx, grid.ny);
    let inv2h = 0.5 / grid.h;
    let mut gx = vec![0.0; f.len()];
    let mut gy = vec![0.0; f.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            gx[k] = if i == 0 {
                (-3.0 * f[k] + 4.0 * f[k + 1] - f[k + 2]) * inv2h
            } else if i == nx - 1 {
                (3.0 * f[k] - 4.0 * f[k - 1] + f[k - 2]) * inv2h
            } else {
                (f[k + 1] - f[k - 1]) * inv2h
            };
            gy[k] = if j == 0 {
                (-3.0 * f[k] + 4.0 * f[k + nx] - f[k + 2 * nx]) * inv2h
            } else if j == ny - 1 {
                (3.0 * f[k] - 4.0 * f[k - nx] + f[k - 2 * nx]) * inv2h
            } else {
                (f[k + nx] - f[k - nx]) * inv2h
            };
        }
    }
    (gx, gy)
}

/// `max |grad f|` with central differences inside and first-order one-sided
/// differences on the boundary.
pub fn gradient_sup(f: &ScalarField) -> f64 {
    let g = &f.grid;
    let (nx, ny) = (g.nx, g.ny);
    let v = &f.values;
    let mut best = 0.0f64;
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let dx = if i == 0 {
                (v[k + 1] - v[k]) / g.h
            } else if i == nx - 1 {
                (v[k] - v[k - 1]) / g.h
            } else {
                (v[k + 1] - v[k - 1]) / (2.0 * g.h)
            };
            let dy = if j == 0 {
                (v[k + nx] - v[k]) / g.h
            } else if j == ny - 1 {
                (v[k] - v[k - nx]) / g.h
            } else {
                (v[k + nx] - v[k - nx]) / (2.0 * g.h)
            };
            best = best.max(dx.hypot(dy));
        }
    }
    best
}
