//! Oscillating pinning coefficients: periodic cell functions sampled at scale
//! `delta`, and shifted i.i.d. random checkerboards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{integrate, Grid, ScalarField};

/// Offset used to sample both sides of a jump in a piecewise-constant cell.
const JUMP_PROBE: f64 = 1e-9;
const SHIFT_KEY: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub enum CellKind {
    Constant(f64),
    /// 2x2 checkerboard. `centered` shifts it by a quarter period so that the
    /// pattern is symmetric under `y_i -> 1 - y_i`.
    Checkerboard { values: [f64; 2], centered: bool },
    /// `k x k` constant blocks, `values[row * k + col]` with `row` the block
    /// index along `y`.
    Piecewise { k: usize, values: Vec<f64> },
    /// `1 + alpha cos(2 pi y1) cos(2 pi y2)`.
    Trig { alpha: f64 },
}

/// A positive function on the unit cell with strict bounds `m < a0 < M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFunction {
    pub kind: CellKind,
    pub m: f64,
    pub big_m: f64,
}

impl CellFunction {
    /// Cell with bounds just outside the range of its values.
    pub fn new(kind: CellKind) -> Result<Self> {
        let (lo, hi) = value_range(&kind)?;
        Self::with_bounds(kind, lo * (1.0 - 1e-9), hi * (1.0 + 1e-9))
    }

    pub fn with_bounds(kind: CellKind, m: f64, big_m: f64) -> Result<Self> {
        let (lo, hi) = value_range(&kind)?;
        if !(m > 0.0 && m < lo && hi < big_m) {
            return Err(Error::InvalidInput(format!(
                "cell values in [{lo}, {hi}] must lie strictly inside ({m}, {big_m}) with m > 0"
            )));
        }
        Ok(CellFunction { kind, m, big_m })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(CellKind::Constant(c))
    }

    pub fn checkerboard(values: [f64; 2], centered: bool) -> Result<Self> {
        Self::new(CellKind::Checkerboard { values, centered })
    }

    pub fn trig(alpha: f64) -> Result<Self> {
        Self::new(CellKind::Trig { alpha })
    }

    pub fn piecewise(k: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(CellKind::Piecewise { k, values })
    }

    /// Short label used in reports.
    pub fn label(&self) -> &'static str {
        match &self.kind {
            CellKind::Constant(_) => "constant",
            CellKind::Checkerboard { centered: false, .. } => "checkerboard",
            CellKind::Checkerboard { centered: true, .. } => "checkerboard_sym",
            CellKind::Piecewise { .. } => "piecewise",
            CellKind::Trig { .. } => "trig",
        }
    }

    /// `int_Q a0`, the squared homogenized modulus.
    pub fn mean(&self) -> f64 {
        match &self.kind {
            CellKind::Constant(c) => *c,
            CellKind::Checkerboard { values, .. } => 0.5 * (values[0] + values[1]),
            CellKind::Piecewise { values, .. } => values.iter().sum::<f64>() / values.len() as f64,
            CellKind::Trig { .. } => 1.0,
        }
    }

    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(self.kind, CellKind::Trig { .. })
    }

    /// Invariance under `y1 -> 1 - y1` and `y2 -> 1 - y2` separately.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            CellKind::Constant(_) | CellKind::Trig { .. } => true,
            CellKind::Checkerboard { values, centered } => *centered || values[0] == values[1],
            CellKind::Piecewise { k, values } => {
                let k = *k;
                (0..k).all(|r| {
                    (0..k).all(|c| {
                        let v = values[r * k + c];
                        v == values[r * k + (k - 1 - c)] && v == values[(k - 1 - r) * k + c]
                    })
                })
            }
        }
    }

    /// Value at a point of the unit cell, `y` in `[0,1)^2`.
    pub fn eval_cell(&self, y1: f64, y2: f64) -> f64 {
        match &self.kind {
            CellKind::Constant(c) => *c,
            CellKind::Checkerboard { values, centered } => {
                let s = if *centered { 0.5 } else { 0.0 };
                let p = (2.0 * y1 + s).floor() as i64 + (2.0 * y2 + s).floor() as i64;
                values[p.rem_euclid(2) as usize]
            }
            CellKind::Piecewise { k, values } => {
                let c = ((*k as f64 * y1).floor() as usize).min(k - 1);
                let r = ((*k as f64 * y2).floor() as usize).min(k - 1);
                values[r * k + c]
            }
            CellKind::Trig { alpha } => {
                let tau = 2.0 * std::f64::consts::PI;
                1.0 + alpha * (tau * y1).cos() * (tau * y2).cos()
            }
        }
    }

    /// Value of the periodic extension at `y` (cell units). Jumps are
    /// resolved by averaging the four diagonal one-sided values, which keeps
    /// the sampling reflection-symmetric and seam-consistent.
    pub fn eval_periodic(&self, y1: f64, y2: f64) -> f64 {
        if !self.is_piecewise_constant() {
            return self.eval_cell(frac(y1), frac(y2));
        }
        let mut s = 0.0;
        for dx in [-JUMP_PROBE, JUMP_PROBE] {
            for dy in [-JUMP_PROBE, JUMP_PROBE] {
                s += self.eval_cell(frac(y1 + dx), frac(y2 + dy));
            }
        }
        0.25 * s
    }
}

fn frac(y: f64) -> f64 {
    let f = y - y.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

fn value_range(kind: &CellKind) -> Result<(f64, f64)> {
    let vals: Vec<f64> = match kind {
        CellKind::Constant(c) => vec![*c],
        CellKind::Checkerboard { values, .. } => values.to_vec(),
        CellKind::Piecewise { k, values } => {
            if *k == 0 || values.len() != k * k {
                return Err(Error::InvalidInput(format!(
                    "piecewise cell needs k*k = {} values, got {}",
                    k * k,
                    values.len()
                )));
            }
            values.clone()
        }
        CellKind::Trig { alpha } => {
            if !(0.0..1.0).contains(&alpha.abs()) {
                return Err(Error::InvalidInput(format!("trig amplitude must satisfy |alpha| < 1, got {alpha}")));
            }
            vec![1.0 - alpha.abs(), 1.0 + alpha.abs()]
        }
    };
    if vals.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::InvalidInput("cell values must be positive and finite".into()));
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Finite law of the value taken on each cell of a random checkerboard.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomCellLaw {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
    pub m: f64,
    pub big_m: f64,
}

impl RandomCellLaw {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySupport);
        }
        if values.len() != probs.len() {
            return Err(Error::InvalidInput("values and probabilities differ in length".into()));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidInput("probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}, not 1")));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidInput("support values must be positive and finite".into()));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(RandomCellLaw { values, probs, m: lo * (1.0 - 1e-9), big_m: hi * (1.0 + 1e-9) })
    }

    pub fn expectation(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    fn draw(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (v, p) in self.values.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return *v;
            }
        }
        // u within rounding of 1: take the last value of positive probability
        let last = self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0);
        self.values[last]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PinningSource {
    Periodic(CellFunction),
    Random { law: RandomCellLaw, seed: u64, shift: [f64; 2] },
}

/// A sampled pinning coefficient together with how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct PinningField {
    pub field: ScalarField,
    pub delta: f64,
    pub source: PinningSource,
    pub epsilon_hint: Option<f64>,
    pub warnings: Vec<String>,
}

impl PinningField {
    /// `a == c` everywhere.
    pub fn uniform(grid: Grid, c: f64) -> Result<Self> {
        sample_periodic(&CellFunction::constant(c)?, 1.0, grid)
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon_hint = Some(eps);
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.field.grid
    }

    /// Strict bounds `(m, M)` of the generating description.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.source {
            PinningSource::Periodic(c) => (c.m, c.big_m),
            PinningSource::Random { law, .. } => (law.m, law.big_m),
        }
    }

    /// Cell mean or expectation of the generating description.
    pub fn target_mean(&self) -> f64 {
        match &self.source {
            PinningSource::Periodic(c) => c.mean(),
            PinningSource::Random { law, .. } => law.expectation(),
        }
    }

    pub fn kind_label(&self) -> &'static str {
        match &self.source {
            PinningSource::Periodic(c) => c.label(),
            PinningSource::Random { .. } => "random",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.source {
            PinningSource::Random { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        let v0 = self.field.values[0];
        self.field.values.iter().all(|v| *v == v0)
    }
}

fn aliasing_warnings(delta: f64, grid: &Grid) -> Vec<String> {
    if delta < grid.h() / 4.0 {
        vec![format!(
            "aliasing: delta = {delta} is below h/4 = {}; the grid cannot resolve the cell",
            grid.h() / 4.0
        )]
    } else {
        Vec::new()
    }
}

/// Samples `a0({x / delta})` at every node.
pub fn sample_periodic(cell: &CellFunction, delta: f64, grid: Grid) -> Result<PinningField> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::NonPositiveDelta(delta));
    }
    let values = (0..grid.len())
        .map(|k| {
            let [x, y] = grid.point(k);
            cell.eval_periodic(x / delta, y / delta)
        })
        .collect();
    Ok(PinningField {
        field: ScalarField::new(grid, values)?,
        delta,
        source: PinningSource::Periodic(cell.clone()),
        epsilon_hint: None,
        warnings: aliasing_warnings(delta, &grid),
    })
}

fn cell_stream(k: i64, l: i64) -> u64 {
    ((k as i32 as u32 as u64) << 32) | (l as i32 as u32 as u64)
}

/// The lattice shift drawn for `seed`, in `[0, delta)^2`.
pub fn random_shift(seed: u64, delta: f64) -> [f64; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SHIFT_KEY);
    [delta * rng.gen::<f64>(), delta * rng.gen::<f64>()]
}

/// Value of the cell with lattice index `(k, l)`; independent of traversal
/// order because the index selects the generator stream.
pub fn random_cell_value(law: &RandomCellLaw, seed: u64, k: i64, l: i64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell_stream(k, l));
    law.draw(rng.gen::<f64>())
}

/// Random checkerboard on the lattice `s + delta Z^2` with i.i.d. cell values.
pub fn sample_random(law: &RandomCellLaw, delta: f64, seed: u64, grid: Grid) -> Result<PinningField> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::NonPositiveDelta(delta));
    }
    let shift = random_shift(seed, delta);
    sample_random_shifted(law, delta, seed, shift, grid)
}

/// As [`sample_random`] with an explicit lattice shift.
pub fn sample_random_shifted(
    law: &RandomCellLaw,
    delta: f64,
    seed: u64,
    shift: [f64; 2],
    grid: Grid,
) -> Result<PinningField> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::NonPositiveDelta(delta));
    }
    if law.values.is_empty() {
        return Err(Error::EmptySupport);
    }
    let idx = |x: f64, s: f64| ((x - s) / delta).floor() as i64;
    let k0 = idx(grid.x(0), shift[0]);
    let k1 = idx(grid.x(grid.nx() - 1), shift[0]);
    let l0 = idx(grid.y(0), shift[1]);
    let l1 = idx(grid.y(grid.ny() - 1), shift[1]);
    let wk = (k1 - k0 + 1) as usize;
    let mut table = Vec::with_capacity(wk * (l1 - l0 + 1) as usize);
    for l in l0..=l1 {
        for k in k0..=k1 {
            table.push(random_cell_value(law, seed, k, l));
        }
    }
    let mut values = Vec::with_capacity(grid.len());
    for j in 0..grid.ny() {
        let l = idx(grid.y(j), shift[1]);
        for i in 0..grid.nx() {
            let k = idx(grid.x(i), shift[0]);
            values.push(table[(l - l0) as usize * wk + (k - k0) as usize]);
        }
    }
    Ok(PinningField {
        field: ScalarField::new(grid, values)?,
        delta,
        source: PinningSource::Random { law: law.clone(), seed, shift },
        epsilon_hint: None,
        warnings: aliasing_warnings(delta, &grid),
    })
}

/// `|mean_G(a) - target|` with target the cell mean or expectation.
pub fn empirical_mean_drift(p: &PinningField) -> f64 {
    (integrate(&p.field) / p.grid().area() - p.target_mean()).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid {
        Grid::new(1.0, 1.0, n).unwrap()
    }

    #[test]
    fn constant_cell_gives_constant_field() {
        let p = sample_periodic(&CellFunction::constant(1.0).unwrap(), 0.37, unit(20)).unwrap();
        assert!(p.field.values.iter().all(|v| *v == 1.0));
        assert_eq!(empirical_mean_drift(&p), 0.0);
    }

    #[test]
    fn checkerboard_fractional_part_evaluation() {
        let cell = CellFunction::checkerboard([0.5, 1.5], false).unwrap();
        let p = sample_periodic(&cell, 0.5, unit(10)).unwrap();
        assert_eq!(p.field.at(1, 1), 0.5);
        assert_eq!(cell.eval_cell(0.2, 0.2), 0.5);
        assert_eq!(p.field.at(3, 1), 1.5);
        // node (0.5, 0.1) sits on a jump in x and averages both sides
        assert_eq!(p.field.at(5, 1), 1.0);
    }

    #[test]
    fn symmetry_flags() {
        assert!(!CellFunction::checkerboard([0.5, 1.5], false).unwrap().is_symmetric());
        assert!(CellFunction::checkerboard([0.5, 1.5], true).unwrap().is_symmetric());
        assert!(CellFunction::trig(0.5).unwrap().is_symmetric());
        let sym = CellFunction::piecewise(3, vec![1., 2., 1., 3., 0.5, 3., 1., 2., 1.]).unwrap();
        assert!(sym.is_symmetric());
        let asym = CellFunction::piecewise(2, vec![1., 2., 2., 1.]).unwrap();
        assert!(!asym.is_symmetric());
    }

    #[test]
    fn trig_mean_is_close_to_one() {
        let p = sample_periodic(&CellFunction::trig(0.5).unwrap(), 0.01, unit(400)).unwrap();
        assert!(empirical_mean_drift(&p) < 0.01);
    }

    #[test]
    fn tiled_checkerboard_mean_is_exact() {
        let cell = CellFunction::checkerboard([0.5, 1.5], false).unwrap();
        let p = sample_periodic(&cell, 0.25, unit(64)).unwrap();
        assert!(empirical_mean_drift(&p) < 1e-12);
        let cell = CellFunction::checkerboard([0.5, 1.5], true).unwrap();
        let p = sample_periodic(&cell, 0.125, unit(64)).unwrap();
        assert!(empirical_mean_drift(&p) < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(sample_periodic(&CellFunction::constant(1.0).unwrap(), 0.0, unit(4)).is_err());
        assert!(matches!(RandomCellLaw::new(vec![], vec![]), Err(Error::EmptySupport)));
        assert!(RandomCellLaw::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(CellFunction::constant(-1.0).is_err());
        assert!(CellFunction::trig(1.5).is_err());
        assert!(CellFunction::with_bounds(CellKind::Constant(1.0), 1.0, 2.0).is_err());
        let law = RandomCellLaw::new(vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(sample_random(&law, -0.1, 1, unit(4)), Err(Error::NonPositiveDelta(_))));
    }

    #[test]
    fn aliasing_warning() {
        let p = sample_periodic(&CellFunction::trig(0.2).unwrap(), 0.001, unit(10)).unwrap();
        assert_eq!(p.warnings.len(), 1);
        let p = sample_periodic(&CellFunction::trig(0.2).unwrap(), 0.1, unit(10)).unwrap();
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn random_support_and_determinism() {
        let law = RandomCellLaw::new(vec![0.5, 1.5], vec![0.5, 0.5]).unwrap();
        let a = sample_random(&law, 0.02, 7, unit(100)).unwrap();
        assert!(a.field.values.iter().all(|v| *v == 0.5 || *v == 1.5));
        let b = sample_random(&law, 0.02, 7, unit(100)).unwrap();
        assert_eq!(a, b);
        let c = sample_random(&law, 0.02, 8, unit(100)).unwrap();
        assert_ne!(a.field, c.field);
        let one = RandomCellLaw::new(vec![1.0], vec![1.0]).unwrap();
        let d = sample_random(&one, 0.05, 3, unit(20)).unwrap();
        assert!(d.field.values.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn random_shift_in_range() {
        for seed in 0..50 {
            let s = random_shift(seed, 0.3);
            assert!(s.iter().all(|v| (0.0..0.3).contains(v)));
        }
    }
}
