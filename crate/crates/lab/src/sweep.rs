//! Parameter sweeps: one solve per `(eps, delta, seed)` cell, run
//! concurrently, collected in grid order and written as CSV plus a summary.

use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use pinlab_core::allencahn::{minimize_ac, AcInit, AcOptions};
use pinlab_core::limits::{critical_fields, solve_limit_fields};
use pinlab_core::magnetic::{quasiminimizer_report, random_gauge_state};
use pinlab_core::mesh::gradient_sup;
use pinlab_core::pinning::{empirical_mean_drift, sample_periodic, sample_random, PinningField};
use pinlab_core::scalar::{cell_minimize, minimize_scalar, scalar_diagnostics, tile_cell, ScalarOptions};
use pinlab_core::Grid;
use rayon::prelude::*;

use crate::config::{Experiment, SweepConfig};
use crate::fit::{fit_rate, RateFit};

pub const SCALAR_COLUMNS: &[&str] =
    &["eps", "delta", "chi", "kind", "seed", "sup_error", "l2_error", "grad_ratio", "energy", "el_residual", "iters"];
pub const LIMITS_COLUMNS: &[&str] = &["n", "f_eps", "g_eps", "H_n_root", "H_n_asymptotic", "K_n", "min_w_n"];
pub const AC_COLUMNS: &[&str] = &["eps", "delta", "beta", "energy", "interface_length", "per_length_constant", "lagrange"];
pub const MAGNETIC_COLUMNS: &[&str] =
    &["eps", "delta", "hex", "seed", "denoised", "unpinned_of_v", "ratio", "u_sup_error", "sandwich"];

/// Run-time overrides, usually from the command line.
#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub workers: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub allow_underresolved: bool,
    /// Largest admissible number of intervals per side of a domain grid.
    pub max_intervals: Option<usize>,
}

const DEFAULT_MAX_INTERVALS: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    /// CSV cells in column order, without `status`.
    pub cells: Vec<String>,
    pub status: String,
    /// Quantities used by fits and summaries; not written to the CSV.
    pub metrics: Vec<(&'static str, f64)>,
}

impl Row {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.0 == name).map(|m| m.1)
    }
    pub fn is_ok(&self) -> bool {
        self.status.starts_with("ok")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub name: String,
    pub x: &'static str,
    pub y: &'static str,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<RateFit>,
    /// `ok`, `degenerate` (all errors at noise level) or `insufficient`.
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub experiment: Experiment,
    pub columns: &'static [&'static str],
    pub rows: Vec<Row>,
    pub fits: Vec<FitSummary>,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

impl SweepTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.columns.join(","));
        s.push_str(",status\n");
        for r in &self.rows {
            s.push_str(&r.cells.join(","));
            s.push(',');
            s.push_str(&r.status);
            s.push('\n');
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment: {}", self.experiment.name());
        let _ = writeln!(s, "rows: {}", self.rows.len());
        let _ = writeln!(s, "failures: {}", self.failures());
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        for f in &self.fits {
            match &f.fit {
                Some(fit) => {
                    let _ = writeln!(
                        s,
                        "fit {}: {} vs {}: slope {:.6} intercept {:.6} r2 {:.6} points {} status {}",
                        f.name, f.y, f.x, fit.slope, fit.intercept, fit.r2, fit.n_points, f.status
                    );
                }
                None => {
                    let _ = writeln!(s, "fit {}: {} vs {}: status {}", f.name, f.y, f.x, f.status);
                }
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "{n}");
        }
        s
    }

    /// Writes `<experiment>.csv`, `summary.txt` and one two-column `.dat`
    /// file per fit into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.csv", self.experiment.name())), self.to_csv())?;
        std::fs::write(dir.join("summary.txt"), self.summary())?;
        for f in &self.fits {
            let mut d = format!("# {} {}\n", f.x, f.y);
            for (x, y) in &f.points {
                let _ = writeln!(d, "{x:e} {y:e}");
            }
            std::fs::write(dir.join(format!("{}.dat", f.name)), d)?;
        }
        Ok(())
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    eps: f64,
    delta: f64,
    seed: u64,
}

struct Ctx<'a> {
    cfg: &'a SweepConfig,
    tol: f64,
    allow_underresolved: bool,
    max_intervals: usize,
}

type CellResult = Result<Vec<Row>, String>;

/// Runs every cell of the configuration. Failed cells are recorded with their
/// status and never abort the sweep.
pub fn run_sweep(cfg: &SweepConfig, opts: &SweepOptions) -> SweepTable {
    let tol = cfg.tolerance(opts.tol);
    let ctx = Ctx {
        cfg,
        tol,
        allow_underresolved: opts.allow_underresolved,
        max_intervals: opts.max_intervals.unwrap_or(DEFAULT_MAX_INTERVALS),
    };
    let seeds = match opts.seed {
        Some(s) if cfg.seeds.is_empty() => vec![s],
        _ => cfg.seed_list(),
    };
    let mut cells = Vec::new();
    for &eps in &cfg.eps {
        let deltas = if cfg.experiment == Experiment::LimitsTable { vec![f64::NAN] } else { cfg.deltas(eps) };
        for &delta in &deltas {
            for &seed in &seeds {
                cells.push(Cell { eps, delta, seed });
                if cfg.experiment == Experiment::LimitsTable {
                    break;
                }
            }
        }
    }
    let workers = opts.workers.or(cfg.workers).unwrap_or(1);
    let run = || -> Vec<(Cell, CellResult)> {
        cells
            .par_iter()
            .map(|c| {
                let res = catch_unwind(AssertUnwindSafe(|| ctx.run_cell(*c)))
                    .unwrap_or_else(|_| Err("panicked".to_string()));
                (*c, res)
            })
            .collect()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    let columns = columns_for(cfg.experiment);
    let mut rows = Vec::new();
    for (c, res) in results {
        match res {
            Ok(mut r) => rows.append(&mut r),
            Err(msg) => rows.push(failed_row(cfg.experiment, c, &msg)),
        }
    }
    let mut table = SweepTable { experiment: cfg.experiment, columns, rows, fits: Vec::new(), notes: Vec::new(), warnings: Vec::new() };
    summarize(&mut table, tol);
    table
}

pub fn columns_for(e: Experiment) -> &'static [&'static str] {
    match e {
        Experiment::CellRates | Experiment::ScalarRates | Experiment::SymmetricRates | Experiment::RandomBirkhoff => {
            SCALAR_COLUMNS
        }
        Experiment::MagneticEquiv => MAGNETIC_COLUMNS,
        Experiment::LimitsTable => LIMITS_COLUMNS,
        Experiment::AllenCahn => AC_COLUMNS,
    }
}

fn sanitize(msg: &str) -> String {
    let m: String = msg.chars().map(|c| if c == ',' || c == '\n' { ';' } else { c }).collect();
    format!("failed: {m}")
}

fn failed_row(e: Experiment, c: Cell, msg: &str) -> Row {
    let columns = columns_for(e);
    let cells = columns
        .iter()
        .map(|&name| match name {
            "eps" => fmt(c.eps),
            "delta" => fmt(c.delta),
            "seed" => c.seed.to_string(),
            "kind" => "-".to_string(),
            _ => "NaN".to_string(),
        })
        .collect();
    Row { eps: c.eps, delta: c.delta, seed: c.seed, cells, status: sanitize(msg), metrics: Vec::new() }
}

impl Ctx<'_> {
    fn scalar_opts(&self) -> ScalarOptions {
        ScalarOptions::default().with_tol(self.tol)
    }

    /// Square domain grid with at least `nodes_per_min` nodes per
    /// `min(eps, delta)`; returns the status the row should carry.
    fn domain_grid(&self, eps: f64, delta: f64) -> Result<(Grid, &'static str), String> {
        let r = &self.cfg.resolution;
        let need = (r.nodes_per_min * r.domain / eps.min(delta)).ceil() as usize;
        let (n, status) = if need <= self.max_intervals {
            (need.max(2), "ok")
        } else if self.allow_underresolved {
            (self.max_intervals, "ok_underresolved")
        } else {
            return Err(format!(
                "underresolved: {need} intervals per side needed; cap is {}",
                self.max_intervals
            ));
        };
        let grid = Grid::square(r.domain, n).map_err(|e| e.to_string())?;
        Ok((grid, status))
    }

    fn periodic(&self, delta: f64, grid: Grid) -> Result<PinningField, String> {
        let cell = self.cfg.cell().map_err(|e| e.to_string())?;
        sample_periodic(&cell, delta, grid).map_err(|e| e.to_string())
    }

    fn run_cell(&self, c: Cell) -> CellResult {
        let e = |x: pinlab_core::Error| x.to_string();
        match self.cfg.experiment {
            Experiment::CellRates | Experiment::SymmetricRates => {
                let cell = self.cfg.cell().map_err(|x| x.to_string())?;
                let r = &self.cfg.resolution;
                if (r.cell_nodes as f64) < r.nodes_per_min * (c.delta / c.eps).max(1.0) {
                    if !self.allow_underresolved {
                        return Err(format!("underresolved: {} cell intervals", r.cell_nodes));
                    }
                }
                let chi = c.delta / c.eps;
                let cs = cell_minimize(&cell, chi, r.cell_nodes, &self.scalar_opts()).map_err(e)?;
                let m = cell.mean().sqrt();
                let field = if self.cfg.experiment == Experiment::SymmetricRates {
                    tile_cell(&cs, r.reps, c.delta).map_err(e)?
                } else {
                    cs.uhat.clone()
                };
                let sup = field.sup_distance(m);
                let sq = field.map(|v| (v - m) * (v - m));
                let l2 = (pinlab_core::mesh::integrate(&sq)).sqrt();
                // physical gradient of U(x) = Uhat(x / delta)
                let grad = match self.cfg.experiment {
                    Experiment::SymmetricRates => c.eps * gradient_sup(&field),
                    _ => c.eps / c.delta * gradient_sup(&field),
                };
                let row = scalar_row(c, chi, cell.label(), sup, l2, grad, cs.energy, cs.el_residual, cs.iterations);
                Ok(vec![Row {
                    status: "ok".into(),
                    metrics: vec![("sup_error", sup), ("chi", chi), ("w1p_deficit", cs.w1p_deficit)],
                    ..row
                }])
            }
            Experiment::ScalarRates => {
                let (grid, status) = self.domain_grid(c.eps, c.delta)?;
                let p = self.periodic(c.delta, grid)?;
                let s = minimize_scalar(&p, c.eps, &self.scalar_opts()).map_err(e)?;
                let d = scalar_diagnostics(&s, c.eps, p.target_mean().sqrt());
                let row = scalar_row(c, c.delta / c.eps, p.kind_label(), d.sup_error, d.l2_error, d.grad_bound_ratio, s.energy, s.el_residual, s.iterations);
                Ok(vec![Row { status: status.into(), metrics: vec![("sup_error", d.sup_error)], ..row }])
            }
            Experiment::RandomBirkhoff => {
                let (grid, status) = self.domain_grid(c.eps, c.delta)?;
                let law = self.cfg.random_law().map_err(|x| x.to_string())?;
                let p = sample_random(&law, c.delta, c.seed, grid).map_err(e)?;
                let drift = empirical_mean_drift(&p);
                let s = minimize_scalar(&p, c.eps, &self.scalar_opts()).map_err(e)?;
                let d = scalar_diagnostics(&s, c.eps, p.target_mean().sqrt());
                let row = scalar_row(c, c.delta / c.eps, p.kind_label(), d.sup_error, d.l2_error, d.grad_bound_ratio, s.energy, s.el_residual, s.iterations);
                Ok(vec![Row { status: status.into(), metrics: vec![("sup_error", d.sup_error), ("drift", drift)], ..row }])
            }
            Experiment::MagneticEquiv => {
                let (grid, status) = self.domain_grid(c.eps, c.delta)?;
                let p = self.periodic(c.delta, grid)?;
                let s = minimize_scalar(&p, c.eps, &self.scalar_opts()).map_err(e)?;
                let hex = self.cfg.magnetic.hex;
                let (u, a) = random_gauge_state(grid, c.eps, c.seed);
                let q = quasiminimizer_report(&u, &a, &p, &s.u, c.eps, hex).map_err(e)?;
                let cells = vec![
                    fmt(c.eps),
                    fmt(c.delta),
                    fmt(hex),
                    c.seed.to_string(),
                    fmt(q.denoised),
                    fmt(q.unpinned_of_v),
                    fmt(q.ratio),
                    fmt(q.u_sup_error),
                    q.sandwich_holds.to_string(),
                ];
                Ok(vec![Row {
                    eps: c.eps,
                    delta: c.delta,
                    seed: c.seed,
                    cells,
                    status: status.into(),
                    metrics: vec![
                        ("ratio_defect", (q.ratio - 1.0).abs()),
                        ("u_sup_error", q.u_sup_error),
                        ("sandwich", if q.sandwich_holds { 1.0 } else { 0.0 }),
                    ],
                }])
            }
            Experiment::LimitsTable => {
                let l = &self.cfg.limits;
                let grid = Grid::square(1.0, l.grid).map_err(|x| x.to_string())?;
                let lf = solve_limit_fields(&grid).map_err(e)?;
                let rows = critical_fields(l.n_max, c.eps, &lf, l.gamma, l.hex).map_err(e)?;
                Ok(rows
                    .into_iter()
                    .map(|r| Row {
                        eps: c.eps,
                        delta: c.delta,
                        seed: c.seed,
                        cells: vec![
                            r.n.to_string(),
                            fmt(r.f_eps),
                            fmt(r.g_eps),
                            fmt(r.h_n_root),
                            fmt(r.h_n_asymptotic),
                            fmt(r.k_n),
                            fmt(r.min_w_n),
                        ],
                        status: "ok".into(),
                        metrics: vec![("n", r.n as f64), ("h_n_root", r.h_n_root)],
                    })
                    .collect())
            }
            Experiment::AllenCahn => {
                let (grid, status) = self.domain_grid(c.eps, c.delta)?;
                let p = self.periodic(c.delta, grid)?;
                let ac = &self.cfg.ac;
                let init = if ac.init == "diagonal" { AcInit::DiagonalSplit { tilt: ac.tilt } } else { AcInit::VerticalSplit };
                let s = minimize_ac(&p, c.eps, ac.beta, &init, &AcOptions::default()).map_err(e)?;
                let cells = vec![
                    fmt(c.eps),
                    fmt(c.delta),
                    fmt(ac.beta),
                    fmt(s.energy),
                    fmt(s.interface_length),
                    fmt(s.per_length_constant),
                    fmt(s.lagrange),
                ];
                Ok(vec![Row {
                    eps: c.eps,
                    delta: c.delta,
                    seed: c.seed,
                    cells,
                    status: status.into(),
                    metrics: vec![("per_length_constant", s.per_length_constant)],
                }])
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn scalar_row(
    c: Cell,
    chi: f64,
    kind: &str,
    sup: f64,
    l2: f64,
    grad: f64,
    energy: f64,
    res: f64,
    iters: usize,
) -> Row {
    Row {
        eps: c.eps,
        delta: c.delta,
        seed: c.seed,
        cells: vec![
            fmt(c.eps),
            fmt(c.delta),
            fmt(chi),
            kind.to_string(),
            c.seed.to_string(),
            fmt(sup),
            fmt(l2),
            fmt(grad),
            fmt(energy),
            fmt(res),
            iters.to_string(),
        ],
        status: String::new(),
        metrics: Vec::new(),
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fits `y` against `x` over rows whose `y` is above the noise level.
fn fit_summary(name: &str, x: &'static str, y: &'static str, points: Vec<(f64, f64)>, floor: f64) -> FitSummary {
    let total = points.len();
    let points: Vec<(f64, f64)> = points.into_iter().filter(|p| p.1 > floor).collect();
    let (fit, status) = if points.len() >= 3 {
        match fit_rate(&points) {
            Ok(f) => (Some(f), "ok".to_string()),
            Err(err) => (None, format!("insufficient ({err})")),
        }
    } else if total > 0 && points.is_empty() {
        (None, "degenerate".to_string())
    } else {
        (None, format!("insufficient ({} points above noise)", points.len()))
    };
    FitSummary { name: name.to_string(), x, y, points, fit, status }
}

fn summarize(t: &mut SweepTable, tol: f64) {
    let floor = 100.0 * tol;
    let ok: Vec<&Row> = t.rows.iter().filter(|r| r.is_ok()).collect();
    match t.experiment {
        Experiment::CellRates => {
            let pts = ok.iter().filter_map(|r| Some((r.metric("chi")?, r.metric("sup_error")?))).collect();
            t.fits.push(fit_summary("sup_error_vs_chi", "chi", "sup_error", pts, floor));
            let pts = ok.iter().filter_map(|r| Some((r.metric("chi")?, r.metric("w1p_deficit")?))).collect();
            t.fits.push(fit_summary("w1p_deficit_vs_chi", "chi", "w1p_deficit", pts, floor));
        }
        Experiment::ScalarRates | Experiment::SymmetricRates => {
            let pts = ok.iter().filter_map(|r| Some((r.delta, r.metric("sup_error")?))).collect();
            t.fits.push(fit_summary("sup_error_vs_delta", "delta", "sup_error", pts, floor));
        }
        Experiment::RandomBirkhoff => {
            let mut deltas: Vec<f64> = ok.iter().map(|r| r.delta).collect();
            deltas.sort_by(f64::total_cmp);
            deltas.dedup();
            let mut sup_pts = Vec::new();
            let mut drift_pts = Vec::new();
            for d in deltas {
                let mut sup: Vec<f64> = ok.iter().filter(|r| r.delta == d).filter_map(|r| r.metric("sup_error")).collect();
                let mut drift: Vec<f64> = ok.iter().filter(|r| r.delta == d).filter_map(|r| r.metric("drift")).collect();
                sup_pts.push((d, median(&mut sup)));
                drift_pts.push((d, median(&mut drift)));
            }
            t.fits.push(fit_summary("median_sup_error_vs_delta", "delta", "median_sup_error", sup_pts, floor));
            t.fits.push(fit_summary("median_drift_vs_delta", "delta", "median_drift", drift_pts, 0.0));
        }
        Experiment::MagneticEquiv => {
            let worst = ok
                .iter()
                .filter_map(|r| Some(r.metric("ratio_defect")? / r.metric("u_sup_error")?.max(f64::MIN_POSITIVE)))
                .fold(0.0, f64::max);
            let sandwich = ok.iter().all(|r| r.metric("sandwich") == Some(1.0));
            t.notes.push(format!("max |ratio - 1| / u_sup_error: {worst:e}"));
            t.notes.push(format!("sandwich bounds hold on every state: {sandwich}"));
        }
        Experiment::LimitsTable => {
            let mut eps: Vec<f64> = ok.iter().map(|r| r.eps).collect();
            eps.dedup();
            for e in eps {
                let roots: Vec<f64> = ok.iter().filter(|r| r.eps == e).filter_map(|r| r.metric("h_n_root")).collect();
                let inc = roots.windows(2).all(|w| w[1] > w[0]);
                t.notes.push(format!("eps {e:e}: H_n strictly increasing: {inc}"));
            }
        }
        Experiment::AllenCahn => {
            let c: Vec<f64> = ok.iter().filter_map(|r| r.metric("per_length_constant")).collect();
            if !c.is_empty() {
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                t.notes.push(format!("per-length constant range: [{lo:e}, {hi:e}] (sharp-interface value 8/3 per unit length, 4/3 per unit jump)"));
            }
        }
    }
}
