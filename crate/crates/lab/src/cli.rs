//! Command line: single solves, sweeps and rate fits.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pinlab_core::allencahn::{minimize_ac, AcInit, AcOptions};
use pinlab_core::limits::{critical_fields, solve_limit_fields};
use pinlab_core::magnetic::{minimize_gl, vorticity, write_checkpoint, CheckpointManifest, GLInit, GLOptions};
use pinlab_core::mesh::write_field;
use pinlab_core::pinning::{sample_periodic, sample_random, CellFunction, PinningField, RandomCellLaw};
use pinlab_core::scalar::{cell_minimize, minimize_scalar, scalar_diagnostics, tile_cell, ScalarOptions};
use pinlab_core::{Grid, ScalarField};

use crate::config::SweepConfig;
use crate::fit::fit_rate;
use crate::sweep::{fmt, run_sweep, SweepOptions, AC_COLUMNS, LIMITS_COLUMNS, SCALAR_COLUMNS};

#[derive(Debug, Parser)]
#[command(name = "pinlab", version, about = "Pinned Ginzburg-Landau and Allen-Cahn numerical laboratory")]
pub struct Cli {
    /// Directory for CSV, summaries and field dumps.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Solver tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for random pinning and test states.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run on grids coarser than 8 nodes per min(eps, delta); rows are flagged.
    #[arg(long, global = true)]
    pub allow_underresolved: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Unit-cell problem at chi = delta / eps.
    Cell {
        #[command(flatten)]
        pin: PinArgs,
        #[arg(long)]
        chi: f64,
        /// Intervals per side of the unit cell.
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Scalar minimizer on a square domain.
    Scalar {
        #[command(flatten)]
        pin: PinArgs,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        dom: DomainArgs,
    },
    /// Cell solve tiled by reflection over a reps x reps block of cells.
    Tile {
        #[command(flatten)]
        pin: PinArgs,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 2)]
        reps: usize,
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Magnetic energy descent from imprinted vortices.
    Magnetic {
        #[command(flatten)]
        pin: PinArgs,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        hex: f64,
        /// Vortex as `x,y,degree`; repeatable.
        #[arg(long = "vortex")]
        vortices: Vec<String>,
        #[command(flatten)]
        dom: DomainArgs,
    },
    /// Critical-field table from the limit models.
    Limits {
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        /// Intervals per side of the unit-square grid.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long)]
        hex: Option<f64>,
    },
    /// Mass-constrained Allen-Cahn minimizer.
    Ac {
        #[command(flatten)]
        pin: PinArgs,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// `vertical` or `diagonal`.
        #[arg(long, default_value = "vertical")]
        init: String,
        #[command(flatten)]
        dom: DomainArgs,
    },
    /// Parameter sweep described by a config file.
    Sweep { config: PathBuf },
    /// Power-law fit of two CSV columns over rows with an `ok` status.
    Fit { csv: PathBuf, xcol: String, ycol: String },
}

#[derive(Debug, Clone, Args)]
pub struct PinArgs {
    /// constant, checkerboard, piecewise, trig or random.
    #[arg(long, default_value = "constant")]
    pub kind: String,
    /// Comma-separated cell values.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub values: Vec<f64>,
    /// Comma-separated probabilities for random pinning.
    #[arg(long, value_delimiter = ',')]
    pub probs: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[arg(long)]
    pub symmetric: bool,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
}

#[derive(Debug, Clone, Args)]
pub struct DomainArgs {
    /// Side of the square domain.
    #[arg(long, default_value_t = 1.0)]
    pub side: f64,
    /// Intervals per side; default 8 nodes per min(eps, delta).
    #[arg(long)]
    pub intervals: Option<usize>,
}

impl PinArgs {
    fn cell(&self) -> Result<CellFunction> {
        let v = &self.values;
        let need = |n: usize| if v.len() < n { Err(anyhow!("--kind {} needs {n} values", self.kind)) } else { Ok(()) };
        Ok(match self.kind.as_str() {
            "constant" => {
                need(1)?;
                CellFunction::constant(v[0])?
            }
            "checkerboard" => {
                need(2)?;
                CellFunction::checkerboard([v[0], v[1]], self.symmetric)?
            }
            "piecewise" => CellFunction::piecewise(self.k, v.clone())?,
            "trig" => CellFunction::trig(self.alpha)?,
            other => bail!("no cell function for kind `{other}`"),
        })
    }

    fn field(&self, grid: Grid, seed: u64) -> Result<PinningField> {
        if self.kind == "random" {
            let probs = if self.probs.is_empty() { vec![1.0 / self.values.len() as f64; self.values.len()] } else { self.probs.clone() };
            let law = RandomCellLaw::new(self.values.clone(), probs)?;
            return Ok(sample_random(&law, self.delta, seed, grid)?);
        }
        Ok(sample_periodic(&self.cell()?, self.delta, grid)?)
    }
}

impl Cli {
    fn domain(&self, dom: &DomainArgs, eps: f64, delta: f64) -> Result<Grid> {
        let need = (8.0 * dom.side / eps.min(delta)).ceil() as usize;
        let n = dom.intervals.unwrap_or(need);
        if n < need && !self.allow_underresolved {
            bail!("{n} intervals give fewer than 8 nodes per min(eps, delta); need {need} or --allow-underresolved");
        }
        if n < need {
            log::warn!("underresolved grid: {n} intervals, {need} recommended");
        }
        Ok(Grid::square(dom.side, n)?)
    }

    fn opts(&self) -> ScalarOptions {
        ScalarOptions::default().with_tol(self.tol.unwrap_or(1e-10))
    }

    fn dump(&self, name: &str, f: &ScalarField) -> Result<()> {
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir)?;
            let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
            write_field(&mut w, f)?;
        }
        Ok(())
    }

    fn emit(&self, name: &str, text: &str) -> Result<()> {
        print!("{text}");
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

fn header(cols: &[&str]) -> String {
    format!("{},status\n", cols.join(","))
}

/// Exit status: 0 success, 1 hard error, 2 sweep finished with failed rows.
pub fn run(cli: Cli) -> ExitCode {
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli) -> Result<ExitCode> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Cell { pin, chi, n } => {
            let cell = pin.cell()?;
            let c = cell_minimize(&cell, *chi, *n, &cli.opts())?;
            let m = cell.mean().sqrt();
            println!("chi,ell,w1p_deficit,energy,energy_at_mean,el_residual,sup_error,iters");
            println!(
                "{},{},{},{},{},{},{},{}",
                fmt(*chi),
                fmt(c.ell),
                fmt(c.w1p_deficit),
                fmt(c.energy),
                fmt(c.energy_at_mean),
                fmt(c.el_residual),
                fmt(c.uhat.sup_distance(m)),
                c.iterations
            );
            cli.dump("cell.txt", &c.uhat)?;
        }
        Command::Scalar { pin, eps, dom } => {
            let grid = cli.domain(dom, *eps, pin.delta)?;
            let p = pin.field(grid, seed)?;
            for w in &p.warnings {
                log::warn!("{w}");
            }
            let s = minimize_scalar(&p, *eps, &cli.opts())?;
            let d = scalar_diagnostics(&s, *eps, p.target_mean().sqrt());
            let row = [
                fmt(*eps),
                fmt(pin.delta),
                fmt(pin.delta / eps),
                p.kind_label().to_string(),
                seed.to_string(),
                fmt(d.sup_error),
                fmt(d.l2_error),
                fmt(d.grad_bound_ratio),
                fmt(s.energy),
                fmt(s.el_residual),
                s.iterations.to_string(),
            ];
            cli.emit("scalar.csv", &format!("{}{},ok\n", header(SCALAR_COLUMNS), row.join(",")))?;
            cli.dump("scalar_u.txt", &s.u)?;
        }
        Command::Tile { pin, eps, reps, n } => {
            let cell = pin.cell()?;
            let c = cell_minimize(&cell, pin.delta / eps, *n, &cli.opts())?;
            let t = tile_cell(&c, *reps, pin.delta)?;
            println!("reps,side,sup_error,cell_el_residual");
            println!("{},{},{},{}", reps, fmt(t.grid.lx()), fmt(t.sup_distance(cell.mean().sqrt())), fmt(c.el_residual));
            cli.dump("tile.txt", &t)?;
        }
        Command::Magnetic { pin, eps, hex, vortices, dom } => {
            let grid = cli.domain(dom, *eps, pin.delta)?;
            let p = pin.field(grid, seed)?;
            let vs = vortices.iter().map(|v| parse_vortex(v)).collect::<Result<Vec<_>>>()?;
            let init = if vs.is_empty() { GLInit::Uniform } else { GLInit::Vortices(vs.clone()) };
            let st = minimize_gl(Some(&p), *eps, *hex, grid, init, &GLOptions::default())?;
            let balls: Vec<([f64; 2], f64)> = vs.iter().map(|v| (v.0, 2.0 * eps)).collect();
            let vr = vorticity(&st.u, &st.a, &balls);
            println!("eps,hex,energy,kinetic,potential,field,total_mu,sweeps,grad_norm");
            println!(
                "{},{},{},{},{},{},{},{},{}",
                fmt(*eps),
                fmt(*hex),
                fmt(st.energy.total),
                fmt(st.energy.kinetic),
                fmt(st.energy.potential),
                fmt(st.energy.field),
                fmt(vr.total_mu),
                st.sweeps,
                fmt(st.grad_norm)
            );
            for b in &vr.ball_sums {
                println!("# ball ({}, {}) r {}: circulation {}", b.center[0], b.center[1], b.radius, b.circulation);
            }
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("checkpoint.txt"))?);
                let manifest =
                    CheckpointManifest { eps: *eps, hex: *hex, delta: pin.delta, kind: p.kind_label().to_string(), seed };
                write_checkpoint(&mut w, &st.u, &st.a, &manifest)?;
                w.flush()?;
            }
        }
        Command::Limits { eps, n_max, gamma, grid, hex } => {
            let g = Grid::square(1.0, *grid)?;
            let lf = solve_limit_fields(&g)?;
            let rows = critical_fields(*n_max, *eps, &lf, *gamma, *hex)?;
            let mut text = header(LIMITS_COLUMNS);
            for r in rows {
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},ok\n",
                    r.n,
                    fmt(r.f_eps),
                    fmt(r.g_eps),
                    fmt(r.h_n_root),
                    fmt(r.h_n_asymptotic),
                    fmt(r.k_n),
                    fmt(r.min_w_n)
                ));
            }
            cli.emit("limits.csv", &text)?;
        }
        Command::Ac { pin, eps, beta, init, dom } => {
            let grid = cli.domain(dom, *eps, pin.delta)?;
            let p = pin.field(grid, seed)?;
            let init = match init.as_str() {
                "vertical" => AcInit::VerticalSplit,
                "diagonal" => AcInit::DiagonalSplit { tilt: 0.05 },
                other => bail!("unknown --init `{other}`"),
            };
            let s = minimize_ac(&p, *eps, *beta, &init, &AcOptions::default())?;
            let row = [
                fmt(*eps),
                fmt(pin.delta),
                fmt(*beta),
                fmt(s.energy),
                fmt(s.interface_length),
                fmt(s.per_length_constant),
                fmt(s.lagrange),
            ];
            cli.emit("ac.csv", &format!("{}{},ok\n", header(AC_COLUMNS), row.join(",")))?;
            cli.dump("ac_u.txt", &s.u)?;
        }
        Command::Sweep { config } => {
            let loaded = SweepConfig::from_path(config)?;
            for w in &loaded.warnings {
                log::warn!("{w}");
            }
            let cfg = loaded.config;
            let opts = SweepOptions {
                workers: cli.workers,
                tol: cli.tol,
                seed: cli.seed,
                allow_underresolved: cli.allow_underresolved,
                max_intervals: None,
            };
            let mut table = run_sweep(&cfg, &opts);
            table.warnings.extend(loaded.warnings);
            let dir = cli.out.clone().or(cfg.output.clone()).unwrap_or_else(|| PathBuf::from("."));
            table.write(&dir).with_context(|| format!("writing results to {}", dir.display()))?;
            print!("{}", table.summary());
            if table.failures() > 0 {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Fit { csv, xcol, ycol } => {
            let pairs = read_columns(csv, xcol, ycol)?;
            let f = fit_rate(&pairs)?;
            println!("slope,intercept,r2,n_points");
            println!("{},{},{},{}", fmt(f.slope), fmt(f.intercept), fmt(f.r2), f.n_points);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_vortex(s: &str) -> Result<([f64; 2], i32)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        bail!("vortex must be `x,y,degree`, got `{s}`");
    }
    Ok(([parts[0].parse()?, parts[1].parse()?], parts[2].parse()?))
}

/// `(x, y)` pairs from two named columns, keeping rows whose `status`
/// (when present) starts with `ok`.
pub fn read_columns(path: &Path, xcol: &str, ycol: &str) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let head: Vec<&str> = lines.next().ok_or_else(|| anyhow!("empty CSV"))?.split(',').map(str::trim).collect();
    let col = |name: &str| head.iter().position(|h| *h == name).ok_or_else(|| anyhow!("no column `{name}`"));
    let (ix, iy) = (col(xcol)?, col(ycol)?);
    let is = head.iter().position(|h| *h == "status");
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != head.len() {
            bail!("row {} has {} fields, header has {}", k + 1, f.len(), head.len());
        }
        if is.is_some_and(|i| !f[i].starts_with("ok")) {
            continue;
        }
        let x: f64 = f[ix].parse().with_context(|| format!("row {}: `{}`", k + 1, f[ix]))?;
        let y: f64 = f[iy].parse().with_context(|| format!("row {}: `{}`", k + 1, f[iy]))?;
        out.push((x, y));
    }
    Ok(out)
}
