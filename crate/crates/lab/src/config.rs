//! Sweep configuration: a flat TOML file with dotted keys, e.g.
//!
//! ```toml
//! experiment = "symmetric_rates"
//! eps = [0.05]
//! pinning.kind = "checkerboard"
//! pinning.values = [0.5, 1.5]
//! pinning.symmetric = true
//! pinning.delta_rule = "eps^2/4"
//! ```
//!
//! Either `pinning.delta` (a list crossed with every `eps`) or
//! `pinning.delta_rule` (one delta per `eps`) supplies the cell sizes.

use std::path::{Path, PathBuf};

use pinlab_core::pinning::{CellFunction, RandomCellLaw};
use serde::Deserialize;

use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    CellRates,
    ScalarRates,
    SymmetricRates,
    RandomBirkhoff,
    MagneticEquiv,
    LimitsTable,
    AllenCahn,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::CellRates => "cell_rates",
            Experiment::ScalarRates => "scalar_rates",
            Experiment::SymmetricRates => "symmetric_rates",
            Experiment::RandomBirkhoff => "random_birkhoff",
            Experiment::MagneticEquiv => "magnetic_equiv",
            Experiment::LimitsTable => "limits_table",
            Experiment::AllenCahn => "allen_cahn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub eps: Vec<f64>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub pinning: PinningSpec,
    #[serde(default)]
    pub resolution: ResolutionSpec,
    #[serde(default)]
    pub magnetic: MagneticSpec,
    #[serde(default)]
    pub ac: AcSpec,
    #[serde(default)]
    pub limits: LimitsSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PinningSpec {
    /// `constant`, `checkerboard`, `piecewise`, `trig` or `random`.
    pub kind: String,
    pub values: Vec<f64>,
    /// Probabilities of `values` for `random`.
    pub probs: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
    pub delta_rule: Option<String>,
    /// Default seed when `seeds` is empty.
    pub seed: Option<u64>,
    /// Checkerboard centred so that the cell is reflection symmetric.
    pub symmetric: bool,
    pub alpha: f64,
    /// Side count of a `piecewise` cell.
    pub k: usize,
}

impl Default for PinningSpec {
    fn default() -> Self {
        PinningSpec {
            kind: "checkerboard".into(),
            values: vec![0.5, 1.5],
            probs: None,
            delta: None,
            delta_rule: None,
            seed: None,
            symmetric: false,
            alpha: 0.5,
            k: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolutionSpec {
    /// Minimum nodes per `min(eps, delta)`.
    pub nodes_per_min: f64,
    /// Side of the square domain.
    pub domain: f64,
    /// Intervals per unit of a cell solve.
    pub cell_nodes: usize,
    /// Tiling repetitions in `symmetric_rates`.
    pub reps: usize,
}

impl Default for ResolutionSpec {
    fn default() -> Self {
        ResolutionSpec { nodes_per_min: 8.0, domain: 1.0, cell_nodes: 64, reps: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MagneticSpec {
    pub hex: f64,
}

impl Default for MagneticSpec {
    fn default() -> Self {
        MagneticSpec { hex: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcSpec {
    pub beta: f64,
    /// `vertical` or `diagonal`.
    pub init: String,
    pub tilt: f64,
}

impl Default for AcSpec {
    fn default() -> Self {
        AcSpec { beta: 0.0, init: "vertical".into(), tilt: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsSpec {
    pub n_max: usize,
    pub gamma: f64,
    /// Intervals per side of the unit-square grid for the limit fields.
    pub grid: usize,
    /// Applied field for `f_eps`, `g_eps`; defaults to the first critical field.
    pub hex: Option<f64>,
}

impl Default for LimitsSpec {
    fn default() -> Self {
        LimitsSpec { n_max: 4, gamma: 0.0, grid: 64, hex: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Expr(#[from] crate::expr::ParseError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// A validated configuration plus any warnings raised while checking it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: SweepConfig,
    pub warnings: Vec<String>,
}

impl SweepConfig {
    pub fn from_path(path: &Path) -> Result<Loaded, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Loaded, ConfigError> {
        let config: SweepConfig = toml::from_str(text)?;
        let warnings = config.validate()?;
        Ok(Loaded { config, warnings })
    }

    fn needs_delta(&self) -> bool {
        self.experiment != Experiment::LimitsTable
    }

    fn delta_rule(&self) -> Result<Option<Expr>, ConfigError> {
        Ok(match &self.pinning.delta_rule {
            Some(s) => Some(Expr::parse(s)?),
            None => None,
        })
    }

    pub fn validate(&self) -> Result<Vec<String>, ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let mut warnings = Vec::new();
        if self.eps.is_empty() {
            return bad("eps list is empty".into());
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return bad(format!("eps values must be positive, got {e}"));
        }
        if self.needs_delta() {
            match (&self.pinning.delta, &self.pinning.delta_rule) {
                (Some(_), Some(_)) => return bad("give either pinning.delta or pinning.delta_rule, not both".into()),
                (None, None) => return bad("pinning.delta or pinning.delta_rule is required".into()),
                (Some(d), None) => {
                    if d.is_empty() {
                        return bad("pinning.delta list is empty".into());
                    }
                    if let Some(x) = d.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                        return bad(format!("delta values must be positive, got {x}"));
                    }
                }
                (None, Some(_)) => {
                    let rule = self.delta_rule()?.expect("rule present");
                    let q = rule.small_eps_exponent();
                    if q < 1.0 - 1e-9 {
                        warnings.push(format!(
                            "delta rule `{}` scales like eps^{q:.3}; exponent below 1 leaves the delta << eps regime",
                            self.pinning.delta_rule.as_deref().unwrap_or_default()
                        ));
                    }
                    for &e in &self.eps {
                        let d = rule.eval(e);
                        if !(d > 0.0 && d.is_finite()) {
                            return bad(format!("delta rule gives {d} at eps = {e}"));
                        }
                    }
                }
            }
        }
        if self.tol.is_some_and(|t| !(t > 0.0)) {
            return bad("tol must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        let r = &self.resolution;
        if !(r.nodes_per_min > 0.0 && r.domain > 0.0) || r.cell_nodes < 2 || r.reps == 0 {
            return bad("resolution settings must be positive (cell_nodes >= 2, reps >= 1)".into());
        }
        match self.experiment {
            Experiment::RandomBirkhoff => {
                self.random_law()?;
            }
            Experiment::LimitsTable => {
                if self.limits.n_max == 0 || self.limits.grid < 4 {
                    return bad("limits.n_max must be >= 1 and limits.grid >= 4".into());
                }
                if self.eps.len() != 1 {
                    return bad("limits_table takes exactly one eps value per run".into());
                }
                if let Some(e) = self.eps.iter().find(|e| **e >= 1.0) {
                    return bad(format!("limits_table needs eps < 1, got {e}"));
                }
            }
            Experiment::AllenCahn => {
                if !matches!(self.ac.init.as_str(), "vertical" | "diagonal") {
                    return bad(format!("ac.init must be `vertical` or `diagonal`, got `{}`", self.ac.init));
                }
                self.cell()?;
            }
            Experiment::SymmetricRates => {
                if !self.cell()?.is_symmetric() {
                    return bad("symmetric_rates needs a reflection-symmetric cell (set pinning.symmetric = true)".into());
                }
            }
            _ => {
                self.cell()?;
            }
        }
        Ok(warnings)
    }

    /// Cell sizes for `eps`.
    pub fn deltas(&self, eps: f64) -> Vec<f64> {
        if let Some(d) = &self.pinning.delta {
            return d.clone();
        }
        match self.delta_rule() {
            Ok(Some(rule)) => vec![rule.eval(eps)],
            _ => Vec::new(),
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.pinning.seed.unwrap_or(0)]
        } else {
            self.seeds.clone()
        }
    }

    pub fn cell(&self) -> Result<CellFunction, ConfigError> {
        let p = &self.pinning;
        let v = &p.values;
        let need = |n: usize| {
            if v.len() < n {
                Err(ConfigError::Invalid(format!("pinning.kind = {} needs {n} values", p.kind)))
            } else {
                Ok(())
            }
        };
        let cell = match p.kind.as_str() {
            "constant" => {
                need(1)?;
                CellFunction::constant(v[0])
            }
            "checkerboard" => {
                need(2)?;
                CellFunction::checkerboard([v[0], v[1]], p.symmetric)
            }
            "piecewise" => CellFunction::piecewise(p.k, v.clone()),
            "trig" => CellFunction::trig(p.alpha),
            "random" => return Err(ConfigError::Invalid("random pinning is only used by random_birkhoff".into())),
            other => return Err(ConfigError::Invalid(format!("unknown pinning.kind `{other}`"))),
        };
        cell.map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn random_law(&self) -> Result<RandomCellLaw, ConfigError> {
        let p = &self.pinning;
        let probs = match &p.probs {
            Some(q) => q.clone(),
            None => vec![1.0 / p.values.len().max(1) as f64; p.values.len()],
        };
        RandomCellLaw::new(p.values.clone(), probs).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Solver tolerance: command line value, then config value, then `1e-10`.
    pub fn tolerance(&self, cli: Option<f64>) -> f64 {
        cli.or(self.tol).unwrap_or(1e-10)
    }
}
