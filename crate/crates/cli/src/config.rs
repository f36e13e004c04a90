//! JSON run configuration. Unknown keys are rejected with their line and column.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use kf_core::digest::canonical_digest;
use kf_core::gentrig::Route;
use kf_core::measure::MeasureSpec;
use kf_core::spectrum::BoundaryCondition;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Bumped whenever cached artifacts change shape.
pub const CACHE_VERSION: u32 = 1;

/// Environment variable naming the cache root.
pub const CACHE_ENV: &str = "KFELLER_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    MeasureCompile,
    Kernels,
    Trig,
    Spectrum,
    DirichletTrace,
    OracleCompare,
    FieldSample,
    SpdeEvolve,
    Validate,
    Report,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::MeasureCompile,
        Command::Kernels,
        Command::Trig,
        Command::Spectrum,
        Command::DirichletTrace,
        Command::OracleCompare,
        Command::FieldSample,
        Command::SpdeEvolve,
        Command::Validate,
        Command::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::MeasureCompile => "measure-compile",
            Command::Kernels => "kernels",
            Command::Trig => "trig",
            Command::Spectrum => "spectrum",
            Command::DirichletTrace => "dirichlet-trace",
            Command::OracleCompare => "oracle-compare",
            Command::FieldSample => "field-sample",
            Command::SpdeEvolve => "spde-evolve",
            Command::Validate => "validate",
            Command::Report => "report",
        }
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown command {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldParams {
    pub kappa: f64,
    pub beta: f64,
    /// defaults to `count`
    pub modes: Option<usize>,
    pub samples: usize,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self { kappa: 1.0, beta: 1.0, modes: None, samples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpdeParams {
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub t_end: f64,
    /// defaults to `count`
    pub modes: Option<usize>,
    pub paths: usize,
    pub initial: Vec<f64>,
}

impl Default for SpdeParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0, dt: 0.01, t_end: 1.0, modes: None, paths: 100, initial: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// eigenvalue gaps and trace identity, relative
    pub rel: f64,
    pub cosine: f64,
    /// Pythagorean residual allowed, in units of the reported error bound
    pub pythagorean_factor: f64,
    /// derivative relations, absolute; series errors are divided by atom masses
    pub derivative: f64,
    /// dense-oracle checks are skipped above this many V atoms
    pub oracle_max_atoms: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rel: 1e-8, cosine: 0.999, pythagorean_factor: 2.0, derivative: 1e-7, oracle_max_atoms: 600 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputParams {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputParams {
    fn default() -> Self {
        Self { dir: PathBuf::from("kf-out"), format: Format::Csv }
    }
}

fn d_resolution() -> usize {
    1024
}
fn d_order() -> usize {
    40
}
fn d_count() -> usize {
    10
}
fn d_bc() -> BoundaryCondition {
    BoundaryCondition::Periodic
}
fn d_frequencies() -> Vec<f64> {
    vec![1.0, 5.0, 10.0]
}
fn d_points() -> Vec<f64> {
    vec![1.0]
}
fn d_route() -> Route {
    Route::Auto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub measure_w: Option<MeasureSpec>,
    #[serde(default)]
    pub measure_w_file: Option<PathBuf>,
    #[serde(default)]
    pub measure_v: Option<MeasureSpec>,
    #[serde(default)]
    pub measure_v_file: Option<PathBuf>,
    #[serde(default = "d_resolution")]
    pub resolution: usize,
    /// kernel order K
    #[serde(default = "d_order")]
    pub order: usize,
    /// eigenpairs to compute
    #[serde(default = "d_count")]
    pub count: usize,
    #[serde(default = "d_bc")]
    pub bc: BoundaryCondition,
    /// trig frequencies alpha
    #[serde(default = "d_frequencies")]
    pub frequencies: Vec<f64>,
    /// trig evaluation points (grid points, 0 or 1)
    #[serde(default = "d_points")]
    pub points: Vec<f64>,
    #[serde(default = "d_route")]
    pub route: Route,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub field: FieldParams,
    #[serde(default)]
    pub spde: SpdeParams,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputParams,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {msg}"))
}

fn load_measure(inline: &Option<MeasureSpec>, file: &Option<PathBuf>, key: &str, base: &Path) -> CliResult<MeasureSpec> {
    match (inline, file) {
        (Some(s), None) => Ok(s.clone()),
        (None, Some(p)) => {
            let path = if p.is_absolute() { p.clone() } else { base.join(p) };
            let text = std::fs::read_to_string(&path)
                .map_err(|e| bad(&format!("{key}_file"), format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| bad(&format!("{key}_file"), format!("{}: {e}", path.display())))
        }
        (Some(_), Some(_)) => Err(bad(key, format!("give either `{key}` or `{key}_file`, not both"))),
        (None, None) => Err(bad(key, "missing measure")),
    }
}

fn finite_positive(key: &str, x: f64) -> CliResult<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be finite and positive, got {x}")))
    }
}

impl RunConfig {
    /// Parse a JSON document. Relative measure files resolve against `base`.
    pub fn from_json(text: &str, base: &Path) -> CliResult<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let w = load_measure(&cfg.measure_w, &cfg.measure_w_file, "measure_w", base)?;
        let v = load_measure(&cfg.measure_v, &cfg.measure_v_file, "measure_v", base)?;
        w.validate().map_err(|e| bad("measure_w", e))?;
        v.validate().map_err(|e| bad("measure_v", e))?;
        cfg.measure_w = Some(w);
        cfg.measure_v = Some(v);
        cfg.measure_w_file = None;
        cfg.measure_v_file = None;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> CliResult<()> {
        for (key, n) in [("resolution", self.resolution), ("order", self.order), ("count", self.count)] {
            if n == 0 {
                return Err(bad(key, "must be positive"));
            }
        }
        if self.frequencies.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(bad("frequencies", "must be finite and nonnegative"));
        }
        if self.points.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(bad("points", "must lie in [0,1]"));
        }
        finite_positive("field.kappa", self.field.kappa)?;
        finite_positive("field.beta", self.field.beta)?;
        if self.field.samples == 0 || self.field.modes == Some(0) {
            return Err(bad("field", "samples and modes must be positive"));
        }
        finite_positive("spde.alpha", self.spde.alpha)?;
        finite_positive("spde.beta", self.spde.beta)?;
        finite_positive("spde.dt", self.spde.dt)?;
        finite_positive("spde.t_end", self.spde.t_end)?;
        if self.spde.t_end < self.spde.dt {
            return Err(bad("spde.t_end", "shorter than dt"));
        }
        if self.spde.paths == 0 || self.spde.modes == Some(0) {
            return Err(bad("spde", "paths and modes must be positive"));
        }
        finite_positive("tolerances.rel", self.tolerances.rel)?;
        finite_positive("tolerances.pythagorean_factor", self.tolerances.pythagorean_factor)?;
        finite_positive("tolerances.derivative", self.tolerances.derivative)?;
        if !(self.tolerances.cosine > 0.0 && self.tolerances.cosine <= 1.0) {
            return Err(bad("tolerances.cosine", "must lie in (0,1]"));
        }
        Ok(())
    }

    pub fn w_spec(&self) -> &MeasureSpec {
        self.measure_w.as_ref().expect("resolved at parse time")
    }
    pub fn v_spec(&self) -> &MeasureSpec {
        self.measure_v.as_ref().expect("resolved at parse time")
    }
    pub fn field_modes(&self) -> usize {
        self.field.modes.unwrap_or(self.count)
    }
    pub fn spde_modes(&self) -> usize {
        self.spde.modes.unwrap_or(self.count)
    }
}

pub fn parse_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    RunConfig::from_json(&text, base).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Digest of everything that determines a command's artifacts: the resolved
/// measure specs and the numeric parameters, not output or cache locations.
pub fn cache_key(cfg: &RunConfig, command: Command) -> String {
    let mut key = cfg.clone();
    key.command = Some(command);
    key.output.dir = PathBuf::new();
    key.cache_dir = None;
    let value = serde_json::json!({ "version": CACHE_VERSION, "config": key });
    canonical_digest(&value).expect("config serializes")
}
