//! Experiment file: one TOML document per figure or table.

use std::path::{Path, PathBuf};

use continuum_da::measures::{build_market, Market, MarketConfig, MeasureConfig, SchoolsSpec};
use continuum_da::solver::{PriorityGrid, SolverOptions, Start};
use continuum_da::VacancyKind;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formulas: Option<FormulasConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_vacancy")]
    pub vacancy: VacancyKind,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_start")]
    pub start: Start,
    #[serde(default = "default_panels")]
    pub common_factor_panels: usize,
    /// Overrides the top-level sweep for model runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

fn default_vacancy() -> VacancyKind {
    VacancyKind::Poisson
}
fn default_grid_points() -> usize {
    1001
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    10_000
}
fn default_start() -> Start {
    Start::Top
}
fn default_panels() -> usize {
    256
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            vacancy: default_vacancy(),
            grid_points: default_grid_points(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            start: default_start(),
            common_factor_panels: default_panels(),
            sweep: None,
        }
    }
}

impl SolverConfig {
    pub fn options(&self, record_trace: bool) -> Result<SolverOptions, CliError> {
        let grid = PriorityGrid::uniform(self.grid_points).map_err(|e| CliError::config("solver.grid_points", e))?;
        let opts = SolverOptions {
            grid,
            tol: self.tol,
            max_iter: self.max_iter,
            common_panels: self.common_factor_panels,
            record_trace,
        };
        opts.validate().map_err(|e| CliError::config("solver", e))?;
        Ok(opts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountKind {
    /// Exactly the market mass in students; the mass must be a whole number.
    Exact,
    /// A Poisson number of students with mean equal to the market mass.
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_count")]
    pub count: CountKind,
    #[serde(default = "default_true")]
    pub school_proposing: bool,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

fn default_count() -> CountKind {
    CountKind::Exact
}
fn default_true() -> bool {
    true
}
fn default_quantiles() -> Vec<f64> {
    vec![0.05, 0.5, 0.95]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Seats at every school.
    Capacity,
    /// Number of schools.
    Schools,
    /// Student mass, and the simulated head count.
    Students,
    MassPerSeat,
    /// Common-factor weight of a common-value market.
    Weight,
    /// Rejection probability of the match-count formulas.
    Q,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Capacity => "capacity",
            Axis::Schools => "schools",
            Axis::Students => "students",
            Axis::MassPerSeat => "mass_per_seat",
            Axis::Weight => "weight",
            Axis::Q => "q",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: Axis,
    pub values: Vec<f64>,
}

/// Match-count formulas for `workers` students and `schools` single-seat
/// schools, each acceptable with probability `1 - q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulasConfig {
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schools: Option<usize>,
    pub q: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

/// The raw file is kept so its hash can be stamped on every output.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub raw: String,
    pub stem: String,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: ExperimentConfig =
        toml::from_str(&raw).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment").to_string();
    Ok(Loaded { config, raw, stem })
}

/// A sweep point: the value on the axis, or `None` for an unswept run.
pub type Point = Option<f64>;

pub fn points(sweep: Option<&Sweep>) -> Result<Vec<Point>, CliError> {
    match sweep {
        None => Ok(vec![None]),
        Some(s) => {
            if let Some(v) = s.values.iter().find(|v| !v.is_finite()) {
                return Err(CliError::Config(format!("sweep.values: {v} is not finite")));
            }
            Ok(s.values.iter().map(|&v| Some(v)).collect())
        }
    }
}

pub fn whole(axis: Axis, v: f64) -> Result<usize, CliError> {
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(CliError::Config(format!("sweep.values: {v} is not a valid {} count", axis.name())));
    }
    Ok(v as usize)
}

fn set_mass(measure: &mut MeasureConfig, total: Option<f64>, per_seat: Option<f64>, axis: Axis) -> Result<(), CliError> {
    match measure {
        MeasureConfig::SymmetricIid { total_mass, mass_per_seat, .. }
        | MeasureConfig::SymmetricRsd { total_mass, mass_per_seat, .. }
        | MeasureConfig::CommonValue { total_mass, mass_per_seat, .. } => {
            *total_mass = total;
            *mass_per_seat = per_seat;
            Ok(())
        }
        MeasureConfig::DiscreteClasses { .. } => {
            Err(CliError::Config(format!("sweep.axis: {} cannot be swept on a discrete_classes market", axis.name())))
        }
    }
}

/// The market description at one sweep point.
pub fn market_at(base: &MarketConfig, axis: Option<Axis>, point: Point) -> Result<MarketConfig, CliError> {
    let mut cfg = base.clone();
    let (Some(axis), Some(v)) = (axis, point) else { return Ok(cfg) };
    match axis {
        Axis::Capacity => {
            cfg.capacity = Some(whole(axis, v)? as u32);
            cfg.capacities = None;
        }
        Axis::Schools => cfg.schools = SchoolsSpec::Count(whole(axis, v)?),
        Axis::Students => set_mass(&mut cfg.measure, Some(v), None, axis)?,
        Axis::MassPerSeat => set_mass(&mut cfg.measure, None, Some(v), axis)?,
        Axis::Weight => match &mut cfg.measure {
            MeasureConfig::CommonValue { weight, .. } => *weight = v,
            _ => return Err(CliError::Config("sweep.axis: weight needs a common_value market".into())),
        },
        Axis::Q => return Err(CliError::Config("sweep.axis: q applies only to [formulas]".into())),
    }
    Ok(cfg)
}

pub fn build(cfg: &MarketConfig) -> Result<Market, CliError> {
    build_market(cfg).map_err(|e| CliError::config("market", e))
}
