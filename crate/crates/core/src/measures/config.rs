//! Declarative market description, deserialized from the experiment file.

use serde::{Deserialize, Serialize};

use super::{Class, LengthDistribution, Market, PriorityModel, TypeMeasure};
use crate::error::{Error, Result};
use crate::vacancy::Capacity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchoolsSpec {
    Count(usize),
    Names(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub schools: SchoolsSpec,
    /// Seats at every school; alternative to `capacities`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacities: Option<Vec<u32>>,
    pub measure: MeasureConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    SymmetricIid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_mass: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass_per_seat: Option<f64>,
        list_length: LengthConfig,
    },
    SymmetricRsd {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_mass: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass_per_seat: Option<f64>,
        list_length: LengthConfig,
    },
    CommonValue {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_mass: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass_per_seat: Option<f64>,
        weight: f64,
    },
    DiscreteClasses { classes: Vec<ClassConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LengthConfig {
    Fixed { length: usize },
    /// Complete lists over all schools.
    Complete,
    PoissonTruncated { mean: f64 },
    Explicit { probabilities: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    pub weight: f64,
    pub list: Vec<String>,
    #[serde(default = "default_priority")]
    pub priority: PriorityConfig,
}

fn default_priority() -> PriorityConfig {
    PriorityConfig::IndependentUniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorityConfig {
    IndependentUniform,
    SingleLottery,
    CommonPlusIdiosyncratic { weight: f64 },
}

impl From<&PriorityConfig> for PriorityModel {
    fn from(p: &PriorityConfig) -> Self {
        match p {
            PriorityConfig::IndependentUniform => PriorityModel::IndependentUniform,
            PriorityConfig::SingleLottery => PriorityModel::SingleLottery,
            PriorityConfig::CommonPlusIdiosyncratic { weight } => PriorityModel::CommonPlusIdiosyncratic(*weight),
        }
    }
}

fn resolve_mass(total: Option<f64>, per_seat: Option<f64>, seats: f64) -> Result<f64> {
    match (total, per_seat) {
        (Some(m), None) => Ok(m),
        (None, Some(r)) => Ok(r * seats),
        (Some(_), Some(_)) => Err(Error::InvalidMarket("give either total_mass or mass_per_seat, not both".into())),
        (None, None) => Err(Error::InvalidMarket("missing total_mass".into())),
    }
}

impl LengthConfig {
    fn resolve(&self, n: usize) -> LengthDistribution {
        match self {
            LengthConfig::Fixed { length } => LengthDistribution::Fixed(*length),
            LengthConfig::Complete => LengthDistribution::Fixed(n),
            LengthConfig::PoissonTruncated { mean } => LengthDistribution::PoissonTruncated { mean: *mean },
            LengthConfig::Explicit { probabilities } => LengthDistribution::Explicit(probabilities.clone()),
        }
    }
}

/// Validates a declarative description and builds the market.
pub fn build_market(config: &MarketConfig) -> Result<Market> {
    let names: Vec<String> = match &config.schools {
        SchoolsSpec::Count(n) => (0..*n).map(|i| format!("s{i}")).collect(),
        SchoolsSpec::Names(v) => v.clone(),
    };
    let n = names.len();
    let caps: Vec<u32> = match (&config.capacity, &config.capacities) {
        (Some(c), None) => vec![*c; n],
        (None, Some(v)) => v.clone(),
        (None, None) => return Err(Error::InvalidMarket("missing capacity".into())),
        (Some(_), Some(_)) => {
            return Err(Error::InvalidMarket("give either capacity or capacities, not both".into()))
        }
    };
    let caps = caps.into_iter().map(Capacity::new).collect::<Result<Vec<_>>>()?;
    let seats: f64 = caps.iter().map(|c| c.as_f64()).sum();
    let measure = match &config.measure {
        MeasureConfig::SymmetricIid { total_mass, mass_per_seat, list_length } => TypeMeasure::SymmetricIid {
            total_mass: resolve_mass(*total_mass, *mass_per_seat, seats)?,
            list_length: list_length.resolve(n),
        },
        MeasureConfig::SymmetricRsd { total_mass, mass_per_seat, list_length } => TypeMeasure::SymmetricRsd {
            total_mass: resolve_mass(*total_mass, *mass_per_seat, seats)?,
            list_length: list_length.resolve(n),
        },
        MeasureConfig::CommonValue { total_mass, mass_per_seat, weight } => TypeMeasure::CommonValue {
            total_mass: resolve_mass(*total_mass, *mass_per_seat, seats)?,
            weight: *weight,
        },
        MeasureConfig::DiscreteClasses { classes } => {
            let mut out = Vec::with_capacity(classes.len());
            for c in classes {
                let list = c
                    .list
                    .iter()
                    .map(|id| {
                        names
                            .iter()
                            .position(|s| s == id)
                            .ok_or_else(|| Error::InvalidMarket(format!("unknown school id {id:?} in class list")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.push(Class { weight: c.weight, list, priority: (&c.priority).into() });
            }
            TypeMeasure::DiscreteClasses { classes: out }
        }
    };
    Market::new(names, caps, measure)
}
