//! Student-type measures: structured families, explicit classes, and
//! sampling of finite rosters.

mod conditional;
mod config;
mod sample;

pub use conditional::{conditional_admission_prob, AcceptanceTable, ConditionalAdmission};
pub use config::{build_market, ClassConfig, LengthConfig, MarketConfig, MeasureConfig, PriorityConfig, SchoolsSpec};
pub use sample::{sample_finite_market, CountMode};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vacancy::Capacity;

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthDistribution {
    Fixed(usize),
    /// Poisson lengths; mass above the number of schools is placed on a
    /// complete list.
    PoissonTruncated { mean: f64 },
    /// Probabilities of lengths `1..=len`.
    Explicit(Vec<f64>),
}

impl LengthDistribution {
    /// `P(len = k)` for `k = 0..=n_schools`.
    pub fn pmf(&self, n_schools: usize) -> Result<Vec<f64>> {
        let mut pmf = vec![0.0; n_schools + 1];
        match self {
            LengthDistribution::Fixed(len) => {
                if *len == 0 || *len > n_schools {
                    return Err(Error::InvalidMarket(format!(
                        "list length {len} outside 1..={n_schools}"
                    )));
                }
                pmf[*len] = 1.0;
            }
            LengthDistribution::PoissonTruncated { mean } => {
                if !(*mean > 0.0) || !mean.is_finite() {
                    return Err(Error::InvalidMarket(format!("mean list length must be positive, got {mean}")));
                }
                // term k = e^-mean mean^k / k!, built in log space
                let mut below = 0.0;
                for (k, slot) in pmf.iter_mut().enumerate().take(n_schools) {
                    *slot = (-mean + k as f64 * mean.ln() - ln_factorial(k)).exp();
                    below += *slot;
                }
                debug_assert!(below <= 1.0 + 1e-12);
                pmf[n_schools] = crate::vacancy::poisson_upper_tail(*mean, n_schools as u32);
            }
            LengthDistribution::Explicit(probs) => {
                if probs.is_empty() || probs.len() > n_schools {
                    return Err(Error::InvalidMarket(format!(
                        "explicit length distribution has {} entries for {n_schools} schools",
                        probs.len()
                    )));
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    return Err(Error::InvalidMarket("negative length probability".into()));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidMarket(format!("length probabilities sum to {total}")));
                }
                pmf[1..=probs.len()].copy_from_slice(probs);
            }
        }
        Ok(pmf)
    }
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityModel {
    IndependentUniform,
    SingleLottery,
    /// Priority `w*u + (1-w)*z_h` with `u` shared across schools.
    CommonPlusIdiosyncratic(f64),
}

impl PriorityModel {
    /// Collapses the degenerate common-factor weights onto the two pure models.
    pub(crate) fn normalized(self) -> PriorityModel {
        match self {
            PriorityModel::CommonPlusIdiosyncratic(w) if w <= 0.0 => PriorityModel::IndependentUniform,
            PriorityModel::CommonPlusIdiosyncratic(w) if w >= 1.0 => PriorityModel::SingleLottery,
            m => m,
        }
    }

    fn validate(self) -> Result<()> {
        if let PriorityModel::CommonPlusIdiosyncratic(w) = self {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidMarket(format!("common-factor weight {w} outside [0,1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Class {
    pub weight: f64,
    /// Ranked acceptable schools, most preferred first.
    pub list: Vec<usize>,
    pub priority: PriorityModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeMeasure {
    SymmetricIid { total_mass: f64, list_length: LengthDistribution },
    SymmetricRsd { total_mass: f64, list_length: LengthDistribution },
    CommonValue { total_mass: f64, weight: f64 },
    DiscreteClasses { classes: Vec<Class> },
}

impl TypeMeasure {
    pub fn total_mass(&self) -> f64 {
        match self {
            TypeMeasure::SymmetricIid { total_mass, .. }
            | TypeMeasure::SymmetricRsd { total_mass, .. }
            | TypeMeasure::CommonValue { total_mass, .. } => *total_mass,
            TypeMeasure::DiscreteClasses { classes } => classes.iter().map(|c| c.weight).sum(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, TypeMeasure::DiscreteClasses { .. })
    }
}

/// How a mass of students ranks schools.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Lists {
    /// Uniformly random ranked subset of all schools; `pmf[k] = P(len = k)`
    /// and `survival[k] = P(len >= k)`.
    Uniform { pmf: Vec<f64>, survival: Vec<f64> },
    Ranked(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Component {
    pub mass: f64,
    pub lists: Lists,
    pub priority: PriorityModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    schools: Vec<String>,
    capacities: Vec<Capacity>,
    measure: TypeMeasure,
    pub(crate) components: Vec<Component>,
}

impl Market {
    pub fn new(schools: Vec<String>, capacities: Vec<Capacity>, measure: TypeMeasure) -> Result<Self> {
        let n = schools.len();
        if n == 0 {
            return Err(Error::InvalidMarket("market needs at least one school".into()));
        }
        if capacities.len() != n {
            return Err(Error::InvalidMarket(format!("{} capacities for {n} schools", capacities.len())));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &schools {
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidMarket(format!("duplicate school id {s:?}")));
            }
        }
        let components = components(&measure, n)?;
        let mass: f64 = components.iter().map(|c| c.mass).sum();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidMarket(format!("total mass must be positive, got {mass}")));
        }
        Ok(Market { schools, capacities, measure, components })
    }

    /// Schools named `s0, s1, ...` with a common capacity.
    pub fn uniform(n_schools: usize, capacity: u32, measure: TypeMeasure) -> Result<Self> {
        let cap = Capacity::new(capacity)?;
        let schools = (0..n_schools).map(|i| format!("s{i}")).collect();
        Market::new(schools, vec![cap; n_schools], measure)
    }

    pub fn schools(&self) -> &[String] {
        &self.schools
    }

    pub fn n_schools(&self) -> usize {
        self.schools.len()
    }

    pub fn capacities(&self) -> &[Capacity] {
        &self.capacities
    }

    pub fn capacity(&self, h: usize) -> Capacity {
        self.capacities[h]
    }

    pub fn measure(&self) -> &TypeMeasure {
        &self.measure
    }

    pub fn total_mass(&self) -> f64 {
        self.measure.total_mass()
    }

    pub fn total_seats(&self) -> f64 {
        self.capacities.iter().map(|c| c.as_f64()).sum()
    }

    pub fn school_index(&self, id: &str) -> Option<usize> {
        self.schools.iter().position(|s| s == id)
    }
}

fn check_mass(m: f64) -> Result<()> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidMarket(format!("mass must be positive, got {m}")));
    }
    Ok(())
}

fn uniform_lists(dist: &LengthDistribution, n: usize) -> Result<Lists> {
    let pmf = dist.pmf(n)?;
    let mut survival = vec![0.0; n + 1];
    let mut acc = 0.0;
    for k in (1..=n).rev() {
        acc += pmf[k];
        survival[k] = acc;
    }
    survival[0] = 1.0;
    Ok(Lists::Uniform { pmf, survival })
}

fn components(measure: &TypeMeasure, n: usize) -> Result<Vec<Component>> {
    Ok(match measure {
        TypeMeasure::SymmetricIid { total_mass, list_length } => {
            check_mass(*total_mass)?;
            vec![Component {
                mass: *total_mass,
                lists: uniform_lists(list_length, n)?,
                priority: PriorityModel::IndependentUniform,
            }]
        }
        TypeMeasure::SymmetricRsd { total_mass, list_length } => {
            check_mass(*total_mass)?;
            vec![Component {
                mass: *total_mass,
                lists: uniform_lists(list_length, n)?,
                priority: PriorityModel::SingleLottery,
            }]
        }
        TypeMeasure::CommonValue { total_mass, weight } => {
            check_mass(*total_mass)?;
            let priority = PriorityModel::CommonPlusIdiosyncratic(*weight);
            priority.validate()?;
            vec![Component {
                mass: *total_mass,
                lists: uniform_lists(&LengthDistribution::Fixed(n), n)?,
                priority,
            }]
        }
        TypeMeasure::DiscreteClasses { classes } => {
            if classes.is_empty() {
                return Err(Error::InvalidMarket("empty class list".into()));
            }
            let mut out = Vec::with_capacity(classes.len());
            for (i, c) in classes.iter().enumerate() {
                check_mass(c.weight)?;
                c.priority.validate()?;
                let mut seen = vec![false; n];
                for &h in &c.list {
                    if h >= n {
                        return Err(Error::InvalidMarket(format!("class {i} lists unknown school {h}")));
                    }
                    if std::mem::replace(&mut seen[h], true) {
                        return Err(Error::InvalidMarket(format!("class {i} lists school {h} twice")));
                    }
                }
                out.push(Component { mass: c.weight, lists: Lists::Ranked(c.list.clone()), priority: c.priority });
            }
            out
        }
    })
}
