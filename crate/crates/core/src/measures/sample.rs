use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use super::{Lists, Market, PriorityModel};
use crate::error::{Error, Result};
use crate::finite::{first_tie_pair, FiniteMarket, Student};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    Exact(usize),
    PoissonOf(f64),
}

struct Sampler<'a> {
    market: &'a Market,
    component: WeightedIndex<f64>,
    lengths: Vec<Option<WeightedIndex<f64>>>,
}

impl<'a> Sampler<'a> {
    fn new(market: &'a Market) -> Result<Self> {
        let weights: Vec<f64> = market.components.iter().map(|c| c.mass).collect();
        let component = WeightedIndex::new(&weights).map_err(|e| Error::InvalidMarket(e.to_string()))?;
        let lengths = market
            .components
            .iter()
            .map(|c| match &c.lists {
                Lists::Uniform { pmf, .. } => {
                    WeightedIndex::new(pmf).map(Some).map_err(|e| Error::InvalidMarket(e.to_string()))
                }
                Lists::Ranked(_) => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sampler { market, component, lengths })
    }

    fn list(&self, c: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        match &self.market.components[c].lists {
            Lists::Ranked(l) => l.clone(),
            Lists::Uniform { .. } => {
                let len = self.lengths[c].as_ref().expect("uniform lists carry a length law").sample(rng);
                let n = self.market.n_schools();
                let mut pool: Vec<usize> = (0..n).collect();
                for i in 0..len {
                    let j = rng.random_range(i..n);
                    pool.swap(i, j);
                }
                pool.truncate(len);
                pool
            }
        }
    }
}

fn priorities(model: PriorityModel, len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match model {
        PriorityModel::IndependentUniform => (0..len).map(|_| rng.random::<f64>()).collect(),
        PriorityModel::SingleLottery => {
            let u = rng.random::<f64>();
            vec![u; len]
        }
        PriorityModel::CommonPlusIdiosyncratic(w) => {
            let u = rng.random::<f64>();
            (0..len).map(|_| w * u + (1.0 - w) * rng.random::<f64>()).collect()
        }
    }
}

/// Draws a roster of students iid from the normalized measure. Students
/// whose score ties an earlier student's at some school are re-drawn.
pub fn sample_finite_market(market: &Market, count: CountMode, seed: u64) -> Result<FiniteMarket> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = match count {
        CountMode::Exact(n) => n,
        CountMode::PoissonOf(mass) => {
            if !(mass > 0.0) {
                return Err(Error::InvalidInput(format!("Poisson roster mass must be positive, got {mass}")));
            }
            let d = Poisson::new(mass).map_err(|e| Error::InvalidInput(e.to_string()))?;
            d.sample(&mut rng) as usize
        }
    };
    let sampler = Sampler::new(market)?;
    let mut classes = Vec::with_capacity(n);
    let mut students = Vec::with_capacity(n);
    for _ in 0..n {
        let c = sampler.component.sample(&mut rng);
        let list = sampler.list(c, &mut rng);
        let p = priorities(market.components[c].priority, list.len(), &mut rng);
        classes.push(c);
        students.push(Student::new(list, p)?);
    }
    while let Some((_, s)) = first_tie_pair(market.n_schools(), &students) {
        let c = classes[s];
        let list = students[s].list().to_vec();
        let p = priorities(market.components[c].priority, list.len(), &mut rng);
        students[s] = Student::new(list, p)?;
    }
    FiniteMarket::new(market.schools().to_vec(), market.capacities().to_vec(), students)
}
