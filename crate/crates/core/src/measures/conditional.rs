use serde::{Deserialize, Serialize};

use super::{Market, PriorityModel};
use crate::error::{invalid, Result};
use crate::solver::{AdmissionsFunction, PriorityGrid};

/// Per-school admission probabilities after integrating out everything but
/// the common priority factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceTable {
    /// Independent priorities: `q_h = ∫ A_h(p) dp`.
    PerSchool(Vec<f64>),
    /// `q[h][i]` is the admission probability at school `h` given factor `u[i]`.
    ByCommonFactor { u: Vec<f64>, q: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalAdmission {
    pub model: PriorityModel,
    pub table: AcceptanceTable,
}

/// One table per distinct priority model present in the market, in order of
/// first appearance. Factor tables are evaluated at the points of `u_grid`.
pub fn conditional_admission_prob(
    market: &Market,
    admissions: &AdmissionsFunction,
    u_grid: &PriorityGrid,
) -> Result<Vec<ConditionalAdmission>> {
    if admissions.n_schools() != market.n_schools() {
        return Err(invalid("admissions functions must cover every school of the market"));
    }
    let mut models: Vec<PriorityModel> = Vec::new();
    for c in &market.components {
        let m = c.priority.normalized();
        if !models.contains(&m) {
            models.push(m);
        }
    }
    let n = market.n_schools();
    Ok(models
        .into_iter()
        .map(|model| {
            let table = match model {
                PriorityModel::IndependentUniform => {
                    AcceptanceTable::PerSchool((0..n).map(|h| admissions.curve(h).mean()).collect())
                }
                PriorityModel::SingleLottery | PriorityModel::CommonPlusIdiosyncratic(_) => {
                    let w = match model {
                        PriorityModel::CommonPlusIdiosyncratic(w) => w,
                        _ => 1.0,
                    };
                    let u = u_grid.points().to_vec();
                    let q = (0..n)
                        .map(|h| u.iter().map(|&x| admissions.curve(h).given_common_factor(w, x)).collect())
                        .collect();
                    AcceptanceTable::ByCommonFactor { u, q }
                }
            };
            ConditionalAdmission { model, table }
        })
        .collect())
}
