use super::{AdmissionCurve, AdmissionsFunction, SolverOptions};
use crate::error::{invalid, Result};
use crate::measures::{sample_finite_market, CountMode, Lists, Market, PriorityModel};
use crate::numeric::gauss6;

/// Independent priorities are integrated exactly up to this list length;
/// longer lists fall back to sampling.
const MAX_TENSOR_DIM: usize = 3;
const TENSOR_PANELS: usize = 48;
const MC_SAMPLES: usize = 200_000;
const MC_SEED: u64 = 0x5eed_d157;

/// Ranked list shared by a mass of students, as seen by both functions.
struct Piece {
    mass: f64,
    list: Vec<usize>,
    model: PriorityModel,
}

fn all_same(a: &AdmissionsFunction) -> bool {
    a.curves().len() == 1
}

/// Splits the market into ranked pieces when every piece can be integrated
/// exactly; `None` means sampling is required.
fn exact_pieces(market: &Market, a: &AdmissionsFunction, b: &AdmissionsFunction) -> Option<Vec<Piece>> {
    let mut out = Vec::new();
    for c in &market.components {
        let model = c.priority.normalized();
        let ok_len = |len: usize| match model {
            PriorityModel::SingleLottery => true,
            PriorityModel::IndependentUniform => len <= MAX_TENSOR_DIM,
            PriorityModel::CommonPlusIdiosyncratic(_) => false,
        };
        match &c.lists {
            Lists::Ranked(list) => {
                if !ok_len(list.len()) {
                    return None;
                }
                out.push(Piece { mass: c.mass, list: list.clone(), model });
            }
            Lists::Uniform { pmf, .. } => {
                // with one curve everywhere only the list length matters
                if !(all_same(a) && all_same(b)) {
                    return None;
                }
                for (len, &p) in pmf.iter().enumerate() {
                    if p > 0.0 {
                        if !ok_len(len) {
                            return None;
                        }
                        out.push(Piece { mass: c.mass * p, list: (0..len).collect(), model });
                    }
                }
            }
        }
    }
    Some(out)
}

fn panel_nodes(breaks: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut breaks: Vec<f64> = breaks.into_iter().filter(|x| (0.0..=1.0).contains(x)).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let rule = gauss6();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for s in breaks.windows(2) {
        let h = s[1] - s[0];
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            nodes.push(s[0] + h * t);
            weights.push(h * w);
        }
    }
    (nodes, weights)
}

/// `sum_k |M^a_k - M^b_k|` plus the outside option for one priority vector,
/// given per-position admission probabilities.
fn type_gap(a: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut pa, mut pb, mut gap) = (1.0, 1.0, 0.0);
    for (x, y) in a {
        gap += (pa * x - pb * y).abs();
        pa *= 1.0 - x;
        pb *= 1.0 - y;
    }
    gap + (pa - pb).abs()
}

fn tensor(dims: &[(Vec<f64>, Vec<f64>)], w: &[f64], pa: f64, pb: f64) -> f64 {
    let Some(((xa, xb), rest)) = dims.split_first() else {
        return (pa - pb).abs();
    };
    let mut s = 0.0;
    for ((&x, &y), &wi) in xa.iter().zip(xb).zip(w) {
        s += wi * ((pa * x - pb * y).abs() + tensor(rest, w, pa * (1.0 - x), pb * (1.0 - y)));
    }
    s
}

fn jumps_of(list: &[usize], a: &AdmissionsFunction, b: &AdmissionsFunction) -> Vec<f64> {
    list.iter().flat_map(|&h| [a.curve(h).jump(), b.curve(h).jump()]).flatten().collect()
}

/// Half the total variation between the matchings induced by `a` and `b`,
/// summed over schools and the outside option: the mass of students whose
/// assignment changes.
pub fn matching_distance(
    market: &Market,
    a: &AdmissionsFunction,
    b: &AdmissionsFunction,
    opts: &SolverOptions,
) -> Result<f64> {
    let n = market.n_schools();
    if a.n_schools() != n || b.n_schools() != n {
        return Err(invalid("admissions functions must cover every school of the market"));
    }
    let Some(pieces) = exact_pieces(market, a, b) else {
        return sampled(market, a, b);
    };
    let mut total = 0.0;
    for piece in pieces {
        let jumps = jumps_of(&piece.list, a, b);
        let gap = match piece.model {
            PriorityModel::SingleLottery => {
                let (nodes, weights) = panel_nodes(opts.grid.points().iter().copied().chain(jumps).collect());
                nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&u, &w)| {
                        w * type_gap(piece.list.iter().map(|&h| (a.value(h, u), b.value(h, u))))
                    })
                    .sum()
            }
            _ => {
                let mut breaks: Vec<f64> = (0..=TENSOR_PANELS).map(|i| i as f64 / TENSOR_PANELS as f64).collect();
                breaks.extend(jumps);
                let (nodes, weights) = panel_nodes(breaks);
                let dims: Vec<(Vec<f64>, Vec<f64>)> = piece
                    .list
                    .iter()
                    .map(|&h| tabulate_pair(a.curve(h), b.curve(h), &nodes))
                    .collect();
                tensor(&dims, &weights, 1.0, 1.0)
            }
        };
        total += piece.mass * gap;
    }
    Ok(0.5 * total)
}

fn tabulate_pair(a: &AdmissionCurve, b: &AdmissionCurve, nodes: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (nodes.iter().map(|&p| a.value(p)).collect(), nodes.iter().map(|&p| b.value(p)).collect())
}

fn sampled(market: &Market, a: &AdmissionsFunction, b: &AdmissionsFunction) -> Result<f64> {
    let roster = sample_finite_market(market, CountMode::Exact(MC_SAMPLES), MC_SEED)?;
    let sum: f64 = roster
        .students()
        .iter()
        .map(|s| {
            type_gap(s.list().iter().zip(s.priorities()).map(|(&h, &p)| (a.value(h, p), b.value(h, p))))
        })
        .sum();
    Ok(0.5 * market.total_mass() * sum / MC_SAMPLES as f64)
}
