//! One pass of the matching and interest maps, and the vacancy update.

use std::collections::HashMap;

use super::curve::{AdmissionCurve, InterestCurve};
use super::kernel::{Accum, Kernel};
use super::{AdmissionsFunction, InterestFunction, SolverOptions};
use crate::error::{Error, Result};
use crate::measures::{Market, PriorityModel};
use crate::numeric::gauss6;
use crate::vacancy::VacancyKind;

pub(crate) struct Evaluation {
    pub interest: InterestFunction,
    pub matched: Vec<f64>,
    pub rank: Vec<f64>,
    pub unmatched: f64,
    pub class: Vec<Vec<f64>>,
}

struct Blocks {
    iid: Vec<usize>,
    lottery: Vec<usize>,
    common: Vec<(f64, Vec<usize>)>,
}

fn blocks(market: &Market) -> Blocks {
    let mut b = Blocks { iid: Vec::new(), lottery: Vec::new(), common: Vec::new() };
    for (ci, c) in market.components.iter().enumerate() {
        match c.priority.normalized() {
            PriorityModel::IndependentUniform => b.iid.push(ci),
            PriorityModel::SingleLottery => b.lottery.push(ci),
            PriorityModel::CommonPlusIdiosyncratic(w) => match b.common.iter_mut().find(|(v, _)| *v == w) {
                Some((_, list)) => list.push(ci),
                None => b.common.push((w, vec![ci])),
            },
        }
    }
    b
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.retain(|x| (0.0..=1.0).contains(x));
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Interest densities at knots (both one-sided limits) and at the Gauss
/// nodes of every knot interval, per interest group.
struct Densities {
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    nodes: Vec<Vec<f64>>,
}

impl Densities {
    fn new(n_groups: usize, n_knots: usize) -> Self {
        let per_node = gauss6().nodes.len();
        Densities {
            left: vec![vec![0.0; n_knots]; n_groups],
            right: vec![vec![0.0; n_knots]; n_groups],
            nodes: vec![vec![0.0; (n_knots - 1) * per_node]; n_groups],
        }
    }
}

pub(crate) fn evaluate(market: &Market, adm: &AdmissionsFunction, opts: &SolverOptions) -> Result<Evaluation> {
    let n = market.n_schools();
    if adm.n_schools() != n {
        return Err(Error::InvalidInput(format!(
            "admissions cover {} schools, market has {n}",
            adm.n_schools()
        )));
    }
    let curves = adm.curves();
    let (ig_of, n_ig): (Vec<usize>, usize) = if market.measure().is_symmetric() {
        (adm.group_of().to_vec(), curves.len())
    } else {
        ((0..n).collect(), n)
    };
    let blocks = blocks(market);
    let jumps: Vec<f64> = curves.iter().filter_map(AdmissionCurve::jump).collect();

    let mut extra = jumps.clone();
    for (w, _) in &blocks.common {
        let v = 1.0 - w;
        extra.extend([*w, v]);
        extra.extend(jumps.iter().flat_map(|p| [p - v, p + v]));
    }
    let knots = sorted_unique(opts.grid.points().iter().copied().chain(extra).collect());
    let rule = gauss6();
    let nn = rule.nodes.len();
    let mut dens = Densities::new(n_ig, knots.len());
    let mut acc = Accum::new(n_ig, &market.components);
    let mut a = vec![0.0; curves.len()];
    let mut g = vec![0.0; n_ig];

    if !blocks.iid.is_empty() {
        let mut k = Kernel::new(market, blocks.iid.clone(), adm.group_of(), curves.len(), &ig_of, n_ig);
        for (ai, c) in a.iter_mut().zip(curves) {
            *ai = c.mean();
        }
        g.fill(0.0);
        k.eval(&a, Some(1.0), &mut g, &mut acc);
        for ig in 0..n_ig {
            dens.left[ig].iter_mut().for_each(|d| *d += g[ig]);
            dens.right[ig].iter_mut().for_each(|d| *d += g[ig]);
            dens.nodes[ig].iter_mut().for_each(|d| *d += g[ig]);
        }
    }

    if !blocks.lottery.is_empty() {
        let mut k = Kernel::new(market, blocks.lottery.clone(), adm.group_of(), curves.len(), &ig_of, n_ig);
        for (i, seg) in knots.windows(2).enumerate() {
            let h = seg[1] - seg[0];
            for (j, (&t, &wt)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                let x = seg[0] + h * t;
                for (ai, c) in a.iter_mut().zip(curves) {
                    *ai = c.value(x);
                }
                g.fill(0.0);
                k.eval(&a, Some(h * wt), &mut g, &mut acc);
                for ig in 0..n_ig {
                    dens.nodes[ig][i * nn + j] += g[ig];
                }
            }
        }
        for (i, &x) in knots.iter().enumerate() {
            for (ai, c) in a.iter_mut().zip(curves) {
                *ai = c.value_left(x);
            }
            g.fill(0.0);
            k.eval(&a, None, &mut g, &mut acc);
            for ig in 0..n_ig {
                dens.left[ig][i] += g[ig];
            }
            if jumps.contains(&x) {
                for (ai, c) in a.iter_mut().zip(curves) {
                    *ai = c.value_right(x);
                }
                g.fill(0.0);
                k.eval(&a, None, &mut g, &mut acc);
            }
            for ig in 0..n_ig {
                dens.right[ig][i] += g[ig];
            }
        }
    }

    for (w, comps) in &blocks.common {
        let mut k = Kernel::new(market, comps.clone(), adm.group_of(), curves.len(), &ig_of, n_ig);
        common_block(*w, &mut k, curves, &jumps, &knots, opts.common_panels, &mut dens, &mut acc, n_ig);
    }

    let interest_curves = (0..n_ig)
        .map(|ig| {
            let mut values = vec![0.0; knots.len()];
            for i in (0..knots.len() - 1).rev() {
                let h = knots[i + 1] - knots[i];
                let seg: f64 = rule.weights.iter().zip(&dens.nodes[ig][i * nn..(i + 1) * nn]).map(|(w, d)| w * d).sum();
                values[i] = values[i + 1] + h * seg;
            }
            let left = dens.left[ig].iter().map(|d| -d).collect();
            let right = dens.right[ig].iter().map(|d| -d).collect();
            InterestCurve::from_parts(knots.clone(), values, left, right)
        })
        .collect();

    Ok(Evaluation {
        interest: InterestFunction::from_parts(ig_of.clone(), interest_curves, acc.unmatched),
        matched: ig_of.iter().map(|&ig| acc.matched[ig]).collect(),
        rank: ig_of.iter().map(|&ig| acc.rank[ig]).collect(),
        unmatched: acc.unmatched,
        class: acc.class,
    })
}

/// Priorities `w*u + (1-w)*z`: integrate the kernel over `u` on panels that
/// resolve the kinks of the conditional admission probabilities, then spread
/// each `u` slice uniformly over its priority window.
#[allow(clippy::too_many_arguments)]
fn common_block(
    w: f64,
    k: &mut Kernel<'_>,
    curves: &[AdmissionCurve],
    jumps: &[f64],
    knots: &[f64],
    panels: usize,
    dens: &mut Densities,
    acc: &mut Accum,
    n_ig: usize,
) {
    let v = 1.0 - w;
    let rule = gauss6();
    let mut uk: Vec<f64> = (0..=panels).map(|i| i as f64 / panels as f64).collect();
    uk.extend(jumps.iter().flat_map(|p| [p / w, (p - v) / w]));
    for c in curves {
        uk.extend(c.breakpoints().iter().flat_map(|p| [p / w, (p - v) / w]));
    }
    let uk = sorted_unique(uk);

    let mut a = vec![0.0; curves.len()];
    let mut g = vec![0.0; n_ig];
    let fill_q = |u: f64, a: &mut [f64]| {
        for (ai, c) in a.iter_mut().zip(curves) {
            *ai = c.given_common_factor(w, u);
        }
    };
    let nn = rule.nodes.len();
    // kernel values at the Gauss nodes of every u panel, and their running integral
    let mut at_nodes = vec![vec![0.0; (uk.len() - 1) * nn]; n_ig];
    let mut cum = vec![vec![0.0; uk.len()]; n_ig];
    let mut seg = vec![0.0; n_ig];
    for (i, s) in uk.windows(2).enumerate() {
        let h = s[1] - s[0];
        seg.fill(0.0);
        for (j, (&t, &wt)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            fill_q(s[0] + h * t, &mut a);
            g.fill(0.0);
            k.eval(&a, Some(h * wt), &mut g, acc);
            for ig in 0..n_ig {
                at_nodes[ig][i * nn + j] = g[ig];
                seg[ig] += h * wt * g[ig];
            }
        }
        for ig in 0..n_ig {
            cum[ig][i + 1] = cum[ig][i] + seg[ig];
        }
    }
    // integral of the kernel over u in [0, x], exact for the per-panel
    // interpolating polynomial
    let mut pw = vec![0.0; nn];
    let mut big = |ig: usize, x: f64| {
        let i = uk.partition_point(|&b| b <= x).clamp(1, uk.len() - 1) - 1;
        let h = uk[i + 1] - uk[i];
        rule.partial_weights(((x - uk[i]) / h).clamp(0.0, 1.0), &mut pw);
        let vals = &at_nodes[ig][i * nn..(i + 1) * nn];
        cum[ig][i] + h * pw.iter().zip(vals).map(|(c, v)| c * v).sum::<f64>()
    };
    let mut density = |ig: usize, y: f64| {
        let hi = (y / w).min(1.0);
        let lo = ((y - v) / w).max(0.0);
        if hi <= lo {
            0.0
        } else {
            (big(ig, hi) - big(ig, lo)) / v
        }
    };
    for ig in 0..n_ig {
        for (i, &y) in knots.iter().enumerate() {
            let d = density(ig, y);
            dens.left[ig][i] += d;
            dens.right[ig][i] += d;
        }
        for (i, s) in knots.windows(2).enumerate() {
            let h = s[1] - s[0];
            for (j, &t) in rule.nodes.iter().enumerate() {
                dens.nodes[ig][i * nn + j] += density(ig, s[0] + h * t);
            }
        }
    }
}

/// Applies the vacancy function pointwise. Schools sharing an interest curve
/// and capacity share the resulting admissions curve.
pub(crate) fn update(market: &Market, interest: &InterestFunction, kind: VacancyKind) -> AdmissionsFunction {
    let mut index: HashMap<(usize, u32), usize> = HashMap::new();
    let mut group_of = Vec::with_capacity(market.n_schools());
    let mut curves = Vec::new();
    for h in 0..market.n_schools() {
        let ig = interest.group_of()[h];
        let cap = market.capacity(h);
        let g = *index.entry((ig, cap.get())).or_insert_with(|| {
            let ic = &interest.curves()[ig];
            curves.push(match kind {
                VacancyKind::Deterministic => AdmissionCurve::Step { cutoff: ic.crossing(cap.as_f64()) },
                VacancyKind::Poisson => AdmissionCurve::poisson(ic.clone(), cap),
            });
            curves.len() - 1
        });
        group_of.push(g);
    }
    AdmissionsFunction::from_parts(group_of, curves)
}

/// Sup-norm change between two admissions functions. For two indicators
/// this is the cutoff shift, weighted by the interest density at the new
/// cutoff when that exceeds one, so that it bounds the mass of students
/// whose admission flips.
pub(crate) fn change(old: &AdmissionsFunction, new: &AdmissionsFunction, interest: &InterestFunction, grid: &[f64]) -> f64 {
    let mut seen = std::collections::HashSet::new();
    let mut worst = 0.0f64;
    for h in 0..old.n_schools() {
        let key = (old.group_of()[h], new.group_of()[h], interest.group_of()[h]);
        if !seen.insert(key) {
            continue;
        }
        let (a, b) = (&old.curves()[key.0], &new.curves()[key.1]);
        let d = match (a.as_cutoff(), b.as_cutoff()) {
            (Some(p), Some(q)) => (p - q).abs() * interest.curve(h).slope(q).abs().max(1.0),
            _ => grid.iter().map(|&x| (a.value(x) - b.value(x)).abs()).fold(0.0, f64::max),
        };
        worst = worst.max(d);
    }
    worst
}
