//! Per-school interest weights given conditional admission probabilities.
//!
//! For one value of the common priority factor, every listed school admits
//! independently with probability `a_h`. A student is interested in `h` when
//! rejected everywhere above `h` on their list. The kernel returns, per
//! interest group, the mass so interested (`g`) and its rank-weighted
//! counterpart, and accumulates matched and unmatched mass when given a
//! quadrature weight.

use crate::measures::{Component, Lists, Market};

pub(crate) struct Accum {
    /// Per interest group, mass matched at one representative school.
    pub matched: Vec<f64>,
    pub rank: Vec<f64>,
    pub unmatched: f64,
    /// Per component, assignment probability by list position (ranked lists only).
    pub class: Vec<Vec<f64>>,
}

impl Accum {
    pub fn new(n_groups: usize, components: &[Component]) -> Self {
        Accum {
            matched: vec![0.0; n_groups],
            rank: vec![0.0; n_groups],
            unmatched: 0.0,
            class: components
                .iter()
                .map(|c| match &c.lists {
                    Lists::Ranked(l) => vec![0.0; l.len()],
                    Lists::Uniform { .. } => Vec::new(),
                })
                .collect(),
        }
    }
}

/// Normalized elementary symmetric means `E_j = e_j(x) / C(N, j)` over a
/// multiset given as `(value, count)` pairs, for `j = 0..=max_j`.
fn subset_means(items: impl Iterator<Item = (f64, usize)>, max_j: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    let mut n = 0usize;
    for (x, count) in items {
        for _ in 0..count {
            n += 1;
            let nf = n as f64;
            if out.len() <= max_j && out.len() <= n {
                out.push(0.0);
            }
            for j in (1..out.len()).rev() {
                let jf = j as f64;
                out[j] = ((nf - jf) / nf) * out[j] + (jf / nf) * x * out[j - 1];
            }
        }
    }
    out.resize(max_j + 1, 0.0);
}

pub(crate) struct Kernel<'a> {
    market: &'a Market,
    components: Vec<usize>,
    adm_group_of: &'a [usize],
    ig_of: &'a [usize],
    /// Admission-group sizes, used by uniform lists.
    group_size: Vec<usize>,
    scratch: Vec<f64>,
    r: Vec<f64>,
}

impl<'a> Kernel<'a> {
    pub fn new(
        market: &'a Market,
        components: Vec<usize>,
        adm_group_of: &'a [usize],
        n_adm_groups: usize,
        ig_of: &'a [usize],
        n_igroups: usize,
    ) -> Self {
        let mut group_size = vec![0; n_adm_groups];
        for &g in adm_group_of {
            group_size[g] += 1;
        }
        Kernel { market, components, adm_group_of, ig_of, group_size, scratch: Vec::new(), r: vec![0.0; n_igroups] }
    }

    /// Adds interest weights to `g` for admission probabilities `a` (one per
    /// admission group). With `weight`, also accumulates outcome totals.
    pub fn eval(&mut self, a: &[f64], weight: Option<f64>, g: &mut [f64], acc: &mut Accum) {
        self.r.iter_mut().for_each(|v| *v = 0.0);
        let n_schools = self.market.n_schools();
        for idx in 0..self.components.len() {
            let ci = self.components[idx];
            let comp = &self.market.components[ci];
            match &comp.lists {
                Lists::Ranked(list) => {
                    let mut prod = 1.0;
                    for (k, &h) in list.iter().enumerate() {
                        let ah = a[self.adm_group_of[h]];
                        let ig = self.ig_of[h];
                        let gk = comp.mass * prod;
                        g[ig] += gk;
                        if let Some(w) = weight {
                            acc.matched[ig] += w * gk * ah;
                            acc.rank[ig] += w * (k + 1) as f64 * gk * ah;
                            acc.class[ci][k] += w * prod * ah;
                        }
                        prod *= 1.0 - ah;
                    }
                    if let Some(w) = weight {
                        acc.unmatched += w * comp.mass * prod;
                    }
                }
                Lists::Uniform { pmf, survival } => {
                    // uniform lists only occur in symmetric markets, where
                    // interest groups coincide with admission groups
                    let kmax = survival.iter().rposition(|&s| s > 0.0).unwrap_or(0);
                    let scale = comp.mass / n_schools as f64;
                    if self.group_size.len() == 1 {
                        let x = 1.0 - a[0];
                        let (mut gs, mut rs, mut pow) = (0.0, 0.0, 1.0);
                        let mut unmatched = pmf[0];
                        for k in 1..=kmax {
                            gs += survival[k] * pow;
                            rs += k as f64 * survival[k] * pow;
                            pow *= x;
                            unmatched += pmf[k] * pow;
                        }
                        g[0] += scale * gs;
                        if let Some(w) = weight {
                            acc.matched[0] += w * scale * gs * a[0];
                            acc.rank[0] += w * scale * rs * a[0];
                            acc.unmatched += w * comp.mass * unmatched;
                        }
                        continue;
                    }
                    for grp in 0..self.group_size.len() {
                        let items = self.group_size.iter().enumerate().map(|(j, &n)| {
                            (1.0 - a[j], if j == grp { n - 1 } else { n })
                        });
                        subset_means(items, kmax.saturating_sub(1), &mut self.scratch);
                        let (mut gs, mut rs) = (0.0, 0.0);
                        for k in 1..=kmax {
                            gs += survival[k] * self.scratch[k - 1];
                            rs += k as f64 * survival[k] * self.scratch[k - 1];
                        }
                        g[grp] += scale * gs;
                        if let Some(w) = weight {
                            acc.matched[grp] += w * scale * gs * a[grp];
                            acc.rank[grp] += w * scale * rs * a[grp];
                        }
                    }
                    if let Some(w) = weight {
                        let items = self.group_size.iter().enumerate().map(|(j, &n)| (1.0 - a[j], n));
                        subset_means(items, kmax, &mut self.scratch);
                        let unmatched: f64 = pmf.iter().zip(&self.scratch).map(|(p, e)| p * e).sum();
                        acc.unmatched += w * comp.mass * unmatched;
                    }
                }
            }
        }
    }
}
