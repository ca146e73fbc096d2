use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{da_school_proposing, da_student_proposing, extract_cutoffs, Assignment, FiniteMarket};
use crate::error::{Error, Result};
use crate::measures::{sample_finite_market, CountMode, Market};
use crate::numeric::mix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSpec {
    /// Also run school-proposing DA on every roster.
    pub school_proposing: bool,
    pub quantiles: Vec<f64>,
    /// Keep per-trial statistics in the report.
    pub keep_trials: bool,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        MetricsSpec { school_proposing: true, quantiles: vec![0.05, 0.5, 0.95], keep_trials: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideStatistics {
    pub cutoffs: Vec<f64>,
    pub average_rank: Option<f64>,
    pub matched: usize,
    /// One-based rank per student, `None` if unmatched.
    pub ranks: Vec<Option<usize>>,
}

impl SideStatistics {
    fn of(fm: &FiniteMarket, a: &Assignment) -> Self {
        SideStatistics {
            cutoffs: extract_cutoffs(fm, a),
            average_rank: a.average_rank(fm),
            matched: a.matched_count(),
            ranks: a.ranks(fm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStatistics {
    pub seed: u64,
    pub n_students: usize,
    pub student_optimal: SideStatistics,
    pub school_optimal: Option<SideStatistics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub samples: usize,
    pub mean: f64,
    pub se: f64,
    /// `(probability, value)` pairs.
    pub quantiles: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub trials: usize,
    pub master_seed: u64,
    pub metrics: Vec<MetricSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_trial: Vec<TrialStatistics>,
}

impl AggregateReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    mix64(mix64(master_seed) ^ index)
}

pub fn run_trial(market: &Market, count: CountMode, seed: u64, spec: &MetricsSpec) -> Result<TrialStatistics> {
    let fm = sample_finite_market(market, count, seed)?;
    let student_optimal = SideStatistics::of(&fm, &da_student_proposing(&fm));
    let school_optimal = spec.school_proposing.then(|| SideStatistics::of(&fm, &da_school_proposing(&fm)));
    Ok(TrialStatistics { seed, n_students: fm.n_students(), student_optimal, school_optimal })
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn summarize(name: &str, mut xs: Vec<f64>, probs: &[f64]) -> Option<MetricSummary> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    xs.sort_by(f64::total_cmp);
    let quantiles = probs.iter().map(|&p| (p, quantile_sorted(&xs, p))).collect();
    Some(MetricSummary { name: name.to_string(), samples: xs.len(), mean, se: (var / n).sqrt(), quantiles })
}

/// Runs independent trials in parallel. Trial `i` uses a seed derived from
/// `(master_seed, i)`, and results are reduced in trial order, so the report
/// does not depend on scheduling.
pub fn monte_carlo(
    market: &Market,
    count: CountMode,
    trials: usize,
    master_seed: u64,
    spec: &MetricsSpec,
) -> Result<AggregateReport> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    if spec.quantiles.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidInput("quantile probabilities must lie in [0,1]".into()));
    }
    let stats: Vec<TrialStatistics> = (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(market, count, trial_seed(master_seed, i), spec))
        .collect::<Result<_>>()?;

    let probs = &spec.quantiles;
    let mut metrics = Vec::new();
    let sides: [(&str, fn(&TrialStatistics) -> Option<&SideStatistics>); 2] = [
        ("student_optimal", |t| Some(&t.student_optimal)),
        ("school_optimal", |t| t.school_optimal.as_ref()),
    ];
    for (label, side) in sides {
        let present: Vec<&SideStatistics> = stats.iter().filter_map(side).collect();
        if present.is_empty() {
            continue;
        }
        let cutoffs: Vec<f64> = present.iter().flat_map(|s| s.cutoffs.iter().copied()).collect();
        let ranks: Vec<f64> = present.iter().filter_map(|s| s.average_rank).collect();
        let matched: Vec<f64> = present.iter().map(|s| s.matched as f64).collect();
        metrics.extend(summarize(&format!("cutoff_{label}"), cutoffs, probs));
        metrics.extend(summarize(&format!("average_rank_{label}"), ranks, probs));
        metrics.extend(summarize(&format!("matched_{label}"), matched, probs));
    }
    let fractions: Vec<f64> = stats
        .iter()
        .filter(|t| t.n_students > 0)
        .map(|t| t.student_optimal.matched as f64 / t.n_students as f64)
        .collect();
    metrics.extend(summarize("matched_fraction", fractions, probs));
    metrics.extend(summarize("students", stats.iter().map(|t| t.n_students as f64).collect(), probs));

    Ok(AggregateReport {
        trials,
        master_seed,
        metrics,
        per_trial: if spec.keep_trials { stats } else { Vec::new() },
    })
}
