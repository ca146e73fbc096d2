//! Interest, admissions and matching maps, the generalized deferred
//! acceptance iteration, and metrics of its fixed points.

mod curve;
mod distance;
mod engine;
mod kernel;

pub use curve::{AdmissionCurve, InterestCurve, PoissonAdmission, TabulatedAdmission};
pub use distance::matching_distance;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::Market;
use crate::vacancy::VacancyKind;

/// Sorted priority points in `[0, 1]` including both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriorityGrid(Vec<f64>);

impl PriorityGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || points[0] != 0.0 || *points.last().unwrap_or(&0.0) != 1.0 {
            return Err(invalid("priority grid must include 0 and 1"));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("priority grid must be strictly increasing"));
        }
        Ok(PriorityGrid(points))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("priority grid needs at least 2 points, got {n}")));
        }
        let last = (n - 1) as f64;
        Ok(PriorityGrid((0..n).map(|i| i as f64 / last).collect()))
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for PriorityGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        PriorityGrid::new(v)
    }
}

impl From<PriorityGrid> for Vec<f64> {
    fn from(g: PriorityGrid) -> Self {
        g.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    /// Everyone admitted everywhere; converges to the student-optimal outcome.
    Top,
    /// No one admitted; converges to the school-optimal outcome.
    Bottom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub grid: PriorityGrid,
    pub tol: f64,
    pub max_iter: usize,
    /// Panels over the common priority factor.
    pub common_panels: usize,
    /// Keep every iterate's admissions on the grid.
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            grid: PriorityGrid::uniform(1001).expect("valid default grid"),
            tol: 1e-10,
            max_iter: 10_000,
            common_panels: 256,
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        if self.common_panels == 0 {
            return Err(invalid("common_panels must be at least 1"));
        }
        Ok(())
    }
}

fn check_partition(group_of: &[usize], n_groups: usize) -> Result<()> {
    if group_of.is_empty() {
        return Err(invalid("functions need at least one school"));
    }
    let mut used = vec![false; n_groups];
    for &g in group_of {
        if g >= n_groups {
            return Err(invalid(format!("group index {g} out of range")));
        }
        used[g] = true;
    }
    if used.iter().any(|u| !u) {
        return Err(invalid("every curve must be used by some school"));
    }
    Ok(())
}

/// Per-school admissions curves; schools with identical curves share one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionsFunction {
    group_of: Vec<usize>,
    curves: Vec<AdmissionCurve>,
}

impl AdmissionsFunction {
    pub fn new(group_of: Vec<usize>, curves: Vec<AdmissionCurve>) -> Result<Self> {
        check_partition(&group_of, curves.len())?;
        Ok(AdmissionsFunction { group_of, curves })
    }

    pub(crate) fn from_parts(group_of: Vec<usize>, curves: Vec<AdmissionCurve>) -> Self {
        AdmissionsFunction { group_of, curves }
    }

    pub fn uniform(n_schools: usize, curve: AdmissionCurve) -> Result<Self> {
        AdmissionsFunction::new(vec![0; n_schools], vec![curve])
    }

    /// One curve per school; equal curves are merged.
    pub fn per_school(curves: Vec<AdmissionCurve>) -> Result<Self> {
        let mut distinct: Vec<AdmissionCurve> = Vec::new();
        let mut group_of = Vec::with_capacity(curves.len());
        for c in curves {
            match distinct.iter().position(|d| *d == c) {
                Some(i) => group_of.push(i),
                None => {
                    group_of.push(distinct.len());
                    distinct.push(c);
                }
            }
        }
        AdmissionsFunction::new(group_of, distinct)
    }

    fn constant(market: &Market, a: f64) -> Self {
        let mut caps: Vec<u32> = Vec::new();
        let group_of = market
            .capacities()
            .iter()
            .map(|c| match caps.iter().position(|&x| x == c.get()) {
                Some(i) => i,
                None => {
                    caps.push(c.get());
                    caps.len() - 1
                }
            })
            .collect();
        AdmissionsFunction { group_of, curves: vec![AdmissionCurve::Constant(a); caps.len()] }
    }

    /// `A ≡ 1` at every school.
    pub fn top(market: &Market) -> Self {
        AdmissionsFunction::constant(market, 1.0)
    }

    /// `A ≡ 0` at every school.
    pub fn bottom(market: &Market) -> Self {
        AdmissionsFunction::constant(market, 0.0)
    }

    pub fn n_schools(&self) -> usize {
        self.group_of.len()
    }

    pub fn curve(&self, h: usize) -> &AdmissionCurve {
        &self.curves[self.group_of[h]]
    }

    pub fn value(&self, h: usize, p: f64) -> f64 {
        self.curve(h).value(p)
    }

    pub fn curves(&self) -> &[AdmissionCurve] {
        &self.curves
    }

    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }

    /// Values per school on `grid`.
    pub fn tabulate(&self, grid: &PriorityGrid) -> Vec<Vec<f64>> {
        let per_curve: Vec<Vec<f64>> =
            self.curves.iter().map(|c| grid.points().iter().map(|&p| c.value(p)).collect()).collect();
        self.group_of.iter().map(|&g| per_curve[g].clone()).collect()
    }

    /// `self >= other` pointwise on the grid, up to `slack`.
    pub fn dominates(&self, other: &AdmissionsFunction, grid: &PriorityGrid, slack: f64) -> bool {
        (0..self.n_schools()).all(|h| {
            grid.points().iter().all(|&p| self.value(h, p) >= other.value(h, p) - slack)
        })
    }

    pub fn sup_distance(&self, other: &AdmissionsFunction, grid: &PriorityGrid) -> f64 {
        (0..self.n_schools())
            .flat_map(|h| grid.points().iter().map(move |&p| (self.value(h, p) - other.value(h, p)).abs()))
            .fold(0.0, f64::max)
    }
}

/// Per-school interest curves plus the mass left with the outside option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterestFunction {
    group_of: Vec<usize>,
    curves: Vec<InterestCurve>,
    outside: f64,
}

impl InterestFunction {
    pub fn new(group_of: Vec<usize>, curves: Vec<InterestCurve>, outside: f64) -> Result<Self> {
        check_partition(&group_of, curves.len())?;
        Ok(InterestFunction { group_of, curves, outside })
    }

    pub fn uniform(n_schools: usize, curve: InterestCurve) -> Result<Self> {
        InterestFunction::new(vec![0; n_schools], vec![curve], 0.0)
    }

    pub(crate) fn from_parts(group_of: Vec<usize>, curves: Vec<InterestCurve>, outside: f64) -> Self {
        InterestFunction { group_of, curves, outside }
    }

    pub fn n_schools(&self) -> usize {
        self.group_of.len()
    }

    pub fn curve(&self, h: usize) -> &InterestCurve {
        &self.curves[self.group_of[h]]
    }

    pub fn value(&self, h: usize, p: f64) -> f64 {
        self.curve(h).value(p)
    }

    pub fn curves(&self) -> &[InterestCurve] {
        &self.curves
    }

    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }

    /// Interest in the outside option: mass rejected by every listed school.
    pub fn outside(&self) -> f64 {
        self.outside
    }

    pub fn tabulate(&self, grid: &PriorityGrid) -> Vec<Vec<f64>> {
        let per_curve: Vec<Vec<f64>> =
            self.curves.iter().map(|c| grid.points().iter().map(|&p| c.value(p)).collect()).collect();
        self.group_of.iter().map(|&g| per_curve[g].clone()).collect()
    }
}

/// The matching induced by an admissions function, summarized by the
/// admissions themselves and the aggregate masses they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalMatching {
    admissions: AdmissionsFunction,
    matched: Vec<f64>,
    rank_mass: Vec<f64>,
    unmatched: f64,
    class_probabilities: Vec<Vec<f64>>,
}

impl FractionalMatching {
    pub fn admissions(&self) -> &AdmissionsFunction {
        &self.admissions
    }

    /// Matched mass at each school.
    pub fn matched_per_school(&self) -> &[f64] {
        &self.matched
    }

    pub fn total_matched(&self) -> f64 {
        self.matched.iter().sum()
    }

    /// Matched mass weighted by the rank of the assigned school.
    pub fn rank_mass_per_school(&self) -> &[f64] {
        &self.rank_mass
    }

    pub fn unmatched(&self) -> f64 {
        self.unmatched
    }

    /// For a market of explicit classes: probability that a student of class
    /// `c` is assigned to the school at each list position.
    pub fn class_assignment(&self, c: usize) -> Option<&[f64]> {
        self.class_probabilities.get(c).map(Vec::as_slice).filter(|v| !v.is_empty())
    }

    pub fn average_rank(&self) -> Result<f64> {
        let m = self.total_matched();
        if !(m > 0.0) {
            return Err(Error::Undefined("average rank with zero matched mass".into()));
        }
        Ok(self.rank_mass.iter().sum::<f64>() / m)
    }
}

fn assemble(adm: AdmissionsFunction, ev: engine::Evaluation) -> (FractionalMatching, InterestFunction) {
    let m = FractionalMatching {
        admissions: adm,
        matched: ev.matched,
        rank_mass: ev.rank,
        unmatched: ev.unmatched,
        class_probabilities: ev.class,
    };
    (m, ev.interest)
}

pub fn matching_from_admissions(
    market: &Market,
    admissions: &AdmissionsFunction,
    opts: &SolverOptions,
) -> Result<FractionalMatching> {
    let ev = engine::evaluate(market, admissions, opts)?;
    Ok(assemble(admissions.clone(), ev).0)
}

pub fn interest_from_matching(
    market: &Market,
    matching: &FractionalMatching,
    opts: &SolverOptions,
) -> Result<InterestFunction> {
    Ok(engine::evaluate(market, &matching.admissions, opts)?.interest)
}

pub fn admissions_from_interest(
    interest: &InterestFunction,
    market: &Market,
    kind: VacancyKind,
) -> Result<AdmissionsFunction> {
    if interest.n_schools() != market.n_schools() {
        return Err(invalid(format!(
            "interest covers {} schools, market has {}",
            interest.n_schools(),
            market.n_schools()
        )));
    }
    Ok(engine::update(market, interest, kind))
}

/// One round of generalized deferred acceptance.
pub fn iterate_map(
    market: &Market,
    kind: VacancyKind,
    admissions: &AdmissionsFunction,
    opts: &SolverOptions,
) -> Result<AdmissionsFunction> {
    let ev = engine::evaluate(market, admissions, opts)?;
    Ok(engine::update(market, &ev.interest, kind))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub change: f64,
    /// Admissions per school on the grid after this iteration.
    pub admissions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableOutcome {
    pub kind: VacancyKind,
    pub start: Start,
    pub grid: PriorityGrid,
    pub matching: FractionalMatching,
    pub interest: InterestFunction,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedMass {
    pub per_school: Vec<f64>,
    pub total: f64,
}

impl StableOutcome {
    pub fn admissions(&self) -> &AdmissionsFunction {
        &self.matching.admissions
    }

    pub fn matched_mass(&self) -> MatchedMass {
        MatchedMass { per_school: self.matching.matched.clone(), total: self.matching.total_matched() }
    }

    pub fn average_rank(&self) -> Result<f64> {
        self.matching.average_rank()
    }

    /// Deterministic cutoffs of the interest function.
    pub fn cutoffs(&self, market: &Market) -> Vec<f64> {
        cutoffs_from_interest(&self.interest, market)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

/// Iterates from the top or bottom admissions function until the sup-norm
/// change falls below `opts.tol`. Hitting `max_iter` returns the last iterate
/// with `converged = false`.
pub fn solve_stable(market: &Market, kind: VacancyKind, start: Start, opts: &SolverOptions) -> Result<StableOutcome> {
    opts.validate()?;
    let grid = opts.grid.points();
    let mut adm = match start {
        Start::Top => AdmissionsFunction::top(market),
        Start::Bottom => AdmissionsFunction::bottom(market),
    };
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let ev = engine::evaluate(market, &adm, opts)?;
        let next = engine::update(market, &ev.interest, kind);
        residual = engine::change(&adm, &next, &ev.interest, grid);
        adm = next;
        if opts.record_trace {
            trace.push(TraceStep { iteration: iterations, change: residual, admissions: adm.tabulate(&opts.grid) });
        }
        if residual < opts.tol {
            converged = true;
            break;
        }
    }
    let ev = engine::evaluate(market, &adm, opts)?;
    let (matching, interest) = assemble(adm, ev);
    Ok(StableOutcome {
        kind,
        start,
        grid: opts.grid.clone(),
        matching,
        interest,
        iterations,
        residual,
        converged,
        trace,
    })
}

/// `inf { p : I_h(p) < C_h }` per school.
pub fn cutoffs_from_interest(interest: &InterestFunction, market: &Market) -> Vec<f64> {
    (0..market.n_schools()).map(|h| interest.curve(h).crossing(market.capacity(h).as_f64())).collect()
}

/// Mass admitted to each school and to no school it prefers, at cutoffs `p`.
pub fn demand_at_cutoffs(market: &Market, cutoffs: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
    if cutoffs.len() != market.n_schools() {
        return Err(invalid(format!("{} cutoffs for {} schools", cutoffs.len(), market.n_schools())));
    }
    let curves = cutoffs.iter().map(|&p| AdmissionCurve::step(p)).collect::<Result<Vec<_>>>()?;
    let adm = AdmissionsFunction::per_school(curves)?;
    Ok(matching_from_admissions(market, &adm, opts)?.matched)
}

/// Quantiles of the cutoff distribution whose CDF is `curve`.
pub fn cutoff_quantiles(curve: &AdmissionCurve, probs: &[f64]) -> Result<Vec<f64>> {
    probs.iter().map(|&p| curve.quantile(p)).collect()
}

pub fn matched_mass(outcome: &StableOutcome) -> MatchedMass {
    outcome.matched_mass()
}

pub fn average_rank(outcome: &StableOutcome) -> Result<f64> {
    outcome.average_rank()
}
