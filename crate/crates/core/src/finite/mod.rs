//! Finite rosters: deferred acceptance, stability checks, brute-force
//! enumeration, cutoffs and Monte Carlo aggregation.

mod da;
mod discrete;
mod montecarlo;
mod stability;

pub use da::{da_school_proposing, da_student_proposing};
pub use discrete::{admissions_of_assignment, assignment_from_admissions, discrete_fixed_points, discrete_map, is_discrete_fixed_point};
pub use montecarlo::{monte_carlo, run_trial, trial_seed, SideStatistics, AggregateReport, MetricSummary, MetricsSpec, TrialStatistics};
pub use stability::{blocking_pairs, enumerate_stable, extract_cutoffs, BlockingPair, MAX_ENUM_SCHOOLS, MAX_ENUM_STUDENTS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vacancy::Capacity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Student {
    list: Vec<usize>,
    priorities: Vec<f64>,
}

impl Student {
    /// `priorities[i]` is the score at `list[i]`.
    pub fn new(list: Vec<usize>, priorities: Vec<f64>) -> Result<Self> {
        if list.len() != priorities.len() {
            return Err(Error::InvalidInput(format!(
                "{} schools listed but {} priorities given",
                list.len(),
                priorities.len()
            )));
        }
        Ok(Student { list, priorities })
    }

    pub fn list(&self) -> &[usize] {
        &self.list
    }

    pub fn priorities(&self) -> &[f64] {
        &self.priorities
    }

    /// Zero-based position of `h` in the ranked list.
    pub fn rank_of(&self, h: usize) -> Option<usize> {
        self.list.iter().position(|&x| x == h)
    }

    pub fn priority_at(&self, h: usize) -> Option<f64> {
        self.rank_of(h).map(|i| self.priorities[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMarket {
    schools: Vec<String>,
    capacities: Vec<Capacity>,
    students: Vec<Student>,
}

impl FiniteMarket {
    /// Validates lists and rejects tied priorities at any school.
    pub fn new(schools: Vec<String>, capacities: Vec<Capacity>, students: Vec<Student>) -> Result<Self> {
        if schools.len() != capacities.len() {
            return Err(Error::InvalidMarket(format!(
                "{} capacities for {} schools",
                capacities.len(),
                schools.len()
            )));
        }
        let n = schools.len();
        for (i, s) in students.iter().enumerate() {
            let mut seen = vec![false; n];
            for (&h, &p) in s.list.iter().zip(&s.priorities) {
                if h >= n || std::mem::replace(&mut seen[h], true) {
                    return Err(Error::InvalidMarket(format!("student {i} has an invalid list")));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidMarket(format!("student {i} has priority {p} outside [0,1]")));
                }
            }
        }
        if let Some(school) = first_tie(n, &students) {
            return Err(Error::Tie { school });
        }
        Ok(FiniteMarket { schools, capacities, students })
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

    pub fn students(&self) -> &[Student] {
        &self.students
    }

    pub fn n_students(&self) -> usize {
        self.students.len()
    }

    /// Students listing `h`, highest priority first.
    pub(crate) fn applicants_by_priority(&self) -> Vec<Vec<(f64, usize)>> {
        let mut out = vec![Vec::new(); self.n_schools()];
        for (s, st) in self.students.iter().enumerate() {
            for (&h, &p) in st.list.iter().zip(&st.priorities) {
                out[h].push((p, s));
            }
        }
        for v in &mut out {
            v.sort_by(|a, b| b.0.total_cmp(&a.0));
        }
        out
    }
}

/// First `(school, student)` where the student shares a score with an
/// earlier applicant at that school.
pub(crate) fn first_tie_pair(n_schools: usize, students: &[Student]) -> Option<(usize, usize)> {
    let mut by_school: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n_schools];
    for (s, st) in students.iter().enumerate() {
        for (&h, &p) in st.list.iter().zip(&st.priorities) {
            by_school[h].push((p, s));
        }
    }
    by_school.iter_mut().enumerate().find_map(|(h, v)| {
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        v.windows(2).find(|w| w[0].0 == w[1].0).map(|w| (h, w[1].1))
    })
}

fn first_tie(n_schools: usize, students: &[Student]) -> Option<usize> {
    first_tie_pair(n_schools, students).map(|(h, _)| h)
}

/// Per-student assigned school, `None` for the outside option.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment(pub Vec<Option<usize>>);

impl Assignment {
    pub fn unassigned(n_students: usize) -> Self {
        Assignment(vec![None; n_students])
    }

    pub fn school_of(&self, s: usize) -> Option<usize> {
        self.0[s]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn matched_count(&self) -> usize {
        self.0.iter().filter(|x| x.is_some()).count()
    }

    pub fn fill_counts(&self, n_schools: usize) -> Vec<usize> {
        let mut c = vec![0; n_schools];
        for h in self.0.iter().flatten() {
            c[*h] += 1;
        }
        c
    }

    /// One-based rank of each matched student's school.
    pub fn ranks(&self, fm: &FiniteMarket) -> Vec<Option<usize>> {
        self.0
            .iter()
            .zip(fm.students())
            .map(|(a, st)| a.and_then(|h| st.rank_of(h)).map(|r| r + 1))
            .collect()
    }

    pub fn average_rank(&self, fm: &FiniteMarket) -> Option<f64> {
        let ranks: Vec<usize> = self.ranks(fm).into_iter().flatten().collect();
        if ranks.is_empty() {
            return None;
        }
        Some(ranks.iter().sum::<usize>() as f64 / ranks.len() as f64)
    }
}
