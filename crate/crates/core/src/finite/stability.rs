use serde::{Deserialize, Serialize};

use super::{Assignment, FiniteMarket};
use crate::error::{Error, Result};

pub const MAX_ENUM_STUDENTS: usize = 8;
pub const MAX_ENUM_SCHOOLS: usize = 4;

/// A student and a school (or the outside option, `None`) that would both
/// rather be matched with each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockingPair {
    pub student: usize,
    pub school: Option<usize>,
}

fn check_feasible(fm: &FiniteMarket, a: &Assignment) -> Result<Vec<usize>> {
    if a.len() != fm.n_students() {
        return Err(Error::InfeasibleAssignment(format!(
            "assignment covers {} students, market has {}",
            a.len(),
            fm.n_students()
        )));
    }
    if let Some(h) = a.0.iter().flatten().find(|&&h| h >= fm.n_schools()) {
        return Err(Error::InfeasibleAssignment(format!("unknown school {h}")));
    }
    let fill = a.fill_counts(fm.n_schools());
    for (h, (&f, c)) in fill.iter().zip(fm.capacities()).enumerate() {
        if f > c.get() as usize {
            return Err(Error::InfeasibleAssignment(format!("school {h} holds {f} students, capacity {}", c.get())));
        }
    }
    Ok(fill)
}

/// Lowest priority among a school's assigned students, if it is full.
fn full_school_floor(fm: &FiniteMarket, a: &Assignment, fill: &[usize]) -> Vec<Option<f64>> {
    let mut floor: Vec<Option<f64>> = vec![None; fm.n_schools()];
    for (s, h) in a.0.iter().enumerate() {
        if let Some(h) = *h {
            let p = fm.students()[s].priority_at(h).unwrap_or(0.0);
            floor[h] = Some(floor[h].map_or(p, |f: f64| f.min(p)));
        }
    }
    floor
        .into_iter()
        .enumerate()
        .map(|(h, f)| if fill[h] >= fm.capacities()[h].get() as usize { f } else { None })
        .collect()
}

/// All pairs that violate stability; an assignment to an unlisted school is
/// reported as blocked by the outside option.
pub fn blocking_pairs(fm: &FiniteMarket, a: &Assignment) -> Result<Vec<BlockingPair>> {
    let fill = check_feasible(fm, a)?;
    let floor = full_school_floor(fm, a, &fill);
    let mut out = Vec::new();
    for (s, st) in fm.students().iter().enumerate() {
        let current = match a.0[s] {
            None => st.list().len(),
            Some(h) => match st.rank_of(h) {
                Some(r) => r,
                None => {
                    out.push(BlockingPair { student: s, school: None });
                    st.list().len()
                }
            },
        };
        for (&h, &p) in st.list()[..current].iter().zip(st.priorities()) {
            let blocks = match floor[h] {
                None => true,
                Some(f) => p > f,
            };
            if blocks {
                out.push(BlockingPair { student: s, school: Some(h) });
            }
        }
    }
    Ok(out)
}

/// Every assignment without blocking pairs, in odometer order over each
/// student's list (the outside option last), capped at `limit` results.
pub fn enumerate_stable(fm: &FiniteMarket, limit: usize) -> Result<Vec<Assignment>> {
    if fm.n_students() > MAX_ENUM_STUDENTS || fm.n_schools() > MAX_ENUM_SCHOOLS {
        return Err(Error::TooLarge { students: fm.n_students(), schools: fm.n_schools() });
    }
    let mut out = Vec::new();
    for_each_individually_rational(fm, |a| {
        if out.len() < limit && blocking_pairs(fm, a).map(|b| b.is_empty()).unwrap_or(false) {
            out.push(a.clone());
        }
    });
    Ok(out)
}

/// Visits every map from students to listed schools or the outside option.
pub(crate) fn for_each_individually_rational(fm: &FiniteMarket, mut f: impl FnMut(&Assignment)) {
    let n = fm.n_students();
    let radix: Vec<usize> = fm.students().iter().map(|s| s.list().len() + 1).collect();
    let mut digits = vec![0usize; n];
    let mut a = Assignment::unassigned(n);
    loop {
        for s in 0..n {
            a.0[s] = fm.students()[s].list().get(digits[s]).copied();
        }
        f(&a);
        let mut i = 0;
        while i < n {
            digits[i] += 1;
            if digits[i] < radix[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == n {
            return;
        }
    }
}

/// Minimum assigned priority at full schools; zero elsewhere.
pub fn extract_cutoffs(fm: &FiniteMarket, a: &Assignment) -> Vec<f64> {
    let fill = a.fill_counts(fm.n_schools());
    full_school_floor(fm, a, &fill).into_iter().map(|f| f.unwrap_or(0.0)).collect()
}
