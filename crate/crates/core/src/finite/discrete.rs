//! The interest/admissions/matching maps restricted to the counting measure
//! of a finite roster, under deterministic vacancy.

use super::stability::for_each_individually_rational;
use super::{Assignment, FiniteMarket, MAX_ENUM_SCHOOLS, MAX_ENUM_STUDENTS};
use crate::error::{Error, Result};

/// Admission thresholds induced by an assignment: a student is admitted to
/// `h` iff fewer than `C_h` students assigned to `h` have strictly higher
/// priority. `Some(t)` means admitted iff priority >= t; `None` admits all.
pub fn admissions_of_assignment(fm: &FiniteMarket, a: &Assignment) -> Vec<Option<f64>> {
    let mut assigned: Vec<Vec<f64>> = vec![Vec::new(); fm.n_schools()];
    for (s, h) in a.0.iter().enumerate() {
        if let Some(h) = *h {
            if let Some(p) = fm.students()[s].priority_at(h) {
                assigned[h].push(p);
            }
        }
    }
    assigned
        .into_iter()
        .zip(fm.capacities())
        .map(|(mut v, c)| {
            let c = c.get() as usize;
            if v.len() < c {
                return None;
            }
            v.sort_by(|x, y| y.total_cmp(x));
            Some(v[c - 1])
        })
        .collect()
}

/// Each student takes the first listed school that admits them.
pub fn assignment_from_admissions(fm: &FiniteMarket, thresholds: &[Option<f64>]) -> Assignment {
    Assignment(
        fm.students()
            .iter()
            .map(|st| {
                st.list()
                    .iter()
                    .zip(st.priorities())
                    .find(|(&h, &p)| thresholds[h].is_none_or(|t| p >= t))
                    .map(|(&h, _)| h)
            })
            .collect(),
    )
}

/// One application of matching-from-admissions after interest and
/// deterministic admissions, starting from the matching of `a`.
pub fn discrete_map(fm: &FiniteMarket, a: &Assignment) -> Assignment {
    let n_schools = fm.n_schools();
    // rank of the current assignment in each student's list; unmatched (or
    // unlisted) sits below every listed school
    let held_rank: Vec<usize> = fm
        .students()
        .iter()
        .zip(&a.0)
        .map(|(st, h)| h.and_then(|h| st.rank_of(h)).unwrap_or(st.list().len()))
        .collect();
    let mut interested: Vec<Vec<f64>> = vec![Vec::new(); n_schools];
    for (s, st) in fm.students().iter().enumerate() {
        for (r, (&h, &p)) in st.list().iter().zip(st.priorities()).enumerate() {
            if held_rank[s] >= r {
                interested[h].push(p);
            }
        }
    }
    for v in &mut interested {
        v.sort_by(|x, y| y.total_cmp(x));
    }
    // I_h(p) < C_h  iff  fewer than C_h interested students lie strictly above p
    let thresholds: Vec<Option<f64>> = interested
        .iter()
        .zip(fm.capacities())
        .map(|(v, c)| {
            let c = c.get() as usize;
            (v.len() >= c).then(|| v[c - 1])
        })
        .collect();
    assignment_from_admissions(fm, &thresholds)
}

pub fn is_discrete_fixed_point(fm: &FiniteMarket, a: &Assignment) -> bool {
    discrete_map(fm, a) == *a
}

/// All deterministic fixed points of the discrete map.
pub fn discrete_fixed_points(fm: &FiniteMarket) -> Result<Vec<Assignment>> {
    if fm.n_students() > MAX_ENUM_STUDENTS || fm.n_schools() > MAX_ENUM_SCHOOLS {
        return Err(Error::TooLarge { students: fm.n_students(), schools: fm.n_schools() });
    }
    let mut out = Vec::new();
    for_each_individually_rational(fm, |a| {
        if is_discrete_fixed_point(fm, a) {
            out.push(a.clone());
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::{blocking_pairs, da_student_proposing, enumerate_stable, Student};
    use crate::vacancy::Capacity;

    fn market(caps: &[u32], students: Vec<(Vec<usize>, Vec<f64>)>) -> FiniteMarket {
        FiniteMarket::new(
            (0..caps.len()).map(|i| format!("h{i}")).collect(),
            caps.iter().map(|&c| Capacity::new(c).unwrap()).collect(),
            students.into_iter().map(|(l, p)| Student::new(l, p).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn iterating_from_first_choices_reaches_student_optimal() {
        let fm = market(
            &[1, 2],
            vec![
                (vec![0, 1], vec![0.2, 0.9]),
                (vec![0, 1], vec![0.6, 0.3]),
                (vec![1, 0], vec![0.5, 0.7]),
                (vec![0], vec![0.1]),
            ],
        );
        let mut a = Assignment(fm.students().iter().map(|s| s.list().first().copied()).collect());
        for _ in 0..20 {
            a = discrete_map(&fm, &a);
        }
        assert_eq!(a, da_student_proposing(&fm));
        assert!(is_discrete_fixed_point(&fm, &a));
    }

    #[test]
    fn fixed_points_match_stable_set_on_crossed_market() {
        let fm = market(&[1, 1], vec![(vec![0, 1], vec![0.1, 0.9]), (vec![1, 0], vec![0.1, 0.9])]);
        let mut fixed = discrete_fixed_points(&fm).unwrap();
        let mut stable = enumerate_stable(&fm, usize::MAX).unwrap();
        fixed.sort_by_key(|a| format!("{a:?}"));
        stable.sort_by_key(|a| format!("{a:?}"));
        assert_eq!(fixed, stable);
        for mu in &stable {
            let thresholds = admissions_of_assignment(&fm, mu);
            assert_eq!(&assignment_from_admissions(&fm, &thresholds), mu);
            assert!(blocking_pairs(&fm, mu).unwrap().is_empty());
        }
    }
}
