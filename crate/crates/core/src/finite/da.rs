use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Assignment, FiniteMarket};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Held {
    priority: f64,
    student: usize,
}

impl Eq for Held {}

impl PartialOrd for Held {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Held {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.priority.total_cmp(&other.priority).then(self.student.cmp(&other.student))
    }
}

/// Student-optimal stable assignment.
pub fn da_student_proposing(fm: &FiniteMarket) -> Assignment {
    let n_schools = fm.n_schools();
    let mut held: Vec<BinaryHeap<Reverse<Held>>> = vec![BinaryHeap::new(); n_schools];
    let mut next = vec![0usize; fm.n_students()];
    let mut free: Vec<usize> = (0..fm.n_students()).rev().collect();
    while let Some(s) = free.pop() {
        let st = &fm.students()[s];
        let Some(&h) = st.list().get(next[s]) else {
            continue;
        };
        let offer = Held { priority: st.priorities()[next[s]], student: s };
        next[s] += 1;
        let cap = fm.capacities()[h].get() as usize;
        let heap = &mut held[h];
        if heap.len() < cap {
            heap.push(Reverse(offer));
        } else if heap.peek().is_some_and(|w| w.0 < offer) {
            let Reverse(out) = heap.pop().expect("nonempty");
            heap.push(Reverse(offer));
            free.push(out.student);
        } else {
            free.push(s);
        }
    }
    let mut a = Assignment::unassigned(fm.n_students());
    for (h, heap) in held.iter().enumerate() {
        for Reverse(x) in heap {
            a.0[x.student] = Some(h);
        }
    }
    a
}

/// School-optimal stable assignment; schools offer seats down their
/// priority order and students keep the best offer so far.
pub fn da_school_proposing(fm: &FiniteMarket) -> Assignment {
    let n_schools = fm.n_schools();
    let applicants = fm.applicants_by_priority();
    let mut ptr = vec![0usize; n_schools];
    let mut open: Vec<usize> = fm.capacities().iter().map(|c| c.get() as usize).collect();
    let mut holding: Vec<Option<(usize, usize)>> = vec![None; fm.n_students()];
    let mut queue: Vec<usize> = (0..n_schools).rev().collect();
    while let Some(h) = queue.pop() {
        while open[h] > 0 && ptr[h] < applicants[h].len() {
            let s = applicants[h][ptr[h]].1;
            ptr[h] += 1;
            let rank = fm.students()[s].rank_of(h).expect("applicant lists the school");
            match holding[s] {
                Some((_, r)) if r < rank => {}
                prev => {
                    if let Some((h_prev, _)) = prev {
                        open[h_prev] += 1;
                        queue.push(h_prev);
                    }
                    holding[s] = Some((h, rank));
                    open[h] -= 1;
                }
            }
        }
    }
    Assignment(holding.into_iter().map(|x| x.map(|(h, _)| h)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::Student;
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
    fn higher_priority_student_wins_single_seat() {
        let fm = market(&[1], vec![(vec![0], vec![0.3]), (vec![0], vec![0.8])]);
        assert_eq!(da_student_proposing(&fm), Assignment(vec![None, Some(0)]));
        assert_eq!(da_school_proposing(&fm), Assignment(vec![None, Some(0)]));
    }

    // Schools A, B with one seat each. x, y rank A first, z ranks B first.
    #[test]
    fn three_student_instance() {
        let fm = market(
            &[1, 1],
            vec![
                (vec![0, 1], vec![0.26, 0.75]),
                (vec![0, 1], vec![0.25, 0.5]),
                (vec![1, 0], vec![0.25, 0.75]),
            ],
        );
        let expect = Assignment(vec![Some(1), None, Some(0)]);
        assert_eq!(da_student_proposing(&fm), expect);
        assert_eq!(da_school_proposing(&fm), expect);
    }

    #[test]
    fn crossed_two_by_two_extremes_differ() {
        // students prefer 0 / 1, schools prefer the other student
        let fm = market(&[1, 1], vec![(vec![0, 1], vec![0.1, 0.9]), (vec![1, 0], vec![0.1, 0.9])]);
        assert_eq!(da_student_proposing(&fm), Assignment(vec![Some(0), Some(1)]));
        assert_eq!(da_school_proposing(&fm), Assignment(vec![Some(1), Some(0)]));
    }
}
