use continuum_da::finite::{blocking_pairs, da_school_proposing, da_student_proposing, FiniteMarket, Student};
use continuum_da::formulas::{ar, v_iid_hat, v_rsd_exact, v_rsd_hat};
use continuum_da::measures::{sample_finite_market, Class, CountMode, LengthDistribution, Market, PriorityModel, TypeMeasure};
use continuum_da::solver::*;
use continuum_da::{Capacity, VacancyKind};
use proptest::prelude::*;

fn priority_model() -> impl Strategy<Value = PriorityModel> {
    prop_oneof![
        Just(PriorityModel::IndependentUniform),
        Just(PriorityModel::SingleLottery),
        (0.05f64..0.95).prop_map(PriorityModel::CommonPlusIdiosyncratic),
    ]
}

/// Ranked lists over `n` schools: a random subset in random order.
fn list(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle().prop_flat_map(move |v| (1..=n).prop_map(move |k| v[..k].to_vec()))
}

fn class_market() -> impl Strategy<Value = Market> {
    (1usize..=3)
        .prop_flat_map(|n| {
            let classes = prop::collection::vec(
                (0.1f64..3.0, list(n), priority_model()).prop_map(|(weight, list, priority)| Class { weight, list, priority }),
                1..=3,
            );
            (Just(n), prop::collection::vec(1u32..=3, n), classes)
        })
        .prop_map(|(n, caps, classes)| {
            Market::new(
                (0..n).map(|i| format!("h{i}")).collect(),
                caps.into_iter().map(|c| Capacity::new(c).unwrap()).collect(),
                TypeMeasure::DiscreteClasses { classes },
            )
            .unwrap()
        })
}

fn coarse() -> SolverOptions {
    SolverOptions { grid: PriorityGrid::uniform(201).unwrap(), common_panels: 64, ..SolverOptions::default() }
}

fn constant_admissions(values: &[f64]) -> AdmissionsFunction {
    AdmissionsFunction::per_school(values.iter().map(|&a| AdmissionCurve::constant(a).unwrap()).collect()).unwrap()
}

fn finite_market() -> impl Strategy<Value = FiniteMarket> {
    (1usize..=3, 1usize..=5)
        .prop_flat_map(|(n, s)| {
            let students = prop::collection::vec(list(n).prop_flat_map(|l| {
                let k = l.len();
                (Just(l), prop::collection::vec(0.0f64..1.0, k))
            }), s);
            (Just(n), prop::collection::vec(1u32..=2, n), students)
        })
        .prop_map(|(n, caps, students)| {
            FiniteMarket::new(
                (0..n).map(|i| format!("h{i}")).collect(),
                caps.into_iter().map(|c| Capacity::new(c).unwrap()).collect(),
                students.into_iter().map(|(l, p)| Student::new(l, p).unwrap()).collect(),
            )
        })
        .prop_filter_map("tied priorities", Result::ok)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vacancy_decreasing_and_bounded(l1 in 0.0f64..60.0, dl in 0.0f64..10.0, c in 1u32..30) {
        let cap = Capacity::new(c).unwrap();
        let l2 = l1 + dl;
        for kind in [VacancyKind::Deterministic, VacancyKind::Poisson] {
            let (v1, v2) = (kind.value(l1, cap), kind.value(l2, cap));
            prop_assert!((0.0..=1.0).contains(&v1) && v2 <= v1);
            prop_assert!(kind.acceptance_rate(l2, cap) <= kind.acceptance_rate(l1, cap) + 1e-12);
            let e = kind.enrollment(l1, cap);
            prop_assert!(e <= l1.min(c as f64) + 1e-12 && e >= 0.0);
        }
    }

    #[test]
    fn ar_bounded_and_decreasing(q in 0.001f64..1.0, dq in 0.0f64..0.5, ell in 1usize..60) {
        let a = ar(q, ell).unwrap();
        prop_assert!(a >= 1.0 - 1e-12 && a <= (ell as f64 + 1.0) / 2.0 + 1e-12);
        let q2 = (q + dq).min(1.0);
        prop_assert!(ar(q2, ell).unwrap() <= a + 1e-12);
    }

    #[test]
    fn match_formulas_ordered(w in 1.0f64..80.0, m in 1.0f64..120.0, q in 0.5f64..0.99) {
        let r = v_rsd_hat(w, m, q).unwrap();
        let i = v_iid_hat(w, m, q).unwrap();
        prop_assert!(r > 0.0 && r <= w.min(m) + 1e-9);
        prop_assert!(i >= r - 1e-9 * r);
    }

    #[test]
    fn rsd_exact_bounded(w in 1usize..40, m in 1usize..40, q in 0.0f64..1.0) {
        let v = v_rsd_exact(w, m, q).unwrap();
        prop_assert!(v >= -1e-12 && v <= w.min(m) as f64 + 1e-9);
    }

    #[test]
    fn assignment_probabilities_telescope(market in class_market(), values in prop::collection::vec(0.0f64..1.0, 3)) {
        let adm = constant_admissions(&values[..market.n_schools()]);
        let matching = matching_from_admissions(&market, &adm, &coarse()).unwrap();
        let TypeMeasure::DiscreteClasses { classes } = market.measure() else { unreachable!() };
        for (c, class) in classes.iter().enumerate() {
            let probs = matching.class_assignment(c).unwrap();
            let mut surv = 1.0;
            for (k, &h) in class.list.iter().enumerate() {
                let a = values[h];
                prop_assert!((probs[k] - surv * a).abs() < 1e-12);
                surv *= 1.0 - a;
            }
        }
        let total = matching.total_matched() + matching.unmatched();
        prop_assert!((total - market.total_mass()).abs() < 1e-10);
    }

    #[test]
    fn iterate_map_preserves_order(
        market in class_market(),
        lo in prop::collection::vec(0.0f64..1.0, 3),
        bump in prop::collection::vec(0.0f64..1.0, 3),
        poisson in any::<bool>(),
    ) {
        let n = market.n_schools();
        let low: Vec<f64> = lo[..n].to_vec();
        let high: Vec<f64> = low.iter().zip(&bump).map(|(a, b)| a + (1.0 - a) * b).collect();
        let kind = if poisson { VacancyKind::Poisson } else { VacancyKind::Deterministic };
        let o = coarse();
        let a_low = iterate_map(&market, kind, &constant_admissions(&low), &o).unwrap();
        let a_high = iterate_map(&market, kind, &constant_admissions(&high), &o).unwrap();
        prop_assert!(a_high.dominates(&a_low, &o.grid, 1e-12));
    }

    #[test]
    fn da_outputs_are_stable(fm in finite_market()) {
        let student = da_student_proposing(&fm);
        let school = da_school_proposing(&fm);
        prop_assert!(blocking_pairs(&fm, &student).unwrap().is_empty());
        prop_assert!(blocking_pairs(&fm, &school).unwrap().is_empty());
        // rural hospitals: same matched students and fills
        prop_assert_eq!(student.fill_counts(fm.n_schools()), school.fill_counts(fm.n_schools()));
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), n in 0usize..30) {
        let m = Market::uniform(4, 1, TypeMeasure::SymmetricRsd { total_mass: 5.0, list_length: LengthDistribution::Fixed(3) }).unwrap();
        let a = sample_finite_market(&m, CountMode::Exact(n), seed).unwrap();
        let b = sample_finite_market(&m, CountMode::Exact(n), seed).unwrap();
        prop_assert_eq!(&a, &b);
        for s in a.students() {
            prop_assert!(s.priorities().windows(2).all(|w| w[0] == w[1]));
        }
    }
}
