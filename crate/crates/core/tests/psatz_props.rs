use formsos::psatz::{search_refutation, verify_refutation, SearchOptions, SearchOutcome, SearchSchedule, SemialgebraicSet};
use formsos::rational::int;
use formsos::Polynomial;
use num_rational::BigRational;
use proptest::prelude::*;

fn x() -> Polynomial {
    Polynomial::var(1, 0)
}

fn c(v: BigRational) -> Polynomial {
    Polynomial::constant(1, v)
}

fn refuted(set: &SemialgebraicSet) -> bool {
    match search_refutation(set, &SearchSchedule::default(), &SearchOptions::default()).unwrap() {
        SearchOutcome::Found { refutation, .. } => {
            let report = verify_refutation(set, &refutation, 1e-8).unwrap();
            assert!(report.passed, "{report:?}");
            true
        }
        SearchOutcome::NotFound { .. } => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn shifted_square_equations_are_refuted(n in 1i64..=9, d in 1i64..=5) {
        let set = SemialgebraicSet::new(1, vec![], vec![], vec![&(&x() * &x()) + &c(BigRational::new(n.into(), d.into()))]).unwrap();
        prop_assert!(refuted(&set));
    }

    #[test]
    fn disjoint_half_lines_are_refuted(a in -5i64..=5, gap in 1i64..=4) {
        // x >= a and x <= a - gap.
        let set = SemialgebraicSet::new(
            1,
            vec![&x() - &c(int(a)), &c(int(a - gap)) - &x()],
            vec![],
            vec![],
        )
        .unwrap();
        prop_assert!(refuted(&set));
    }

    #[test]
    fn a_point_with_a_nonzero_constraint_is_not_refuted(a in -5i64..=5) {
        // {x = a, x - a - 1 != 0} contains x = a.
        let set = SemialgebraicSet::new(
            1,
            vec![],
            vec![&x() - &c(int(a + 1))],
            vec![&x() - &c(int(a))],
        )
        .unwrap();
        prop_assert!(set.contains_point(&[a as f64], 1e-12));
        prop_assert!(!refuted(&set));
    }
}
