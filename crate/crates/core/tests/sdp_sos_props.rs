use formsos::rational::int;
use formsos::sdp::{min_eigenvalue, project_psd, solve, BlockSpec, SdpFeasibilityProblem, SdpVar, SolveOptions};
use formsos::sos::{sos_check, verify_decomposition, SosOptions, SosOutcome};
use formsos::{Monomial, Polynomial};
use nalgebra::DMatrix;
use num_rational::BigRational;
use proptest::prelude::*;

fn sym_strategy(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |v| {
        let a = DMatrix::from_vec(n, n, v);
        (&a + a.transpose()) * 0.5
    })
}

fn poly_strategy(nvars: usize, max_deg: u32) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0..=max_deg, nvars), -4i64..=4), 1..=4).prop_map(
        move |terms| {
            let mut p = Polynomial::zero(nvars);
            for (mut e, c) in terms {
                // Clip to total degree max_deg.
                while e.iter().sum::<u32>() > max_deg {
                    let k = e.iter().position(|&x| x > 0).unwrap();
                    e[k] -= 1;
                }
                p.add_term(Monomial::new(e), int(c));
            }
            p
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn psd_projection_is_idempotent_and_psd(m in sym_strategy(4)) {
        let p = project_psd(&m).unwrap();
        prop_assert!(min_eigenvalue(&p).unwrap() >= -1e-10);
        let pp = project_psd(&p).unwrap();
        prop_assert!((&pp - &p).abs().max() <= 1e-9);
        // Nearest point: the residual is the negative part of m.
        let r = &m - &p;
        prop_assert!(min_eigenvalue(&(-&r)).unwrap() >= -1e-9);
        prop_assert!((&r * &p).abs().max() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_feasible_programs_are_solved(
        b in prop::collection::vec(-3i64..=3, 9),
        a in prop::collection::vec(-2i64..=2, 4 * 6),
        free in prop::collection::vec(-2i64..=2, 4),
    ) {
        // X0 = B B^T is PSD; the constraints are chosen to pass through it.
        let bm: Vec<Vec<i64>> = b.chunks(3).map(|r| r.to_vec()).collect();
        let x0 = |i: usize, j: usize| -> i64 { (0..3).map(|k| bm[i][k] * bm[j][k]).sum() };
        let mut prob = SdpFeasibilityProblem::new(vec![BlockSpec { name: "X".into(), dim: 3 }], 1);
        let entries = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        for k in 0..4 {
            let coeffs: Vec<(SdpVar, BigRational)> = entries
                .iter()
                .enumerate()
                .map(|(t, &(row, col))| (SdpVar::Entry { block: 0, row, col }, int(a[k * 6 + t])))
                .chain(std::iter::once((SdpVar::Free(0), int(free[k]))))
                .collect();
            let rhs: i64 = entries
                .iter()
                .enumerate()
                .map(|(t, &(i, j))| a[k * 6 + t] * x0(i, j))
                .sum();
            prob.add_constraint(coeffs, int(rhs)).unwrap();
        }
        let opts = SolveOptions::default();
        let status = solve(&prob, &opts).unwrap();
        prop_assert!(status.is_feasible(), "{:?}", status);
        let sol = status.solution();
        prop_assert!(prob.residual(&sol.block_values, &sol.free_values) <= 1e-6);
        prop_assert!(min_eigenvalue(&sol.block_values[0]).unwrap() >= -1e-6);
    }

    #[test]
    fn sums_of_squares_round_trip(
        squares in prop::collection::vec(poly_strategy(2, 2), 1..=3),
    ) {
        let f = squares.iter().fold(Polynomial::zero(2), |acc, s| &acc + &(s * s));
        prop_assume!(!f.is_zero());
        match sos_check(&f, &SosOptions::default()).unwrap() {
            SosOutcome::Feasible(d) => {
                let report = verify_decomposition(&f, &d, 1e-6);
                prop_assert!(report.passed, "{:?}", report);
                let rebuilt = d.squares.iter().fold(Polynomial::zero(2), |acc, s| &acc + &(s * s));
                prop_assert!((&rebuilt - &f).max_abs_coeff() <= 1e-6);
            }
            SosOutcome::Unknown { reason } => prop_assert!(false, "unknown for {}: {}", f, reason),
        }
    }
}

#[test]
fn negative_constant_is_not_sos() {
    let f = Polynomial::from_int(2, -1);
    assert!(!sos_check(&f, &SosOptions::default()).unwrap().is_feasible());
}
