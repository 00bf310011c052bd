mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rpitrack_core::numlin::{
    characteristic_polynomial, is_hurwitz, left_inverse, solve_lp, LpProblem, LpStatus, Matrix, DEFAULT_FEAS_TOL,
};

use common::brute_lp;

fn matrix(rows: usize, cols: usize, range: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-range..range, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

/// Four bounded variables, up to four inequalities and at most one equality.
fn small_lp() -> impl Strategy<Value = LpProblem> {
    (0usize..=4, 0usize..=1).prop_flat_map(|(n_in, n_eq)| {
        (
            prop::collection::vec(-3.0..3.0f64, 4),
            matrix(n_eq, 4, 2.0),
            prop::collection::vec(-1.0..1.0f64, n_eq),
            matrix(n_in, 4, 2.0),
            prop::collection::vec(-1.0..3.0f64, n_in),
            prop::collection::vec(-2.0..0.0f64, 4),
            prop::collection::vec(0.0..2.0f64, 4),
        )
            .prop_map(|(cost, eq_lhs, eq_rhs, ineq_lhs, ineq_rhs, var_lower, var_upper)| LpProblem {
                cost,
                eq_lhs,
                eq_rhs,
                ineq_lhs,
                ineq_rhs,
                var_lower,
                var_upper,
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lp_matches_vertex_enumeration(p in small_lp()) {
        let out = solve_lp(&p, DEFAULT_FEAS_TOL).unwrap();
        let oracle = brute_lp(&p.cost, &p.eq_lhs, &p.eq_rhs, &p.ineq_lhs, &p.ineq_rhs, &p.var_lower, &p.var_upper);
        match oracle {
            Some(best) => {
                prop_assert_eq!(out.status, LpStatus::Optimal);
                let obj = out.objective.unwrap();
                prop_assert!((obj - best).abs() <= 1e-8 * (1.0 + best.abs()), "simplex {} vs oracle {}", obj, best);
                prop_assert!(p.max_violation(out.solution.as_ref().unwrap()) <= DEFAULT_FEAS_TOL);
            }
            None => prop_assert_eq!(out.status, LpStatus::Infeasible),
        }
    }

    #[test]
    fn lp_is_deterministic(p in small_lp()) {
        let a = solve_lp(&p, DEFAULT_FEAS_TOL).unwrap();
        let b = solve_lp(&p, DEFAULT_FEAS_TOL).unwrap();
        prop_assert_eq!(a, b);
    }

    /// Roots from the companion-matrix eigenvalues of a random monic polynomial
    /// of degree at most four decide stability independently of Routh–Hurwitz.
    #[test]
    fn hurwitz_agrees_with_polynomial_roots(
        coeffs in prop::collection::vec(-4.0..4.0f64, 1..=4),
        margin in 0.0..0.5f64,
    ) {
        let d = coeffs.len();
        let mut comp = Matrix::zeros(d, d);
        for j in 0..d {
            comp[(0, j)] = -coeffs[j];
        }
        for i in 1..d {
            comp[(i, i - 1)] = 1.0;
        }
        let worst = comp.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        prop_assume!((worst + margin).abs() > 1e-6);
        prop_assert_eq!(is_hurwitz(&comp, margin).unwrap(), worst <= -margin);
    }

    #[test]
    fn characteristic_polynomial_vanishes_at_eigenvalues(m in matrix(3, 3, 2.0)) {
        let poly = characteristic_polynomial(&m).unwrap();
        for z in m.complex_eigenvalues().iter() {
            let val = poly.iter().fold(nalgebra::Complex::new(0.0, 0.0), |acc, c| acc * z + c);
            prop_assert!(val.norm() <= 1e-8 * (1.0 + z.norm().powi(3)), "p({z}) = {val}");
        }
    }

    #[test]
    fn left_inverse_is_a_left_inverse(m in matrix(9, 4, 1.0)) {
        prop_assume!(m.clone().svd(false, false).singular_values.min() > 1e-3);
        let v = left_inverse(&m, 1e-9).unwrap();
        let err = (&v * &m - DMatrix::<f64>::identity(4, 4)).amax();
        prop_assert!(err <= 1e-10, "|VM - I| = {err}");
    }
}

#[test]
fn left_inverse_rejects_dependent_columns() {
    let col = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    let m = DMatrix::from_columns(&[col.clone(), col * 2.0]);
    assert!(left_inverse(&m, 1e-9).is_err());
}
