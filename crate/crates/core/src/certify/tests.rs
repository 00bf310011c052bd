use proptest::prelude::*;

use super::*;
use crate::model::{InputConstraint, StateConstraint};

fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
    Matrix::from_row_slice(rows, cols, data)
}

/// `ẋ = -x + u` under a ramp class. The gains place the closed-loop poles at
/// -1, -2, -3; `L_cl` stacks scaled left eigenvectors with both signs, so every
/// multiplier can be written down by hand.
fn hand_problem() -> Problem {
    Problem {
        plant: PlantModel::new(m(1, 1, &[-1.0]), m(1, 1, &[1.0]), m(1, 1, &[1.0])).unwrap(),
        xc: StateConstraint::from_box(&[-1.0], &[1.0]).unwrap(),
        uc: InputConstraint::symmetric(&[1.0]).unwrap(),
        kind: ReferenceKind::Ramp,
    }
}

fn hand_l() -> Matrix {
    let w = [[1.0, -5.0, -6.0], [20.0, -80.0, -60.0], [20.0, -60.0, -40.0]];
    let mut l = Matrix::zeros(6, 3);
    for (k, row) in w.iter().enumerate() {
        for j in 0..3 {
            l[(2 * k, j)] = row[j];
            l[(2 * k + 1, j)] = -row[j];
        }
    }
    l
}

fn hand_cert() -> Certificate {
    let inv = InvariantSet::new(hand_l()).unwrap();
    let v = left_inverse(inv.l_cl(), DEFAULT_RANK_TOL).unwrap();
    Certificate {
        gains: ControllerGains::scalar(-5.0, 11.0, 6.0, 4.0),
        inv,
        h: Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -1.0, -2.0, -2.0, -3.0, -3.0])),
        h_r: m(6, 2, &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 20.0, 0.0, 0.0, 20.0]),
        t1: m(2, 6, &[0.5, 0.0, 0.0, 0.2, 0.225, 0.0, 0.0, 0.5, 0.2, 0.0, 0.0, 0.225]),
        t2: m(2, 6, &[0.5, 0.0, 0.0, 0.1, 0.075, 0.0, 0.0, 0.5, 0.1, 0.0, 0.0, 0.075]),
        t3: m(2, 6, &[0.0, 0.5, 0.05, 0.0, 0.0, 0.025, 0.5, 0.0, 0.0, 0.05, 0.025, 0.0]),
        q: m(2, 6, &[0.0, 0.0, 0.2, 0.0, 0.0, 0.45, 0.0, 0.0, 0.0, 0.2, 0.45, 0.0]),
        q_r: m(2, 2, &[4.0, 0.0, 0.0, 4.0]),
        v,
        gamma: 0.5,
        xi: IntegralBounds::new(1.0, 1.0, 1.0, 1.0).unwrap(),
        rho: [1.0 / 16.0, 1.0 / 16.0],
    }
}

fn check(cert: &Certificate, prob: &Problem) -> CertReport {
    check_certificate(cert, &prob.plant, &prob.xc, &prob.uc, prob.kind, DEFAULT_CERT_TOL).unwrap()
}

fn complete(cert: &Certificate, prob: &Problem, rho: [f64; 2]) -> Result<Certificate> {
    complete_certificate(&cert.gains, &cert.inv, rho, cert.xi, prob, &VarBox::default(), 1e-9)
}

#[test]
fn hand_built_certificate_passes() {
    let prob = hand_problem();
    let rep = check(&hand_cert(), &prob);
    assert!(rep.passed, "{rep}");
    for r in &rep.residuals {
        if r.tol > 0.0 {
            assert!(r.value <= 1e-9, "{} = {}", r.name, r.value);
        }
    }
}

#[test]
fn text_form_round_trips_exactly() {
    let cert = hand_cert();
    let src = cert.to_text();
    let back = Certificate::from_text(&src).unwrap();
    assert_eq!(back, cert);
    assert_eq!(back.to_text(), src);
}

#[test]
fn malformed_certificate_text_points_at_the_line() {
    let src = hand_cert().to_text();
    let line_of = |bad: &str| match Certificate::from_text(bad) {
        Err(Error::Parse { line, .. }) => line,
        other => panic!("expected a parse error, got {other:?}"),
    };
    let xi_line = src.lines().position(|l| l.starts_with("xi =")).unwrap() + 1;
    assert_eq!(line_of(&src.replace("xi = ", "xi = -")), xi_line);
    let k_line = src.lines().position(|l| l.starts_with("K_r =")).unwrap() + 1;
    let broken: String = src
        .lines()
        .map(|l| if l.starts_with("K_r =") { "K_r = 1 2".to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    assert_eq!(line_of(&broken), k_line);
}

#[test]
fn left_inverse_matches_closed_form() {
    // L_cl = [Lp; -Lp] so V = ½[Lp⁻¹, -Lp⁻¹] with Lp⁻¹ = W⁻¹ diag(1, 1/20, 1/20).
    let w_inv = m(3, 3, &[0.5, -4.0, 4.5, 0.5, -2.0, 1.5, -0.5, 1.0, -0.5]);
    let lp_inv = w_inv * Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.05, 0.05]));
    let v = hand_cert().v;
    for i in 0..3 {
        for k in 0..3 {
            assert!((v[(i, 2 * k)] - 0.5 * lp_inv[(i, k)]).abs() < 1e-12);
            assert!((v[(i, 2 * k + 1)] + 0.5 * lp_inv[(i, k)]).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_gamma_is_rejected() {
    let prob = hand_problem();
    let mut cert = hand_cert();
    cert.gamma = 0.0;
    let rep = check(&cert, &prob);
    assert!(!rep.passed);
    let names: Vec<_> = rep.failures().iter().map(|r| r.name).collect();
    assert_eq!(names, vec!["i_gamma"]);
}

#[test]
fn single_entry_perturbations_fail_their_relation() {
    enum Which {
        H,
        Hr,
        L,
        T1,
        T2,
        T3,
        Q,
        Qr,
    }
    let cases = [
        (Which::H, 0, 0, "a_invariance_x"),
        (Which::H, 1, 2, "a_invariance_x"),
        (Which::H, 4, 4, "a_invariance_x"),
        (Which::H, 5, 3, "b_invariance_xi1"),
        (Which::Hr, 0, 1, "d_invariance_ref"),
        (Which::L, 0, 0, "a_invariance_x"),
        (Which::L, 1, 1, "b_invariance_xi1"),
        (Which::L, 2, 2, "c_invariance_xi2"),
        (Which::L, 5, 0, "a_invariance_x"),
        (Which::T1, 0, 0, "g1_state_x"),
        (Which::T2, 1, 1, "g2_state_xi1"),
        (Which::T3, 0, 2, "g3_state_xi2"),
        (Which::Q, 0, 0, "h1_input_x"),
        (Which::Q, 1, 4, "h1_input_x"),
        (Which::Qr, 0, 0, "h4_input_ref"),
    ];
    let prob = hand_problem();
    for (which, i, j, name) in cases {
        let mut cert = hand_cert();
        let delta = 1e-3;
        match which {
            Which::H => cert.h[(i, j)] += delta,
            Which::Hr => cert.h_r[(i, j)] += delta,
            Which::L => {
                let mut l = cert.inv.l_cl().clone();
                l[(i, j)] += delta;
                cert.inv = InvariantSet::new(l).unwrap();
            }
            Which::T1 => cert.t1[(i, j)] += delta,
            Which::T2 => cert.t2[(i, j)] += delta,
            Which::T3 => cert.t3[(i, j)] += delta,
            Which::Q => cert.q[(i, j)] += delta,
            Which::Qr => cert.q_r[(i, j)] += delta,
        }
        let rep = check(&cert, &prob);
        assert!(!rep.passed, "({i},{j}) should fail {name}");
        let v = rep.get(name).unwrap();
        assert!(v >= 5e-4, "{name} = {v} after perturbing ({i},{j})");
    }
}

#[test]
fn negative_multiplier_and_non_metzler_h_are_caught() {
    let prob = hand_problem();
    let mut cert = hand_cert();
    cert.t1[(0, 1)] = -1e-3;
    assert!(check(&cert, &prob).get("i_nonnegative").unwrap() >= 1e-3);
    let mut cert = hand_cert();
    cert.h[(0, 1)] = -1e-3;
    assert!(check(&cert, &prob).get("i_metzler").unwrap() >= 1e-3);
}

#[test]
fn unstable_gains_fail_hurwitz() {
    let prob = hand_problem();
    let mut cert = hand_cert();
    cert.gains = ControllerGains::scalar(5.0, 11.0, 6.0, 4.0);
    let rep = check(&cert, &prob);
    assert!(rep.get("j_hurwitz").unwrap() > 0.0);
}

#[test]
fn mismatched_shapes_are_errors() {
    let prob = hand_problem();
    let mut cert = hand_cert();
    cert.q_r = Matrix::zeros(2, 3);
    let err = check_certificate(&cert, &prob.plant, &prob.xc, &prob.uc, prob.kind, 1e-7).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch(_)));
}

#[test]
fn invariant_set_rejects_rank_deficient_rows() {
    let l = m(4, 3, &[1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0]);
    assert!(InvariantSet::new(l).is_err());
    assert!(InvariantSet::new(Matrix::identity(3, 3)).is_err());
}

#[test]
fn completion_recovers_a_passing_certificate() {
    let prob = hand_problem();
    let hand = hand_cert();
    let done = complete(&hand, &prob, hand.rho).unwrap();
    let rep = check(&done, &prob);
    assert!(rep.passed, "{rep}");
    // the hand-built multipliers are feasible, so the optimum is no worse
    assert!(done.gamma >= 0.5 - 1e-9, "gamma {}", done.gamma);
}

#[test]
fn completion_is_infeasible_for_unstable_gains() {
    let prob = hand_problem();
    let mut hand = hand_cert();
    hand.gains = ControllerGains::scalar(5.0, 11.0, 6.0, 4.0);
    let err = complete(&hand, &prob, hand.rho).unwrap_err();
    assert!(matches!(err, Error::Infeasible(_)), "{err:?}");
}

#[test]
fn shrinking_the_reference_box_never_lowers_gamma() {
    let prob = hand_problem();
    let hand = hand_cert();
    let big = complete(&hand, &prob, hand.rho).unwrap().gamma;
    let small = complete(&hand, &prob, [hand.rho[0] / 2.0, hand.rho[1] / 4.0]).unwrap().gamma;
    assert!(small >= big - 1e-9, "{small} < {big}");
}

fn to_vector(lay: &Layout, cert: &Certificate) -> Vec<f64> {
    let mut z = vec![0.0; lay.total];
    write_gains(lay, &mut z, &cert.gains);
    lay.set(&mut z, Group::L, cert.inv.l_cl());
    lay.set(&mut z, Group::H, &cert.h);
    lay.set(&mut z, Group::HR, &cert.h_r);
    lay.set(&mut z, Group::T, &cert.t());
    lay.set(&mut z, Group::Q, &cert.q);
    lay.set(&mut z, Group::QR, &cert.q_r);
    z[lay.range(Group::Rho)].copy_from_slice(&cert.rho);
    z[lay.range(Group::Xi)].copy_from_slice(&cert.xi.as_array());
    z[lay.idx(Group::Gamma, 0, 0)] = cert.gamma;
    z
}

#[test]
fn row_system_agrees_with_matrix_residuals() {
    let prob = hand_problem();
    let sys = System::build(&prob.plant, &prob.xc, &prob.uc, prob.alpha(), 6, &VarBox::default()).unwrap();
    let hand = hand_cert();
    let (eq, le) = sys.residuals(&to_vector(&sys.layout, &hand));
    assert!(eq <= 1e-12 && le <= 1e-12, "{eq} {le}");

    let eq_names = [
        "a_invariance_x",
        "b_invariance_xi1",
        "c_invariance_xi2",
        "d_invariance_ref",
        "g1_state_x",
        "g2_state_xi1",
        "g3_state_xi2",
        "h1_input_x",
        "h2_input_xi1",
        "h3_input_xi2",
        "h4_input_ref",
    ];
    let mut cert = hand.clone();
    cert.h[(2, 2)] += 0.01;
    cert.t2[(0, 3)] += 0.003;
    cert.q_r[(1, 0)] += 0.2;
    let rep = check(&cert, &prob);
    let want = eq_names.iter().map(|n| rep.get(n).unwrap()).fold(0.0, f64::max);
    let (eq, _) = sys.residuals(&to_vector(&sys.layout, &cert));
    assert!((eq - want).abs() <= 1e-12, "{eq} vs {want}");
}

#[test]
fn valid_certificate_survives_falsification() {
    let prob = hand_problem();
    let opts = FalsifyOptions { n_samples: 8, horizon: 15.0, dt: 1e-3, tol: 1e-6, seed: 3 };
    let hits = falsify_by_simulation(&hand_cert(), &prob, &opts).unwrap();
    assert!(hits.is_empty(), "{hits:?}");
}

#[test]
fn inflated_feedforward_is_falsified() {
    let prob = hand_problem();
    let mut cert = hand_cert();
    cert.gains.k_r[0] *= 10.0;
    let opts = FalsifyOptions { n_samples: 8, horizon: 15.0, dt: 1e-3, tol: 1e-6, seed: 3 };
    let hits = falsify_by_simulation(&cert, &prob, &opts).unwrap();
    assert!(!hits.is_empty());
    assert!(hits.iter().all(|h| h.margin > 1e-6));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// The hand multipliers stay feasible for any smaller reference box, so
    /// completion must succeed, pass the checker, and reach at least γ = 1/2.
    #[test]
    fn completion_is_sound_on_smaller_boxes(r1 in 1e-3..0.0625f64, r2 in 1e-3..0.0625f64) {
        let prob = hand_problem();
        let hand = hand_cert();
        let done = complete(&hand, &prob, [r1, r2]).unwrap();
        let rep = check(&done, &prob);
        prop_assert!(rep.passed, "{}", rep);
        prop_assert!(done.gamma >= 0.5 - 1e-9);
        prop_assert_eq!(done.rho, [r1, r2]);
    }

    /// Scaling eigen-direction row pairs of `L_cl` by factors of at least one
    /// shrinks the set along invariant directions; it stays certifiable.
    #[test]
    fn positive_row_scaling_preserves_validity(s in proptest::collection::vec(1.0..2.0f64, 3)) {
        let prob = hand_problem();
        let hand = hand_cert();
        let mut l = hand.inv.l_cl().clone();
        for k in 0..3 {
            for r in [2 * k, 2 * k + 1] {
                for j in 0..3 {
                    l[(r, j)] *= s[k];
                }
            }
        }
        let inv = InvariantSet::new(l).unwrap();
        let done = complete_certificate(&hand.gains, &inv, hand.rho, hand.xi, &prob, &VarBox::default(), 1e-9);
        let done = done.unwrap();
        prop_assert!(check(&done, &prob).passed);
    }
}
