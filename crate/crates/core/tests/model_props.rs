use proptest::prelude::*;
use rpitrack_core::model::{
    build_closed_loop, problem_size, stack_state_constraints, ControllerGains, IntegralBounds, PlantModel, ProblemDims,
    StateConstraint,
};
use rpitrack_core::numlin::{hurwitz_margin, Matrix, Vector};
use rpitrack_core::sim::{simulate, ReferenceSignal, SimConfig};

/// The variable count multiplied out into monomials by hand, with
/// `n_cl = n + 2` substituted.
fn expanded(d: &ProblemDims) -> (usize, usize, usize) {
    let ProblemDims { n, m, l, l_r, l_x, l_xi1, l_xi2, l_u } = *d;
    let vars = m + l * n + 2 * l + l * l + l * l_r + l * l_x + l * l_xi1 + l * l_xi2 + l * l_u + 2 * l_u + 4
        + n * n + 4 * n + 4 + 1;
    let eqs = n * l + 2 * l + n * l_x + 2 * l_x + n * l_xi1 + 2 * l_xi1 + n * l_xi2 + 2 * l_xi2 + n * l_u + 2 * l_u
        + n * n + 4 * n + 4 + 2 * l + 2 * l_u;
    let ineqs = l + l_x + l_xi1 + l_xi2 + l_u;
    (vars, eqs, ineqs)
}

fn dims() -> impl Strategy<Value = ProblemDims> {
    (1usize..8, 1usize..4, 1usize..30, 1usize..4, 1usize..12, 1usize..4, 1usize..4, 1usize..8).prop_map(
        |(n, m, l, l_r, l_x, l_xi1, l_xi2, l_u)| ProblemDims { n, m, l, l_r, l_x, l_xi1, l_xi2, l_u },
    )
}

fn plant_2x2() -> impl Strategy<Value = PlantModel> {
    (prop::collection::vec(-1.0..1.0f64, 4), prop::collection::vec(-2.0..2.0f64, 2), prop::collection::vec(-1.0..1.0f64, 2))
        .prop_filter_map("plant must be controllable and observable", |(a, b, c)| {
            PlantModel::new(Matrix::from_row_slice(2, 2, &a), Matrix::from_row_slice(2, 1, &b), Matrix::from_row_slice(1, 2, &c))
                .ok()
        })
}

fn gains() -> impl Strategy<Value = ControllerGains> {
    prop::collection::vec(-5.0..5.0f64, 4).prop_map(|g| ControllerGains::scalar(g[0], g[1], g[2], g[3]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn problem_size_matches_expansion(d in dims()) {
        let s = problem_size(&d);
        prop_assert_eq!((s.variables, s.equalities, s.inequalities), expanded(&d));
    }

    #[test]
    fn closed_loop_decomposes_to_its_gains(plant in plant_2x2(), g in gains(), alpha in 0.0..4.0f64) {
        let cl = build_closed_loop(&plant, &g, alpha).unwrap();
        let (back, a) = cl.decompose(&plant).unwrap();
        for (x, y) in [(&back.k, &g.k), (&back.k_i1, &g.k_i1), (&back.k_i2, &g.k_i2), (&back.k_r, &g.k_r)] {
            prop_assert!((x - y).amax() <= 1e-9 * (1.0 + y.amax()));
        }
        prop_assert!((a - alpha).abs() <= 1e-12);
    }

    #[test]
    fn stacked_constraints_are_block_diagonal(
        rows in 1usize..6,
        data in prop::collection::vec(-3.0..3.0f64, 12),
        xi in prop::collection::vec(0.01..1.0f64, 4),
    ) {
        let x = Matrix::from_fn(rows, 2, |i, j| data[(2 * i + j) % data.len()] + 0.1);
        let xc = StateConstraint::new(x.clone()).unwrap();
        let b = IntegralBounds::new(xi[0], xi[1], xi[2], xi[3]).unwrap();
        let p = stack_state_constraints(&xc, &b).unwrap();
        let s = p.shape();
        prop_assert_eq!(s.shape(), (rows + 4, 4));
        prop_assert!(s.view((0, 2), (rows, 2)).iter().all(|v| *v == 0.0));
        prop_assert!(s.view((rows, 0), (4, 2)).iter().all(|v| *v == 0.0));
        prop_assert_eq!(s.view((0, 0), (rows, 2)).into_owned(), x);
        prop_assert_eq!(s.view((rows, 2), (4, 2)).into_owned(), b.matrix());
        prop_assert!(p.offset().iter().all(|v| *v == 1.0));
    }
}

/// Internal model: any stabilizing gains drive the tracking error of an
/// exosystem reference to zero, from any initial state.
#[test]
fn stabilizing_gains_track_exosystem_references() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let plant = PlantModel::new(
        Matrix::from_row_slice(2, 2, &[-0.5, 1.0, 0.0, -1.0]),
        Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
    )
    .unwrap();
    let cases = [
        (0.0, ReferenceSignal::Ramp { slope: 0.01 }),
        (0.0, ReferenceSignal::constant(-0.3)),
        (1.0, ReferenceSignal::Sinusoid { amplitude: 0.2, omega: 1.0, phase: 0.4 }),
    ];
    let mut checked = 0;
    while checked < 12 {
        let g = ControllerGains::scalar(rng.gen_range(-4.0..0.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-2.0..2.0));
        let (alpha, sig) = &cases[checked % cases.len()];
        let cl = build_closed_loop(&plant, &g, *alpha).unwrap();
        if hurwitz_margin(&cl.a_cl).unwrap() < 0.05 {
            continue;
        }
        let x0 = Vector::from_fn(4, |_, _| rng.gen_range(-0.5..0.5));
        let cfg = SimConfig { horizon: 500.0, dt: 1e-2, decimate: 10 };
        let tr = simulate(&cl, &g, &plant, sig, &x0, &cfg).unwrap();
        let tail = tr.times.iter().zip(&tr.errors).filter(|(t, _)| **t >= 450.0);
        let worst = tail.map(|(_, e)| e.abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-3, "gains {g:?}, alpha {alpha}: |e| reaches {worst}");
        checked += 1;
    }
}
