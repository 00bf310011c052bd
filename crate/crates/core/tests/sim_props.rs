use proptest::prelude::*;
use rpitrack_core::model::{build_closed_loop, ClosedLoop, ControllerGains, PlantModel};
use rpitrack_core::numlin::{Matrix, Vector};
use rpitrack_core::sim::{eval_reference, simulate, ReferenceSignal, SimConfig};

/// `ẋ = −a x + r`, realized as the plant `ẋ = −a x + u` under `u = r`.
fn decay_loop(a: f64) -> (ClosedLoop, ControllerGains, PlantModel) {
    let plant = PlantModel::new(Matrix::from_element(1, 1, -a), Matrix::from_element(1, 1, 1.0), Matrix::from_element(1, 1, 1.0))
        .unwrap();
    let g = ControllerGains::scalar(0.0, 0.0, 0.0, 1.0);
    (build_closed_loop(&plant, &g, 0.0).unwrap(), g, plant)
}

fn endpoint_error(a: f64, horizon: f64, dt: f64) -> f64 {
    let (cl, g, p) = decay_loop(a);
    let cfg = SimConfig { horizon, dt, decimate: 1 };
    let tr = simulate(&cl, &g, &p, &ReferenceSignal::constant(1.0), &Vector::zeros(3), &cfg).unwrap();
    let exact = (1.0 - (-a * horizon).exp()) / a;
    (tr.states.last().unwrap()[0] - exact).abs()
}

#[test]
fn rk4_is_fourth_order_on_the_unit_decay() {
    assert!(endpoint_error(1.0, 1.0, 1e-3) <= 1e-8);
    let ratio = endpoint_error(1.0, 1.0, 0.1) / endpoint_error(1.0, 1.0, 0.05);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

fn two_state() -> (ClosedLoop, ControllerGains, PlantModel) {
    let plant = PlantModel::new(
        Matrix::from_row_slice(2, 2, &[-0.0304, 0.0187, 0.0, -0.0187]),
        Matrix::from_row_slice(2, 1, &[6.6667, 10.0]),
        Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
    )
    .unwrap();
    let g = ControllerGains::scalar(-3.8881, 0.3733, 0.0085, 3.3142);
    (build_closed_loop(&plant, &g, 1.0).unwrap(), g, plant)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn error_ratio_stays_fourth_order(a in 0.3..3.0f64) {
        let dt = 0.1 / a;
        let ratio = endpoint_error(a, 10.0 * dt, dt) / endpoint_error(a, 10.0 * dt, dt / 2.0);
        prop_assert!((12.0..=20.0).contains(&ratio), "a = {}, ratio {}", a, ratio);
    }

    #[test]
    fn sampled_sinusoid_solves_its_exosystem(amp in 0.01..1.0f64, omega in 0.1..1.5f64, phase in 0.0..6.3f64) {
        let s = ReferenceSignal::Sinusoid { amplitude: amp, omega, phase };
        let h = 1e-3;
        for k in 1..200 {
            let t = k as f64 * 0.37;
            let r = |t: f64| eval_reference(&s, t);
            let second = (r(t + h) - 2.0 * r(t) + r(t - h)) / (h * h);
            prop_assert!((second + omega * omega * r(t)).abs() <= 1e-6);
        }
    }

    #[test]
    fn response_is_linear_in_state_and_reference(
        xa in prop::collection::vec(-0.2..0.2f64, 4),
        xb in prop::collection::vec(-0.2..0.2f64, 4),
        amp_a in -0.2..0.2f64,
        amp_b in -0.2..0.2f64,
        phase in 0.0..6.3f64,
    ) {
        let (cl, g, p) = two_state();
        let cfg = SimConfig { horizon: 20.0, dt: 1e-2, decimate: 5 };
        let sig = |amplitude: f64| ReferenceSignal::Sinusoid { amplitude, omega: 1.0, phase };
        let (xa, xb) = (Vector::from_vec(xa), Vector::from_vec(xb));
        let ta = simulate(&cl, &g, &p, &sig(amp_a), &xa, &cfg).unwrap();
        let tb = simulate(&cl, &g, &p, &sig(amp_b), &xb, &cfg).unwrap();
        let tab = simulate(&cl, &g, &p, &sig(amp_a + amp_b), &(&xa + &xb), &cfg).unwrap();
        for k in 0..tab.len() {
            let sum = &ta.states[k] + &tb.states[k];
            prop_assert!((&tab.states[k] - &sum).amax() <= 1e-9 * (1.0 + sum.amax()));
            prop_assert!((tab.inputs[k][0] - ta.inputs[k][0] - tb.inputs[k][0]).abs() <= 1e-9);
        }
    }
}

#[test]
fn default_run_keeps_every_tenth_step() {
    let (cl, g, p) = two_state();
    let cfg = SimConfig::default();
    let tr = simulate(&cl, &g, &p, &ReferenceSignal::constant(0.1), &Vector::zeros(4), &cfg).unwrap();
    assert_eq!(tr.len(), 40_001);
    assert_eq!(tr.times[1], 10.0 * cfg.dt);
}
