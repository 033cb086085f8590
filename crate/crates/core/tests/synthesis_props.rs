mod common;

use common::{field, strings};
use ensemble_core::synthesis::{free_evolution, simulate, synthesize, ControlSchedule, SynthesisOptions};
use ensemble_core::System;
use proptest::prelude::*;

const GRID: usize = 41;

fn system(a: &str, b: &[&str]) -> System {
    System::parse("beta", (0.0, 1.0), GRID, &strings(&[&[a]]), &strings(&[b])).unwrap()
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

const DRIFTS: &[&str] = &["beta", "-beta", "beta^2 - 0.5", "cos(beta)", "0.3*beta + 0.1"];
const INPUTS: &[&str] = &["1", "beta", "1 + beta^2", "exp(-beta)"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn zero_control_is_free_evolution(a in prop::sample::select(DRIFTS), x0 in prop::sample::select(INPUTS), t in 0.1f64..2.0) {
        let sys = system(a, &["1"]);
        let x = field(&[&[x0]], 0.0, 1.0, GRID);
        let sched = ControlSchedule::zeros(t, 3, 1);
        let sim = simulate(&sys, &x, &sched, 200).unwrap();
        let exact = free_evolution(&sys, &x, t);
        prop_assert!(max_abs(sim.values(), &exact) <= 1e-9 * exact.iter().fold(1.0f64, |m, v| m.max(v.abs())));
    }

    #[test]
    fn simulation_is_affine_in_the_control(
        a in prop::sample::select(DRIFTS),
        b in prop::sample::select(INPUTS),
        u in prop::collection::vec(-2.0f64..2.0, 4),
        v in prop::collection::vec(-2.0f64..2.0, 4),
        s in -1.5f64..1.5,
    ) {
        let sys = system(a, &[b]);
        let zero = field(&[&["0"]], 0.0, 1.0, GRID);
        let sched = |w: Vec<f64>| ControlSchedule::new(1.0, w.into_iter().map(|x| vec![x]).collect()).unwrap();
        let run = |w: Vec<f64>| simulate(&sys, &zero, &sched(w), 25).unwrap().values().to_vec();
        let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x + s * y).collect();
        let lhs = run(combo);
        let rhs: Vec<f64> = run(u).iter().zip(run(v)).map(|(x, y)| x + s * y).collect();
        prop_assert!(max_abs(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn reachable_targets_are_recovered(
        a in prop::sample::select(DRIFTS),
        u in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let sys = system(a, &["1", "beta"]);
        let x0 = field(&[&["0"]], 0.0, 1.0, GRID);
        let sched = ControlSchedule::new(1.0, u.iter().map(|&x| vec![x, -x]).collect()).unwrap();
        let xf = simulate(&sys, &x0, &sched, 400).unwrap();
        let opts = SynthesisOptions { ridge: 0.0, ..SynthesisOptions::new(1.0, 4) };
        let (_, report) = synthesize(&sys, &x0, &xf, &opts).unwrap();
        prop_assert!(report.predicted_error <= 1e-8, "{}", report.predicted_error);
    }
}

#[test]
fn dyadic_refinement_does_not_increase_residual() {
    let sys = system("beta^2", &["1", "beta"]);
    let x0 = field(&[&["0"]], 0.0, 1.0, GRID);
    let xf = field(&[&["sin(3*beta)"]], 0.0, 1.0, GRID);
    let norm = xf.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let residuals: Vec<f64> = [1, 2, 4, 8, 16]
        .iter()
        .map(|&p| {
            let opts = SynthesisOptions { ridge: 0.0, ..SynthesisOptions::new(1.0, p) };
            synthesize(&sys, &x0, &xf, &opts).unwrap().1.residual_l2
        })
        .collect();
    for w in residuals.windows(2) {
        assert!(w[1] <= w[0] + 1e-10 * norm, "{residuals:?}");
    }
}
