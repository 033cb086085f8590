use ensemble_core::branch::{decompose, preimage, PreimageError, DEFAULT_TOL_MONO, DEFAULT_TOL_VAL};
use ensemble_core::expr::parse;
use ensemble_core::field::{sample_scalar, CompactInterval};
use ensemble_core::Field;
use proptest::prelude::*;

const PI: f64 = std::f64::consts::PI;

fn scalar(text: &str, lo: f64, hi: f64, grid: usize) -> Field {
    sample_scalar(&parse(text).unwrap(), CompactInterval::new(lo, hi).unwrap(), grid).unwrap()
}

fn cubic(c: [f64; 4]) -> String {
    format!("{:?} + {:?}*beta + {:?}*beta^2 + {:?}*beta^3", c[0], c[1], c[2], c[3])
}

fn coefficients() -> impl Strategy<Value = [f64; 4]> {
    [-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0]
        .prop_filter("not nearly constant", |c| c[1].abs() + c[2].abs() + c[3].abs() > 0.2)
}

#[test]
fn decomposition_examples() {
    let d = decompose(&scalar("beta^2", -1.0, 1.0, 201), DEFAULT_TOL_MONO);
    let ends: Vec<(f64, f64)> = d.branches.iter().map(|b| (b.interval.lo, b.interval.hi)).collect();
    assert_eq!(ends, vec![(-1.0, 0.0), (0.0, 1.0)]);
    assert!(!d.degenerate);

    let d = decompose(&scalar("cos(beta)", -PI, PI, 201), DEFAULT_TOL_MONO);
    assert_eq!(d.branches.len(), 2);
    assert!((d.branches[0].interval.lo + PI).abs() < 1e-15 && d.branches[0].interval.hi.abs() < 1e-15);
    assert!((d.branches[1].interval.hi - PI).abs() < 1e-15);

    assert!(decompose(&scalar("0", 0.0, 1.0, 201), DEFAULT_TOL_MONO).degenerate);
}

#[test]
fn preimage_examples() {
    let a = scalar("cos(beta)", -PI, PI, 201);
    let d = decompose(&a, DEFAULT_TOL_MONO);
    let merge = 2.0 * a.spacing();
    let p = preimage(&d, &a, 1.0, DEFAULT_TOL_VAL, merge).unwrap();
    assert_eq!(p.kappa(), 1);
    assert!(p.points[0].abs() < 1e-12);
    let p = preimage(&d, &a, 0.0, DEFAULT_TOL_VAL, merge).unwrap();
    assert_eq!(p.kappa(), 2);
    assert!((p.points[0] + PI / 2.0).abs() < 1e-10 && (p.points[1] - PI / 2.0).abs() < 1e-10);

    let a = scalar("beta", 0.0, 1.0, 201);
    let d = decompose(&a, DEFAULT_TOL_MONO);
    for eta in [0.0, 0.123, 0.5, 1.0] {
        assert_eq!(preimage(&d, &a, eta, DEFAULT_TOL_VAL, 0.01).unwrap().kappa(), 1);
    }
    assert!(matches!(preimage(&d, &a, 1.5, DEFAULT_TOL_VAL, 0.01), Err(PreimageError::OutOfRange { .. })));
    let flat = scalar("0", 0.0, 1.0, 11);
    assert_eq!(
        preimage(&decompose(&flat, DEFAULT_TOL_MONO), &flat, 0.0, DEFAULT_TOL_VAL, 0.1),
        Err(PreimageError::Degenerate)
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn preimages_solve_and_are_bounded(c in coefficients(), u in 0.01f64..0.99) {
        let text = cubic(c);
        let e = parse(&text).unwrap();
        let a = scalar(&text, -1.0, 1.0, 201);
        let d = decompose(&a, DEFAULT_TOL_MONO);
        prop_assert!(!d.degenerate);
        for w in d.branches.windows(2) {
            prop_assert_eq!(w[0].interval.hi, w[1].interval.lo);
            prop_assert!(w[0].sign != w[1].sign);
        }
        prop_assert_eq!(d.branches.first().unwrap().interval.lo, -1.0);
        prop_assert_eq!(d.branches.last().unwrap().interval.hi, 1.0);
        let eta = d.range.lo + u * (d.range.hi - d.range.lo);
        let tol_merge = 2.0 * a.spacing();
        let p = preimage(&d, &a, eta, DEFAULT_TOL_VAL, tol_merge).unwrap();
        prop_assert!(p.kappa() >= 1);
        prop_assert!(p.kappa() <= d.branches.len());
        let tol = 10.0 * d.value_tolerance(DEFAULT_TOL_VAL);
        for &b in &p.points {
            prop_assert!((e.evaluate(b).unwrap() - eta).abs() <= tol, "a({}) = {} vs {}", b, e.evaluate(b).unwrap(), eta);
        }
        for w in p.points.windows(2) {
            prop_assert!(w[1] - w[0] > tol_merge);
        }
    }

    #[test]
    fn monotone_drift_has_kappa_one(c0 in -2.0f64..2.0, c1 in 1.0f64..4.0, c2 in -0.15f64..0.15, c3 in -0.1f64..0.1, u in 0.0f64..=1.0, flip in any::<bool>()) {
        let s = if flip { -1.0 } else { 1.0 };
        let text = cubic([c0, s * c1, c2, s * c3]);
        let a = scalar(&text, -1.0, 1.0, 201);
        let d = decompose(&a, DEFAULT_TOL_MONO);
        prop_assert!(d.is_injective());
        let eta = d.range.lo + u * (d.range.hi - d.range.lo);
        prop_assert_eq!(preimage(&d, &a, eta, DEFAULT_TOL_VAL, 2.0 * a.spacing()).unwrap().kappa(), 1);
    }

    #[test]
    fn branch_count_shift_invariant(c in coefficients(), shift in -5.0f64..5.0) {
        let a = scalar(&cubic(c), -1.0, 1.0, 201);
        let shifted = scalar(&cubic([c[0] + shift, c[1], c[2], c[3]]), -1.0, 1.0, 201);
        prop_assert_eq!(
            decompose(&a, DEFAULT_TOL_MONO).branches.len(),
            decompose(&shifted, DEFAULT_TOL_MONO).branches.len()
        );
    }

    #[test]
    fn oscillating_drift_branches(w in 0.5f64..6.0, phase in -3.0f64..3.0) {
        let text = format!("sin({w:?}*beta + {phase:?})");
        let a = scalar(&text, -1.0, 1.0, 401);
        let d = decompose(&a, DEFAULT_TOL_MONO);
        // interior critical points of sin(wβ + φ): wβ + φ = π/2 + kπ
        let crit: Vec<f64> = (-20i32..20)
            .map(|k| (PI / 2.0 + k as f64 * PI - phase) / w)
            .filter(|b| b.abs() < 1.0)
            .collect();
        prop_assume!(crit.iter().all(|b| 1.0 - b.abs() > 0.02));
        let crit = crit.len();
        prop_assert_eq!(d.branches.len(), crit + 1);
    }
}
