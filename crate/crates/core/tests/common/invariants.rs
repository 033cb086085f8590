//! Generators and checks for the verdict invariants, shared by the property
//! suites and the acceptance harness.

use ensemble_core::linalg::{inverse, Mat};
use ensemble_core::multidim::{ensemble_verdict, kalman_rank};
use ensemble_core::scalar_verdict::{build_gramian, multi_input_verdict, single_input_verdict};
use ensemble_core::spectral::{classify, transformed_inputs, Structure};
use ensemble_core::{AnalysisConfig, Status, Verdict};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::{big, const_strings, exact_kalman_rank, exact_rank, field, owned_field, product_strings, stacked, strings};

pub const GRID: usize = 101;

pub fn cfg() -> AnalysisConfig {
    AnalysisConfig {
        grid: GRID,
        ..AnalysisConfig::default()
    }
}

pub type Check = Result<(), TestCaseError>;

pub const DRIFTS: &[&str] = &[
    "beta",
    "beta^2",
    "beta^3",
    "beta^2 + 0.5*beta",
    "cos(2*beta)",
    "exp(beta)",
    "beta^3 - 0.5*beta",
    "sin(3*beta)",
    "1 - beta^4",
];

pub const INPUTS: &[&str] = &[
    "1",
    "beta",
    "beta^2",
    "beta^3",
    "1 + beta",
    "cos(beta)",
    "2 - beta^2",
    "exp(beta)",
    "sin(2*beta)",
    "beta^4 + 1",
];

/// Eigenvalue pairs with disjoint or at most touching ranges on [-1, 1].
pub const SEPARATED: &[(&str, &str)] = &[
    ("beta", "beta + 2"),
    ("beta^2", "beta^2 + 1.5"),
    ("cos(2*beta)", "3 + beta"),
    ("beta^3", "beta + 3"),
    ("-beta", "2 + beta^2"),
];
pub const COUPLING: &[&str] = &["0", "1", "beta", "cos(beta)", "1 - beta^2"];
pub const NONZERO_COUPLING: &[&str] = &["1", "beta + 2", "cos(beta)", "2 - beta^2"];
pub const ENTRIES: &[&str] = &["1", "beta", "beta^2", "1 + beta", "2 - beta", "beta^3", "0"];
pub const CURVES: &[&str] = &["beta", "beta^2", "beta^3", "2*beta + 1", "exp(beta)", "beta - beta^2", "sin(2*beta)"];

fn inputs(m: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(INPUTS), m).prop_map(|v| v.into_iter().map(String::from).collect())
}

/// Scalar drift and an input row with one to three entries.
pub fn scalar_case() -> impl Strategy<Value = (String, Vec<String>)> {
    (prop::sample::select(DRIFTS).prop_map(String::from), (1usize..=3).prop_flat_map(inputs))
}

fn det(q: &Mat<f64>) -> f64 {
    match q.rows() {
        1 => q[(0, 0)],
        2 => q[(0, 0)] * q[(1, 1)] - q[(0, 1)] * q[(1, 0)],
        _ => {
            q[(0, 0)] * (q[(1, 1)] * q[(2, 2)] - q[(1, 2)] * q[(2, 1)])
                - q[(0, 1)] * (q[(1, 0)] * q[(2, 2)] - q[(1, 2)] * q[(2, 0)])
                + q[(0, 2)] * (q[(1, 0)] * q[(2, 1)] - q[(1, 1)] * q[(2, 0)])
        }
    }
}

/// Integer matrices with determinant ±1 or ±2: well conditioned, exactly invertible in binary.
pub fn unimodular(m: usize) -> impl Strategy<Value = Mat<f64>> {
    prop::collection::vec(-2i32..=2, m * m)
        .prop_map(move |v| Mat::from_row_major(m, m, v.into_iter().map(f64::from).collect()))
        .prop_filter("det ±1 or ±2", |q| {
            let d = det(q).abs();
            d == 1.0 || d == 2.0
        })
}

pub fn scalar_mixing_case() -> impl Strategy<Value = ((String, Vec<String>), Mat<f64>)> {
    scalar_case().prop_flat_map(|(a, b)| {
        let m = b.len();
        (Just((a, b)), unimodular(m))
    })
}

fn scalar_verdict(a: &str, b: &[String]) -> Verdict {
    let af = field(&[&[a]], -1.0, 1.0, GRID);
    let bf = owned_field(&[b.to_vec()], -1.0, 1.0, GRID);
    multi_input_verdict(&af, &bf, &cfg())
}

pub fn gramian_rank_bounded((a, b): (String, Vec<String>), u: f64) -> Check {
    let af = field(&[&[&a]], -1.0, 1.0, GRID);
    let bf = owned_field(std::slice::from_ref(&b), -1.0, 1.0, GRID);
    let (lo, hi) = af
        .scalar_values()
        .iter()
        .fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
    let eta = lo + u * (hi - lo);
    let g = build_gramian(&af, &bf, eta, &cfg()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(g.rank <= g.kappa().min(b.len()));
    prop_assert_eq!(g.d.shape(), (g.kappa(), b.len()));
    for w in g.points.windows(2) {
        prop_assert!(w[0] < w[1]);
    }
    Ok(())
}

pub fn scalar_input_mixing(((a, b), q): ((String, Vec<String>), Mat<f64>)) -> Check {
    let mixed = product_strings(std::slice::from_ref(&b), &const_strings(&q)).remove(0);
    let base = scalar_verdict(&a, &b);
    let mix = scalar_verdict(&a, &mixed);
    prop_assert_eq!(base.status, mix.status, "a = {}, B = {:?}, M = {:?}", a, b, q);
    Ok(())
}

pub fn scalar_necessity((a, b): (String, Vec<String>), picks: Vec<(usize, usize)>) -> Check {
    let v = scalar_verdict(&a, &b);
    if v.status != Status::Controllable {
        return Ok(());
    }
    let af = field(&[&[&a]], -1.0, 1.0, GRID);
    let bf = owned_field(std::slice::from_ref(&b), -1.0, 1.0, GRID);
    let mirrored = (0..GRID).map(|j| (j, GRID - 1 - j));
    for (i, j) in picks.into_iter().chain(mirrored).filter(|(i, j)| i != j) {
        let (sa, sb) = stacked(&af, &bf, &[i, j]);
        prop_assert_eq!(exact_kalman_rank(&sa, &sb), 2, "a = {}, B = {:?}, pair ({}, {})", a, b, i, j);
    }
    Ok(())
}

pub fn single_multi_agree(a: &str, b: &str, lo: f64) -> Check {
    let af = field(&[&[a]], lo, 1.0, GRID);
    let bf = field(&[&[b]], lo, 1.0, GRID);
    let s = single_input_verdict(&af, &bf, &cfg());
    let m = multi_input_verdict(&af, &bf, &cfg());
    prop_assert_eq!(s.status, m.status, "a = {}, b = {} on [{}, 1]", a, b, lo);
    Ok(())
}

pub fn verdict(a: &[Vec<String>], b: &[Vec<String>], lo: f64, hi: f64) -> Verdict {
    let af = owned_field(a, lo, hi, GRID);
    let bf = owned_field(b, lo, hi, GRID);
    ensemble_verdict(&af, &bf, &cfg()).unwrap()
}

pub fn input(n: usize) -> impl Strategy<Value = Vec<Vec<String>>> {
    (1usize..=2).prop_flat_map(move |m| {
        prop::collection::vec(prop::collection::vec(prop::sample::select(ENTRIES).prop_map(String::from), m), n)
    })
}

/// Upper-triangular drift with separated diagonal curves and a coupling term.
pub fn triangular() -> impl Strategy<Value = Vec<Vec<String>>> {
    (prop::sample::select(SEPARATED), prop::sample::select(COUPLING), any::<bool>()).prop_map(|((l1, l2), c, swap)| {
        let (l1, l2) = if swap { (l2, l1) } else { (l1, l2) };
        strings(&[&[l1, c], &["0", l2]])
    })
}

pub fn jordan(lambda: &str, n: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match j {
                    _ if j == i => lambda.to_string(),
                    _ if j == i + 1 => "1".to_string(),
                    _ => "0".to_string(),
                })
                .collect()
        })
        .collect()
}

pub fn diagonal(curves: &[&str]) -> Vec<Vec<String>> {
    let n = curves.len();
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { curves[i].to_string() } else { "0".into() }).collect())
        .collect()
}

pub fn similarity_invariance(a: Vec<Vec<String>>, b: Vec<Vec<String>>, q: Mat<f64>) -> Check {
    let qi = inverse(&q).unwrap();
    let qs = const_strings(&q);
    let qa = product_strings(&product_strings(&qs, &a), &const_strings(&qi));
    let qb = product_strings(&qs, &b);
    let base = verdict(&a, &b, -1.0, 1.0);
    let conj = verdict(&qa, &qb, -1.0, 1.0);
    prop_assert_eq!(base.status, conj.status, "A = {:?}, B = {:?}, Q = {:?}", a, b, q);
    Ok(())
}

pub fn md_mixing_case() -> impl Strategy<Value = (Vec<Vec<String>>, Vec<Vec<String>>, Mat<f64>)> {
    (triangular(), input(2)).prop_flat_map(|(a, b)| {
        let m = b[0].len();
        (Just(a), Just(b), unimodular(m))
    })
}

pub fn md_input_mixing((a, b, q): (Vec<Vec<String>>, Vec<Vec<String>>, Mat<f64>)) -> Check {
    let mixed = product_strings(&b, &const_strings(&q));
    prop_assert_eq!(
        verdict(&a, &b, -1.0, 1.0).status,
        verdict(&a, &mixed, -1.0, 1.0).status,
        "A = {:?}, B = {:?}, M = {:?}",
        a,
        b,
        q
    );
    Ok(())
}

/// The triangular pathway gives the verdict of `diag(λ₁, λ₂)` driven by the same `B̃`.
pub fn triangular_pathway(l1: &str, l2: &str, c: &str, b: Vec<Vec<String>>) -> Check {
    let a = strings(&[&[l1, c], &["0", l2]]);
    let af = owned_field(&a, 0.0, 1.0, GRID);
    let bf = owned_field(&b, 0.0, 1.0, GRID);
    let p = classify(&af, &cfg());
    prop_assert_eq!(p.structure, Structure::Triangular);
    for j in 0..GRID {
        prop_assert_eq!(p.curves[0].scalar_at(j), af.mat_at(j)[(0, 0)]);
        prop_assert_eq!(p.curves[1].scalar_at(j), af.mat_at(j)[(1, 1)]);
    }
    let bt = transformed_inputs(&p, &bf, &cfg()).unwrap().btilde;
    let d = owned_field(&diagonal(&[l1, l2]), 0.0, 1.0, GRID);
    let tri = ensemble_verdict(&af, &bf, &cfg()).unwrap();
    let diag = ensemble_verdict(&d, &bt, &cfg()).unwrap();
    prop_assert_eq!(tri.status, diag.status, "A = {:?}, B = {:?}", a, b);
    Ok(())
}

pub fn jordan_input(n: usize, m: usize, seed: &[&str]) -> Vec<Vec<String>> {
    (0..n).map(|i| (0..m).map(|j| seed[(i * 3 + j) % seed.len()].to_string()).collect()).collect()
}

pub fn jordan_diagonal_agree(lambda: &str, n: usize, b: Vec<Vec<String>>) -> Check {
    let j = verdict(&jordan(lambda, n), &b, 0.0, 1.0);
    let d = verdict(&diagonal(&vec![lambda; n]), &b, 0.0, 1.0);
    prop_assert_eq!(j.status, d.status, "lambda = {}, B = {:?}", lambda, b);
    Ok(())
}

pub fn md_necessity(family: usize, a: Vec<Vec<String>>, lambda: &str, b: Vec<Vec<String>>, idx: Vec<usize>) -> Check {
    let a = match family {
        0 => a,
        1 => jordan(lambda, 2),
        _ => diagonal(&[lambda, "beta + 0.5"]),
    };
    let (lo, hi) = if family == 0 { (-1.0, 1.0) } else { (0.0, 1.0) };
    let v = verdict(&a, &b, lo, hi);
    if v.status != Status::Controllable {
        return Ok(());
    }
    let af = owned_field(&a, lo, hi, GRID);
    let bf = owned_field(&b, lo, hi, GRID);
    let (sa, sb) = stacked(&af, &bf, &idx);
    prop_assert_eq!(exact_kalman_rank(&sa, &sb), 2 * idx.len(), "A = {:?}, B = {:?}, at {:?}", a, b, idx);
    Ok(())
}

/// Per-eigenvalue test: the rows attached to each distinct diagonal value are independent.
fn hautus_full_rank(values: &[f64], rows: &Mat<f64>) -> bool {
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    distinct.iter().all(|&v| {
        let idx: Vec<usize> = (0..values.len()).filter(|&i| values[i] == v).collect();
        let sub = rows.select_rows(&idx);
        exact_rank(
            (0..sub.rows())
                .map(|i| (0..sub.cols()).map(|j| big(sub[(i, j)] as i64)).collect())
                .collect(),
        ) == idx.len()
    })
}

pub fn kalman_matches_hautus(slots: Vec<usize>, m: usize, entries: Vec<i32>) -> Check {
    let palette = [-0.9, -0.3, 0.4, 1.0];
    let values: Vec<f64> = slots.iter().map(|&s| palette[s]).collect();
    let n = values.len();
    let b = Mat::from_fn(n, m, |i, j| f64::from(entries[i * 3 + j]));
    let full = kalman_rank(&Mat::diag(&values), &b, 1e-8) == n;
    prop_assert_eq!(full, hautus_full_rank(&values, &b), "diag {:?}, B = {:?}", values, b);
    Ok(())
}
