#![allow(dead_code)]

pub mod invariants;

use ensemble_core::field::{sample, CompactInterval, ExprMatrix};
use ensemble_core::linalg::Mat;
use ensemble_core::{Field, System};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub fn strings(rows: &[&[&str]]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
}

pub fn field(rows: &[&[&str]], lo: f64, hi: f64, grid: usize) -> Field {
    let e = ExprMatrix::parse(&strings(rows), "beta").unwrap();
    sample(&e, CompactInterval::new(lo, hi).unwrap(), grid).unwrap()
}

pub fn owned_field(rows: &[Vec<String>], lo: f64, hi: f64, grid: usize) -> Field {
    let e = ExprMatrix::parse(rows, "beta").unwrap();
    sample(&e, CompactInterval::new(lo, hi).unwrap(), grid).unwrap()
}

pub fn system(a: &[&[&str]], b: &[&[&str]], lo: f64, hi: f64, grid: usize) -> System {
    System::parse("beta", (lo, hi), grid, &strings(a), &strings(b)).unwrap()
}

pub fn owned_system(a: &[Vec<String>], b: &[Vec<String>], lo: f64, hi: f64, grid: usize) -> System {
    System::parse("beta", (lo, hi), grid, a, b).unwrap()
}

/// `M` written as expression strings in `beta`-free form, `rows × cols`.
pub fn const_strings(m: &Mat<f64>) -> Vec<Vec<String>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| format!("{:?}", m[(i, j)])).collect()).collect()
}

/// `Σ_k l[i][k] · r[k][j]` as expression strings.
pub fn product_strings(l: &[Vec<String>], r: &[Vec<String>]) -> Vec<Vec<String>> {
    let inner = r.len();
    (0..l.len())
        .map(|i| {
            (0..r[0].len())
                .map(|j| {
                    let terms: Vec<String> = (0..inner).map(|k| format!("({})*({})", l[i][k], r[k][j])).collect();
                    terms.join(" + ")
                })
                .collect()
        })
        .collect()
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Exact rank of `[B | AB | … | A^{N−1}B]` over the rationals.
pub fn exact_kalman_rank(a: &Mat<f64>, b: &Mat<f64>) -> usize {
    let n = a.rows();
    let m = b.cols();
    let ar: Vec<Vec<BigRational>> = (0..n).map(|i| (0..n).map(|j| rational(a[(i, j)])).collect()).collect();
    let mut blk: Vec<Vec<BigRational>> = (0..n).map(|i| (0..m).map(|j| rational(b[(i, j)])).collect()).collect();
    let mut cols: Vec<Vec<BigRational>> = vec![Vec::new(); n];
    for step in 0..n {
        for i in 0..n {
            cols[i].extend(blk[i].iter().cloned());
        }
        if step + 1 < n {
            blk = (0..n)
                .map(|i| {
                    (0..m)
                        .map(|j| (0..n).fold(BigRational::zero(), |acc, k| acc + &ar[i][k] * &blk[k][j]))
                        .collect()
                })
                .collect();
        }
    }
    exact_rank(cols)
}

pub fn exact_rank(mut rows: Vec<Vec<BigRational>>) -> usize {
    let r = rows.len();
    if r == 0 {
        return 0;
    }
    let c = rows[0].len();
    let mut rank = 0;
    for col in 0..c {
        let Some(p) = (rank..r).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let inv = BigRational::one() / rows[rank][col].clone();
        for i in rank + 1..r {
            if rows[i][col].is_zero() {
                continue;
            }
            let f = &rows[i][col] * &inv;
            for k in col..c {
                let d = &f * &rows[rank][k];
                rows[i][k] -= d;
            }
        }
        rank += 1;
        if rank == r {
            break;
        }
    }
    rank
}

pub fn big(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// `diag(A(β₁), …, A(β_k))` and `(B(β₁); …; B(β_k))` at grid indices.
pub fn stacked(a: &Field, b: &Field, idx: &[usize]) -> (Mat<f64>, Mat<f64>) {
    let blocks: Vec<Mat<f64>> = idx.iter().map(|&j| a.mat_at(j)).collect();
    let inputs: Vec<Mat<f64>> = idx.iter().map(|&j| b.mat_at(j)).collect();
    (Mat::block_diag(&blocks), Mat::vstack(&inputs))
}
