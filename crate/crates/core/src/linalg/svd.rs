//! One-sided Jacobi SVD and numerical rank.
//!
//! Jacobi rotations act on column pairs until every pair is numerically
//! orthogonal. The method is slow for large matrices but attains high relative
//! accuracy in the small singular values, which is what rank decisions and
//! ill-conditioned least-squares solves depend on.

use super::Mat;
use crate::scalar::Real;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(s) Vᵀ` with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    /// rows × k
    pub u: Mat<T>,
    /// length k = min(rows, cols)
    pub s: Vec<T>,
    /// cols × k
    pub v: Mat<T>,
}

impl<T: Real> Svd<T> {
    pub fn new(a: &Mat<T>) -> Self {
        if a.rows() >= a.cols() {
            jacobi_tall(a)
        } else {
            let t = jacobi_tall(&a.transpose());
            Svd { u: t.v, s: t.s, v: t.u }
        }
    }

    pub fn largest(&self) -> T {
        self.s.first().copied().unwrap_or_else(T::zero)
    }

    /// Number of singular values strictly above `threshold`.
    pub fn rank_above(&self, threshold: T) -> usize {
        self.s.iter().filter(|s| **s > threshold).count()
    }

    /// Smallest singular value strictly above `threshold`, if any.
    pub fn smallest_retained(&self, threshold: T) -> Option<T> {
        self.s.iter().copied().filter(|s| *s > threshold).last()
    }

    /// 2-norm condition number; infinite when rank deficient.
    pub fn condition(&self) -> T {
        match self.s.last() {
            Some(&min) if min > T::zero() => self.largest() / min,
            _ => T::infinity(),
        }
    }

    /// Right singular vectors belonging to the `k` smallest singular values.
    pub fn trailing_right_vectors(&self, k: usize) -> Vec<Vec<T>> {
        let n = self.s.len();
        let mut out: Vec<Vec<T>> = (n.saturating_sub(k)..n).map(|j| self.v.column(j)).collect();
        // A wide input has a nontrivial null space not represented in the thin factor.
        if out.len() < k && self.v.rows() > n {
            out.extend(complete_null_space(&self.v, k - out.len()));
        }
        out
    }
}

fn jacobi_tall<T: Real>(a: &Mat<T>) -> Svd<T> {
    let (m, n) = a.shape();
    // Work column-major for cache-friendly rotations.
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();
    let eps = T::epsilon();
    let tiny = T::min_positive_value();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let cp = &cols[p];
                    let cq = &cols[q];
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma = T::zero();
                    for i in 0..m {
                        alpha += cp[i] * cp[i];
                        beta += cq[i] * cq[i];
                        gamma += cp[i] * cq[i];
                    }
                    (alpha, beta, gamma)
                };
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma.abs() < tiny {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(T, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (c.iter().map(|x| *x * *x).sum::<T>().sqrt(), j))
        .collect();
    order.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut u = Mat::zeros(m, n);
    let mut vm = Mat::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, (sigma, j)) in order.iter().enumerate() {
        s.push(*sigma);
        for i in 0..m {
            u[(i, k)] = if *sigma > T::zero() {
                cols[*j][i] / *sigma
            } else {
                T::zero()
            };
        }
        for i in 0..n {
            vm[(i, k)] = v[*j][i];
        }
    }
    Svd { u, s, v: vm }
}

fn rotate<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Orthonormal vectors orthogonal to the columns of `basis` (Gram–Schmidt on unit vectors).
fn complete_null_space<T: Real>(basis: &Mat<T>, k: usize) -> Vec<Vec<T>> {
    let n = basis.rows();
    let mut have: Vec<Vec<T>> = (0..basis.cols()).map(|j| basis.column(j)).collect();
    let mut out = Vec::new();
    for e in 0..n {
        if out.len() == k {
            break;
        }
        let mut x = vec![T::zero(); n];
        x[e] = T::one();
        for _ in 0..2 {
            for h in &have {
                let d: T = h.iter().zip(&x).map(|(a, b)| *a * *b).sum();
                for (xi, hi) in x.iter_mut().zip(h) {
                    *xi -= d * *hi;
                }
            }
        }
        let norm = x.iter().map(|v| *v * *v).sum::<T>().sqrt();
        if norm > T::lit(1e-3) {
            for xi in &mut x {
                *xi /= norm;
            }
            have.push(x.clone());
            out.push(x);
        }
    }
    out
}

/// Numerical rank: singular values above `tol_rel · max(σ_max, scale_floor)`.
pub fn numerical_rank<T: Real>(a: &Mat<T>, tol_rel: T, scale_floor: T) -> usize {
    if a.rows() == 0 || a.cols() == 0 {
        return 0;
    }
    let svd = Svd::new(a);
    svd.rank_above(tol_rel * svd.largest().max(scale_floor))
}
