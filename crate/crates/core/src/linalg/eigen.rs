//! Eigenvalues of a general real matrix: Householder reduction to upper
//! Hessenberg form followed by the Francis double-shift QR iteration
//! (EISPACK `orthes` / `hqr`). Eigenvectors are obtained separately from
//! null spaces, see [`eigenvectors_for`].

use super::{Mat, Svd};
use crate::scalar::Real;

const MAX_ITER_PER_EIGENVALUE: usize = 60;

/// Eigenvalue as (real, imaginary) parts.
pub type Eigenvalue<T> = (T, T);

/// All eigenvalues of `a`, or `None` if the QR iteration does not converge.
pub fn eigenvalues<T: Real>(a: &Mat<T>) -> Option<Vec<Eigenvalue<T>>> {
    assert!(a.is_square(), "eigenvalues of non-square matrix");
    let n = a.rows();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut h = a.clone();
    hessenberg(&mut h);
    hqr(h)
}

fn hessenberg<T: Real>(h: &mut Mat<T>) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let mut ort = vec![T::zero(); n];
    let high = n - 1;
    for m in 1..high {
        let scale: T = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == T::zero() {
            continue;
        }
        let mut hh = T::zero();
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > T::zero() {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = T::zero();
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                let o = ort[i];
                h[(i, j)] -= f * o;
            }
        }
        for i in 0..=high {
            let mut f = T::zero();
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                let o = ort[j];
                h[(i, j)] -= f * o;
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
        for i in (m + 1)..=high {
            h[(i, m - 1)] = T::zero();
        }
    }
}

#[allow(clippy::many_single_char_names)]
fn hqr<T: Real>(mut h: Mat<T>) -> Option<Vec<Eigenvalue<T>>> {
    let nn = h.rows();
    let mut wr = vec![T::zero(); nn];
    let mut wi = vec![T::zero(); nn];
    let eps = T::epsilon();
    let two = T::lit(2.0);
    let low: isize = 0;
    let mut n: isize = nn as isize - 1;
    let mut exshift = T::zero();
    let (mut p, mut q, mut r) = (T::zero(), T::zero(), T::zero());
    let (mut s, mut w, mut x, mut y, mut z);

    let mut norm = T::zero();
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut iter = 0usize;
    let at = |i: isize, j: isize| (i as usize, j as usize);

    while n >= low {
        let mut l = n;
        while l > low {
            s = h[at(l - 1, l - 1)].abs() + h[at(l, l)].abs();
            if s == T::zero() {
                s = norm;
            }
            if h[at(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            h[at(n, n)] += exshift;
            wr[n as usize] = h[at(n, n)];
            wi[n as usize] = T::zero();
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = h[at(n, n - 1)] * h[at(n - 1, n)];
            p = (h[at(n - 1, n - 1)] - h[at(n, n)]) / two;
            q = p * p + w;
            z = q.abs().sqrt();
            h[at(n, n)] += exshift;
            h[at(n - 1, n - 1)] += exshift;
            x = h[at(n, n)];
            let (i1, i0) = ((n - 1) as usize, n as usize);
            if q >= T::zero() {
                z = if p >= T::zero() { p + z } else { p - z };
                wr[i1] = x + z;
                wr[i0] = wr[i1];
                if z != T::zero() {
                    wr[i0] = x - w / z;
                }
                wi[i1] = T::zero();
                wi[i0] = T::zero();
            } else {
                wr[i1] = x + p;
                wr[i0] = x + p;
                wi[i1] = z;
                wi[i0] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = h[at(n, n)];
            y = T::zero();
            w = T::zero();
            if l < n {
                y = h[at(n - 1, n - 1)];
                w = h[at(n, n - 1)] * h[at(n - 1, n)];
            }
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    h[at(i, i)] -= x;
                }
                s = h[at(n, n - 1)].abs() + h[at(n - 1, n - 2)].abs();
                x = T::lit(0.75) * s;
                y = x;
                w = T::lit(-0.4375) * s * s;
            }
            if iter == 30 {
                s = (y - x) / two;
                s = s * s + w;
                if s > T::zero() {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / two + s);
                    for i in low..=n {
                        h[at(i, i)] -= s;
                    }
                    exshift += s;
                    x = T::lit(0.964);
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            if iter > MAX_ITER_PER_EIGENVALUE {
                return None;
            }

            let mut m = n - 2;
            while m >= l {
                z = h[at(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[at(m + 1, m)] + h[at(m, m + 1)];
                q = h[at(m + 1, m + 1)] - z - r - s;
                r = h[at(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[at(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[at(m - 1, m - 1)].abs() + z.abs() + h[at(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                h[at(i, i - 2)] = T::zero();
                if i > m + 2 {
                    h[at(i, i - 3)] = T::zero();
                }
            }

            let mut k = m;
            while k < n {
                let notlast = k != n - 1;
                let mut skip = false;
                if k != m {
                    p = h[at(k, k - 1)];
                    q = h[at(k + 1, k - 1)];
                    r = if notlast { h[at(k + 2, k - 1)] } else { T::zero() };
                    x = p.abs() + q.abs() + r.abs();
                    if x == T::zero() {
                        skip = true;
                    } else {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                if !skip {
                    s = (p * p + q * q + r * r).sqrt();
                    if p < T::zero() {
                        s = -s;
                    }
                    if s != T::zero() {
                        if k != m {
                            h[at(k, k - 1)] = -s * x;
                        } else if l != m {
                            h[at(k, k - 1)] = -h[at(k, k - 1)];
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;

                        for j in k..nn as isize {
                            p = h[at(k, j)] + q * h[at(k + 1, j)];
                            if notlast {
                                p += r * h[at(k + 2, j)];
                                h[at(k + 2, j)] -= p * z;
                            }
                            h[at(k, j)] -= p * x;
                            h[at(k + 1, j)] -= p * y;
                        }
                        let top = n.min(k + 3);
                        for i in 0..=top {
                            p = x * h[at(i, k)] + y * h[at(i, k + 1)];
                            if notlast {
                                p += z * h[at(i, k + 2)];
                                h[at(i, k + 2)] -= p * r;
                            }
                            h[at(i, k)] -= p;
                            h[at(i, k + 1)] -= p * q;
                        }
                    }
                }
                k += 1;
            }
        }
    }
    Some(wr.into_iter().zip(wi).collect())
}

/// Orthonormal basis (as columns) of the approximate eigenspace of `a` for the
/// eigenvalue `lambda` with algebraic multiplicity `mult`: the right singular
/// vectors of `a - λI` for its `mult` smallest singular values, together with
/// the largest of those singular values.
pub fn eigenvectors_for<T: Real>(a: &Mat<T>, lambda: T, mult: usize) -> (Vec<Vec<T>>, T) {
    let n = a.rows();
    let shifted = a.sub(&Mat::identity(n).scale(lambda));
    let svd = Svd::new(&shifted);
    let k = mult.min(n);
    let residual = if k == 0 { T::zero() } else { svd.s[n - k] };
    (svd.trailing_right_vectors(k), residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_real(ev: &[Eigenvalue<f64>]) -> Vec<f64> {
        let mut v: Vec<f64> = ev.iter().map(|e| e.0).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn triangular_spectrum() {
        let a = Mat::from_rows(&[
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0, -2.0, 1.0, 0.5],
            vec![0.0, 0.0, 5.0, 1.0],
            vec![0.0, 0.0, 0.0, 0.25],
        ]);
        let ev = eigenvalues(&a).unwrap();
        assert!(ev.iter().all(|e| e.1 == 0.0));
        let v = sorted_real(&ev);
        for (got, want) in v.iter().zip([-2.0, 0.25, 1.0, 5.0]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn similarity_of_diagonal() {
        // Q diag(1, 2, 3, -1) Q^{-1} with a fixed well-conditioned Q
        let q = Mat::from_rows(&[
            vec![1.0, 0.5, 0.0, 0.2],
            vec![0.3, 1.0, -0.4, 0.0],
            vec![0.0, 0.1, 1.0, 0.6],
            vec![-0.2, 0.0, 0.3, 1.0],
        ]);
        let qi = crate::linalg::inverse(&q).unwrap();
        let a = q.matmul(&Mat::diag(&[1.0, 2.0, 3.0, -1.0])).matmul(&qi);
        let v = sorted_real(&eigenvalues(&a).unwrap());
        for (got, want) in v.iter().zip([-1.0, 1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-11, "{got} vs {want}");
        }
    }

    #[test]
    fn complex_pair_reported() {
        let a = Mat::from_rows(&[vec![0.0f64, -1.0], vec![1.0, 0.0]]);
        let ev = eigenvalues(&a).unwrap();
        assert!(ev.iter().all(|e| (e.1.abs() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn eigenvector_of_symmetric_swap() {
        let a = Mat::from_rows(&[vec![0.0f64, 1.0], vec![1.0, 0.0]]);
        let (v, res) = eigenvectors_for(&a, 1.0, 1);
        assert!(res < 1e-14);
        assert!((v[0][0].abs() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((v[0][0] - v[0][1]).abs() < 1e-14);
    }
}
