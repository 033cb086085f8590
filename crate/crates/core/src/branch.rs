//! Injective branches of a scalar drift and preimage queries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{CompactInterval, SampledField};
use crate::scalar::Real;

pub const DEFAULT_TOL_MONO: f64 = 1e-9;
pub const DEFAULT_TOL_VAL: f64 = 1e-8;
const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch<T> {
    pub interval: CompactInterval<T>,
    /// Grid indices of the endpoints.
    pub start: usize,
    pub end: usize,
    /// +1 increasing, -1 decreasing, 0 constant.
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDecomposition<T> {
    pub branches: Vec<Branch<T>>,
    /// `S = a(K)`.
    pub range: CompactInterval<T>,
    pub degenerate: bool,
    /// Maximal flat runs longer than one grid step.
    pub flat_runs: Vec<CompactInterval<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preimage<T> {
    pub eta: T,
    pub points: Vec<T>,
}

impl<T> Preimage<T> {
    pub fn kappa(&self) -> usize {
        self.points.len()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreimageError {
    #[error("eta = {eta} lies outside the drift range [{lo}, {hi}]")]
    OutOfRange { eta: f64, lo: f64, hi: f64 },
    #[error("drift is constant on a subinterval; preimages are not finite")]
    Degenerate,
}

/// Splits `K` where consecutive differences of `a` change sign.
///
/// Differences with `|Δa| ≤ tol_mono · (max a − min a)` count as flat. A single
/// flat step is absorbed by its neighbours; a longer flat run marks the
/// decomposition degenerate.
pub fn decompose<T: Real>(a: &SampledField<T>, tol_mono: T) -> BranchDecomposition<T> {
    let v = a.scalar_values();
    let g = v.len();
    let (lo, hi) = v.iter().fold((v[0], v[0]), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let range = CompactInterval { lo, hi };
    let grid = a.grid();
    let span = |s: usize, e: usize| CompactInterval { lo: grid[s], hi: grid[e] };

    if a.interval().width() == T::zero() {
        return BranchDecomposition {
            branches: vec![Branch { interval: span(0, g - 1), start: 0, end: g - 1, sign: 0 }],
            range,
            degenerate: false,
            flat_runs: Vec::new(),
        };
    }

    let tol = tol_mono * (hi - lo);
    let signs: Vec<i8> = v
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            if d.abs() <= tol {
                0
            } else if d > T::zero() {
                1
            } else {
                -1
            }
        })
        .collect();

    let mut flat_runs = Vec::new();
    let mut k = 0;
    while k < signs.len() {
        if signs[k] == 0 {
            let s = k;
            while k < signs.len() && signs[k] == 0 {
                k += 1;
            }
            if k - s > 1 || signs.len() == 1 {
                flat_runs.push(span(s, k));
            }
        } else {
            k += 1;
        }
    }

    let mut branches = Vec::new();
    let mut start = 0;
    let mut cur: i8 = 0;
    // Last grid index reached by a step of the current sign.
    let mut last_strict = 0;
    for (k, &s) in signs.iter().enumerate() {
        if s == 0 {
            continue;
        }
        if cur != 0 && s != cur {
            // The extremum lies somewhere in last_strict..=k.
            let pick = (last_strict..=k)
                .reduce(|best, i| {
                    let better = if cur > 0 { v[i] > v[best] } else { v[i] < v[best] };
                    if better {
                        i
                    } else {
                        best
                    }
                })
                .unwrap_or(k);
            branches.push(Branch { interval: span(start, pick), start, end: pick, sign: cur });
            start = pick;
        }
        cur = s;
        last_strict = k + 1;
    }
    branches.push(Branch { interval: span(start, g - 1), start, end: g - 1, sign: cur });

    BranchDecomposition {
        degenerate: !flat_runs.is_empty(),
        branches,
        range,
        flat_runs,
    }
}

impl<T: Real> BranchDecomposition<T> {
    pub fn is_injective(&self) -> bool {
        self.branches.len() == 1 && !self.degenerate
    }

    /// Parameter values where two branches meet.
    pub fn junctions(&self) -> Vec<T> {
        self.branches.iter().skip(1).map(|b| b.interval.lo).collect()
    }

    /// Absolute value tolerance derived from the relative `tol_val`.
    pub fn value_tolerance(&self, tol_val: T) -> T {
        let mag = self.range.lo.abs().max(self.range.hi.abs());
        let scale = (self.range.hi - self.range.lo).max(mag);
        if scale == T::zero() {
            tol_val
        } else {
            tol_val * scale
        }
    }
}

/// All `β` with `a(β) = η`, one candidate per branch, merged when closer than `tol_merge`.
pub fn preimage<T: Real>(
    d: &BranchDecomposition<T>,
    a: &SampledField<T>,
    eta: T,
    tol_val: T,
    tol_merge: T,
) -> Result<Preimage<T>, PreimageError> {
    if d.degenerate {
        return Err(PreimageError::Degenerate);
    }
    let tol_abs = d.value_tolerance(tol_val);
    if eta < d.range.lo - tol_abs || eta > d.range.hi + tol_abs {
        return Err(PreimageError::OutOfRange {
            eta: eta.as_f64(),
            lo: d.range.lo.as_f64(),
            hi: d.range.hi.as_f64(),
        });
    }
    let v = a.scalar_values();
    let mut points = Vec::new();
    for br in &d.branches {
        let (va, vb) = (v[br.start], v[br.end]);
        let (lo, hi) = (va.min(vb), va.max(vb));
        if eta < lo - tol_abs || eta > hi + tol_abs {
            continue;
        }
        if br.start == br.end || br.sign == 0 {
            points.push(a.grid_point(br.start));
            continue;
        }
        points.push(locate(a, &v, br, eta.max(lo).min(hi)));
    }
    points.sort_by(|x, y| x.partial_cmp(y).expect("finite preimage"));
    let mut merged: Vec<T> = Vec::with_capacity(points.len());
    for p in points {
        match merged.last() {
            Some(&q) if p - q <= tol_merge => {}
            _ => merged.push(p),
        }
    }
    Ok(Preimage { eta, points: merged })
}

/// Root of `a(β) = η` on a monotone branch: bracketing cell by binary search,
/// linear interpolation, then bisection against the exact source if present.
fn locate<T: Real>(a: &SampledField<T>, v: &[T], br: &Branch<T>, eta: T) -> T {
    let up = br.sign > 0;
    // Key that increases along the branch.
    let key = |i: usize| if up { v[i] } else { -v[i] };
    let target = if up { eta } else { -eta };
    let (mut lo, mut hi) = (br.start, br.end);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if key(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (b0, b1) = (a.grid_point(lo), a.grid_point(hi));
    let (k0, k1) = (key(lo), key(hi));
    let linear = if k1 > k0 {
        b0 + (b1 - b0) * ((target - k0) / (k1 - k0)).max(T::zero()).min(T::one())
    } else {
        b0
    };

    let exact = |b: T| a.eval_refined(b).ok().map(|m| m[(0, 0)]);
    let (Some(f0), Some(f1)) = (exact(b0), exact(b1)) else {
        return linear;
    };
    let (g0, g1) = (f0 - eta, f1 - eta);
    if g0 == T::zero() {
        return b0;
    }
    if g1 == T::zero() {
        return b1;
    }
    if g0.signum() == g1.signum() {
        return linear;
    }
    let (mut l, mut r, mut gl) = (b0, b1, g0);
    for _ in 0..BISECTION_STEPS {
        let m = (l + r) / T::lit(2.0);
        if m <= l || m >= r {
            break;
        }
        let Some(fm) = exact(m) else { return linear };
        let gm = fm - eta;
        if gm == T::zero() {
            return m;
        }
        if gm.signum() == gl.signum() {
            l = m;
            gl = gm;
        } else {
            r = m;
        }
    }
    (l + r) / T::lit(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::field::sample_scalar;
    use std::f64::consts::PI;

    fn field(text: &str, lo: f64, hi: f64) -> SampledField<f64> {
        sample_scalar(&parse(text).unwrap(), CompactInterval::new(lo, hi).unwrap(), 201).unwrap()
    }

    fn intervals(d: &BranchDecomposition<f64>) -> Vec<(f64, f64)> {
        d.branches.iter().map(|b| (b.interval.lo, b.interval.hi)).collect()
    }

    #[test]
    fn parabola_two_branches() {
        let d = decompose(&field("beta^2", -1.0, 1.0), 1e-9);
        assert_eq!(intervals(&d), vec![(-1.0, 0.0), (0.0, 1.0)]);
        assert!(!d.degenerate);
        assert_eq!(d.range, CompactInterval { lo: 0.0, hi: 1.0 });
    }

    #[test]
    fn cosine_half_periods() {
        let d = decompose(&field("cos(beta)", -PI, PI), 1e-9);
        let iv = intervals(&d);
        assert_eq!(iv.len(), 2);
        assert_eq!(iv[0].0, -PI);
        assert!(iv[0].1.abs() < 1e-15);
        assert_eq!(iv[1].1, PI);
    }

    #[test]
    fn constant_is_degenerate() {
        let a = field("0", 0.0, 1.0);
        let d = decompose(&a, 1e-9);
        assert!(d.degenerate);
        assert_eq!(preimage(&d, &a, 0.0, 1e-8, 0.01), Err(PreimageError::Degenerate));
    }

    #[test]
    fn cosine_preimages() {
        let a = field("cos(beta)", -PI, PI);
        let d = decompose(&a, 1e-9);
        let tm = 2.0 * a.spacing();
        let p = preimage(&d, &a, 1.0, 1e-8, tm).unwrap();
        assert_eq!(p.kappa(), 1);
        assert!(p.points[0].abs() < 1e-12);
        let p = preimage(&d, &a, 0.0, 1e-8, tm).unwrap();
        assert_eq!(p.kappa(), 2);
        assert!((p.points[0] + PI / 2.0).abs() < 1e-12);
        assert!((p.points[1] - PI / 2.0).abs() < 1e-12);
        assert!(matches!(
            preimage(&d, &a, 1.5, 1e-8, tm),
            Err(PreimageError::OutOfRange { .. })
        ));
    }

    #[test]
    fn injective_drift() {
        let a = field("beta", 0.0, 1.0);
        let d = decompose(&a, 1e-9);
        assert!(d.is_injective());
        for eta in [0.0, 0.123, 0.5, 1.0] {
            let p = preimage(&d, &a, eta, 1e-8, 0.01).unwrap();
            assert_eq!(p.kappa(), 1);
            assert!((p.points[0] - eta).abs() < 1e-14);
        }
    }

    #[test]
    fn preimage_without_source_interpolates() {
        let a = field("beta^3", -1.0, 1.0).with_source(None);
        let d = decompose(&a, 1e-9);
        let p = preimage(&d, &a, 0.5, 1e-8, 0.02).unwrap();
        assert_eq!(p.kappa(), 1);
        assert!((p.points[0] - 0.5f64.cbrt()).abs() < 1e-3);
    }

    #[test]
    fn zero_width_interval() {
        let a = field("beta", 0.3, 0.3);
        let d = decompose(&a, 1e-9);
        assert!(d.is_injective());
        assert_eq!(preimage(&d, &a, 0.3, 1e-8, 0.0).unwrap().points, vec![0.3]);
    }
}
