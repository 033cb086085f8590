//! Stratified sampling of drift values η over the range of a scalar drift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::branch::BranchDecomposition;
use crate::field::SampledField;
use crate::scalar::Real;

/// Open strata of `a(K)` between images of branch endpoints, and the guard
/// bands around images of branch junctions.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaPlan<T> {
    pub strata: Vec<(T, T)>,
    pub guard_bands: Vec<(T, T)>,
    /// Images of branch junctions and of the interval endpoints.
    pub boundary_values: Vec<T>,
}

pub fn eta_plan<T: Real>(d: &BranchDecomposition<T>, a: &SampledField<T>, tol_merge: T) -> EtaPlan<T> {
    let v = a.scalar_values();
    let mut cuts: Vec<T> = d.branches.iter().flat_map(|b| [v[b.start], v[b.end]]).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite drift"));
    cuts.dedup();

    let mut guard_bands = Vec::new();
    for b in d.branches.iter().skip(1) {
        let beta_j = a.grid_point(b.start);
        let (mut lo, mut hi) = (v[b.start], v[b.start]);
        let reach = tol_merge + a.spacing() * T::lit(1e-9);
        for (j, &x) in v.iter().enumerate() {
            if (a.grid_point(j) - beta_j).abs() <= reach {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if let Ok(m) = a.eval_refined(beta_j) {
            lo = lo.min(m[(0, 0)]);
            hi = hi.max(m[(0, 0)]);
        }
        guard_bands.push((lo, hi));
    }

    let strata = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    EtaPlan {
        strata,
        guard_bands,
        boundary_values: cuts,
    }
}

impl<T: Real> EtaPlan<T> {
    pub fn in_guard_band(&self, eta: T) -> bool {
        self.guard_bands.iter().any(|&(lo, hi)| eta >= lo && eta <= hi)
    }

    /// Strata with guard bands removed.
    pub fn open_pieces(&self) -> Vec<(T, T)> {
        let mut pieces = Vec::new();
        for &(lo, hi) in &self.strata {
            let mut cur = vec![(lo, hi)];
            for &(gl, gh) in &self.guard_bands {
                cur = cur
                    .into_iter()
                    .flat_map(|(l, h)| {
                        let mut out = Vec::new();
                        if gl > l {
                            out.push((l, gl.min(h)));
                        }
                        if gh < h {
                            out.push((gh.max(l), h));
                        }
                        out
                    })
                    .filter(|(l, h)| h > l)
                    .collect();
            }
            pieces.extend(cur);
        }
        pieces
    }

    /// `n` jittered stratified samples, at least one per open piece, ascending.
    /// A single-point range yields that point.
    pub fn samples(&self, n: usize, seed: u64) -> Vec<T> {
        let pieces = self.open_pieces();
        if pieces.is_empty() {
            return if self.strata.is_empty() {
                self.boundary_values.first().copied().into_iter().collect()
            } else {
                Vec::new()
            };
        }
        let total: T = pieces.iter().map(|(l, h)| *h - *l).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n.max(pieces.len()));
        for &(l, h) in &pieces {
            let share = ((h - l) / total * T::from_usize_lossy(n)).round().to_usize().unwrap_or(0);
            let c = share.max(1);
            let w = (h - l) / T::from_usize_lossy(c);
            for i in 0..c {
                let u: f64 = rng.gen_range(0.05..0.95);
                out.push(l + w * (T::from_usize_lossy(i) + T::lit(u)));
            }
        }
        out.sort_by(|x, y| x.partial_cmp(y).expect("finite sample"));
        out
    }
}
