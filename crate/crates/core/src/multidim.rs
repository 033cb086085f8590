//! Controllability of `ẋ = A(β)x + B(β)U` through the reparameterized block
//! system `diag(η₁I_{κ₁}, …, ηₙI_{κₙ})` with stacked channel Gramians.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::branch::{decompose, preimage, BranchDecomposition, PreimageError};
use crate::config::AnalysisConfig;
use crate::field::SampledField;
use crate::linalg::{Mat, Svd};
use crate::sampling::{eta_plan, EtaPlan};
use crate::scalar::Real;
use crate::scalar_verdict::{gramian_at_points, with_refinement};
use crate::spectral::{classify, transformed_inputs, SpectralProfile, Structure};
use crate::verdict::{Evidence, GramianSummary, ReasonCode, SamplingSummary, Status, Verdict};

pub const MAX_CHANNELS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MultidimError {
    #[error("state dimension {0} exceeds the supported maximum of {MAX_CHANNELS}")]
    TooManyChannels(usize),
    #[error("eigenvalue curve {channel} is constant on a subinterval")]
    DegenerateCurve { channel: usize },
    #[error("channel {channel}: {source}")]
    Preimage {
        channel: usize,
        #[source]
        source: PreimageError,
    },
    #[error("expected {expected} eta values, got {got}")]
    TupleLength { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// The finite block system attached to one η-tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct ReparameterizedSystem<T> {
    pub eta: Vec<T>,
    pub kappas: Vec<usize>,
    /// Preimage points per channel.
    pub points: Vec<Vec<T>>,
    /// Channel Gramians `Dᵢ(ηᵢ)`.
    pub blocks: Vec<Mat<T>>,
    /// `diag(ηᵢ I_{κᵢ})`.
    pub a: Mat<T>,
    /// `(D₁; …; Dₙ)`.
    pub b: Mat<T>,
}

impl<T: Real> ReparameterizedSystem<T> {
    pub fn dimension(&self) -> usize {
        self.kappas.iter().sum()
    }

    fn assemble(eta: Vec<T>, points: Vec<Vec<T>>, blocks: Vec<Mat<T>>) -> Self {
        let kappas: Vec<usize> = blocks.iter().map(Mat::rows).collect();
        let diag: Vec<T> = eta.iter().zip(&kappas).flat_map(|(&e, &k)| std::iter::repeat_n(e, k)).collect();
        let b = Mat::vstack(&blocks);
        Self {
            a: Mat::diag(&diag),
            b,
            eta,
            kappas,
            points,
            blocks,
        }
    }
}

/// Numerical rank of `[B | AB | … | A^{N−1}B]`.
///
/// `A` is first shifted and scaled to `(A − cI)/s` with its spectrum centred in
/// `[−1, 1]`; the Krylov space, hence the rank, is unchanged.
pub fn kalman_rank<T: Real>(a: &Mat<T>, b: &Mat<T>, tol_rank: T) -> usize {
    let n = a.rows();
    assert!(a.is_square() && b.rows() == n, "kalman_rank: inconsistent dimensions");
    if n == 0 || b.cols() == 0 {
        return 0;
    }
    let diag: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
    let (lo, hi) = diag.iter().fold((diag[0], diag[0]), |(l, h), &x| (l.min(x), h.max(x)));
    let c = (lo + hi) / T::lit(2.0);
    let shifted = a.sub(&Mat::identity(n).scale(c));
    let s = shifted.max_abs();
    let an = if s > T::zero() { shifted.scale(T::one() / s) } else { shifted };
    let mut blocks = Vec::with_capacity(n);
    let mut cur = b.clone();
    for k in 0..n {
        if k > 0 {
            cur = an.matmul(&cur);
        }
        blocks.push(cur.clone());
    }
    let w = Mat::hstack(&blocks);
    let svd = Svd::new(&w);
    svd.rank_above(tol_rank * svd.largest())
}

/// Eigenvalue channel: curve `λᵢ`, its input row `b̃ᵢ`, branches and η plan.
struct Channel<T> {
    curve: SampledField<T>,
    row: SampledField<T>,
    decomposition: BranchDecomposition<T>,
    plan: EtaPlan<T>,
}

impl<T: Real> Channel<T> {
    fn new(curve: SampledField<T>, row: SampledField<T>, cfg: &AnalysisConfig) -> Self {
        let decomposition = decompose(&curve, T::tol(cfg.tol_mono));
        let tol_merge = T::lit(cfg.tol_merge_for(curve.spacing().as_f64()));
        let plan = eta_plan(&decomposition, &curve, tol_merge);
        Self {
            curve,
            row,
            decomposition,
            plan,
        }
    }

    fn gramian(&self, eta: T, cfg: &AnalysisConfig) -> Result<(Vec<T>, Mat<T>), PreimageError> {
        let tol_merge = T::lit(cfg.tol_merge_for(self.curve.spacing().as_f64()));
        let pre = preimage(&self.decomposition, &self.curve, eta, T::tol(cfg.tol_val), tol_merge)?;
        let g = gramian_at_points(&self.row, eta, pre.points, T::tol(cfg.tol_rank));
        Ok((g.points, g.d))
    }

    fn admits(&self, eta: T) -> bool {
        let r = self.decomposition.range;
        eta >= r.lo && eta <= r.hi && !self.plan.in_guard_band(eta)
    }
}

fn channels<T: Real>(
    profile: &SpectralProfile<T>,
    btilde: &SampledField<T>,
    cfg: &AnalysisConfig,
) -> Vec<Channel<T>> {
    profile
        .curves
        .iter()
        .enumerate()
        .map(|(i, c)| Channel::new(c.clone(), btilde.row(i), cfg))
        .collect()
}

/// Block system for one η-tuple.
pub fn build_reparameterized<T: Real>(
    profile: &SpectralProfile<T>,
    btilde: &SampledField<T>,
    eta: &[T],
    cfg: &AnalysisConfig,
) -> Result<ReparameterizedSystem<T>, MultidimError> {
    let n = profile.curves.len();
    if eta.len() != n {
        return Err(MultidimError::TupleLength { expected: n, got: eta.len() });
    }
    if btilde.rows() != n {
        return Err(MultidimError::Shape(format!("B~ has {} rows, expected {n}", btilde.rows())));
    }
    let chans = channels(profile, btilde, cfg);
    let mut points = Vec::with_capacity(n);
    let mut blocks = Vec::with_capacity(n);
    for (i, (ch, &e)) in chans.iter().zip(eta).enumerate() {
        if ch.decomposition.degenerate {
            return Err(MultidimError::DegenerateCurve { channel: i });
        }
        let (p, d) = ch.gramian(e, cfg).map_err(|source| MultidimError::Preimage { channel: i, source })?;
        points.push(p);
        blocks.push(d);
    }
    Ok(ReparameterizedSystem::assemble(eta.to_vec(), points, blocks))
}

/// Full verdict for `ẋ = A(β)x + B(β)U`, with the grid-refinement check.
pub fn ensemble_verdict<T: Real>(
    a: &SampledField<T>,
    b: &SampledField<T>,
    cfg: &AnalysisConfig,
) -> Result<Verdict, MultidimError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(MultidimError::Shape(format!("A is {}x{}", a.rows(), a.cols())));
    }
    if b.rows() != n {
        return Err(MultidimError::Shape(format!("B has {} rows, expected {n}", b.rows())));
    }
    if n > MAX_CHANNELS {
        return Err(MultidimError::TooManyChannels(n));
    }
    Ok(with_refinement(cfg, &[a, b], |f, cfg| ensemble_once(&f[0], &f[1], cfg)))
}

fn betas<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn vanishing_verdict<T: Real>(zeros: &[(usize, T)], cfg: &AnalysisConfig, grid: usize, what: &str) -> Verdict {
    let mut v = Verdict::new(Status::NotControllable, cfg);
    let rows: BTreeSet<usize> = zeros.iter().map(|z| z.0).collect();
    for r in rows {
        let pts: Vec<T> = zeros.iter().filter(|z| z.0 == r).map(|z| z.1).collect();
        v.push(
            Evidence::new(ReasonCode::VanishingInput, format!("row {r} of {what} vanishes"))
                .beta(betas(&pts))
                .channel(r),
        );
    }
    v.sampling = SamplingSummary {
        scheme: "grid".into(),
        grid,
        samples_checked: grid,
        guard_bands: Vec::new(),
        seed: cfg.seed,
    };
    v
}

fn ensemble_once<T: Real>(a: &SampledField<T>, b: &SampledField<T>, cfg: &AnalysisConfig) -> Verdict {
    let n = a.rows();
    let grid = a.n_grid();
    let profile = classify(a, cfg);
    let summary = profile.summary();
    let mut v = match profile.structure {
        Structure::Unsupported => {
            let mut v = Verdict::new(Status::Inconclusive, cfg);
            v.push(Evidence::new(
                ReasonCode::UnsupportedSpectrum,
                profile.note.clone().unwrap_or_else(|| "unsupported spectrum".into()),
            ));
            v.sampling.grid = grid;
            v
        }
        Structure::JordanBlock if decompose(&profile.curves[0], T::tol(cfg.tol_mono)).is_injective() => {
            jordan_rank_test(b, n, cfg)
        }
        _ => match transformed_inputs(&profile, b, cfg) {
            Err(e) => {
                let mut v = Verdict::new(Status::Inconclusive, cfg);
                v.push(Evidence::new(ReasonCode::UnsupportedSpectrum, e.to_string()));
                v.sampling.grid = grid;
                v
            }
            Ok(t) if !t.zero_rows.is_empty() => vanishing_verdict(&t.zero_rows, cfg, grid, "P^-1 B"),
            Ok(t) => tuple_test(&profile, &t.btilde, cfg),
        },
    };
    v.spectral = Some(summary);
    v
}

/// Single Jordan block with injective eigenvalue: `rank B(β) = n` everywhere.
fn jordan_rank_test<T: Real>(b: &SampledField<T>, n: usize, cfg: &AnalysisConfig) -> Verdict {
    let norm = b.uniform_norm();
    let mut v = Verdict::controllable(cfg);
    for j in 0..b.n_grid() {
        let svd = Svd::new(&b.mat_at(j));
        let rank = svd.rank_above(T::tol(cfg.tol_rank) * svd.largest().max(norm));
        if rank < n {
            v.status = Status::NotControllable;
            v.push(
                Evidence::new(ReasonCode::KalmanRankDeficient, "rank B(beta) < n for a Jordan-block drift")
                    .beta(vec![b.grid_point(j).as_f64()])
                    .ranks(rank, n),
            );
        }
    }
    v.sampling = SamplingSummary {
        scheme: "grid".into(),
        grid: b.n_grid(),
        samples_checked: b.n_grid(),
        guard_bands: Vec::new(),
        seed: cfg.seed,
    };
    v
}

/// Per-channel η values (sorted) with their Gramians; `base` indexes the stratified part.
struct ChannelValues<T> {
    values: Vec<T>,
    base: Vec<usize>,
    blocks: Vec<Option<(Vec<T>, Mat<T>)>>,
}

impl<T: Real> ChannelValues<T> {
    fn position(&self, x: T) -> Option<usize> {
        self.values
            .binary_search_by(|p| p.partial_cmp(&x).expect("finite eta"))
            .ok()
    }
}

fn dedup_sorted<T: Real>(mut v: Vec<T>) -> Vec<T> {
    v.sort_by(|x, y| x.partial_cmp(y).expect("finite eta"));
    v.dedup();
    v
}


fn tuple_test<T: Real>(profile: &SpectralProfile<T>, btilde: &SampledField<T>, cfg: &AnalysisConfig) -> Verdict {
    let n = profile.curves.len();
    let chans = channels(profile, btilde, cfg);
    let grid = btilde.n_grid();
    let guard_bands: Vec<[f64; 2]> = chans
        .iter()
        .flat_map(|c| c.plan.guard_bands.iter().map(|g| [g.0.as_f64(), g.1.as_f64()]))
        .collect();

    let degenerate: Vec<usize> = (0..n).filter(|&i| chans[i].decomposition.degenerate).collect();
    if !degenerate.is_empty() {
        let mut v = Verdict::new(Status::NotControllable, cfg);
        for i in degenerate {
            let runs: Vec<f64> = chans[i]
                .decomposition
                .flat_runs
                .iter()
                .flat_map(|r| [r.lo.as_f64(), r.hi.as_f64()])
                .collect();
            v.push(
                Evidence::new(ReasonCode::DegenerateDrift, format!("eigenvalue curve {i} is constant on a subinterval"))
                    .beta(runs)
                    .channel(i),
            );
        }
        v.sampling.grid = grid;
        return v;
    }

    // Stratified samples and admissible range endpoints per channel.
    let base_vals: Vec<Vec<T>> = chans
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut s = c.plan.samples(cfg.eta_per_channel, cfg.seed.wrapping_add(i as u64));
            let r = c.decomposition.range;
            for e in [r.lo, r.hi] {
                if c.admits(e) {
                    s.push(e);
                }
            }
            dedup_sorted(s)
        })
        .collect();
    // Candidate values for tuples where several channels share one η.
    let shared: Vec<T> = dedup_sorted(
        base_vals
            .iter()
            .flatten()
            .copied()
            .chain(chans.iter().flat_map(|c| c.curve.scalar_values()))
            .collect(),
    );

    let mut per: Vec<ChannelValues<T>> = chans
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let values = dedup_sorted(
                base_vals[i]
                    .iter()
                    .copied()
                    .chain(shared.iter().copied().filter(|&s| c.admits(s)))
                    .collect(),
            );
            let base = base_vals[i].iter().filter_map(|&x| values.binary_search_by(|p| p.partial_cmp(&x).expect("finite eta")).ok()).collect();
            ChannelValues {
                values,
                base,
                blocks: Vec::new(),
            }
        })
        .collect();
    for (c, pv) in chans.iter().zip(per.iter_mut()) {
        pv.blocks = pv.values.par_iter().map(|&e| c.gramian(e, cfg).ok()).collect();
    }

    let tol_rank = T::tol(cfg.tol_rank);
    let independent = |d: &Mat<T>| -> (usize, bool) {
        if d.rows() == 0 {
            return (0, true);
        }
        let svd = Svd::new(d);
        let rank = svd.rank_above(tol_rank * svd.largest());
        (rank, rank == d.rows())
    };

    let mut v = Verdict::controllable(cfg);
    // Tuples whose channels all carry distinct η: full row rank of each Dᵢ(ηᵢ).
    for (i, pv) in per.iter().enumerate() {
        let bad: Vec<(T, Vec<T>, usize, usize)> = pv
            .blocks
            .par_iter()
            .zip(&pv.values)
            .filter_map(|(blk, &e)| {
                let (p, d) = blk.as_ref()?;
                let (rank, ok) = independent(d);
                (!ok).then(|| (e, p.clone(), rank, d.rows()))
            })
            .collect();
        for (e, p, rank, need) in bad {
            v.status = Status::NotControllable;
            v.push(
                Evidence::new(ReasonCode::KalmanRankDeficient, "channel Gramian lacks full row rank")
                    .eta(vec![e.as_f64()])
                    .beta(betas(&p))
                    .ranks(rank, need)
                    .channel(i),
            );
        }
    }
    // Tuples in which several channels share one η: stacked rows of every channel admitting it.
    let groups: Vec<(T, Vec<usize>)> = shared
        .iter()
        .map(|&s| {
            let members = (0..n)
                .filter(|&i| {
                    per[i]
                        .position(s)
                        .is_some_and(|k| per[i].blocks[k].is_some())
                })
                .collect();
            (s, members)
        })
        .filter(|(_, m): &(T, Vec<usize>)| m.len() >= 2)
        .collect();
    let bad: Vec<(T, Vec<usize>, Vec<T>, usize, usize)> = groups
        .par_iter()
        .filter_map(|(s, members)| {
            let mut rows = Vec::with_capacity(members.len());
            let mut points = Vec::new();
            for &i in members {
                let (p, d) = per[i].blocks[per[i].position(*s)?].as_ref()?;
                rows.push(d.clone());
                points.extend(p.iter().copied());
            }
            let stacked = Mat::vstack(&rows);
            let (rank, ok) = independent(&stacked);
            (!ok).then(|| (*s, members.clone(), points, rank, stacked.rows()))
        })
        .collect();
    for (s, members, points, rank, need) in bad {
        v.status = Status::NotControllable;
        v.push(
            Evidence::new(
                ReasonCode::KalmanRankDeficient,
                format!("channels {members:?} share eta and their stacked Gramian rows are dependent"),
            )
            .eta(vec![s.as_f64(); members.len()])
            .beta(betas(&points))
            .ranks(rank, need),
        );
    }
    let checks = per.iter().map(|pv| pv.values.len()).sum::<usize>() + groups.len();

    v.gramians = per
        .iter()
        .enumerate()
        .flat_map(|(i, pv)| {
            pv.base.iter().filter_map(move |&k| {
                let (p, d) = pv.blocks[k].as_ref()?;
                let svd = Svd::new(d);
                let thr = tol_rank * svd.largest();
                Some(GramianSummary {
                    eta: pv.values[k].as_f64(),
                    kappa: p.len(),
                    rank: svd.rank_above(thr),
                    smallest_retained: svd.smallest_retained(thr).map(Real::as_f64),
                    points: betas(p),
                    boundary: false,
                    channel: Some(i),
                })
            })
        })
        .collect();
    v.sampling = SamplingSummary {
        scheme: "channel-values+shared".into(),
        grid,
        samples_checked: checks,
        guard_bands,
        seed: cfg.seed,
    };
    v
}
