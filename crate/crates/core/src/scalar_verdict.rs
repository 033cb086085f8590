//! Controllability of scalar ensembles `ẋ = a(β)x + Σᵢ bᵢ(β)uᵢ`.

use rayon::prelude::*;

use crate::branch::{decompose, preimage, BranchDecomposition, PreimageError};
use crate::config::AnalysisConfig;
use crate::field::SampledField;
use crate::linalg::{Mat, Svd};
use crate::sampling::{eta_plan, EtaPlan};
use crate::scalar::Real;
use crate::verdict::{Evidence, GramianSummary, ReasonCode, SamplingSummary, Status, Verdict};

/// `D(η)`: rows are the input rows at the preimage points of `η`, ascending in `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleGramian<T> {
    pub eta: T,
    pub points: Vec<T>,
    pub d: Mat<T>,
    pub rank: usize,
    pub singular_values: Vec<T>,
    pub threshold: T,
}

impl<T: Real> EnsembleGramian<T> {
    pub fn kappa(&self) -> usize {
        self.points.len()
    }

    pub fn is_full_row_rank(&self) -> bool {
        self.rank == self.kappa()
    }

    pub fn summary(&self, boundary: bool) -> GramianSummary {
        GramianSummary {
            eta: self.eta.as_f64(),
            kappa: self.kappa(),
            rank: self.rank,
            smallest_retained: self
                .singular_values
                .iter()
                .copied()
                .filter(|s| *s > self.threshold)
                .last()
                .map(Real::as_f64),
            points: self.points.iter().map(|p| p.as_f64()).collect(),
            boundary,
            channel: None,
        }
    }
}

/// Gramian for rows given at explicit parameter values.
pub fn gramian_at_points<T: Real>(b_rows: &SampledField<T>, eta: T, points: Vec<T>, tol_rank: T) -> EnsembleGramian<T> {
    let m = b_rows.cols();
    let mut d = Mat::zeros(points.len(), m);
    for (r, &p) in points.iter().enumerate() {
        let row = b_rows.eval_refined(p).expect("preimage inside interval");
        for c in 0..m {
            d[(r, c)] = row[(0, c)];
        }
    }
    let (rank, singular_values, threshold) = if points.is_empty() || m == 0 {
        (0, Vec::new(), T::zero())
    } else {
        let svd = Svd::new(&d);
        let threshold = tol_rank * svd.largest();
        (svd.rank_above(threshold), svd.s, threshold)
    };
    EnsembleGramian {
        eta,
        points,
        d,
        rank,
        singular_values,
        threshold,
    }
}

/// Gramian using an existing branch decomposition of `a`.
pub fn gramian_with<T: Real>(
    d: &BranchDecomposition<T>,
    a: &SampledField<T>,
    b_rows: &SampledField<T>,
    eta: T,
    cfg: &AnalysisConfig,
) -> Result<EnsembleGramian<T>, PreimageError> {
    let tol_merge = T::lit(cfg.tol_merge_for(a.spacing().as_f64()));
    let pre = preimage(d, a, eta, T::tol(cfg.tol_val), tol_merge)?;
    Ok(gramian_at_points(b_rows, eta, pre.points, T::tol(cfg.tol_rank)))
}

pub fn build_gramian<T: Real>(
    a: &SampledField<T>,
    b_rows: &SampledField<T>,
    eta: T,
    cfg: &AnalysisConfig,
) -> Result<EnsembleGramian<T>, PreimageError> {
    let d = decompose(a, T::tol(cfg.tol_mono));
    gramian_with(&d, a, b_rows, eta, cfg)
}

/// Parameter values where some input row is numerically zero: at a grid point,
/// or on the segment joining two consecutive grid values.
pub fn vanishing_points<T: Real>(rows: &SampledField<T>, tol_vanish: T) -> Vec<(usize, T)> {
    let norm = rows.uniform_norm();
    let tol = tol_vanish * norm;
    let (r, c) = rows.shape();
    let mut out = Vec::new();
    for i in 0..r {
        let row = |j: usize| &rows.at(j)[i * c..(i + 1) * c];
        for j in 0..rows.n_grid() {
            if norm == T::zero() || max_abs(row(j)) <= tol {
                out.push((i, rows.grid_point(j)));
                continue;
            }
            if j + 1 < rows.n_grid() {
                if let Some(t) = segment_hits_origin(row(j), row(j + 1), tol) {
                    let (b0, b1) = (rows.grid_point(j), rows.grid_point(j + 1));
                    if max_abs(row(j + 1)) > tol {
                        out.push((i, b0 + (b1 - b0) * t));
                    }
                }
            }
        }
    }
    out
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Interior parameter `t ∈ (0,1)` where the segment `p + t(q − p)` passes within
/// `tol` (max-abs) of the origin.
fn segment_hits_origin<T: Real>(p: &[T], q: &[T], tol: T) -> Option<T> {
    let dd: T = p.iter().zip(q).map(|(a, b)| (*b - *a) * (*b - *a)).sum();
    if dd == T::zero() {
        return None;
    }
    let t = -p.iter().zip(q).map(|(a, b)| *a * (*b - *a)).sum::<T>() / dd;
    if t <= T::zero() || t >= T::one() {
        return None;
    }
    let closest: Vec<T> = p.iter().zip(q).map(|(a, b)| *a + (*b - *a) * t).collect();
    (max_abs(&closest) <= tol).then_some(t)
}

fn betas<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

/// Re-runs `run` on fields resampled at the refined grid and demands agreement.
pub(crate) fn with_refinement<T: Real>(
    cfg: &AnalysisConfig,
    fields: &[&SampledField<T>],
    run: impl Fn(&[SampledField<T>], &AnalysisConfig) -> Verdict,
) -> Verdict {
    let base_cfg = cfg.without_stability();
    let owned: Vec<SampledField<T>> = fields.iter().map(|f| (*f).clone()).collect();
    let primary = run(&owned, &base_cfg);
    if !cfg.stability_check {
        return primary;
    }
    let fine_cfg = cfg.refined();
    let fine_grid = 2 * (fields[0].n_grid() - 1) + 1;
    let refined: Option<Vec<SampledField<T>>> = fields
        .iter()
        .map(|f| f.resample(fine_grid).and_then(Result::ok))
        .collect();
    let mut out = match refined {
        Some(fine) => primary.confirm(run(&fine, &fine_cfg)),
        None => primary,
    };
    out.config = cfg.clone();
    out
}

/// Single input: controllable iff `a` is injective and `b` nowhere vanishing.
pub fn single_input_verdict<T: Real>(a: &SampledField<T>, b: &SampledField<T>, cfg: &AnalysisConfig) -> Verdict {
    with_refinement(cfg, &[a, b], |f, cfg| single_input_once(&f[0], &f[1], cfg))
}

fn single_input_once<T: Real>(a: &SampledField<T>, b: &SampledField<T>, cfg: &AnalysisConfig) -> Verdict {
    assert_eq!(a.shape(), (1, 1), "scalar drift");
    assert_eq!(b.shape(), (1, 1), "single input");
    let d = decompose(a, T::tol(cfg.tol_mono));
    let mut evidence = Vec::new();
    if d.degenerate {
        let runs: Vec<f64> = d.flat_runs.iter().flat_map(|r| [r.lo.as_f64(), r.hi.as_f64()]).collect();
        evidence.push(Evidence::new(ReasonCode::DegenerateDrift, "drift is constant on a subinterval").beta(runs));
    }
    if d.branches.len() > 1 {
        evidence.push(
            Evidence::new(
                ReasonCode::NonInjectiveSingleInput,
                format!("drift has {} injective branches; a single input needs one", d.branches.len()),
            )
            .beta(betas(&d.junctions())),
        );
    }
    let zeros = vanishing_points(b, T::tol(cfg.tol_vanish));
    if !zeros.is_empty() {
        let pts: Vec<T> = zeros.iter().map(|z| z.1).collect();
        evidence.push(Evidence::new(ReasonCode::VanishingInput, "input vanishes").beta(betas(&pts)).channel(0));
    }
    let status = if evidence.is_empty() { Status::Controllable } else { Status::NotControllable };
    let mut v = Verdict::failing(status, cfg, evidence);
    v.sampling = SamplingSummary {
        scheme: "grid".into(),
        grid: a.n_grid(),
        samples_checked: a.n_grid(),
        guard_bands: Vec::new(),
        seed: cfg.seed,
    };
    v
}

/// Multiple inputs: controllable iff `rank D(η) = κ(η)` on every sampled `η`.
pub fn multi_input_verdict<T: Real>(a: &SampledField<T>, b_rows: &SampledField<T>, cfg: &AnalysisConfig) -> Verdict {
    with_refinement(cfg, &[a, b_rows], |f, cfg| multi_input_once(&f[0], &f[1], cfg))
}

fn multi_input_once<T: Real>(a: &SampledField<T>, b_rows: &SampledField<T>, cfg: &AnalysisConfig) -> Verdict {
    assert_eq!(a.shape(), (1, 1), "scalar drift");
    assert_eq!(b_rows.rows(), 1, "one input row");
    let d = decompose(a, T::tol(cfg.tol_mono));
    let tol_merge = T::lit(cfg.tol_merge_for(a.spacing().as_f64()));
    let plan = eta_plan(&d, a, tol_merge);
    let mut sampling = SamplingSummary {
        scheme: "stratified-jittered".into(),
        grid: a.n_grid(),
        samples_checked: 0,
        guard_bands: plan.guard_bands.iter().map(|g| [g.0.as_f64(), g.1.as_f64()]).collect(),
        seed: cfg.seed,
    };

    if d.degenerate {
        let runs: Vec<f64> = d.flat_runs.iter().flat_map(|r| [r.lo.as_f64(), r.hi.as_f64()]).collect();
        let mut v = Verdict::failing(
            Status::NotControllable,
            cfg,
            vec![Evidence::new(ReasonCode::DegenerateDrift, "drift is constant on a subinterval").beta(runs)],
        );
        v.sampling = sampling;
        return v;
    }
    let zeros = vanishing_points(b_rows, T::tol(cfg.tol_vanish));
    if !zeros.is_empty() {
        let pts: Vec<T> = zeros.iter().map(|z| z.1).collect();
        let mut v = Verdict::failing(
            Status::NotControllable,
            cfg,
            vec![Evidence::new(ReasonCode::VanishingInput, "input row vanishes").beta(betas(&pts)).channel(0)],
        );
        v.sampling = sampling;
        return v;
    }

    let probes = decisive_probes(&plan, &d, a, b_rows, cfg);
    sampling.samples_checked = probes.len();
    let mut v = Verdict::controllable(cfg);
    for g in &probes {
        if !g.is_full_row_rank() {
            v.status = Status::NotControllable;
            v.push(
                Evidence::new(ReasonCode::GramianRankDeficient, "rank D(eta) < kappa(eta)")
                    .eta(vec![g.eta.as_f64()])
                    .beta(betas(&g.points))
                    .ranks(g.rank, g.kappa()),
            );
        }
    }
    v.gramians = probes.iter().map(|g| g.summary(false)).collect();
    for &eta in &plan.boundary_values {
        if let Ok(g) = gramian_with(&d, a, b_rows, eta, cfg) {
            v.gramians.push(g.summary(true));
        }
    }
    v.sampling = sampling;
    v
}

/// Gramians at the stratified samples, plus the midpoint of any stratum that
/// the guard bands swallow entirely (evaluated without merging).
pub(crate) fn decisive_probes<T: Real>(
    plan: &EtaPlan<T>,
    d: &BranchDecomposition<T>,
    a: &SampledField<T>,
    b_rows: &SampledField<T>,
    cfg: &AnalysisConfig,
) -> Vec<EnsembleGramian<T>> {
    let samples = plan.samples(cfg.eta_samples, cfg.seed);
    let mut out: Vec<EnsembleGramian<T>> = samples
        .par_iter()
        .filter_map(|&eta| gramian_with(d, a, b_rows, eta, cfg).ok())
        .collect();
    let pieces = plan.open_pieces();
    for &(lo, hi) in &plan.strata {
        if pieces.iter().any(|&(l, h)| l >= lo && h <= hi) {
            continue;
        }
        let mid = (lo + hi) / T::lit(2.0);
        let exact = AnalysisConfig {
            tol_merge: Some(0.0),
            ..cfg.clone()
        };
        if let Ok(g) = gramian_with(d, a, b_rows, mid, &exact) {
            out.push(g);
        }
    }
    out
}
