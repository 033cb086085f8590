//! Pointwise spectra of a matrix field `A(β)`: structure detection, eigenvalue
//! curve tracking and the transformed input matrix `B̃ = P⁻¹B`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::AnalysisConfig;
use crate::field::{CompactInterval, FieldError, SampledField, Source};
use crate::linalg::{eigenvalues, eigenvectors_for, Lu, Mat, Svd};
use crate::scalar::Real;

/// Exhaustive curve matching is used up to this dimension.
pub const MAX_MATCHED_DIM: usize = 8;
const STRUCTURE_TOL: f64 = 1e-14;
const COMPLEX_TOL: f64 = 1e-7;
const CLUSTER_TOL: f64 = 1e-8;
const ALIGNMENT_MIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Structure {
    Diagonal,
    Triangular,
    DiagonalizableTracked,
    JordanBlock,
    Unsupported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransformKind {
    Identity,
    Eigenbasis,
}

pub type TransformSource<T> = Arc<dyn Fn(T) -> Option<Mat<T>> + Send + Sync>;

#[derive(Clone)]
pub struct SpectralProfile<T> {
    pub structure: Structure,
    /// `λᵢ` as scalar fields, in channel order.
    pub curves: Vec<SampledField<T>>,
    /// Eigenvector matrices `P(βⱼ)`; `None` means `P = I`.
    pub transforms: Option<Vec<Mat<T>>>,
    /// Exact `β ↦ P(β)` when one is available.
    pub transform_source: Option<TransformSource<T>>,
    pub conditions: Vec<T>,
    pub ranges: Vec<CompactInterval<T>>,
    pub reconstruction_error: T,
    pub note: Option<String>,
}

impl<T: Real> fmt::Debug for SpectralProfile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralProfile")
            .field("structure", &self.structure)
            .field("transform", &self.transform_kind())
            .field("ranges", &self.ranges)
            .field("reconstruction_error", &self.reconstruction_error)
            .field("note", &self.note)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub structure: Structure,
    pub transform: TransformKind,
    pub ranges: Vec<[f64; 2]>,
    pub max_condition: f64,
    pub reconstruction_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("eigenvector matrix is singular at beta = {beta}")]
    SingularTransform { beta: f64 },
    #[error("spectral structure unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `B̃` together with rows that are numerically zero somewhere.
#[derive(Debug, Clone)]
pub struct TransformedInputs<T> {
    pub btilde: SampledField<T>,
    /// (row, β) pairs where the row vanishes.
    pub zero_rows: Vec<(usize, T)>,
}

impl<T: Real> SpectralProfile<T> {
    pub fn transform_kind(&self) -> TransformKind {
        if self.transforms.is_some() {
            TransformKind::Eigenbasis
        } else {
            TransformKind::Identity
        }
    }

    pub fn summary(&self) -> SpectralSummary {
        SpectralSummary {
            structure: self.structure,
            transform: self.transform_kind(),
            ranges: self.ranges.iter().map(|r| [r.lo.as_f64(), r.hi.as_f64()]).collect(),
            max_condition: self.conditions.iter().fold(1.0f64, |m, c| m.max(c.as_f64())),
            reconstruction_error: self.reconstruction_error.as_f64(),
            note: self.note.clone(),
        }
    }

    fn unsupported(note: String) -> Self {
        Self {
            structure: Structure::Unsupported,
            curves: Vec::new(),
            transforms: None,
            transform_source: None,
            conditions: Vec::new(),
            ranges: Vec::new(),
            reconstruction_error: T::zero(),
            note: Some(note),
        }
    }

    fn from_diagonal_entries(structure: Structure, a: &SampledField<T>) -> Self {
        let n = a.rows();
        let curves: Vec<_> = (0..n).map(|i| a.component(i, i)).collect();
        let ranges = curves.iter().map(range_of).collect();
        Self {
            structure,
            curves,
            transforms: None,
            transform_source: None,
            conditions: vec![T::one(); a.n_grid()],
            ranges,
            reconstruction_error: T::zero(),
            note: None,
        }
    }
}

fn range_of<T: Real>(f: &SampledField<T>) -> CompactInterval<T> {
    let v = f.scalar_values();
    let (lo, hi) = v.iter().fold((v[0], v[0]), |(l, h), &x| (l.min(x), h.max(x)));
    CompactInterval { lo, hi }
}

fn all_points<T: Real>(a: &SampledField<T>, pred: impl Fn(usize, usize, T) -> bool) -> bool {
    let n = a.cols();
    (0..a.n_grid()).all(|j| a.at(j).iter().enumerate().all(|(k, &x)| pred(k / n, k % n, x)))
}

/// Classifies `A` and builds its spectral profile.
pub fn classify<T: Real>(a: &SampledField<T>, cfg: &AnalysisConfig) -> SpectralProfile<T> {
    assert_eq!(a.rows(), a.cols(), "square drift matrix");
    let n = a.rows();
    let scale = a.uniform_norm();
    let tol = T::tol(STRUCTURE_TOL) * scale;
    let zero = |x: T| x.abs() <= tol;

    if all_points(a, |i, k, x| i == k || zero(x)) {
        return SpectralProfile::from_diagonal_entries(Structure::Diagonal, a);
    }
    if n >= 2 && is_jordan_block(a, tol) {
        return SpectralProfile::from_diagonal_entries(Structure::JordanBlock, a);
    }
    if all_points(a, |i, k, x| i <= k || zero(x)) {
        let mut p = SpectralProfile::from_diagonal_entries(Structure::Triangular, a);
        triangular_eigenbasis(a, cfg, &mut p);
        return p;
    }
    tracked(a, cfg)
}

fn is_jordan_block<T: Real>(a: &SampledField<T>, tol: T) -> bool {
    let n = a.rows();
    (0..a.n_grid()).all(|j| {
        let m = a.at(j);
        let lam = m[0];
        (0..n).all(|i| {
            (0..n).all(|k| {
                let x = m[i * n + k];
                if i == k {
                    (x - lam).abs() <= tol
                } else if k == i + 1 {
                    (x - T::one()).abs() <= tol
                } else {
                    x.abs() <= tol
                }
            })
        })
    })
}

/// Unit upper-triangular eigenvector matrix of an upper-triangular `t`, or
/// `None` when a diagonal coincidence makes it undefined.
fn triangular_vectors<T: Real>(t: &Mat<T>) -> Option<Mat<T>> {
    let n = t.rows();
    let scale = t.max_abs().max(T::min_positive_value());
    let tiny = T::epsilon() * T::lit(64.0) * scale;
    let mut v = Mat::identity(n);
    for k in 0..n {
        let lam = t[(k, k)];
        for i in (0..k).rev() {
            let num: T = ((i + 1)..=k).map(|j| t[(i, j)] * v[(j, k)]).sum();
            let den = t[(i, i)] - lam;
            if den.abs() <= tiny {
                if num.abs() <= tiny {
                    v[(i, k)] = T::zero();
                    continue;
                }
                return None;
            }
            v[(i, k)] = -num / den;
        }
    }
    v.is_finite().then_some(v)
}

fn triangular_eigenbasis<T: Real>(a: &SampledField<T>, cfg: &AnalysisConfig, p: &mut SpectralProfile<T>) {
    let cond_max = T::lit(cfg.cond_max);
    let mut transforms = Vec::with_capacity(a.n_grid());
    let mut conds = Vec::with_capacity(a.n_grid());
    for j in 0..a.n_grid() {
        let Some(v) = triangular_vectors(&a.mat_at(j)) else {
            p.note = Some(format!(
                "eigenvectors undefined at beta = {}; inputs used untransformed",
                a.grid_point(j).as_f64()
            ));
            return;
        };
        let c = Svd::new(&v).condition();
        if !(c <= cond_max) {
            p.note = Some(format!(
                "eigenvector condition {:.3e} at beta = {} exceeds the limit; inputs used untransformed",
                c.as_f64(),
                a.grid_point(j).as_f64()
            ));
            return;
        }
        transforms.push(v);
        conds.push(c);
    }
    let field = a.clone();
    let n = a.rows();
    p.transform_source = Some(Arc::new(move |b| {
        let m = field.eval_refined(b).ok()?;
        debug_assert_eq!(m.rows(), n);
        triangular_vectors(&m)
    }));
    p.transforms = Some(transforms);
    p.conditions = conds;
}

struct Cluster<T> {
    lambda: T,
    /// Orthonormal eigenspace basis.
    basis: Vec<Vec<T>>,
}

fn point_spectrum<T: Real>(a: &Mat<T>, scale: T) -> Result<Vec<Cluster<T>>, String> {
    let n = a.rows();
    let ev = eigenvalues(a).ok_or_else(|| "eigenvalue iteration did not converge".to_string())?;
    let s = scale.max(T::min_positive_value());
    if let Some(e) = ev.iter().find(|e| e.1.abs() > T::tol(COMPLEX_TOL) * s) {
        return Err(format!("complex eigenvalue {} {:+}i", e.0.as_f64(), e.1.as_f64()));
    }
    let mut re: Vec<T> = ev.into_iter().map(|e| e.0).collect();
    re.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalue"));
    let mut clusters = Vec::new();
    let mut i = 0;
    while i < n {
        let mut k = i + 1;
        while k < n && re[k] - re[k - 1] <= T::tol(CLUSTER_TOL) * s {
            k += 1;
        }
        let mult = k - i;
        let lambda = re[i..k].iter().copied().sum::<T>() / T::from_usize_lossy(mult);
        let (basis, residual) = eigenvectors_for(a, lambda, mult);
        if residual > T::tol(CLUSTER_TOL).sqrt() * s {
            return Err(format!(
                "eigenvalue {} of multiplicity {mult} is defective",
                lambda.as_f64()
            ));
        }
        clusters.push(Cluster { lambda, basis });
        i = k;
    }
    Ok(clusters)
}

fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(a, b)| *a * *b).sum()
}

fn normalize<T: Real>(v: &mut [T]) -> T {
    let n = dot(v, v).sqrt();
    if n > T::zero() {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Projection of `v` onto the span of the orthonormal `basis`.
fn project<T: Real>(basis: &[Vec<T>], v: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); v.len()];
    for b in basis {
        let c = dot(b, v);
        out.iter_mut().zip(b).for_each(|(o, x)| *o += c * *x);
    }
    out
}

/// Permutation `perm[c] = index` of current eigenvalues minimising total
/// `|Δλ|`; near-ties broken by eigenvector alignment.
fn match_curves<T: Real>(cost: &[Vec<T>], align: &[Vec<T>], tie: T) -> Vec<usize> {
    let n = cost.len();
    if n > MAX_MATCHED_DIM {
        return (0..n).collect();
    }
    let mut best: Option<(T, T, Vec<usize>)> = None;
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, &mut |p| {
        let c: T = p.iter().enumerate().map(|(i, &k)| cost[i][k]).sum();
        let s: T = p.iter().enumerate().map(|(i, &k)| align[i][k]).sum();
        let better = match &best {
            None => true,
            Some((bc, bs, _)) => c < *bc - tie || (c <= *bc + tie && s > *bs),
        };
        if better {
            best = Some((c, s, p.to_vec()));
        }
    });
    best.map(|b| b.2).unwrap_or_default()
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

fn tracked<T: Real>(a: &SampledField<T>, cfg: &AnalysisConfig) -> SpectralProfile<T> {
    let n = a.rows();
    let g = a.n_grid();
    let scale = a.uniform_norm();
    let spectra: Vec<Result<Vec<Cluster<T>>, String>> =
        (0..g).into_par_iter().map(|j| point_spectrum(&a.mat_at(j), scale)).collect();

    let mut lambdas: Vec<Vec<T>> = Vec::with_capacity(g);
    let mut vectors: Vec<Vec<Vec<T>>> = Vec::with_capacity(g);
    for (j, sp) in spectra.into_iter().enumerate() {
        let beta = a.grid_point(j).as_f64();
        let clusters = match sp {
            Ok(c) => c,
            Err(e) => return SpectralProfile::unsupported(format!("{e} at beta = {beta}")),
        };
        // Expanded eigenvalue slots with the cluster each belongs to.
        let slots: Vec<usize> = clusters
            .iter()
            .enumerate()
            .flat_map(|(c, cl)| std::iter::repeat_n(c, cl.basis.len()))
            .collect();
        let cur: Vec<T> = slots.iter().map(|&c| clusters[c].lambda).collect();
        if j == 0 {
            lambdas.push(cur);
            vectors.push(clusters.into_iter().flat_map(|c| c.basis).collect());
            continue;
        }
        let prev_l = &lambdas[j - 1];
        let prev_v = &vectors[j - 1];
        let cost: Vec<Vec<T>> = prev_l.iter().map(|p| cur.iter().map(|c| (*p - *c).abs()).collect()).collect();
        let align: Vec<Vec<T>> = prev_v
            .iter()
            .map(|v| {
                slots
                    .iter()
                    .map(|&c| {
                        let pr = project(&clusters[c].basis, v);
                        dot(&pr, &pr).sqrt()
                    })
                    .collect()
            })
            .collect();
        let perm = match_curves(&cost, &align, T::tol(1e-12) * scale);

        let mut new_v: Vec<Vec<T>> = vec![Vec::new(); n];
        for c in 0..clusters.len() {
            let members: Vec<usize> = (0..n).filter(|&i| slots[perm[i]] == c).collect();
            let mut basis_done: Vec<Vec<T>> = Vec::new();
            for &i in &members {
                let mut v = project(&clusters[c].basis, &prev_v[i]);
                for q in &basis_done {
                    let d = dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= d * *y);
                }
                if normalize(&mut v) < T::lit(ALIGNMENT_MIN) {
                    return SpectralProfile::unsupported(format!(
                        "eigenvectors are discontinuous at beta = {beta}"
                    ));
                }
                basis_done.push(v.clone());
                new_v[i] = v;
            }
        }
        let delta_a = a.mat_at(j).sub(&a.mat_at(j - 1)).frobenius();
        let p_prev = Mat::from_fn(n, n, |r, c| prev_v[c][r]);
        let bound = T::lit(2.0) * Svd::new(&p_prev).condition() * delta_a + T::tol(1e-10) * scale;
        let new_l: Vec<T> = (0..n).map(|i| cur[perm[i]]).collect();
        if let Some(i) = (0..n).find(|&i| (new_l[i] - prev_l[i]).abs() > bound) {
            return SpectralProfile::unsupported(format!(
                "eigenvalue curve {i} jumps between beta = {} and beta = {beta}",
                a.grid_point(j - 1).as_f64()
            ));
        }
        lambdas.push(new_l);
        vectors.push(new_v);
    }

    let cond_max = T::lit(cfg.cond_max);
    let mut transforms = Vec::with_capacity(g);
    let mut conditions = Vec::with_capacity(g);
    let mut recon = T::zero();
    for j in 0..g {
        let p = Mat::from_fn(n, n, |r, c| vectors[j][c][r]);
        let cond = Svd::new(&p).condition();
        let beta = a.grid_point(j).as_f64();
        if !(cond <= cond_max) {
            return SpectralProfile::unsupported(format!(
                "eigenvector condition {:.3e} at beta = {beta} exceeds the limit; \
                 a triangular form of A, if one exists, avoids eigenvectors",
                cond.as_f64()
            ));
        }
        let Some(lu) = Lu::new(&p) else {
            return SpectralProfile::unsupported(format!("singular eigenvector matrix at beta = {beta}"));
        };
        let rec = p.matmul(&Mat::diag(&lambdas[j])).matmul(&lu.inverse());
        recon = recon.max(rec.sub(&a.mat_at(j)).max_abs());
        transforms.push(p);
        conditions.push(cond);
    }
    if recon > T::tol(cfg.tol_recon) * scale.max(T::min_positive_value()) {
        return SpectralProfile::unsupported(format!(
            "reconstruction error {:.3e} exceeds tolerance",
            recon.as_f64()
        ));
    }

    let curves: Vec<SampledField<T>> = (0..n)
        .map(|i| {
            let v = lambdas.iter().map(|l| l[i]).collect();
            SampledField::from_values(a.interval(), g, 1, 1, v).expect("finite eigenvalues")
        })
        .collect();
    let ranges = curves.iter().map(range_of).collect();
    SpectralProfile {
        structure: Structure::DiagonalizableTracked,
        curves,
        transforms: Some(transforms),
        transform_source: None,
        conditions,
        ranges,
        reconstruction_error: recon,
        note: None,
    }
}

/// `B̃(βⱼ) = P(βⱼ)⁻¹B(βⱼ)`, with rows that vanish somewhere reported.
pub fn transformed_inputs<T: Real>(
    p: &SpectralProfile<T>,
    b: &SampledField<T>,
    cfg: &AnalysisConfig,
) -> Result<TransformedInputs<T>, SpectralError> {
    if p.structure == Structure::Unsupported {
        return Err(SpectralError::Unsupported(p.note.clone().unwrap_or_default()));
    }
    let btilde = match &p.transforms {
        None => b.clone(),
        Some(ps) => {
            let mut lus = Vec::with_capacity(ps.len());
            for (j, pm) in ps.iter().enumerate() {
                lus.push(Lu::new(pm).ok_or(SpectralError::SingularTransform {
                    beta: b.grid_point(j).as_f64(),
                })?);
            }
            let out = b.map_points(b.rows(), b.cols(), |j, m| lus[j].solve(&m))?;
            let source = match (&p.transform_source, b.has_source()) {
                (Some(ts), true) => {
                    let ts = ts.clone();
                    let bf = b.clone();
                    let s: Source<T> = Arc::new(move |beta| {
                        let pm = ts(beta)?;
                        let bm = bf.eval_refined(beta).ok()?;
                        Some(Lu::new(&pm)?.solve(&bm).into_vec())
                    });
                    Some(s)
                }
                _ => None,
            };
            out.with_source(source)
        }
    };
    let zero_rows = crate::scalar_verdict::vanishing_points(&btilde, T::tol(cfg.tol_vanish));
    Ok(TransformedInputs { btilde, zero_rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{sample, ExprMatrix};

    fn field(rows: &[&[&str]], lo: f64, hi: f64) -> SampledField<f64> {
        let r: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
        sample(&ExprMatrix::parse(&r, "beta").unwrap(), CompactInterval::new(lo, hi).unwrap(), 201).unwrap()
    }

    fn cfg() -> AnalysisConfig {
        AnalysisConfig::default()
    }

    #[test]
    fn coupled_triangular_profile() {
        let a = field(&[&["beta", "1"], &["0", "beta^2"]], 0.0, 1.0);
        let p = classify(&a, &cfg());
        assert_eq!(p.structure, Structure::Triangular);
        assert_eq!(p.transform_kind(), TransformKind::Identity);
        for j in 0..a.n_grid() {
            let b = a.grid_point(j);
            assert_eq!(p.curves[0].scalar_at(j), b);
            assert_eq!(p.curves[1].scalar_at(j), b.powi(2));
        }
    }

    #[test]
    fn triangular_with_separated_diagonal_uses_eigenbasis() {
        let a = field(&[&["beta", "1"], &["0", "beta + 0.5"]], 0.0, 1.0);
        let p = classify(&a, &cfg());
        assert_eq!(p.structure, Structure::Triangular);
        assert_eq!(p.transform_kind(), TransformKind::Eigenbasis);
        let b = field(&[&["2", "2*beta - 1"], &["1", "beta"]], 0.0, 1.0);
        let t = transformed_inputs(&p, &b, &cfg()).unwrap();
        let m = t.btilde.eval_refined(0.3).unwrap();
        assert!((m[(0, 0)] - 0.0).abs() < 1e-14 && (m[(0, 1)] + 1.0).abs() < 1e-14);
        assert!((m[(1, 0)] - 1.0).abs() < 1e-14 && (m[(1, 1)] - 0.3).abs() < 1e-14);
    }

    #[test]
    fn diagonal_ranges() {
        let a = field(&[&["beta", "0"], &["0", "2*beta"]], 0.0, 1.0);
        let p = classify(&a, &cfg());
        assert_eq!(p.structure, Structure::Diagonal);
        assert_eq!(p.ranges[0], CompactInterval { lo: 0.0, hi: 1.0 });
        assert_eq!(p.ranges[1], CompactInterval { lo: 0.0, hi: 2.0 });
        let b = field(&[&["1", "beta"], &["3", "0"]], 0.0, 1.0);
        let t = transformed_inputs(&p, &b, &cfg()).unwrap();
        assert_eq!(t.btilde, b);
    }

    #[test]
    fn jordan_block_detected() {
        let a = field(&[&["beta", "1"], &["0", "beta"]], 0.0, 1.0);
        assert_eq!(classify(&a, &cfg()).structure, Structure::JordanBlock);
    }

    #[test]
    fn symmetric_swap_transform() {
        let a = field(&[&["0", "1"], &["1", "0"]], 0.0, 1.0);
        let p = classify(&a, &cfg());
        assert_eq!(p.structure, Structure::DiagonalizableTracked);
        assert!((p.curves[0].scalar_at(0) + 1.0).abs() < 1e-14);
        assert!((p.curves[1].scalar_at(0) - 1.0).abs() < 1e-14);
        let b = field(&[&["1"], &["0"]], 0.0, 1.0);
        let t = transformed_inputs(&p, &b, &cfg()).unwrap();
        assert!(t.zero_rows.is_empty());
        let r = 0.5f64.sqrt();
        for j in [0, 100, 200] {
            let m = t.btilde.mat_at(j);
            assert!((m[(0, 0)].abs() - r).abs() < 1e-12);
            assert!((m[(1, 0)].abs() - r).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_spectrum_unsupported() {
        let a = field(&[&["0", "-1"], &["1", "beta"]], 0.0, 1.0);
        let p = classify(&a, &cfg());
        assert_eq!(p.structure, Structure::Unsupported);
        assert!(p.note.unwrap().contains("complex"));
    }

    #[test]
    fn singular_transform_names_beta() {
        let a = field(&[&["0", "1"], &["1", "0"]], 0.0, 1.0);
        let mut p = classify(&a, &cfg());
        let ps = p.transforms.as_mut().unwrap();
        ps[7] = Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let b = field(&[&["1"], &["0"]], 0.0, 1.0);
        let err = transformed_inputs(&p, &b, &cfg()).unwrap_err();
        assert_eq!(err, SpectralError::SingularTransform { beta: a.grid_point(7) });
    }

    #[test]
    fn tracked_similarity_reconstructs() {
        // Q diag(beta, beta + 1) Q^{-1} with Q = [[1, 1], [0, 1]]
        let a = field(&[&["beta", "1"], &["0", "beta + 1"]], 0.0, 1.0);
        let q = Mat::from_rows(&[vec![1.0, 2.0], vec![0.5, 1.0 + 0.25]]);
        let qi = crate::linalg::inverse(&q).unwrap();
        let sim = a.map_points(2, 2, |_, m| q.matmul(&m).matmul(&qi)).unwrap();
        let p = classify(&sim, &cfg());
        assert_eq!(p.structure, Structure::DiagonalizableTracked, "{:?}", p.note);
        assert!(p.reconstruction_error <= 1e-8 * sim.uniform_norm());
        for j in 0..sim.n_grid() {
            let b = sim.grid_point(j);
            assert!((p.curves[0].scalar_at(j) - b).abs() < 1e-10);
            assert!((p.curves[1].scalar_at(j) - b - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn tracking_is_direction_independent() {
        let a = field(&[&["beta", "1", "0"], &["0.2", "beta^2 + 2", "0"], &["0", "0.1", "-beta"]], 0.0, 1.0);
        let rev = field(
            &[&["1 - beta", "1", "0"], &["0.2", "(1 - beta)^2 + 2", "0"], &["0", "0.1", "beta - 1"]],
            0.0,
            1.0,
        );
        let p = classify(&a, &cfg());
        let q = classify(&rev, &cfg());
        assert_eq!(p.structure, Structure::DiagonalizableTracked);
        let g = a.n_grid();
        for i in 0..3 {
            let c = &p.curves[i];
            let matched = q.curves.iter().any(|d| {
                (0..g).all(|j| (c.scalar_at(j) - d.scalar_at(g - 1 - j)).abs() < 1e-9)
            });
            assert!(matched, "curve {i} has no reversed partner");
        }
    }
}
