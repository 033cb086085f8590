//! Functions on a compact parameter interval, stored on a uniform grid.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, ExprAst};
use crate::linalg::Mat;
use crate::scalar::Real;

pub const DEFAULT_GRID: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactInterval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> CompactInterval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self, FieldError> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(FieldError::BadInterval {
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn cast<U: Real>(&self) -> CompactInterval<U> {
        CompactInterval {
            lo: U::lit(self.lo.as_f64()),
            hi: U::lit(self.hi.as_f64()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("invalid interval [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
    #[error("grid size must be at least 2, got {0}")]
    BadGrid(usize),
    #[error("entry ({row}, {col}) at beta = {beta}: {source}")]
    Domain {
        beta: f64,
        row: usize,
        col: usize,
        #[source]
        source: EvalError,
    },
    #[error("non-finite value at grid index {index}")]
    NonFinite { index: usize },
    #[error("beta = {beta} lies outside [{lo}, {hi}]")]
    OutOfInterval { beta: f64, lo: f64, hi: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Rectangular matrix of expressions in one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<ExprAst>,
}

impl ExprMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<ExprAst>) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count");
        Self { rows, cols, entries }
    }

    pub fn from_rows(rows: Vec<Vec<ExprAst>>) -> Result<Self, FieldError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(FieldError::Shape("ragged expression matrix".into()));
        }
        Ok(Self::new(r, c, rows.into_iter().flatten().collect()))
    }

    /// Parses a matrix of expression strings in the parameter `param`.
    pub fn parse(rows: &[Vec<String>], param: &str) -> Result<Self, (usize, usize, crate::expr::ParseError)> {
        let mut out = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, text) in row.iter().enumerate() {
                out.push(ExprAst::parse(text, param).map_err(|e| (i, j, e))?);
            }
        }
        let cols = rows.first().map_or(0, Vec::len);
        Ok(Self::new(rows.len(), cols, out))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &ExprAst {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[ExprAst] {
        &self.entries
    }

    /// Entrywise evaluation; the error carries the failing entry.
    pub fn evaluate<T: Real>(&self, beta: T) -> Result<Vec<T>, FieldError> {
        self.entries
            .iter()
            .enumerate()
            .map(|(k, e)| {
                e.evaluate(beta).map_err(|source| FieldError::Domain {
                    beta: beta.as_f64(),
                    row: k / self.cols.max(1),
                    col: k % self.cols.max(1),
                    source,
                })
            })
            .collect()
    }
}

/// Exact evaluator used to refine values off the grid.
pub type Source<T> = Arc<dyn Fn(T) -> Option<Vec<T>> + Send + Sync>;

/// Matrix-valued function on `interval`, sampled at `n_grid` uniform points
/// and interpolated piecewise linearly in between.
#[derive(Clone)]
pub struct SampledField<T> {
    interval: CompactInterval<T>,
    n_grid: usize,
    rows: usize,
    cols: usize,
    values: Vec<T>,
    source: Option<Source<T>>,
}

impl<T: fmt::Debug> fmt::Debug for SampledField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledField")
            .field("interval", &self.interval)
            .field("n_grid", &self.n_grid)
            .field("shape", &(self.rows, self.cols))
            .field("exact_source", &self.source.is_some())
            .finish()
    }
}

impl<T: Real> PartialEq for SampledField<T> {
    fn eq(&self, other: &Self) -> bool {
        self.interval == other.interval
            && self.n_grid == other.n_grid
            && self.rows == other.rows
            && self.cols == other.cols
            && self.values == other.values
    }
}

/// Samples an expression matrix on the uniform grid of `interval`.
pub fn sample<T: Real>(
    e: &ExprMatrix,
    interval: CompactInterval<T>,
    n_grid: usize,
) -> Result<SampledField<T>, FieldError> {
    let grid = uniform_grid(interval, n_grid)?;
    let mut values = Vec::with_capacity(n_grid * e.rows() * e.cols());
    for &b in &grid {
        values.extend(e.evaluate(b)?);
    }
    let exact = e.clone();
    let source: Source<T> = Arc::new(move |b| exact.evaluate(b).ok());
    Ok(SampledField {
        interval,
        n_grid,
        rows: e.rows(),
        cols: e.cols(),
        values,
        source: Some(source),
    })
}

/// Scalar convenience wrapper around [`sample`].
pub fn sample_scalar<T: Real>(
    e: &ExprAst,
    interval: CompactInterval<T>,
    n_grid: usize,
) -> Result<SampledField<T>, FieldError> {
    sample(&ExprMatrix::new(1, 1, vec![e.clone()]), interval, n_grid)
}

pub fn uniform_grid<T: Real>(interval: CompactInterval<T>, n_grid: usize) -> Result<Vec<T>, FieldError> {
    if n_grid < 2 {
        return Err(FieldError::BadGrid(n_grid));
    }
    let h = interval.width() / T::from_usize_lossy(n_grid - 1);
    Ok((0..n_grid)
        .map(|j| {
            if j == n_grid - 1 {
                interval.hi
            } else {
                interval.lo + h * T::from_usize_lossy(j)
            }
        })
        .collect())
}

impl<T: Real> SampledField<T> {
    /// Builds a field from raw row-major samples (grid index outermost).
    pub fn from_values(
        interval: CompactInterval<T>,
        n_grid: usize,
        rows: usize,
        cols: usize,
        values: Vec<T>,
    ) -> Result<Self, FieldError> {
        if n_grid < 2 {
            return Err(FieldError::BadGrid(n_grid));
        }
        if values.len() != n_grid * rows * cols {
            return Err(FieldError::Shape(format!(
                "expected {} values, got {}",
                n_grid * rows * cols,
                values.len()
            )));
        }
        let per = (rows * cols).max(1);
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite { index: k / per });
        }
        Ok(Self {
            interval,
            n_grid,
            rows,
            cols,
            values,
            source: None,
        })
    }

    /// Samples a closure that also serves as the exact source.
    pub fn from_fn(
        interval: CompactInterval<T>,
        n_grid: usize,
        rows: usize,
        cols: usize,
        f: impl Fn(T) -> Vec<T> + Send + Sync + 'static,
    ) -> Result<Self, FieldError> {
        let grid = uniform_grid(interval, n_grid)?;
        let values: Vec<T> = grid.iter().flat_map(|&b| f(b)).collect();
        let mut out = Self::from_values(interval, n_grid, rows, cols, values)?;
        out.source = Some(Arc::new(move |b| Some(f(b))));
        Ok(out)
    }

    pub fn with_source(mut self, source: Option<Source<T>>) -> Self {
        self.source = source;
        self
    }

    /// Re-samples the exact source on a grid of `n_grid` points.
    pub fn resample(&self, n_grid: usize) -> Option<Result<Self, FieldError>> {
        let src = self.source.clone()?;
        let grid = match uniform_grid(self.interval, n_grid) {
            Ok(g) => g,
            Err(e) => return Some(Err(e)),
        };
        let mut values = Vec::with_capacity(n_grid * self.rows * self.cols);
        for (j, &b) in grid.iter().enumerate() {
            match src(b) {
                Some(v) if v.len() == self.rows * self.cols => values.extend(v),
                _ => return Some(Err(FieldError::NonFinite { index: j })),
            }
        }
        Some(
            Self::from_values(self.interval, n_grid, self.rows, self.cols, values)
                .map(|f| f.with_source(Some(src))),
        )
    }

    pub fn interval(&self) -> CompactInterval<T> {
        self.interval
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn has_source(&self) -> bool {
        self.source.is_some()
    }

    pub fn spacing(&self) -> T {
        self.interval.width() / T::from_usize_lossy(self.n_grid - 1)
    }

    pub fn grid_point(&self, j: usize) -> T {
        if j == self.n_grid - 1 {
            self.interval.hi
        } else {
            self.interval.lo + self.spacing() * T::from_usize_lossy(j)
        }
    }

    pub fn grid(&self) -> Vec<T> {
        (0..self.n_grid).map(|j| self.grid_point(j)).collect()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Row-major entries at grid index `j`.
    pub fn at(&self, j: usize) -> &[T] {
        let per = self.rows * self.cols;
        &self.values[j * per..(j + 1) * per]
    }

    pub fn mat_at(&self, j: usize) -> Mat<T> {
        Mat::from_row_major(self.rows, self.cols, self.at(j).to_vec())
    }

    /// Value of a scalar field at grid index `j`.
    pub fn scalar_at(&self, j: usize) -> T {
        self.at(j)[0]
    }

    /// Samples of a scalar field.
    pub fn scalar_values(&self) -> Vec<T> {
        (0..self.n_grid).map(|j| self.at(j)[0]).collect()
    }

    fn check_inside(&self, beta: T) -> Result<(), FieldError> {
        if !self.interval.contains(beta) {
            return Err(FieldError::OutOfInterval {
                beta: beta.as_f64(),
                lo: self.interval.lo.as_f64(),
                hi: self.interval.hi.as_f64(),
            });
        }
        Ok(())
    }

    /// Piecewise-linear interpolation.
    pub fn eval_at(&self, beta: T) -> Result<Mat<T>, FieldError> {
        self.check_inside(beta)?;
        Ok(Mat::from_row_major(self.rows, self.cols, self.interp(beta)))
    }

    fn interp(&self, beta: T) -> Vec<T> {
        let h = self.spacing();
        if h == T::zero() {
            return self.at(0).to_vec();
        }
        let pos = ((beta - self.interval.lo) / h).max(T::zero());
        let j = pos.floor().to_usize().unwrap_or(0).min(self.n_grid - 2);
        if beta == self.grid_point(j) {
            return self.at(j).to_vec();
        }
        if beta == self.grid_point(j + 1) {
            return self.at(j + 1).to_vec();
        }
        let t = (pos - T::from_usize_lossy(j)).min(T::one());
        if t == T::zero() {
            return self.at(j).to_vec();
        }
        if t == T::one() {
            return self.at(j + 1).to_vec();
        }
        self.at(j)
            .iter()
            .zip(self.at(j + 1))
            .map(|(&a, &b)| a + (b - a) * t)
            .collect()
    }

    /// Exact value from the source when available, else interpolation.
    pub fn eval_refined(&self, beta: T) -> Result<Mat<T>, FieldError> {
        self.check_inside(beta)?;
        let v = self
            .source
            .as_ref()
            .and_then(|s| s(beta))
            .filter(|v| v.len() == self.rows * self.cols && v.iter().all(|x| x.is_finite()))
            .unwrap_or_else(|| self.interp(beta));
        Ok(Mat::from_row_major(self.rows, self.cols, v))
    }

    /// `sup_β max_{ij} |f_ij(β)|` over the grid.
    pub fn uniform_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Scalar field of entry `(r, c)`.
    pub fn component(&self, r: usize, c: usize) -> Self {
        self.select(&[(r, c)], 1, 1)
    }

    /// `1 × cols` field of row `r`.
    pub fn row(&self, r: usize) -> Self {
        let idx: Vec<_> = (0..self.cols).map(|c| (r, c)).collect();
        self.select(&idx, 1, self.cols)
    }

    fn select(&self, idx: &[(usize, usize)], rows: usize, cols: usize) -> Self {
        let stride = self.cols;
        let flat: Vec<usize> = idx.iter().map(|&(r, c)| r * stride + c).collect();
        let values = (0..self.n_grid)
            .flat_map(|j| {
                let at = self.at(j);
                flat.iter().map(move |&k| at[k])
            })
            .collect();
        let source = self.source.clone().map(|s| -> Source<T> {
            let flat = flat.clone();
            Arc::new(move |b| s(b).map(|v| flat.iter().map(|&k| v[k]).collect()))
        });
        Self {
            interval: self.interval,
            n_grid: self.n_grid,
            rows,
            cols,
            values,
            source,
        }
    }

    /// Applies `f` at every grid point; the result has no exact source.
    pub fn map_points(
        &self,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, Mat<T>) -> Mat<T>,
    ) -> Result<Self, FieldError> {
        let mut values = Vec::with_capacity(self.n_grid * rows * cols);
        for j in 0..self.n_grid {
            let m = f(j, self.mat_at(j));
            if m.shape() != (rows, cols) {
                return Err(FieldError::Shape(format!("point map returned {:?}", m.shape())));
            }
            values.extend(m.into_vec());
        }
        Self::from_values(self.interval, self.n_grid, rows, cols, values)
    }

    /// Pointwise sum of two fields on the same grid.
    pub fn add(&self, other: &Self) -> Result<Self, FieldError> {
        if self.n_grid != other.n_grid || self.shape() != other.shape() || self.interval != other.interval {
            return Err(FieldError::Shape("fields live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| *a + *b).collect();
        Self::from_values(self.interval, self.n_grid, self.rows, self.cols, values)
    }

    /// The zero field of the given shape.
    pub fn zeros(interval: CompactInterval<T>, n_grid: usize, rows: usize, cols: usize) -> Result<Self, FieldError> {
        Self::from_values(interval, n_grid, rows, cols, vec![T::zero(); n_grid * rows * cols])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn iv(lo: f64, hi: f64) -> CompactInterval<f64> {
        CompactInterval::new(lo, hi).unwrap()
    }

    fn s(text: &str, lo: f64, hi: f64, n: usize) -> SampledField<f64> {
        sample_scalar(&parse(text).unwrap(), iv(lo, hi), n).unwrap()
    }

    #[test]
    fn sampling() {
        assert_eq!(s("beta", 0.0, 1.0, 3).scalar_values(), vec![0.0, 0.5, 1.0]);
        assert_eq!(s("beta^2", -1.0, 1.0, 3).scalar_values(), vec![1.0, 0.0, 1.0]);
        let err = sample_scalar::<f64>(&parse("1/beta").unwrap(), iv(-1.0, 1.0), 3).unwrap_err();
        assert!(matches!(err, FieldError::Domain { beta, .. } if beta == 0.0));
        assert!(sample_scalar::<f64>(&parse("beta").unwrap(), iv(0.0, 1.0), 1).is_err());
        assert!(CompactInterval::new(1.0, 0.0).is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(s("beta", -1.0, 1.0, 101).uniform_norm(), 1.0);
        assert_eq!(SampledField::zeros(iv(0.0, 1.0), 5, 2, 2).unwrap().uniform_norm(), 0.0);
        let pi = std::f64::consts::PI;
        assert_eq!(s("cos(beta)", -pi, pi, 201).uniform_norm(), 1.0);
    }

    #[test]
    fn interpolation() {
        let f = s("beta", 0.0, 1.0, 3);
        assert_eq!(f.eval_at(0.25).unwrap()[(0, 0)], 0.25);
        let g = s("beta^3", 0.0, 1.0, 11);
        assert_eq!(g.eval_at(g.grid_point(3)).unwrap()[(0, 0)], g.scalar_at(3));
        assert!(matches!(f.eval_at(2.0), Err(FieldError::OutOfInterval { .. })));
        let r = g.eval_refined(0.35).unwrap()[(0, 0)];
        assert!((r - 0.35f64.powi(3)).abs() < 1e-15);
    }

    #[test]
    fn components_keep_source() {
        let m = ExprMatrix::parse(
            &[vec!["1".into(), "beta".into()], vec!["beta^2".into(), "2".into()]],
            "beta",
        )
        .unwrap();
        let f = sample(&m, iv(0.0, 1.0), 5).unwrap();
        let c = f.component(1, 0);
        assert_eq!(c.scalar_values(), vec![0.0, 0.0625, 0.25, 0.5625, 1.0]);
        assert!((c.eval_refined(0.1).unwrap()[(0, 0)] - 0.01).abs() < 1e-16);
        let r = f.row(0);
        assert_eq!(r.shape(), (1, 2));
        assert_eq!(r.at(4), &[1.0, 1.0]);
    }

    #[test]
    fn degenerate_interval() {
        let f = s("beta + 1", 0.5, 0.5, 3);
        assert_eq!(f.eval_at(0.5).unwrap()[(0, 0)], 1.5);
        assert_eq!(f.spacing(), 0.0);
    }
}
