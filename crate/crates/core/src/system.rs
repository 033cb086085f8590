use thiserror::Error;

use crate::config::AnalysisConfig;
use crate::field::{sample, CompactInterval, ExprMatrix, FieldError, SampledField};
use crate::multidim::{ensemble_verdict, MultidimError};
use crate::scalar::Real;
use crate::scalar_verdict::{multi_input_verdict, single_input_verdict};
use crate::verdict::Verdict;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("A must be square and non-empty, got {rows}x{cols}")]
    DriftShape { rows: usize, cols: usize },
    #[error("B must have {expected} rows and at least one column, got {rows}x{cols}")]
    InputShape { expected: usize, rows: usize, cols: usize },
    #[error("{name} must have {expected} entries, got {got}")]
    TargetShape { name: &'static str, expected: usize, got: usize },
    #[error("{name}: {source}")]
    Field {
        name: &'static str,
        #[source]
        source: FieldError,
    },
}

/// `ẋ = A(β)x + B(β)U` on the interval `K`, with expressions and samples.
#[derive(Debug, Clone)]
pub struct EnsembleSystem<T> {
    pub parameter: String,
    pub interval: CompactInterval<T>,
    pub a_expr: ExprMatrix,
    pub b_expr: ExprMatrix,
    pub x0: Option<ExprMatrix>,
    pub xf: Option<ExprMatrix>,
    pub a: SampledField<T>,
    pub b: SampledField<T>,
}

impl<T: Real> EnsembleSystem<T> {
    pub fn new(
        parameter: impl Into<String>,
        interval: CompactInterval<T>,
        grid: usize,
        a_expr: ExprMatrix,
        b_expr: ExprMatrix,
    ) -> Result<Self, SystemError> {
        let n = a_expr.rows();
        if n == 0 || a_expr.cols() != n {
            return Err(SystemError::DriftShape {
                rows: a_expr.rows(),
                cols: a_expr.cols(),
            });
        }
        if b_expr.rows() != n || b_expr.cols() == 0 {
            return Err(SystemError::InputShape {
                expected: n,
                rows: b_expr.rows(),
                cols: b_expr.cols(),
            });
        }
        let a = sample(&a_expr, interval, grid).map_err(|source| SystemError::Field { name: "A", source })?;
        let b = sample(&b_expr, interval, grid).map_err(|source| SystemError::Field { name: "B", source })?;
        Ok(Self {
            parameter: parameter.into(),
            interval,
            a_expr,
            b_expr,
            x0: None,
            xf: None,
            a,
            b,
        })
    }

    /// Parses the drift and input matrices from expression strings.
    pub fn parse(
        parameter: &str,
        interval: (T, T),
        grid: usize,
        a: &[Vec<String>],
        b: &[Vec<String>],
    ) -> Result<Self, String> {
        let iv = CompactInterval::new(interval.0, interval.1).map_err(|e| e.to_string())?;
        let ae = ExprMatrix::parse(a, parameter).map_err(|(i, j, e)| format!("A[{i}][{j}]: {e}"))?;
        let be = ExprMatrix::parse(b, parameter).map_err(|(i, j, e)| format!("B[{i}][{j}]: {e}"))?;
        Self::new(parameter, iv, grid, ae, be).map_err(|e| e.to_string())
    }

    pub fn with_targets(mut self, x0: Option<ExprMatrix>, xf: Option<ExprMatrix>) -> Result<Self, SystemError> {
        for (name, t) in [("x0", &x0), ("xF", &xf)] {
            if let Some(t) = t {
                if t.rows() != self.n() || t.cols() != 1 {
                    return Err(SystemError::TargetShape {
                        name,
                        expected: self.n(),
                        got: t.rows() * t.cols(),
                    });
                }
                sample::<T>(t, self.interval, self.grid()).map_err(|source| SystemError::Field { name, source })?;
            }
        }
        self.x0 = x0;
        self.xf = xf;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn grid(&self) -> usize {
        self.a.n_grid()
    }

    /// The same system sampled on a different grid.
    pub fn with_grid(&self, grid: usize) -> Result<Self, SystemError> {
        let mut out = Self::new(
            self.parameter.clone(),
            self.interval,
            grid,
            self.a_expr.clone(),
            self.b_expr.clone(),
        )?;
        out.x0 = self.x0.clone();
        out.xf = self.xf.clone();
        Ok(out)
    }

    /// A target expression vector sampled as an `n × 1` field; zero when absent.
    pub fn target(&self, which: Target) -> Result<SampledField<T>, SystemError> {
        let (name, e) = match which {
            Target::Initial => ("x0", &self.x0),
            Target::Final => ("xF", &self.xf),
        };
        match e {
            Some(e) => sample(e, self.interval, self.grid()).map_err(|source| SystemError::Field { name, source }),
            None => SampledField::zeros(self.interval, self.grid(), self.n(), 1)
                .map_err(|source| SystemError::Field { name, source }),
        }
    }

    /// Routes to the scalar single-input, scalar multi-input or
    /// multi-dimensional test.
    /// The sampled grid takes precedence over `cfg.grid`.
    pub fn analyze(&self, cfg: &AnalysisConfig) -> Result<Verdict, MultidimError> {
        let cfg = &AnalysisConfig {
            grid: self.grid(),
            ..cfg.clone()
        };
        match (self.n(), self.m()) {
            (1, 1) => Ok(single_input_verdict(&self.a, &self.b, cfg)),
            (1, _) => Ok(multi_input_verdict(&self.a, &self.b, cfg)),
            _ => ensemble_verdict(&self.a, &self.b, cfg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Initial,
    Final,
}
