//! Piecewise-constant steering controls: least-squares synthesis on the grid
//! and verification by fixed-step simulation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldError, SampledField};
use crate::linalg::{expm, Mat, Svd};
use crate::scalar::Real;
use crate::system::{EnsembleSystem, SystemError, Target};

pub const DEFAULT_RIDGE: f64 = 1e-10;
pub const DEFAULT_STEPS_PER_SEGMENT: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("horizon must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("segment count must be at least 1")]
    Segments,
    #[error("steps per segment must be at least 1")]
    Steps,
    #[error("schedule has {got} inputs per segment, system has {expected}")]
    ScheduleWidth { expected: usize, got: usize },
    #[error("non-finite control value in segment {0}")]
    NonFinite(usize),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `U(t) = values[p]` for `t ∈ [pT/P, (p+1)T/P)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule<T> {
    pub horizon: T,
    /// `P × m`.
    pub values: Vec<Vec<T>>,
}

impl<T: Real> ControlSchedule<T> {
    pub fn new(horizon: T, values: Vec<Vec<T>>) -> Result<Self, SynthesisError> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(SynthesisError::Horizon(horizon.as_f64()));
        }
        if values.is_empty() {
            return Err(SynthesisError::Segments);
        }
        if let Some(p) = values.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(SynthesisError::NonFinite(p));
        }
        Ok(Self { horizon, values })
    }

    pub fn zeros(horizon: T, segments: usize, m: usize) -> Self {
        Self {
            horizon,
            values: vec![vec![T::zero(); m]; segments],
        }
    }

    pub fn segments(&self) -> usize {
        self.values.len()
    }

    pub fn segment_length(&self) -> T {
        self.horizon / T::from_usize_lossy(self.segments())
    }

    /// `Σ |u_p|² · T/P`.
    pub fn energy(&self) -> T {
        self.values.iter().flatten().map(|v| *v * *v).sum::<T>() * self.segment_length()
    }

    pub fn flat(&self) -> Vec<T> {
        self.values.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringReport {
    pub predicted_error: f64,
    pub simulated_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub energy: f64,
    /// Simulated error within `epsilon` (false when no epsilon was given).
    pub converged: bool,
    /// `‖G u − r‖₂` on the grid.
    pub residual_l2: f64,
    pub segments: usize,
    pub grid: usize,
    pub steps_per_segment: usize,
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub horizon: f64,
    pub segments: usize,
    /// Tikhonov weight relative to the largest singular value of `G`.
    pub ridge: f64,
    pub steps_per_segment: usize,
    pub epsilon: Option<f64>,
}

impl SynthesisOptions {
    pub fn new(horizon: f64, segments: usize) -> Self {
        Self {
            horizon,
            segments,
            ridge: DEFAULT_RIDGE,
            steps_per_segment: DEFAULT_STEPS_PER_SEGMENT,
            epsilon: None,
        }
    }
}

fn check(horizon: f64, segments: usize) -> Result<(), SynthesisError> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(SynthesisError::Horizon(horizon));
    }
    if segments == 0 {
        return Err(SynthesisError::Segments);
    }
    Ok(())
}

/// `(e^{Aτ}, ∫₀^τ e^{As} ds)` from one exponential of `[[A, I], [0, 0]]·τ`.
fn segment_maps<T: Real>(a: &Mat<T>, tau: T) -> (Mat<T>, Mat<T>) {
    let n = a.rows();
    let aug = Mat::from_fn(2 * n, 2 * n, |r, c| {
        if r < n && c < n {
            a[(r, c)] * tau
        } else if r < n && c == r + n {
            tau
        } else {
            T::zero()
        }
    });
    let e = expm(&aug);
    let phi = Mat::from_fn(n, n, |r, c| e[(r, c)]);
    let gamma = Mat::from_fn(n, n, |r, c| e[(r, c + n)]);
    (phi, gamma)
}

/// `G` of shape `(grid·n, P·m)`: column block `(p, j)` is the state at `T`,
/// starting from zero, produced by unit input `j` on segment `p`.
pub fn reachability_operator<T: Real>(
    sys: &EnsembleSystem<T>,
    horizon: T,
    segments: usize,
) -> Result<Mat<T>, SynthesisError> {
    check(horizon.as_f64(), segments)?;
    let (n, m, g) = (sys.n(), sys.m(), sys.grid());
    let tau = horizon / T::from_usize_lossy(segments);
    let blocks: Vec<Vec<Mat<T>>> = (0..g)
        .into_par_iter()
        .map(|k| {
            let (phi, gamma) = segment_maps(&sys.a.mat_at(k), tau);
            let mut q = gamma.matmul(&sys.b.mat_at(k));
            let mut out = vec![Mat::zeros(n, m); segments];
            for p in (0..segments).rev() {
                if p + 1 < segments {
                    q = phi.matmul(&q);
                }
                out[p] = q.clone();
            }
            out
        })
        .collect();
    let mut gm = Mat::zeros(g * n, segments * m);
    for (k, per) in blocks.iter().enumerate() {
        for (p, blk) in per.iter().enumerate() {
            for i in 0..n {
                for j in 0..m {
                    gm[(k * n + i, p * m + j)] = blk[(i, j)];
                }
            }
        }
    }
    Ok(gm)
}

/// `e^{A(β)T} x₀(β)` at every grid point, stacked.
pub fn free_evolution<T: Real>(sys: &EnsembleSystem<T>, x0: &SampledField<T>, horizon: T) -> Vec<T> {
    (0..sys.grid())
        .into_par_iter()
        .flat_map_iter(|k| {
            let e = expm(&sys.a.mat_at(k).scale(horizon));
            e.matvec(x0.at(k))
        })
        .collect()
}

/// Regularised least squares `min ‖G u − r‖² + (ridge·σ_max)²‖u‖²`; at
/// `ridge = 0`, the pseudo-inverse with the usual rank cutoff.
pub fn tikhonov_solve<T: Real>(g: &Mat<T>, r: &[T], ridge: T) -> Vec<T> {
    let svd = Svd::new(g);
    let smax = svd.largest();
    let lam = ridge * smax;
    let cutoff = T::epsilon() * T::from_usize_lossy(g.rows().max(g.cols())) * smax;
    let k = svd.s.len();
    let mut u = vec![T::zero(); g.cols()];
    for idx in 0..k {
        let s = svd.s[idx];
        let f = if lam > T::zero() {
            s / (s * s + lam * lam)
        } else if s > cutoff {
            T::one() / s
        } else {
            T::zero()
        };
        if f == T::zero() {
            continue;
        }
        let c: T = (0..g.rows()).map(|i| svd.u[(i, idx)] * r[i]).sum::<T>() * f;
        for (j, uj) in u.iter_mut().enumerate() {
            *uj += c * svd.v[(j, idx)];
        }
    }
    u
}

fn sup_diff<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
}

/// Synthesizes a schedule steering `x0` toward `xF` and verifies it by simulation.
pub fn synthesize<T: Real>(
    sys: &EnsembleSystem<T>,
    x0: &SampledField<T>,
    xf: &SampledField<T>,
    opts: &SynthesisOptions,
) -> Result<(ControlSchedule<T>, SteeringReport), SynthesisError> {
    check(opts.horizon, opts.segments)?;
    if opts.steps_per_segment == 0 {
        return Err(SynthesisError::Steps);
    }
    let horizon = T::lit(opts.horizon);
    let (m, p) = (sys.m(), opts.segments);
    let g = reachability_operator(sys, horizon, p)?;
    let free = free_evolution(sys, x0, horizon);
    let r: Vec<T> = xf.values().iter().zip(&free).map(|(a, b)| *a - *b).collect();
    let u = tikhonov_solve(&g, &r, T::lit(opts.ridge));
    let gu = g.matvec(&u);
    let predicted = sup_diff(&gu, &r);
    let residual_l2 = gu.iter().zip(&r).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>().sqrt();
    let values: Vec<Vec<T>> = u.chunks(m).map(<[T]>::to_vec).collect();
    let schedule = ControlSchedule::new(horizon, values)?;
    let x_t = simulate(sys, x0, &schedule, opts.steps_per_segment)?;
    let simulated = sup_diff(x_t.values(), xf.values());
    let report = SteeringReport {
        predicted_error: predicted.as_f64(),
        simulated_error: simulated.as_f64(),
        epsilon: opts.epsilon,
        energy: schedule.energy().as_f64(),
        converged: opts.epsilon.is_some_and(|e| simulated.as_f64() <= e),
        residual_l2: residual_l2.as_f64(),
        segments: p,
        grid: sys.grid(),
        steps_per_segment: opts.steps_per_segment,
        ridge: opts.ridge,
    };
    Ok((schedule, report))
}

/// Synthesis between the system's own `x0` and `xF` targets.
pub fn synthesize_targets<T: Real>(
    sys: &EnsembleSystem<T>,
    opts: &SynthesisOptions,
) -> Result<(ControlSchedule<T>, SteeringReport), SynthesisError> {
    let x0 = sys.target(Target::Initial)?;
    let xf = sys.target(Target::Final)?;
    synthesize(sys, &x0, &xf, opts)
}

/// Classical RK4 for `ẋ = A(β)x + B(β)U(t)` at every grid point; returns `x(T, ·)`.
pub fn simulate<T: Real>(
    sys: &EnsembleSystem<T>,
    x0: &SampledField<T>,
    schedule: &ControlSchedule<T>,
    steps_per_segment: usize,
) -> Result<SampledField<T>, SynthesisError> {
    if steps_per_segment == 0 {
        return Err(SynthesisError::Steps);
    }
    if schedule.values.iter().any(|r| r.len() != sys.m()) {
        return Err(SynthesisError::ScheduleWidth {
            expected: sys.m(),
            got: schedule.values.iter().map(Vec::len).find(|&l| l != sys.m()).unwrap_or(0),
        });
    }
    let n = sys.n();
    let h = schedule.segment_length() / T::from_usize_lossy(steps_per_segment);
    let half = h / T::lit(2.0);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let finals: Vec<T> = (0..sys.grid())
        .into_par_iter()
        .flat_map_iter(|k| {
            let a = sys.a.mat_at(k);
            let b = sys.b.mat_at(k);
            let mut x = x0.at(k).to_vec();
            for u in &schedule.values {
                let bu = b.matvec(u);
                let f = |x: &[T]| -> Vec<T> { a.matvec(x).into_iter().zip(&bu).map(|(p, q)| p + *q).collect() };
                for _ in 0..steps_per_segment {
                    let k1 = f(&x);
                    let x2: Vec<T> = (0..n).map(|i| x[i] + half * k1[i]).collect();
                    let k2 = f(&x2);
                    let x3: Vec<T> = (0..n).map(|i| x[i] + half * k2[i]).collect();
                    let k3 = f(&x3);
                    let x4: Vec<T> = (0..n).map(|i| x[i] + h * k3[i]).collect();
                    let k4 = f(&x4);
                    for i in 0..n {
                        x[i] += sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
                    }
                }
            }
            x
        })
        .collect();
    Ok(SampledField::from_values(sys.interval, sys.grid(), n, 1, finals)?)
}
