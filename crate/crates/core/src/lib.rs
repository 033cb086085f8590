//! Uniform ensemble controllability of parameter-dependent linear systems
//! `ẋ(t, β) = A(β)x(t, β) + B(β)U(t)`, `β ∈ K`.
//!
//! The core is generic over [`Real`] (`f32`, `f64`); the aliases below fix `f64`
//! and `f32`.

pub mod branch;
pub mod config;
pub mod expr;
pub mod field;
pub mod io;
pub mod linalg;
pub mod multidim;
pub mod sampling;
mod scalar;
pub mod scalar_verdict;
pub mod spectral;
pub mod synthesis;
pub mod system;
pub mod verdict;

pub use config::AnalysisConfig;
pub use expr::{ExprAst, ParseError};
pub use scalar::Real;
pub use verdict::{ReasonCode, Status, Verdict};

pub type Interval = field::CompactInterval<f64>;
pub type Field = field::SampledField<f64>;
pub type Field32 = field::SampledField<f32>;
pub type System = system::EnsembleSystem<f64>;
pub type System32 = system::EnsembleSystem<f32>;
pub type Profile = spectral::SpectralProfile<f64>;
pub type Schedule = synthesis::ControlSchedule<f64>;
pub type Matrix = linalg::Mat<f64>;
