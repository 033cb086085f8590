use serde::{Deserialize, Serialize};

use crate::branch::{DEFAULT_TOL_MONO, DEFAULT_TOL_VAL};
use crate::field::DEFAULT_GRID;

/// Every numerical knob of an analysis. Serialized verbatim into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub grid: usize,
    /// Stratified η samples for a scalar channel.
    pub eta_samples: usize,
    /// Stratified η samples per eigenvalue channel in the multi-dimensional test.
    pub eta_per_channel: usize,
    pub seed: u64,
    pub tol_rank: f64,
    pub tol_mono: f64,
    /// Absolute merge distance for preimage points; `None` means two grid spacings.
    pub tol_merge: Option<f64>,
    pub tol_val: f64,
    pub tol_vanish: f64,
    pub cond_max: f64,
    pub tol_recon: f64,
    /// Re-run on a doubled grid with doubled η samples and demand agreement.
    pub stability_check: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            eta_samples: 128,
            eta_per_channel: 32,
            seed: 0x5eed_2024,
            tol_rank: 1e-8,
            tol_mono: DEFAULT_TOL_MONO,
            tol_merge: None,
            tol_val: DEFAULT_TOL_VAL,
            tol_vanish: 1e-8,
            cond_max: 1e8,
            tol_recon: 1e-8,
            stability_check: true,
        }
    }
}

impl AnalysisConfig {
    pub fn tol_merge_for(&self, spacing: f64) -> f64 {
        self.tol_merge.unwrap_or(2.0 * spacing)
    }

    /// Configuration of the confirmation run: grid refined 2x, samples doubled.
    pub fn refined(&self) -> Self {
        Self {
            grid: 2 * (self.grid - 1) + 1,
            eta_samples: 2 * self.eta_samples,
            eta_per_channel: 2 * self.eta_per_channel,
            tol_merge: self.tol_merge,
            stability_check: false,
            ..self.clone()
        }
    }

    pub fn without_stability(&self) -> Self {
        Self {
            stability_check: false,
            ..self.clone()
        }
    }
}
