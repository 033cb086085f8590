//! Verdicts and the evidence that backs them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::spectral::SpectralSummary;

/// Evidence records kept in full; the rest are only counted.
pub const EVIDENCE_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Controllable,
    NotControllable,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReasonCode {
    NonInjectiveSingleInput,
    VanishingInput,
    GramianRankDeficient,
    DegenerateDrift,
    GridUnstable,
    KalmanRankDeficient,
    /// Complex, defective or badly conditioned spectrum.
    UnsupportedSpectrum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub reason: ReasonCode,
    /// η, or the η-tuple for multi-dimensional systems.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eta: Vec<f64>,
    /// Parameter values involved (preimage points, failing grid points).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required: Option<usize>,
    /// State row or eigenvalue channel the record refers to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<usize>,
    pub detail: String,
}

impl Evidence {
    pub fn new(reason: ReasonCode, detail: impl Into<String>) -> Self {
        Self {
            reason,
            eta: Vec::new(),
            beta: Vec::new(),
            rank: None,
            required: None,
            channel: None,
            detail: detail.into(),
        }
    }

    pub fn eta(mut self, eta: Vec<f64>) -> Self {
        self.eta = eta;
        self
    }

    pub fn beta(mut self, beta: Vec<f64>) -> Self {
        self.beta = beta;
        self
    }

    pub fn ranks(mut self, rank: usize, required: usize) -> Self {
        self.rank = Some(rank);
        self.required = Some(required);
        self
    }

    pub fn channel(mut self, channel: usize) -> Self {
        self.channel = Some(channel);
        self
    }
}

/// Rank data of one Ensemble Controllability Gramian `D(η)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramianSummary {
    pub eta: f64,
    pub kappa: usize,
    pub rank: usize,
    pub smallest_retained: Option<f64>,
    pub points: Vec<f64>,
    /// Probe at the image of a branch junction or interval endpoint; reported, not decisive.
    pub boundary: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<usize>,
}

/// How the η values (or η-tuples) were chosen.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplingSummary {
    pub scheme: String,
    pub grid: usize,
    pub samples_checked: usize,
    pub guard_bands: Vec<[f64; 2]>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub evidence: Vec<Evidence>,
    /// Total failing records found, including those beyond the cap.
    pub evidence_total: usize,
    pub config: AnalysisConfig,
    pub sampling: SamplingSummary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gramians: Vec<GramianSummary>,
    /// Status of the refined confirmation run, when one was made.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_status: Option<Status>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSummary>,
}

impl Verdict {
    pub fn new(status: Status, config: &AnalysisConfig) -> Self {
        Self {
            status,
            evidence: Vec::new(),
            evidence_total: 0,
            config: config.clone(),
            sampling: SamplingSummary::default(),
            gramians: Vec::new(),
            refined_status: None,
            spectral: None,
        }
    }

    pub fn controllable(config: &AnalysisConfig) -> Self {
        Self::new(Status::Controllable, config)
    }

    pub fn failing(status: Status, config: &AnalysisConfig, evidence: Vec<Evidence>) -> Self {
        let mut v = Self::new(status, config);
        for e in evidence {
            v.push(e);
        }
        v
    }

    pub fn push(&mut self, e: Evidence) {
        self.evidence_total += 1;
        if self.evidence.len() < EVIDENCE_CAP {
            self.evidence.push(e);
        }
    }

    pub fn reasons(&self) -> Vec<ReasonCode> {
        let mut r: Vec<_> = self.evidence.iter().map(|e| e.reason).collect();
        r.dedup();
        r
    }

    pub fn has_reason(&self, reason: ReasonCode) -> bool {
        self.evidence.iter().any(|e| e.reason == reason)
    }

    /// Compares with a refined re-run; disagreement becomes `Inconclusive(GridUnstable)`.
    pub fn confirm(mut self, refined: Verdict) -> Verdict {
        self.refined_status = Some(refined.status);
        if refined.status == self.status {
            return self;
        }
        let detail = format!(
            "grid {} gives {}, grid {} gives {}",
            self.sampling.grid, self.status, refined.sampling.grid, refined.status
        );
        let mut out = Verdict::new(Status::Inconclusive, &self.config);
        out.sampling = self.sampling;
        out.gramians = self.gramians;
        out.spectral = self.spectral;
        out.refined_status = Some(refined.status);
        out.push(Evidence::new(ReasonCode::GridUnstable, detail));
        for e in self.evidence.into_iter().chain(refined.evidence) {
            out.push(e);
        }
        out
    }
}
