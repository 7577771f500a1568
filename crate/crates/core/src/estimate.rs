//! The result type every estimator returns, and its JSON rendering.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaossError};
use crate::nonparametric::Kernel;
use crate::parametric::GSpec;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorTag {
    Parametric,
    Nonparametric,
    Twfe,
    Placebo,
}

impl std::fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            EstimatorTag::Parametric => "parametric",
            EstimatorTag::Nonparametric => "nonparametric",
            EstimatorTag::Twfe => "twfe",
            EstimatorTag::Placebo => "placebo",
        };
        f.write_str(name)
    }
}

/// Estimator-specific extras carried along with the point estimate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<GSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidths_used: Option<BandwidthsUsed>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_boot: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta_hat: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthsUsed {
    pub h_d1: f64,
    pub h_dd: f64,
}

/// Point estimate of the weighted average of slopes with its inference.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate {
    pub theta_hat: f64,
    /// `None` when no standard error is available (bootstrap disabled).
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub level: f64,
    /// Per-unit influence values; empty for estimators without them.
    pub psi: Vec<f64>,
    pub n: usize,
    pub n_dropped: usize,
    pub estimator: EstimatorTag,
    pub diagnostics: Diagnostics,
}

impl ThetaEstimate {
    pub fn report(&self) -> EstimateReport {
        EstimateReport {
            estimator: self.estimator,
            theta_hat: self.theta_hat,
            se: self.se,
            ci: self.ci.map(|(l, u)| [l, u]),
            level: self.level,
            n: self.n,
            n_dropped: self.n_dropped,
            diagnostics: self.diagnostics.clone(),
        }
    }
}

/// Serialized form of a [`ThetaEstimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: EstimatorTag,
    pub theta_hat: f64,
    pub se: Option<f64>,
    pub ci: Option<[f64; 2]>,
    pub level: f64,
    pub n: usize,
    pub n_dropped: usize,
    #[serde(flatten)]
    pub diagnostics: Diagnostics,
}

/// Normal-approximation interval θ ± z·se.
pub fn wald_ci(theta: f64, se: f64, level: f64) -> Result<(f64, f64)> {
    let z = stats::two_sided_z(level)?;
    if !(se >= 0.0) {
        return Err(WaossError::InvalidArgument(format!(
            "standard error must be nonnegative, got {se}"
        )));
    }
    Ok((theta - z * se, theta + z * se))
}
