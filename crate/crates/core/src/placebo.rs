//! Pre-trend placebo for three-period panels.
//!
//! The placebo reruns an estimator with the period-one-to-two treatment
//! change but the period-zero-to-one outcome change, on units whose
//! treatment barely moved between periods zero and one. Under parallel
//! trends it is centered at zero.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaossError};
use crate::estimate::{EstimateReport, EstimatorTag, ThetaEstimate};
use crate::nonparametric::{estimate_theta_nonparametric, NonparametricConfig};
use crate::panel::{difference_panel, StayerPolicy, UnitObservation};
use crate::parametric::{estimate_parametric, GSpec};

/// Smallest number of pre-period quasi-stayers the placebo runs on.
pub const MIN_PLACEBO_UNITS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceboEstimator {
    Parametric(GSpec),
    Nonparametric(NonparametricConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaceboConfig {
    /// Window on |d1 − d0|, in treatment units.
    pub eta0: f64,
    pub estimator: PlaceboEstimator,
    pub stayer_policy: StayerPolicy,
}

impl PlaceboConfig {
    pub fn parametric(eta0: f64, gspec: GSpec) -> Self {
        Self {
            eta0,
            estimator: PlaceboEstimator::Parametric(gspec),
            stayer_policy: StayerPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceboEstimate {
    pub estimate: ThetaEstimate,
    /// Share of units kept by the pre-period window.
    pub retained_share: f64,
    pub n_retained: usize,
    pub eta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceboReport {
    #[serde(flatten)]
    pub estimate: EstimateReport,
    pub retained_share: f64,
    pub n_retained: usize,
    pub eta0: f64,
}

impl PlaceboEstimate {
    pub fn report(&self) -> PlaceboReport {
        PlaceboReport {
            estimate: self.estimate.report(),
            retained_share: self.retained_share,
            n_retained: self.n_retained,
            eta0: self.eta0,
        }
    }
}

pub fn placebo_theta(panel: &[UnitObservation], cfg: &PlaceboConfig, level: f64) -> Result<PlaceboEstimate> {
    if panel.is_empty() {
        return Err(WaossError::EmptyPanel);
    }
    if !(cfg.eta0 > 0.0) {
        return Err(WaossError::InvalidArgument(format!(
            "eta0 must be positive, got {}",
            cfg.eta0
        )));
    }
    let mut pseudo = Vec::new();
    for u in panel {
        let pre = u.pre.ok_or_else(|| WaossError::MissingPrePeriod {
            unit_id: u.unit_id.clone(),
        })?;
        if (u.d1 - pre.d0).abs() <= cfg.eta0 {
            // y1 - y0 stands in for the outcome change; d2 - d1 is unchanged.
            pseudo.push(UnitObservation {
                y1: pre.y0,
                y2: u.y1,
                pre: None,
                ..u.clone()
            });
        }
    }
    if pseudo.len() < MIN_PLACEBO_UNITS {
        return Err(WaossError::TooFewQuasiStayers {
            count: pseudo.len(),
            required: MIN_PLACEBO_UNITS,
        });
    }
    let n_retained = pseudo.len();
    let sample = difference_panel(&pseudo, cfg.stayer_policy)?;
    let mut estimate = match &cfg.estimator {
        PlaceboEstimator::Parametric(g) => estimate_parametric(&sample, *g, level)?,
        PlaceboEstimator::Nonparametric(np) => estimate_theta_nonparametric(&sample, np, level)?,
    };
    estimate.estimator = EstimatorTag::Placebo;
    Ok(PlaceboEstimate {
        estimate,
        retained_share: n_retained as f64 / panel.len() as f64,
        n_retained,
        eta0: cfg.eta0,
    })
}

/// For each window, the share of units with |d1 − d0| ≤ eta0, i.e. the
/// quantile of |d1 − d0| that the window corresponds to.
pub fn pre_period_window_shares(panel: &[UnitObservation], eta0_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let changes = panel
        .iter()
        .map(|u| {
            u.pre
                .map(|p| (u.d1 - p.d0).abs())
                .ok_or_else(|| WaossError::MissingPrePeriod {
                    unit_id: u.unit_id.clone(),
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    if changes.is_empty() {
        return Err(WaossError::EmptyPanel);
    }
    Ok(eta0_grid
        .iter()
        .map(|&eta| {
            let inside = changes.iter().filter(|c| **c <= eta).count();
            (eta, inside as f64 / changes.len() as f64)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(n: usize) -> Vec<UnitObservation> {
        (0..n)
            .map(|i| {
                let x = i as f64;
                let d1 = (x * 0.37).sin() + 2.0;
                let dd = if i % 2 == 0 {
                    0.2 + (x * 0.11).cos().abs()
                } else {
                    -0.3 - (x * 0.7).sin().abs()
                };
                let d0 = d1 - 0.02 * ((i % 10) as f64 - 4.5);
                UnitObservation::new(format!("u{i}"), d1, d1 + dd, 1.0 + d1, 2.0 + d1 + 0.5 * dd)
                    .unwrap()
                    .with_pre_period(d0, 0.5 + d1)
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn placebo_of_exact_parallel_trends_is_zero() {
        let p = panel(200);
        let est = placebo_theta(&p, &PlaceboConfig::parametric(1.0, GSpec::default()), 0.95).unwrap();
        assert_eq!(est.estimate.estimator, EstimatorTag::Placebo);
        assert!(est.estimate.theta_hat.abs() < 1e-10);
        assert_eq!(est.retained_share, 1.0);
    }

    #[test]
    fn shrinking_window_keeps_fewer_units() {
        let p = panel(400);
        let wide = placebo_theta(&p, &PlaceboConfig::parametric(0.1, GSpec::default()), 0.95).unwrap();
        let narrow = placebo_theta(&p, &PlaceboConfig::parametric(0.05, GSpec::default()), 0.95).unwrap();
        assert!(narrow.retained_share <= wide.retained_share);
        assert!(narrow.n_retained < wide.n_retained);
    }

    #[test]
    fn errors() {
        let mut p = panel(100);
        assert!(matches!(
            placebo_theta(&p, &PlaceboConfig::parametric(1e-6, GSpec::default()), 0.95),
            Err(WaossError::TooFewQuasiStayers { count: 0, .. })
        ));
        p[3].pre = None;
        assert!(matches!(
            placebo_theta(&p, &PlaceboConfig::parametric(1.0, GSpec::default()), 0.95),
            Err(WaossError::MissingPrePeriod { unit_id }) if unit_id == "u3"
        ));
    }

    #[test]
    fn window_shares() {
        let p = panel(100);
        let shares = pre_period_window_shares(&p, &[0.01, 0.05, 1.0]).unwrap();
        assert!(shares.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(shares[2].1, 1.0);
    }
}
