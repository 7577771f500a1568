//! Two-way fixed effects baseline.
//!
//! With two periods, the unit/period fixed-effects regression of Y on D is
//! the same as the regression of ΔY on an intercept and ΔD. Standard errors
//! are heteroskedasticity robust with the HC1 factor n/(n − 2). A differenced
//! unit is a single observation, so clustering by unit reduces to this.

use crate::error::{Result, WaossError};
use crate::estimate::{wald_ci, Diagnostics, EstimatorTag, ThetaEstimate};
use crate::panel::DifferencedSample;
use crate::stats;

pub fn estimate_twfe(sample: &DifferencedSample, level: f64) -> Result<ThetaEstimate> {
    stats::two_sided_z(level)?;
    let units = sample.units();
    let n = units.len();
    if n < 2 {
        return Err(WaossError::TooFewUnits { n, required: 2 });
    }
    let w = sample.weights();
    let total = sample.total_weight();
    let x: Vec<f64> = units.iter().map(|u| u.dd).collect();
    let y: Vec<f64> = units.iter().map(|u| u.dy).collect();
    let x_bar = stats::weighted_mean(&x, &w);
    let y_bar = stats::weighted_mean(&y, &w);
    let sxx = stats::sum(units.iter().map(|u| u.weight * (u.dd - x_bar).powi(2)));
    let scale = stats::sum(units.iter().map(|u| u.weight * u.dd * u.dd));
    if !(sxx > 1e-24 * scale) {
        return Err(WaossError::DegenerateRegressor);
    }
    let sxy = stats::sum(units.iter().map(|u| u.weight * (u.dd - x_bar) * (u.dy - y_bar)));
    let beta = sxy / sxx;
    let alpha = y_bar - beta * x_bar;

    // β̂ − β ≈ Σ wᵢψᵢ / Σ wᵢ with ψᵢ = (xᵢ − x̄)eᵢ / (Sxx / Σw).
    let psi: Vec<f64> = units
        .iter()
        .map(|u| (u.dd - x_bar) * (u.dy - alpha - beta * u.dd) / (sxx / total))
        .collect();
    let hc1 = if n > 2 { n as f64 / (n - 2) as f64 } else { 1.0 };
    let se = (stats::sum(units.iter().zip(&psi).map(|(u, p)| (u.weight * p).powi(2))) * hc1).sqrt() / total;
    let ci = wald_ci(beta, se, level)?;
    Ok(ThetaEstimate {
        theta_hat: beta,
        se: Some(se),
        ci: Some(ci),
        level,
        psi,
        n,
        n_dropped: sample.n_dropped(),
        estimator: EstimatorTag::Twfe,
        diagnostics: Diagnostics::default(),
    })
}
