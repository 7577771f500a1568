//! Nonparametric bootstrap over units.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Result, WaossError};
use crate::panel::DifferencedSample;
use crate::rng;
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub replicates: Vec<f64>,
    /// Standard deviation of the replicates.
    pub se: f64,
    /// Percentile interval at the requested level.
    pub ci: (f64, f64),
}

/// Draws `n_boot` resamples of the units (with replacement, same size) and
/// evaluates `statistic` on each. Replicate b uses the stream
/// `rng::stream(seed, b)`.
pub fn unit_bootstrap<F>(
    sample: &DifferencedSample,
    n_boot: usize,
    seed: u64,
    level: f64,
    statistic: F,
) -> Result<BootstrapSummary>
where
    F: Fn(&DifferencedSample) -> Result<f64> + Sync,
{
    stats::two_sided_z(level)?;
    if n_boot < 2 {
        return Err(WaossError::InvalidArgument(format!(
            "bootstrap needs at least 2 resamples, got {n_boot}"
        )));
    }
    let n = sample.n();
    let replicates = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, b as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            statistic(&sample.resample(&idx)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let se = stats::sample_sd(&replicates);
    let mut sorted = replicates.clone();
    sorted.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let ci = (
        stats::quantile_sorted(&sorted, alpha / 2.0),
        stats::quantile_sorted(&sorted, 1.0 - alpha / 2.0),
    );
    Ok(BootstrapSummary { replicates, se, ci })
}
