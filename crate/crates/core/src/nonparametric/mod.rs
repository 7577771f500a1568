//! Nonparametric estimation without a parametric family for g.
//!
//! g(d1, δ) = E[ΔY | D1 = d1, ΔD = δ] is estimated by bivariate local-linear
//! regression and evaluated on the stayer line δ = 0. Averaging S·ĝ(D1, 0)
//! over the sample (marginal integration) gives ζ̂, and
//!
//! ```text
//! θ̂ = [mean(S·ΔY) − ζ̂] / mean(|ΔD|)
//! ```
//!
//! with all means weighted. Inference uses a bootstrap over units.

mod kernel;
mod local_linear;

use serde::{Deserialize, Serialize};

pub use kernel::Kernel;
pub use local_linear::{FitKind, PointFit};

use crate::bootstrap;
use crate::error::{Result, WaossError};
use crate::estimate::{BandwidthsUsed, Diagnostics, EstimatorTag, ThetaEstimate};
use crate::panel::DifferencedSample;
use crate::stats::{self, CompensatedSum};

/// Minimum sample size for the local-linear smoother.
pub const MIN_UNITS: usize = 10;

/// Multipliers of the rule-of-thumb δ-bandwidth tried by cross-validation.
pub const CV_GRID: [f64; 7] = [0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0];
/// At most this many leave-one-out evaluation points enter the CV criterion.
pub const CV_MAX_POINTS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Fixed(f64),
    /// 1.06·σ̂·n^(−1/6); in the δ direction additionally times n^(−undersmooth).
    Silverman,
    /// Leave-one-out cross-validation over [`CV_GRID`] (δ direction only).
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    pub h_d1: BandwidthRule,
    pub h_dd: BandwidthRule,
    pub kernel: Kernel,
    pub undersmooth_exponent: f64,
}

impl Default for BandwidthConfig {
    fn default() -> Self {
        Self {
            h_d1: BandwidthRule::Silverman,
            h_dd: BandwidthRule::Silverman,
            kernel: Kernel::Epanechnikov,
            undersmooth_exponent: 0.05,
        }
    }
}

impl BandwidthConfig {
    pub fn fixed(h_d1: f64, h_dd: f64) -> Self {
        Self {
            h_d1: BandwidthRule::Fixed(h_d1),
            h_dd: BandwidthRule::Fixed(h_dd),
            ..Default::default()
        }
    }

    pub fn with_kernel(self, kernel: Kernel) -> Self {
        Self { kernel, ..self }
    }

    /// Rule-of-thumb bandwidths (h_d1, h_dd) for this sample.
    pub fn rule_of_thumb(&self, sample: &DifferencedSample) -> Result<(f64, f64)> {
        let w = sample.weights();
        let d1: Vec<f64> = sample.units().iter().map(|u| u.d1).collect();
        let dd: Vec<f64> = sample.units().iter().map(|u| u.dd).collect();
        let n = sample.n() as f64;
        let base = 1.06 * n.powf(-1.0 / 6.0);
        let h1 = base * stats::weighted_sd(&d1, &w);
        let h2 = base * stats::weighted_sd(&dd, &w) * n.powf(-self.undersmooth_exponent);
        if !(h1 > 0.0 && h2 > 0.0) {
            return Err(WaossError::InvalidArgument(
                "rule-of-thumb bandwidth is zero: d1 or dd has no spread".into(),
            ));
        }
        Ok((h1, h2))
    }

    /// Resolves rules to positive numbers.
    pub fn resolve(&self, sample: &DifferencedSample) -> Result<(f64, f64)> {
        let (rot1, rot2) = match (self.h_d1, self.h_dd) {
            (BandwidthRule::Fixed(a), BandwidthRule::Fixed(b)) => (a, b),
            _ => self.rule_of_thumb(sample)?,
        };
        let h1 = match self.h_d1 {
            BandwidthRule::Fixed(h) => h,
            BandwidthRule::Silverman => rot1,
            BandwidthRule::Cv => {
                return Err(WaossError::InvalidArgument(
                    "cross-validation is only offered for the dd bandwidth".into(),
                ))
            }
        };
        let h2 = match self.h_dd {
            BandwidthRule::Fixed(h) => h,
            BandwidthRule::Silverman => rot2,
            BandwidthRule::Cv => cv_bandwidth_dd(sample, h1, rot2, self.kernel)?,
        };
        if !(h1 > 0.0 && h1.is_finite() && h2 > 0.0 && h2.is_finite()) {
            return Err(WaossError::InvalidArgument(format!(
                "bandwidths must be positive and finite, got ({h1}, {h2})"
            )));
        }
        Ok((h1, h2))
    }
}

/// Leave-one-out choice of h_dd among `CV_GRID × base`.
pub fn cv_bandwidth_dd(sample: &DifferencedSample, h_d1: f64, base: f64, kernel: Kernel) -> Result<f64> {
    let units = sample.units();
    let stride = units.len().div_ceil(CV_MAX_POINTS).max(1);
    let picks: Vec<usize> = (0..units.len()).step_by(stride).collect();
    let points: Vec<(f64, f64)> = picks.iter().map(|&i| (units[i].d1, units[i].dd)).collect();
    let mut best = (f64::INFINITY, base);
    for mult in CV_GRID {
        let h = base * mult;
        let fits = local_linear::fit_points(units, &points, h_d1, h, kernel, Some(&picks))?;
        let mut sse = CompensatedSum::new();
        let mut wsum = CompensatedSum::new();
        for (&i, f) in picks.iter().zip(&fits) {
            let e = units[i].dy - f.value;
            sse.add(units[i].weight * e * e);
            wsum.add(units[i].weight);
        }
        let score = sse.value() / wsum.value();
        if score < best.0 {
            best = (score, h);
        }
    }
    Ok(best.1)
}

/// ĝ at arbitrary (d1, δ) points.
pub fn local_linear_g(
    sample: &DifferencedSample,
    eval_points: &[(f64, f64)],
    bw: &BandwidthConfig,
) -> Result<Vec<PointFit>> {
    check_size(sample)?;
    let (h1, h2) = bw.resolve(sample)?;
    local_linear::fit_points(sample.units(), eval_points, h1, h2, bw.kernel, None)
}

fn check_size(sample: &DifferencedSample) -> Result<()> {
    if sample.n() < MIN_UNITS {
        return Err(WaossError::TooFewUnits {
            n: sample.n(),
            required: MIN_UNITS,
        });
    }
    Ok(())
}

/// Marginal-integration estimate of ζ₀ = E[S·g(D1, 0)].
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaEstimate {
    pub zeta_hat: f64,
    /// ĝ(D1ᵢ, 0) per unit.
    pub g_at_zero: Vec<f64>,
    pub effective_kernel_mass: Vec<f64>,
    pub fit_kinds: Vec<FitKind>,
    pub bandwidths_used: BandwidthsUsed,
}

impl ZetaEstimate {
    pub fn fallback_points(&self) -> usize {
        self.fit_kinds.iter().filter(|k| **k != FitKind::LocalLinear).count()
    }
}

pub fn estimate_zeta(sample: &DifferencedSample, bw: &BandwidthConfig) -> Result<ZetaEstimate> {
    check_size(sample)?;
    let (h1, h2) = bw.resolve(sample)?;
    zeta_with_bandwidths(sample, h1, h2, bw.kernel)
}

fn zeta_with_bandwidths(sample: &DifferencedSample, h1: f64, h2: f64, kernel: Kernel) -> Result<ZetaEstimate> {
    let units = sample.units();
    let points: Vec<(f64, f64)> = units.iter().map(|u| (u.d1, 0.0)).collect();
    let fits = local_linear::fit_points(units, &points, h1, h2, kernel, None)?;
    let zeta = stats::sum(units.iter().zip(&fits).map(|(u, f)| u.weight * u.s_f64() * f.value)) / sample.total_weight();
    Ok(ZetaEstimate {
        zeta_hat: zeta,
        g_at_zero: fits.iter().map(|f| f.value).collect(),
        effective_kernel_mass: fits.iter().map(|f| f.kernel_mass).collect(),
        fit_kinds: fits.iter().map(|f| f.kind).collect(),
        bandwidths_used: BandwidthsUsed { h_d1: h1, h_dd: h2 },
    })
}

/// [mean(S·ΔY) − ζ̂] / mean(|ΔD|), all weighted.
fn theta_from_zeta(sample: &DifferencedSample, zeta: f64) -> Result<f64> {
    let units = sample.units();
    let total = sample.total_weight();
    let abs_dd = stats::sum(units.iter().map(|u| u.weight * u.dd.abs())) / total;
    if !(abs_dd > 0.0) {
        return Err(WaossError::DegenerateDenominator);
    }
    let s_dy = stats::sum(units.iter().map(|u| u.weight * u.s_f64() * u.dy)) / total;
    Ok((s_dy - zeta) / abs_dd)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NonparametricConfig {
    pub bandwidth: BandwidthConfig,
    /// Bootstrap resamples; 0 disables inference.
    pub n_boot: usize,
    pub seed: u64,
}

/// Nonparametric θ̂. Bootstrap resamples reuse the full-sample bandwidths.
pub fn estimate_theta_nonparametric(
    sample: &DifferencedSample,
    cfg: &NonparametricConfig,
    level: f64,
) -> Result<ThetaEstimate> {
    stats::two_sided_z(level)?;
    let zeta = estimate_zeta(sample, &cfg.bandwidth)?;
    let theta = theta_from_zeta(sample, zeta.zeta_hat)?;
    let BandwidthsUsed { h_d1, h_dd } = zeta.bandwidths_used;
    let kernel = cfg.bandwidth.kernel;
    let (se, ci) = if cfg.n_boot == 0 {
        (None, None)
    } else {
        let summary = bootstrap::unit_bootstrap(sample, cfg.n_boot, cfg.seed, level, |s| {
            let z = zeta_with_bandwidths(s, h_d1, h_dd, kernel)?;
            theta_from_zeta(s, z.zeta_hat)
        })?;
        (Some(summary.se), Some(summary.ci))
    };
    Ok(ThetaEstimate {
        theta_hat: theta,
        se,
        ci,
        level,
        psi: Vec::new(),
        n: sample.n(),
        n_dropped: sample.n_dropped(),
        estimator: EstimatorTag::Nonparametric,
        diagnostics: Diagnostics {
            bandwidths_used: Some(zeta.bandwidths_used),
            kernel: Some(kernel),
            n_boot: Some(cfg.n_boot),
            fallback_points: Some(zeta.fallback_points()),
            zeta_hat: Some(zeta.zeta_hat),
            ..Default::default()
        },
    })
}

/// Fixed-η estimate ζ̂_η = Σ wᵢSᵢm̂(D1ᵢ) / Σ wᵢ, where m̂ is a Gaussian
/// Nadaraya–Watson regression of ΔY on D1 among units with |ΔD| ≤ η.
pub fn quasi_stayer_zeta(sample: &DifferencedSample, eta: f64, h_d1: f64) -> Result<f64> {
    if !(eta > 0.0) || !(h_d1 > 0.0) {
        return Err(WaossError::InvalidArgument(format!(
            "eta and h_d1 must be positive, got {eta} and {h_d1}"
        )));
    }
    let mut quasi: Vec<(f64, f64, f64)> = sample
        .units()
        .iter()
        .filter(|u| u.dd.abs() <= eta && u.weight > 0.0)
        .map(|u| (u.d1, u.dy, u.weight))
        .collect();
    if quasi.is_empty() {
        let min_abs_dd = sample.units().iter().map(|u| u.dd.abs()).fold(f64::INFINITY, f64::min);
        return Err(WaossError::NoQuasiStayers { eta, min_abs_dd });
    }
    quasi.sort_by(|a, b| a.0.total_cmp(&b.0));
    let kernel = Kernel::Gaussian;
    let radius = kernel.radius() * h_d1;
    let m_hat = |d1: f64| -> f64 {
        let lo = quasi.partition_point(|q| q.0 < d1 - radius);
        let (mut mass, mut num) = (0.0, 0.0);
        for q in &quasi[lo..] {
            if q.0 > d1 + radius {
                break;
            }
            let k = q.2 * kernel.weight((q.0 - d1) / h_d1);
            mass += k;
            num += k * q.1;
        }
        if mass > 0.0 {
            return num / mass;
        }
        // Every quasi-stayer is far away: shift exponents so the nearest
        // ones keep positive weight.
        let u2 = |x: f64| ((x - d1) / h_d1).powi(2);
        let u2_min = quasi.iter().map(|q| u2(q.0)).fold(f64::INFINITY, f64::min);
        let (mut mass, mut num) = (0.0, 0.0);
        for q in &quasi {
            let k = q.2 * (-0.5 * (u2(q.0) - u2_min)).exp();
            mass += k;
            num += k * q.1;
        }
        num / mass
    };
    let total = sample.total_weight();
    Ok(stats::sum(sample.units().iter().map(|u| u.weight * u.s_f64() * m_hat(u.d1))) / total)
}
