//! Synthetic data-generating processes.
//!
//! Unit i draws (D1, ΔD) from the declared laws (optionally tied by a
//! Gaussian copula), a slope multiplier τ ~ N(1, τ_sd²) truncated at ±4 sd
//! and independent of treatments, a unit effect and idiosyncratic noise.
//! With F the antiderivative of the slope polynomial (F(0) = 0), potential
//! outcomes are
//!
//! ```text
//! Y1(d) = α + τ·F(d) + c·S + ε1
//! Y2(d) = α + τ·F(d) + trend(D1) + ε2
//! Y0(d) = α + τ·F(d) − pre_trend(D1) + ε0
//! α     = level(D1) + unit_effect_sd·N(0, 1)
//! ```
//!
//! so Y_t depends on the current treatment only, ∂Y_t/∂d = τ·slope(d), and
//! E[Y2(d) − Y1(d) | D1 = d, D2] = trend(d) whenever the trend break c is 0.
//! A nonzero c (sign of ΔD times a constant) deliberately breaks parallel
//! trends and is only meant for placebo power experiments.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaossError};
use crate::panel::{PrePeriod, UnitObservation};
use crate::rng::{self, Rng};
use crate::stats;

/// Truncation of τ in standard deviations.
pub const TAU_TRUNCATION: f64 = 4.0;

fn default_truncate() -> f64 {
    4.0
}

/// Atomless law on a bounded interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    Uniform {
        low: f64,
        high: f64,
    },
    /// N(mean, sd²) truncated to mean ± truncate·sd.
    Gaussian {
        mean: f64,
        sd: f64,
        #[serde(default = "default_truncate")]
        truncate: f64,
    },
}

impl Law {
    fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            Law::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            Law::Gaussian { mean, sd, truncate } => {
                mean.is_finite() && sd.is_finite() && sd > 0.0 && truncate.is_finite() && truncate > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(WaossError::InvalidSpec(format!("{name}: invalid law {self:?}")))
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Law::Uniform { low, high } => (low, high),
            Law::Gaussian { mean, sd, truncate } => (mean - truncate * sd, mean + truncate * sd),
        }
    }

    /// Inverse CDF at u ∈ [0, 1].
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Law::Uniform { low, high } => low + u * (high - low),
            Law::Gaussian { mean, sd, truncate } => {
                let lo = stats::normal_cdf(-truncate);
                let hi = stats::normal_cdf(truncate);
                let p = (lo + u * (hi - lo)).clamp(lo, hi);
                mean + sd * stats::normal_quantile(p)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x <= a {
            return 0.0;
        }
        if x >= b {
            return 1.0;
        }
        match *self {
            Law::Uniform { low, high } => (x - low) / (high - low),
            Law::Gaussian { mean, sd, truncate } => {
                let lo = stats::normal_cdf(-truncate);
                let hi = stats::normal_cdf(truncate);
                (stats::normal_cdf((x - mean) / sd) - lo) / (hi - lo)
            }
        }
    }

    /// E[X^k] where available in closed form.
    pub fn raw_moment(&self, k: u32) -> Option<f64> {
        match *self {
            Law::Uniform { low, high } => {
                let k1 = f64::from(k + 1);
                Some((high.powf(k1) - low.powf(k1)) / (k1 * (high - low)))
            }
            // symmetric truncation keeps the mean
            Law::Gaussian { mean, .. } => match k {
                0 => Some(1.0),
                1 => Some(mean),
                _ => None,
            },
        }
    }
}

/// Pre-period extension for three-period panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrePeriodSpec {
    /// Law of D1 − D0.
    pub dd0: Law,
    /// Polynomial in D1: E[Y1(d) − Y0(d) | D1 = d].
    #[serde(default)]
    pub trend: Vec<f64>,
}

/// Declarative data-generating process. Polynomials list coefficients from
/// the constant term up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub d1: Law,
    /// Law of ΔD; must put positive density at 0.
    pub dd: Law,
    /// Gaussian copula correlation between D1 and ΔD.
    #[serde(default)]
    pub copula_rho: f64,
    /// E[Y2(d) − Y1(d) | D1 = d] as a polynomial in d.
    #[serde(default)]
    pub trend: Vec<f64>,
    /// Mean unit level as a polynomial in D1.
    #[serde(default)]
    pub level: Vec<f64>,
    /// Marginal effect at d for τ = 1, as a polynomial in d.
    pub slope: Vec<f64>,
    #[serde(default)]
    pub tau_sd: f64,
    #[serde(default)]
    pub unit_effect_sd: f64,
    pub noise_sd: f64,
    /// Declared bound on |∂Y_t/∂d| over the treatment supports.
    pub lipschitz_bound: f64,
    #[serde(default)]
    pub pre_period: Option<PrePeriodSpec>,
    /// Shift c·S added to period-one outcomes (breaks parallel trends).
    #[serde(default)]
    pub trend_break: f64,
}

pub fn poly_eval(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Antiderivative vanishing at 0.
pub fn poly_integral(coef: &[f64]) -> Vec<f64> {
    std::iter::once(0.0)
        .chain(coef.iter().enumerate().map(|(k, c)| c / (k + 1) as f64))
        .collect()
}

impl DgpSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| WaossError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// Homogeneous linear effect β with the given treatment laws and noise.
    pub fn constant_slope(beta: f64, d1: Law, dd: Law, noise_sd: f64) -> Self {
        Self {
            d1,
            dd,
            copula_rho: 0.0,
            trend: vec![],
            level: vec![],
            slope: vec![beta],
            tau_sd: 0.0,
            unit_effect_sd: 0.0,
            noise_sd,
            lipschitz_bound: beta.abs().max(1e-12),
            pre_period: None,
            trend_break: 0.0,
        }
    }

    pub fn tau_range(&self) -> (f64, f64) {
        (1.0 - TAU_TRUNCATION * self.tau_sd, 1.0 + TAU_TRUNCATION * self.tau_sd)
    }

    /// Support of D2 = D1 + ΔD (and of D0 when present).
    fn treatment_hull(&self) -> (f64, f64) {
        let (a1, b1) = self.d1.support();
        let (a, b) = self.dd.support();
        let mut lo = a1.min(a1 + a);
        let mut hi = b1.max(b1 + b);
        if let Some(pre) = &self.pre_period {
            let (a0, b0) = pre.dd0.support();
            lo = lo.min(a1 - b0);
            hi = hi.max(b1 - a0);
        }
        (lo, hi)
    }

    /// Largest |τ·slope(d)| over the treatment hull, on a fine grid plus
    /// endpoints.
    pub fn max_abs_slope(&self) -> f64 {
        let (lo, hi) = self.treatment_hull();
        let (t_lo, t_hi) = self.tau_range();
        let tau_max = t_lo.abs().max(t_hi.abs());
        let m = 4096;
        (0..=m)
            .map(|i| poly_eval(&self.slope, lo + (hi - lo) * i as f64 / m as f64).abs())
            .fold(0.0, f64::max)
            * tau_max
    }

    pub fn validate(&self) -> Result<()> {
        self.d1.validate("d1")?;
        self.dd.validate("dd")?;
        let (a, b) = self.dd.support();
        if !(a < 0.0 && 0.0 < b) {
            return Err(WaossError::InvalidSpec(
                "the dd law must have 0 in the interior of its support (quasi-stayers)".into(),
            ));
        }
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        if self.slope.is_empty() || !finite(&self.slope) || !finite(&self.trend) || !finite(&self.level) {
            return Err(WaossError::InvalidSpec(
                "polynomials must be finite; slope nonempty".into(),
            ));
        }
        if !(self.copula_rho.abs() < 1.0) {
            return Err(WaossError::InvalidSpec(format!(
                "copula_rho must lie in (-1, 1), got {}",
                self.copula_rho
            )));
        }
        for (name, v) in [
            ("noise_sd", self.noise_sd),
            ("tau_sd", self.tau_sd),
            ("unit_effect_sd", self.unit_effect_sd),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(WaossError::InvalidSpec(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if !self.trend_break.is_finite() {
            return Err(WaossError::InvalidSpec("trend_break must be finite".into()));
        }
        if let Some(pre) = &self.pre_period {
            pre.dd0.validate("pre_period.dd0")?;
            if !finite(&pre.trend) {
                return Err(WaossError::InvalidSpec("pre_period.trend must be finite".into()));
            }
        }
        let bound = self.max_abs_slope();
        if !(self.lipschitz_bound.is_finite() && bound <= self.lipschitz_bound * (1.0 + 1e-12)) {
            return Err(WaossError::InvalidSpec(format!(
                "slopes reach {bound} but lipschitz_bound is {}",
                self.lipschitz_bound
            )));
        }
        Ok(())
    }

    /// One (D1, ΔD) pair; ΔD = 0 is redrawn.
    pub fn draw_treatments(&self, rng: &mut Rng) -> (f64, f64) {
        loop {
            let (u1, u2) = if self.copula_rho == 0.0 {
                (rng.random::<f64>(), rng.random::<f64>())
            } else {
                let z1: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(StandardNormal);
                let z2 = self.copula_rho * z1 + (1.0 - self.copula_rho.powi(2)).sqrt() * e;
                (stats::normal_cdf(z1), stats::normal_cdf(z2))
            };
            let dd = self.dd.quantile(u2);
            if dd != 0.0 {
                return (self.d1.quantile(u1), dd);
            }
        }
    }

    pub fn draw_tau(&self, rng: &mut Rng) -> f64 {
        if self.tau_sd == 0.0 {
            return 1.0;
        }
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z.abs() <= TAU_TRUNCATION {
                return 1.0 + self.tau_sd * z;
            }
        }
    }

    /// The noiseless per-unit quantity S·(Y2(D2) − Y2(D1)).
    pub fn signed_effect(&self, antiderivative: &[f64], d1: f64, dd: f64, tau: f64) -> f64 {
        let s = if dd > 0.0 { 1.0 } else { -1.0 };
        s * tau * (poly_eval(antiderivative, d1 + dd) - poly_eval(antiderivative, d1))
    }
}

fn normal(rng: &mut Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        0.0
    } else {
        sd * rng.sample::<f64, _>(StandardNormal)
    }
}

/// Draws `n` i.i.d. units. The same (spec, n, seed) always gives the same
/// panel, bit for bit.
pub fn generate_panel(dgp: &DgpSpec, n: usize, seed: u64) -> Result<Vec<UnitObservation>> {
    dgp.validate()?;
    if n == 0 {
        return Err(WaossError::InvalidArgument("n must be at least 1".into()));
    }
    let big_f = poly_integral(&dgp.slope);
    let mut rng = rng::stream(seed, 0);
    let width = (n - 1).to_string().len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (d1, dd) = dgp.draw_treatments(&mut rng);
        let d2 = d1 + dd;
        let tau = dgp.draw_tau(&mut rng);
        let alpha = poly_eval(&dgp.level, d1) + normal(&mut rng, dgp.unit_effect_sd);
        let s = if dd > 0.0 { 1.0 } else { -1.0 };
        let potential = |d: f64| alpha + tau * poly_eval(&big_f, d);
        let y1 = potential(d1) + dgp.trend_break * s + normal(&mut rng, dgp.noise_sd);
        let y2 = potential(d2) + poly_eval(&dgp.trend, d1) + normal(&mut rng, dgp.noise_sd);
        let pre = match &dgp.pre_period {
            Some(p) => {
                let d0 = d1 - p.dd0.quantile(rng.random::<f64>());
                let y0 = potential(d0) - poly_eval(&p.trend, d1) + normal(&mut rng, dgp.noise_sd);
                Some(PrePeriod { d0, y0 })
            }
            None => None,
        };
        out.push(UnitObservation {
            unit_id: format!("u{i:0width$}"),
            d1,
            d2,
            y1,
            y2,
            weight: 1.0,
            pre,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{difference_panel, summarize_quasi_stayers, StayerPolicy};

    fn gaussian(mean: f64, sd: f64) -> Law {
        Law::Gaussian {
            mean,
            sd,
            truncate: 4.0,
        }
    }

    #[test]
    fn constant_slope_without_noise_is_exact() {
        let dgp = DgpSpec::constant_slope(2.0, Law::Uniform { low: 0.0, high: 1.0 }, gaussian(0.0, 1.0), 0.0);
        for u in generate_panel(&dgp, 500, 3).unwrap() {
            assert!(((u.y2 - u.y1) - 2.0 * (u.d2 - u.d1)).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_panel() {
        let mut dgp = DgpSpec::constant_slope(1.0, gaussian(1.0, 0.5), gaussian(0.2, 1.0), 1.0);
        dgp.copula_rho = 0.3;
        dgp.tau_sd = 0.3;
        dgp.slope = vec![1.0, 0.5];
        dgp.lipschitz_bound = 100.0;
        let a = generate_panel(&dgp, 200, 9).unwrap();
        let b = generate_panel(&dgp, 200, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_panel(&dgp, 200, 10).unwrap());
    }

    #[test]
    fn quasi_stayer_share_matches_normal_cdf() {
        let dgp = DgpSpec::constant_slope(1.0, Law::Uniform { low: 0.0, high: 1.0 }, gaussian(0.0, 1.0), 1.0);
        let n = 100_000;
        let panel = generate_panel(&dgp, n, 17).unwrap();
        let share = panel.iter().filter(|u| (u.d2 - u.d1).abs() <= 0.01).count() as f64 / n as f64;
        // truncation at ±4 sd rescales by 1/(1 − 2Φ(−4))
        let p = (2.0 * stats::normal_cdf(0.01) - 1.0) / (1.0 - 2.0 * stats::normal_cdf(-4.0));
        assert!((p - 0.00798).abs() < 1e-5);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((share - p).abs() < 3.0 * sd, "{share} vs {p}");
    }

    #[test]
    fn generated_panels_pass_the_assumption_audit() {
        let dgp = DgpSpec::constant_slope(1.0, Law::Uniform { low: 0.0, high: 1.0 }, gaussian(0.3, 1.0), 1.0);
        let sample = difference_panel(&generate_panel(&dgp, 5000, 1).unwrap(), StayerPolicy::error()).unwrap();
        let rows = summarize_quasi_stayers(&sample, &[0.01, 0.05, 0.1, 0.5]).unwrap();
        assert!(rows.iter().all(|r| r.count > 0));
    }

    #[test]
    fn validation() {
        let base = DgpSpec::constant_slope(1.0, Law::Uniform { low: 0.0, high: 1.0 }, gaussian(0.0, 1.0), 1.0);
        let mut bad = base.clone();
        bad.noise_sd = -1.0;
        assert!(matches!(generate_panel(&bad, 10, 0), Err(WaossError::InvalidSpec(_))));
        let mut bad = base.clone();
        bad.dd = Law::Uniform { low: 0.5, high: 1.0 };
        assert!(bad.validate().is_err());
        let mut bad = base.clone();
        bad.slope = vec![1.0, 3.0];
        assert!(bad.validate().is_err(), "slope 1 + 3d exceeds the bound 1");
        bad.lipschitz_bound = 1e3;
        assert!(bad.validate().is_ok());
        let mut bad = base;
        bad.copula_rho = 1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            slope = [1.0, 1.0]
            trend = [0.2, 0.5]
            tau_sd = 0.5
            noise_sd = 1.0
            lipschitz_bound = 30.0

            [d1]
            law = "uniform"
            low = 0.0
            high = 2.0

            [dd]
            law = "gaussian"
            mean = 0.5
            sd = 1.0
        "#;
        let dgp = DgpSpec::from_toml(text).unwrap();
        assert_eq!(dgp.dd, gaussian(0.5, 1.0));
        assert_eq!(DgpSpec::from_toml(&dgp.to_toml()).unwrap(), dgp);
        assert!(DgpSpec::from_toml("slope = [1.0]\nbogus = 1").is_err());
    }

    #[test]
    fn law_quantile_and_cdf_agree() {
        for law in [gaussian(0.3, 2.0), Law::Uniform { low: -1.0, high: 3.0 }] {
            for i in 1..20 {
                let u = i as f64 / 20.0;
                assert!((law.cdf(law.quantile(u)) - u).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn integral_of_polynomial() {
        assert_eq!(poly_integral(&[1.0, 2.0]), vec![0.0, 1.0, 1.0]);
        assert_eq!(poly_eval(&[1.0, 2.0, 3.0], 2.0), 17.0);
    }
}
