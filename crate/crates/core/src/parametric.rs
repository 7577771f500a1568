//! Two-step parametric estimator.
//!
//! The conditional mean g(d1, δ) = E[ΔY | D1 = d1, ΔD = δ] is restricted to a
//! polynomial family g_λ, fitted by weighted least squares. The slope average
//! is then
//!
//! ```text
//! θ̂ = Σ wᵢ Sᵢ (ΔYᵢ − g_λ̂(D1ᵢ, 0)) / Σ wᵢ |ΔDᵢ|
//! ```
//!
//! with a plug-in variance built from the per-unit influence values that
//! account for first-step estimation of λ.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaossError};
use crate::estimate::{wald_ci, Diagnostics, EstimatorTag, ThetaEstimate};
use crate::panel::DifferencedSample;
use crate::stats::{self, CompensatedSum};

/// Smallest-to-largest singular value ratio below which a design is
/// treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Polynomial family for g_λ(d1, δ).
///
/// Regressors, in order:
/// `d1^j` for `j = 0..=q_t` (period trend), then `δ·d1^j` for
/// `j = 0..=q_s1` (slope varying with d1), then `δ^k` for
/// `k = 2..=q_s2 + 1` (slope varying with δ). The plain δ term appears once,
/// as the first slope regressor, and p = q_t + q_s1 + q_s2 + 2.
///
/// The default `(1, 1, 1)` is λ₁ + λ₂d1 + λ₃δ + λ₄δd1 + λ₅δ².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GSpec {
    #[serde(rename = "q_t")]
    pub trend_degree: u32,
    #[serde(rename = "q_s1")]
    pub slope_d1_degree: u32,
    #[serde(rename = "q_s2")]
    pub slope_dd_degree: u32,
}

impl Default for GSpec {
    fn default() -> Self {
        Self::new(1, 1, 1)
    }
}

/// One regressor of the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    /// d1^j
    Trend(u32),
    /// δ·d1^j
    SlopeD1(u32),
    /// δ^k, k ≥ 2
    DeltaPower(u32),
}

impl GSpec {
    pub const fn new(trend_degree: u32, slope_d1_degree: u32, slope_dd_degree: u32) -> Self {
        Self {
            trend_degree,
            slope_d1_degree,
            slope_dd_degree,
        }
    }

    /// Number of coefficients p.
    pub fn dim(&self) -> usize {
        (self.trend_degree + self.slope_d1_degree + self.slope_dd_degree + 2) as usize
    }

    pub fn trend_dim(&self) -> usize {
        self.trend_degree as usize + 1
    }

    pub fn terms(&self) -> Vec<Term> {
        let mut terms = Vec::with_capacity(self.dim());
        terms.extend((0..=self.trend_degree).map(Term::Trend));
        terms.extend((0..=self.slope_d1_degree).map(Term::SlopeD1));
        terms.extend((2..=self.slope_dd_degree + 1).map(Term::DeltaPower));
        terms
    }

    /// Writes the regressor vector at (d1, δ) into `out` (length p).
    pub fn fill_regressors(&self, d1: f64, dd: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        let mut k = 0;
        let mut pow = 1.0;
        for _ in 0..=self.trend_degree {
            out[k] = pow;
            pow *= d1;
            k += 1;
        }
        let mut pow = dd;
        for _ in 0..=self.slope_d1_degree {
            out[k] = pow;
            pow *= d1;
            k += 1;
        }
        let mut pow = dd * dd;
        for _ in 0..self.slope_dd_degree {
            out[k] = pow;
            pow *= dd;
            k += 1;
        }
    }

    pub fn regressors(&self, d1: f64, dd: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.fill_regressors(d1, dd, &mut x);
        x
    }

    /// g_λ(d1, δ).
    pub fn evaluate(&self, lambda: &[f64], d1: f64, dd: f64) -> f64 {
        assert_eq!(lambda.len(), self.dim());
        let x = self.regressors(d1, dd);
        stats::sum(x.iter().zip(lambda).map(|(a, b)| a * b))
    }

    /// g_λ(d1, 0): only the trend block survives.
    pub fn trend_at(&self, lambda: &[f64], d1: f64) -> f64 {
        let mut pow = 1.0;
        let mut acc = CompensatedSum::new();
        for coef in &lambda[..self.trend_dim()] {
            acc.add(coef * pow);
            pow *= d1;
        }
        acc.value()
    }

    /// Positions of this family's terms inside `larger`, or `None` when
    /// `larger` does not contain every term.
    pub fn embed_in(&self, larger: &GSpec) -> Option<Vec<usize>> {
        let big = larger.terms();
        self.terms().iter().map(|t| big.iter().position(|b| b == t)).collect()
    }
}

impl std::str::FromStr for GSpec {
    type Err = WaossError;

    /// Parses a `q_t,q_s1,q_s2` triple.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || WaossError::InvalidArgument(format!("family must be a triple q_t,q_s1,q_s2, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut q = [0u32; 3];
        for (slot, part) in q.iter_mut().zip(&parts) {
            *slot = part.parse().map_err(|_| bad())?;
        }
        Ok(GSpec::new(q[0], q[1], q[2]))
    }
}

/// Fitted first step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricFit {
    pub gspec: GSpec,
    pub lambda_hat: Vec<f64>,
    /// (Σ wᵢxᵢxᵢᵀ / Σ wᵢ)⁻¹
    pub xtx_inv: DMatrix<f64>,
    /// ΔYᵢ − g_λ̂(D1ᵢ, ΔDᵢ)
    pub residuals: Vec<f64>,
    /// Row i is the first-step influence value ξ̂ᵢ, so that
    /// λ̂ − λ₀ ≈ Σ wᵢξ̂ᵢ / Σ wᵢ.
    pub xi: DMatrix<f64>,
    /// Singular value ratio of the weighted design.
    pub condition: f64,
}

impl ParametricFit {
    /// Heteroskedasticity-robust covariance of λ̂, Σ wᵢ²ξ̂ᵢξ̂ᵢᵀ / (Σ wᵢ)².
    pub fn robust_covariance(&self, weights: &[f64]) -> DMatrix<f64> {
        let p = self.gspec.dim();
        let total = stats::sum(weights.iter().copied());
        let mut cov = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let v = stats::sum(
                    weights
                        .iter()
                        .enumerate()
                        .map(|(i, w)| w * w * self.xi[(i, a)] * self.xi[(i, b)]),
                ) / (total * total);
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        cov
    }
}

/// Weighted least squares of ΔY on the family's regressors.
pub fn fit_first_step(sample: &DifferencedSample, gspec: GSpec) -> Result<ParametricFit> {
    let p = gspec.dim();
    let units = sample.units();
    let n_pos = units.iter().filter(|u| u.weight > 0.0).count();
    if n_pos < p {
        return Err(WaossError::TooFewUnits { n: n_pos, required: p });
    }
    let n = units.len();
    let total_w = sample.total_weight();

    let mut x = DMatrix::zeros(n, p);
    let mut row = vec![0.0; p];
    for (i, u) in units.iter().enumerate() {
        gspec.fill_regressors(u.d1, u.dd, &mut row);
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    let sqrt_w = DVector::from_iterator(n, units.iter().map(|u| u.weight.sqrt()));
    let mut a = x.clone();
    for (i, sw) in sqrt_w.iter().enumerate() {
        a.row_mut(i).scale_mut(*sw);
    }
    let b = DVector::from_iterator(n, units.iter().zip(sqrt_w.iter()).map(|(u, sw)| u.dy * sw));

    let svd = a.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition = if s_max > 0.0 { s_min / s_max } else { 0.0 };
    if !(condition >= RANK_TOLERANCE) {
        return Err(WaossError::RankDeficientDesign { condition });
    }
    let lambda = svd
        .solve(&b, 0.0)
        .map_err(|_| WaossError::RankDeficientDesign { condition })?;

    // (AᵀA / Σw)⁻¹ = Σw · V Σ⁻² Vᵀ
    let v_t = svd.v_t.as_ref().expect("requested V");
    let inv_sq = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / (s * s)));
    let xtx_inv = v_t.transpose() * inv_sq * v_t * total_w;

    let fitted = &x * &lambda;
    let residuals: Vec<f64> = units.iter().zip(fitted.iter()).map(|(u, f)| u.dy - f).collect();
    let mut xi = &x * xtx_inv.transpose();
    for (i, e) in residuals.iter().enumerate() {
        xi.row_mut(i).scale_mut(*e);
    }

    Ok(ParametricFit {
        gspec,
        lambda_hat: lambda.iter().copied().collect(),
        xtx_inv,
        residuals,
        xi,
        condition,
    })
}

/// g_λ̂(d1, 0).
pub fn g_at_zero(fit: &ParametricFit, d1: f64) -> f64 {
    fit.gspec.trend_at(&fit.lambda_hat, d1)
}

/// Ĝ = Σ wᵢ Sᵢ ∂g/∂λ(D1ᵢ, 0) / Σ wᵢ. Slope-block entries are zero.
pub fn signed_trend_gradient(sample: &DifferencedSample, gspec: GSpec) -> Vec<f64> {
    let p = gspec.dim();
    let total = sample.total_weight();
    let mut acc = vec![CompensatedSum::new(); gspec.trend_dim()];
    for u in sample.units() {
        let mut pow = 1.0;
        for slot in acc.iter_mut() {
            slot.add(u.weight * u.s_f64() * pow);
            pow *= u.d1;
        }
    }
    let mut grad = vec![0.0; p];
    for (g, a) in grad.iter_mut().zip(&acc) {
        *g = a.value() / total;
    }
    grad
}

/// Second step: θ̂ and its influence-function standard error.
pub fn estimate_theta_parametric(sample: &DifferencedSample, fit: &ParametricFit, level: f64) -> Result<ThetaEstimate> {
    let units = sample.units();
    if fit.residuals.len() != units.len() {
        return Err(WaossError::InvalidArgument(
            "first-step fit was computed on a different sample".into(),
        ));
    }
    stats::two_sided_z(level)?;
    let total_w = sample.total_weight();
    let denom = stats::sum(units.iter().map(|u| u.weight * u.dd.abs()));
    if !(denom > 0.0) {
        return Err(WaossError::DegenerateDenominator);
    }
    let signed: Vec<f64> = units
        .iter()
        .map(|u| u.s_f64() * (u.dy - g_at_zero(fit, u.d1)))
        .collect();
    let theta = stats::sum(units.iter().zip(&signed).map(|(u, a)| u.weight * a)) / denom;

    let mean_abs_dd = denom / total_w;
    let grad = signed_trend_gradient(sample, fit.gspec);
    let psi: Vec<f64> = units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let correction = stats::sum(grad.iter().enumerate().map(|(j, g)| g * fit.xi[(i, j)]));
            (signed[i] - correction - theta * u.dd.abs()) / mean_abs_dd
        })
        .collect();
    let se = stats::sum(units.iter().zip(&psi).map(|(u, v)| (u.weight * v).powi(2))).sqrt() / total_w;
    let ci = wald_ci(theta, se, level)?;

    Ok(ThetaEstimate {
        theta_hat: theta,
        se: Some(se),
        ci: Some(ci),
        level,
        psi,
        n: units.len(),
        n_dropped: sample.n_dropped(),
        estimator: EstimatorTag::Parametric,
        diagnostics: Diagnostics {
            family: Some(fit.gspec),
            lambda_hat: Some(fit.lambda_hat.clone()),
            ..Default::default()
        },
    })
}

/// Both steps in one call.
pub fn estimate_parametric(sample: &DifferencedSample, gspec: GSpec, level: f64) -> Result<ThetaEstimate> {
    let fit = fit_first_step(sample, gspec)?;
    estimate_theta_parametric(sample, &fit, level)
}

/// Point estimate only, skipping the influence values.
pub fn theta_point(sample: &DifferencedSample, gspec: GSpec) -> Result<f64> {
    let fit = fit_first_step(sample, gspec)?;
    let denom = stats::sum(sample.units().iter().map(|u| u.weight * u.dd.abs()));
    if !(denom > 0.0) {
        return Err(WaossError::DegenerateDenominator);
    }
    let num = stats::sum(
        sample
            .units()
            .iter()
            .map(|u| u.weight * u.s_f64() * (u.dy - g_at_zero(&fit, u.d1))),
    );
    Ok(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::DifferencedSample;

    fn hand_sample() -> DifferencedSample {
        DifferencedSample::from_triples(&[(2.0, 1.0, 0.3), (0.0, -1.0, 1.1), (3.0, 2.0, -0.4)]).unwrap()
    }

    const LINEAR: GSpec = GSpec::new(0, 0, 0);

    #[test]
    fn regressor_layout() {
        let g = GSpec::default();
        assert_eq!(g.dim(), 5);
        assert_eq!(g.regressors(2.0, 3.0), vec![1.0, 2.0, 3.0, 6.0, 9.0]);
        assert_eq!(
            GSpec::new(2, 0, 2).regressors(2.0, 3.0),
            vec![1.0, 2.0, 4.0, 3.0, 9.0, 27.0]
        );
        let at_zero = GSpec::new(2, 2, 2).regressors(1.7, 0.0);
        assert!(at_zero[3..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hand_first_step() {
        // 2x2 normal equations solved by Cramer's rule.
        let pts = [(1.0, 2.0), (-1.0, 0.0), (2.0, 3.0)];
        let (sx, sy, sxx, sxy) = pts.iter().fold((0.0, 0.0, 0.0, 0.0), |a, (x, y)| {
            (a.0 + x, a.1 + y, a.2 + x * x, a.3 + x * y)
        });
        let det = 3.0 * sxx - sx * sx;
        let oracle = [(sxx * sy - sx * sxy) / det, (3.0 * sxy - sx * sy) / det];
        assert_eq!(oracle, [1.0, 1.0]);

        let fit = fit_first_step(&hand_sample(), LINEAR).unwrap();
        for (a, b) in fit.lambda_hat.iter().zip(oracle) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn hand_theta() {
        let s = hand_sample();
        let fit = fit_first_step(&s, LINEAR).unwrap();
        let est = estimate_theta_parametric(&s, &fit, 0.95).unwrap();
        // (1·(2−1) + (−1)(0−1) + 1·(3−1)) / (1+1+2)
        assert!((est.theta_hat - 1.0).abs() < 1e-12);
        assert!((theta_point(&s, LINEAR).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_outcome_fit() {
        let triples: Vec<_> = (0..12)
            .map(|i| {
                (
                    4.5,
                    if i % 2 == 0 {
                        0.3 + i as f64
                    } else {
                        -1.0 - i as f64 * 0.7
                    },
                    (i as f64).sin(),
                )
            })
            .collect();
        let s = DifferencedSample::from_triples(&triples).unwrap();
        let fit = fit_first_step(&s, GSpec::default()).unwrap();
        assert!((fit.lambda_hat[0] - 4.5).abs() < 1e-10);
        assert!(fit.lambda_hat[1..].iter().all(|v| v.abs() < 1e-10));
        let est = estimate_theta_parametric(&s, &fit, 0.95).unwrap();
        assert!(est.theta_hat.abs() < 1e-10);
    }

    #[test]
    fn too_few_units() {
        let s = DifferencedSample::from_triples(&[(1.0, 1.0, 0.0), (2.0, -1.0, 1.0), (0.0, 2.0, 2.0), (1.0, 0.5, 3.0)])
            .unwrap();
        assert!(matches!(
            fit_first_step(&s, GSpec::default()),
            Err(WaossError::TooFewUnits { n: 4, required: 5 })
        ));
    }

    #[test]
    fn collinear_design_is_rejected() {
        // d1 constant makes the trend slope column collinear with the intercept.
        let s =
            DifferencedSample::from_triples(&[(1.0, 1.0, 2.0), (2.0, -1.0, 2.0), (0.0, 2.0, 2.0), (5.0, -3.0, 2.0)])
                .unwrap();
        assert!(matches!(
            fit_first_step(&s, GSpec::new(1, 0, 0)),
            Err(WaossError::RankDeficientDesign { .. })
        ));
    }

    #[test]
    fn g_at_zero_cases() {
        let mut fit = fit_first_step(&hand_sample(), LINEAR).unwrap();
        fit.gspec = GSpec::default();
        fit.lambda_hat = vec![1.0, 2.0, 9.0, 9.0, 9.0];
        assert_eq!(g_at_zero(&fit, 3.0), 7.0);
        fit.lambda_hat = vec![0.0; 5];
        assert_eq!(g_at_zero(&fit, 3.0), 0.0);
        fit.gspec = LINEAR;
        fit.lambda_hat = vec![2.5, 7.0];
        assert_eq!(g_at_zero(&fit, -11.0), 2.5);
    }

    #[test]
    fn family_parsing_and_nesting() {
        assert_eq!("1,1,1".parse::<GSpec>().unwrap(), GSpec::default());
        assert!("1,1".parse::<GSpec>().is_err());
        assert!("a,1,1".parse::<GSpec>().is_err());
        let small = GSpec::new(1, 0, 0);
        assert_eq!(small.embed_in(&GSpec::new(2, 1, 1)), Some(vec![0, 1, 3]));
        assert_eq!(GSpec::new(2, 0, 0).embed_in(&GSpec::new(1, 1, 1)), None);
    }
}
