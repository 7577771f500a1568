//! Population values of θ₀ and ζ₀ under a [`DgpSpec`].
//!
//! Both are functionals of the noiseless potential outcomes:
//!
//! ```text
//! θ₀ = E[S·(Y2(D2) − Y2(D1))] / E[|ΔD|]
//! ζ₀ = E[S·trend(D1)]
//! ```
//!
//! Closed forms are used where they exist, brute-force Monte Carlo otherwise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{poly_eval, poly_integral, DgpSpec};
use crate::error::{Result, WaossError};
use crate::rng;
use crate::stats::CompensatedSum;

const CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    /// Monte Carlo standard error; 0 for closed forms.
    pub mc_se: f64,
    pub closed_form: bool,
    pub n_draws: usize,
}

impl OracleValue {
    fn exact(value: f64) -> Self {
        Self {
            value,
            mc_se: 0.0,
            closed_form: true,
            n_draws: 0,
        }
    }
}

/// Runs `draw` over `n_draws` draws split into fixed chunks, each with its
/// own stream, and adds up K per-draw quantities in chunk order.
fn chunked_sums<const K: usize, F>(dgp: &DgpSpec, n_draws: usize, seed: u64, draw: F) -> [f64; K]
where
    F: Fn(&DgpSpec, &mut rng::Rng) -> [f64; K] + Sync,
{
    let chunks = n_draws.div_ceil(CHUNK);
    let partial: Vec<[CompensatedSum; K]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, c as u64);
            let len = CHUNK.min(n_draws - c * CHUNK);
            let mut acc = [CompensatedSum::new(); K];
            for _ in 0..len {
                for (a, v) in acc.iter_mut().zip(draw(dgp, &mut rng)) {
                    a.add(v);
                }
            }
            acc
        })
        .collect();
    let mut total = [CompensatedSum::new(); K];
    for p in partial {
        for (t, v) in total.iter_mut().zip(p) {
            t.add(v.value());
        }
    }
    total.map(|t| t.value())
}

fn check_draws(n_draws: usize) -> Result<()> {
    if n_draws < 2 {
        return Err(WaossError::InvalidArgument(format!(
            "need at least 2 oracle draws, got {n_draws}"
        )));
    }
    Ok(())
}

/// θ₀, in closed form when the slope is constant (θ₀ = β since E[τ] = 1).
pub fn oracle_theta(dgp: &DgpSpec, n_draws: usize, seed: u64) -> Result<OracleValue> {
    dgp.validate()?;
    if dgp.slope.len() == 1 {
        return Ok(OracleValue::exact(dgp.slope[0]));
    }
    oracle_theta_monte_carlo(dgp, n_draws, seed)
}

/// θ₀ by brute force regardless of closed forms.
pub fn oracle_theta_monte_carlo(dgp: &DgpSpec, n_draws: usize, seed: u64) -> Result<OracleValue> {
    dgp.validate()?;
    check_draws(n_draws)?;
    let big_f = poly_integral(&dgp.slope);
    let [sa, sb, saa, sab, sbb] = chunked_sums(dgp, n_draws, seed, |dgp, rng| {
        let (d1, dd) = dgp.draw_treatments(rng);
        let tau = dgp.draw_tau(rng);
        let a = dgp.signed_effect(&big_f, d1, dd, tau);
        let b = dd.abs();
        [a, b, a * a, a * b, b * b]
    });
    let n = n_draws as f64;
    let theta = sa / sb;
    let (ma, mb) = (sa / n, sb / n);
    // Var(a − θb) with the delta method for the ratio of means.
    let var_lin = (saa - 2.0 * theta * sab + theta * theta * sbb) / n - (ma - theta * mb).powi(2);
    Ok(OracleValue {
        value: theta,
        mc_se: (var_lin.max(0.0) / n).sqrt() / mb,
        closed_form: false,
        n_draws,
    })
}

/// ζ₀ = E[S·trend(D1)]. Closed form when the trend is zero, or when D1 and
/// ΔD are independent and the needed moments of D1 are known.
pub fn oracle_zeta(dgp: &DgpSpec, n_draws: usize, seed: u64) -> Result<OracleValue> {
    dgp.validate()?;
    if dgp.trend.iter().all(|c| *c == 0.0) {
        return Ok(OracleValue::exact(0.0));
    }
    if dgp.copula_rho == 0.0 {
        let mean_s = 1.0 - 2.0 * dgp.dd.cdf(0.0);
        let moments: Option<Vec<f64>> = (0..dgp.trend.len() as u32).map(|k| dgp.d1.raw_moment(k)).collect();
        if let Some(m) = moments {
            let mean_trend: f64 = dgp.trend.iter().zip(&m).map(|(c, mk)| c * mk).sum();
            return Ok(OracleValue::exact(mean_s * mean_trend));
        }
    }
    oracle_zeta_monte_carlo(dgp, n_draws, seed)
}

pub fn oracle_zeta_monte_carlo(dgp: &DgpSpec, n_draws: usize, seed: u64) -> Result<OracleValue> {
    dgp.validate()?;
    check_draws(n_draws)?;
    let [s1, s2] = chunked_sums(dgp, n_draws, seed, |dgp, rng| {
        let (d1, dd) = dgp.draw_treatments(rng);
        let v = dd.signum() * poly_eval(&dgp.trend, d1);
        [v, v * v]
    });
    let n = n_draws as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    Ok(OracleValue {
        value: mean,
        mc_se: (var / n).sqrt(),
        closed_form: false,
        n_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::dgp::Law;

    fn gaussian(mean: f64, sd: f64) -> Law {
        Law::Gaussian {
            mean,
            sd,
            truncate: 4.0,
        }
    }

    fn curved() -> DgpSpec {
        let mut dgp = DgpSpec::constant_slope(1.0, Law::Uniform { low: 0.0, high: 2.0 }, gaussian(0.5, 1.0), 1.0);
        dgp.slope = vec![1.0, 1.0];
        dgp.tau_sd = 0.5;
        dgp.lipschitz_bound = 50.0;
        dgp
    }

    #[test]
    fn constant_slope_is_closed_form() {
        let dgp = DgpSpec::constant_slope(2.0, Law::Uniform { low: 0.0, high: 1.0 }, gaussian(0.0, 1.0), 1.0);
        let o = oracle_theta(&dgp, 10, 0).unwrap();
        assert_eq!((o.value, o.closed_form), (2.0, true));
        let mc = oracle_theta_monte_carlo(&dgp, 200_000, 1).unwrap();
        // S·β·ΔD = β|ΔD| draw by draw, so the ratio is β up to rounding.
        assert!((mc.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trend_does_not_move_theta() {
        let a = curved();
        let mut b = curved();
        b.trend = vec![3.0, -2.0, 0.5];
        let oa = oracle_theta_monte_carlo(&a, 100_000, 4).unwrap();
        let ob = oracle_theta_monte_carlo(&b, 100_000, 4).unwrap();
        assert_eq!(oa.value, ob.value);
    }

    #[test]
    fn zeta_closed_forms() {
        let mut dgp = curved();
        assert_eq!(oracle_zeta(&dgp, 10, 0).unwrap().value, 0.0);
        dgp.trend = vec![0.7];
        dgp.dd = gaussian(0.0, 1.0);
        assert!(oracle_zeta(&dgp, 10, 0).unwrap().value.abs() < 1e-15);
        dgp.dd = gaussian(0.5, 1.0);
        dgp.trend = vec![0.2, 0.5];
        let exact = oracle_zeta(&dgp, 10, 0).unwrap();
        assert!(exact.closed_form);
        let mc = oracle_zeta_monte_carlo(&dgp, 1_000_000, 2).unwrap();
        assert!((mc.value - exact.value).abs() < 4.0 * mc.mc_se, "{mc:?} vs {exact:?}");
    }

    #[test]
    fn heterogeneous_theta_matches_hand_integral() {
        // slope τ(1 + d): S·(F(D2) − F(D1)) = |ΔD|·(1 + D1 + ΔD/2), so with
        // D1 ⟂ ΔD, θ₀ = 1 + E[D1] + E[ΔD·|ΔD|] / (2·E|ΔD|).
        let dgp = curved();
        let law = gaussian(0.5, 1.0);
        let m = 400_000;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..m {
            let x = law.quantile((i as f64 + 0.5) / m as f64);
            num += x * x.abs();
            den += x.abs();
        }
        let exact = 1.0 + 1.0 + num / (2.0 * den);
        let mc = oracle_theta_monte_carlo(&dgp, 2_000_000, 5).unwrap();
        assert!(
            (mc.value - exact).abs() < 4.0 * mc.mc_se,
            "{} vs {exact} (se {})",
            mc.value,
            mc.mc_se
        );
    }
}
