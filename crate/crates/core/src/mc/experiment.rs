//! Replicated simulation experiments: bias, coverage and convergence rate.
//!
//! Replication data sets are seeded by `rng::stream_seed(root, key)` and
//! collected in key order, so reports do not depend on scheduling.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate_panel, DgpSpec};
use super::oracle::{oracle_theta, OracleValue};
use crate::error::{Result, WaossError};
use crate::estimate::ThetaEstimate;
use crate::nonparametric::{estimate_theta_nonparametric, NonparametricConfig};
use crate::panel::{difference_panel, StayerPolicy};
use crate::parametric::{estimate_parametric, GSpec};
use crate::rng;
use crate::stats;
use crate::twfe::estimate_twfe;

/// Stream index reserved for the oracle draws.
const ORACLE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorConfig {
    Parametric { family: GSpec },
    Nonparametric { config: NonparametricConfig },
    Twfe,
}

impl EstimatorConfig {
    pub fn estimate(&self, sample: &crate::panel::DifferencedSample, level: f64) -> Result<ThetaEstimate> {
        match self {
            EstimatorConfig::Parametric { family } => estimate_parametric(sample, *family, level),
            EstimatorConfig::Nonparametric { config } => estimate_theta_nonparametric(sample, config, level),
            EstimatorConfig::Twfe => estimate_twfe(sample, level),
        }
    }

    /// Same estimator with its internal randomness (bootstrap) reseeded.
    fn reseeded(&self, seed: u64) -> Self {
        match *self {
            EstimatorConfig::Nonparametric { config } => EstimatorConfig::Nonparametric {
                config: NonparametricConfig { seed, ..config },
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub rep: usize,
    pub n: usize,
    pub seed: u64,
    pub theta_hat: f64,
    pub se: Option<f64>,
    pub ci: Option<[f64; 2]>,
}

impl Replication {
    pub fn covers(&self, target: f64) -> Option<bool> {
        self.ci.map(|[l, u]| l <= target && target <= u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean_theta: f64,
    pub sd_theta: f64,
    pub bias: f64,
    /// Monte Carlo standard error of the bias (sd / √reps).
    pub bias_mc_se: f64,
    pub rmse: f64,
}

pub fn summarize(replications: &[Replication], target: f64) -> Summary {
    let thetas: Vec<f64> = replications.iter().map(|r| r.theta_hat).collect();
    let reps = thetas.len() as f64;
    let mean = stats::sum(thetas.iter().copied()) / reps;
    let sd = stats::sample_sd(&thetas);
    let mse = stats::sum(thetas.iter().map(|t| (t - target).powi(2))) / reps;
    Summary {
        mean_theta: mean,
        sd_theta: sd,
        bias: mean - target,
        bias_mc_se: sd / reps.sqrt(),
        rmse: mse.sqrt(),
    }
}

/// Share of intervals containing `target`; `None` if any replication has
/// no interval.
pub fn coverage_of(replications: &[Replication], target: f64) -> Option<f64> {
    let hits: Option<Vec<bool>> = replications.iter().map(|r| r.covers(target)).collect();
    hits.map(|h| h.iter().filter(|c| **c).count() as f64 / h.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub dgp: DgpSpec,
    pub estimator: EstimatorConfig,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub level: f64,
    pub oracle: OracleValue,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    pub replications: Vec<Replication>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub rmse: f64,
    pub bias: f64,
    pub sd_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub experiment: String,
    pub dgp: DgpSpec,
    pub estimator: EstimatorConfig,
    pub reps: usize,
    pub seed: u64,
    pub oracle: OracleValue,
    pub points: Vec<RatePoint>,
    /// OLS slope of ln RMSE on ln n; `None` when some RMSE is exactly 0.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub replications: Vec<Replication>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub dgp: DgpSpec,
    pub estimator: EstimatorConfig,
    pub seed: u64,
    pub oracle_draws: usize,
    pub level: f64,
}

impl Experiment {
    pub fn new(dgp: DgpSpec, estimator: EstimatorConfig, seed: u64) -> Self {
        Self {
            dgp,
            estimator,
            seed,
            oracle_draws: 1_000_000,
            level: 0.95,
        }
    }

    pub fn with_oracle_draws(self, oracle_draws: usize) -> Self {
        Self { oracle_draws, ..self }
    }

    pub fn with_level(self, level: f64) -> Self {
        Self { level, ..self }
    }

    pub fn oracle(&self) -> Result<OracleValue> {
        oracle_theta(&self.dgp, self.oracle_draws, rng::stream_seed(self.seed, ORACLE_STREAM))
    }

    /// One simulated data set and its estimate.
    pub fn replicate(&self, n: usize, key: u64, rep: usize) -> Result<Replication> {
        let seed = rng::stream_seed(self.seed, key);
        let panel = generate_panel(&self.dgp, n, seed)?;
        let sample = difference_panel(&panel, StayerPolicy::error())?;
        let est = self
            .estimator
            .reseeded(rng::stream_seed(seed, 1))
            .estimate(&sample, self.level)?;
        Ok(Replication {
            rep,
            n,
            seed,
            theta_hat: est.theta_hat,
            se: est.se,
            ci: est.ci.map(|(l, u)| [l, u]),
        })
    }

    fn replicate_many(&self, n: usize, reps: usize, key_base: u64) -> Result<Vec<Replication>> {
        (0..reps)
            .into_par_iter()
            .map(|r| self.replicate(n, key_base + r as u64, r))
            .collect()
    }

    /// Centering of θ̂ around the oracle θ₀.
    pub fn consistency(&self, n: usize, reps: usize) -> Result<ExperimentReport> {
        self.fixed_n("consistency", n, reps, false)
    }

    /// Share of confidence intervals containing the oracle θ₀.
    pub fn coverage(&self, n: usize, reps: usize) -> Result<ExperimentReport> {
        self.fixed_n("coverage", n, reps, true)
    }

    fn fixed_n(&self, name: &str, n: usize, reps: usize, with_coverage: bool) -> Result<ExperimentReport> {
        if reps < 2 {
            return Err(WaossError::InvalidArgument(format!(
                "need at least 2 replications, got {reps}"
            )));
        }
        stats::two_sided_z(self.level)?;
        let start = Instant::now();
        let oracle = self.oracle()?;
        let replications = self.replicate_many(n, reps, 0)?;
        let coverage = if with_coverage {
            Some(coverage_of(&replications, oracle.value).ok_or_else(|| {
                WaossError::InvalidArgument("coverage needs an estimator with confidence intervals".into())
            })?)
        } else {
            None
        };
        Ok(ExperimentReport {
            experiment: name.to_string(),
            dgp: self.dgp.clone(),
            estimator: self.estimator,
            n,
            reps,
            seed: self.seed,
            level: self.level,
            oracle,
            summary: summarize(&replications, oracle.value),
            coverage,
            replications,
            wall_time_secs: Some(start.elapsed().as_secs_f64()),
        })
    }

    /// RMSE across a grid of sample sizes and its log-log slope.
    pub fn rate(&self, n_grid: &[usize], reps: usize) -> Result<RateReport> {
        if n_grid.len() < 3 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(WaossError::InvalidArgument(
                "n grid must be strictly increasing with at least 3 points".into(),
            ));
        }
        if reps < 2 {
            return Err(WaossError::InvalidArgument(format!(
                "need at least 2 replications, got {reps}"
            )));
        }
        let start = Instant::now();
        let oracle = self.oracle()?;
        let mut points = Vec::with_capacity(n_grid.len());
        let mut replications = Vec::new();
        for (g, &n) in n_grid.iter().enumerate() {
            let reps_n = self.replicate_many(n, reps, (g as u64) << 32)?;
            let s = summarize(&reps_n, oracle.value);
            points.push(RatePoint {
                n,
                rmse: s.rmse,
                bias: s.bias,
                sd_theta: s.sd_theta,
            });
            replications.extend(reps_n);
        }
        let fit = log_log_fit(&points);
        Ok(RateReport {
            experiment: "rate".into(),
            dgp: self.dgp.clone(),
            estimator: self.estimator,
            reps,
            seed: self.seed,
            oracle,
            points,
            slope: fit.map(|f| f.0),
            intercept: fit.map(|f| f.1),
            replications,
            wall_time_secs: Some(start.elapsed().as_secs_f64()),
        })
    }
}

/// (slope, intercept) of ln RMSE on ln n.
pub fn log_log_fit(points: &[RatePoint]) -> Option<(f64, f64)> {
    if points.iter().any(|p| !(p.rmse > 0.0)) {
        return None;
    }
    let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.rmse.ln()).collect();
    let m = x.len() as f64;
    let (xb, yb) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxx: f64 = x.iter().map(|a| (a - xb).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xb) * (b - yb)).sum();
    let slope = sxy / sxx;
    Some((slope, yb - slope * xb))
}

/// Flat per-replication table: `rep,n,seed,theta_hat,se,ci_lower,ci_upper,covered`.
pub fn write_replications_csv<W: Write>(out: W, replications: &[Replication], target: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rep", "n", "seed", "theta_hat", "se", "ci_lower", "ci_upper", "covered"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in replications {
        w.write_record([
            r.rep.to_string(),
            r.n.to_string(),
            r.seed.to_string(),
            r.theta_hat.to_string(),
            opt(r.se),
            opt(r.ci.map(|c| c[0])),
            opt(r.ci.map(|c| c[1])),
            r.covers(target).map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|source| WaossError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}
