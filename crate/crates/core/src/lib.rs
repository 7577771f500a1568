//! Difference-in-differences estimation of a weighted average of slopes
//! (WAOSS) for a continuous treatment when every unit's treatment changes
//! between the two periods.
//!
//! The target is
//!
//! ```text
//! θ₀ = E[sgn(ΔD)·(Y2(D2) − Y2(D1))] / E[|ΔD|]
//! ```
//!
//! identified by comparing all units' outcome changes with those of
//! quasi-stayers, units whose treatment barely moved. The crate provides:
//!
//! - [`panel`] / [`ingest`]: the two-period data model and CSV readers;
//! - [`parametric`]: a two-step estimator with influence-function inference;
//! - [`nonparametric`]: local-linear marginal integration with a unit bootstrap;
//! - [`twfe`]: the two-way fixed effects baseline;
//! - [`placebo`] and [`spec_test`]: pre-trend placebo and family specification test;
//! - [`mc`]: synthetic data, population oracles and simulation experiments.

// Negated comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod error;
pub mod estimate;
pub mod ingest;
pub mod mc;
pub mod nonparametric;
pub mod panel;
pub mod parametric;
pub mod placebo;
pub mod rng;
pub mod stats;
pub mod twfe;

pub use error::{Result, WaossError};
pub use estimate::{wald_ci, EstimateReport, EstimatorTag, ThetaEstimate};
pub use ingest::{read_long, read_panel, read_wide, ColumnSpec, Layout, LongColumns, WideColumns};
pub use mc::{generate_panel, oracle_theta, oracle_zeta, DgpSpec, EstimatorConfig, Experiment};
pub use nonparametric::{
    estimate_theta_nonparametric, estimate_zeta, local_linear_g, quasi_stayer_zeta, BandwidthConfig, BandwidthRule,
    Kernel, NonparametricConfig, ZetaEstimate,
};
pub use panel::{
    difference_panel, sign, summarize_quasi_stayers, DifferencedSample, DifferencedUnit, StayerMode, StayerPolicy,
    UnitObservation,
};
pub use parametric::{estimate_parametric, estimate_theta_parametric, fit_first_step, g_at_zero, GSpec, ParametricFit};
pub use placebo::{placebo_theta, PlaceboConfig, PlaceboEstimate, PlaceboEstimator};
pub use spec_test::{spec_test, SpecTestResult};
pub use twfe::estimate_twfe;
