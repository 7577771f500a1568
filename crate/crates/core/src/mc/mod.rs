//! Monte Carlo laboratory: synthetic panels, population oracles and
//! replicated experiments.

pub mod dgp;
pub mod experiment;
pub mod oracle;

pub use dgp::{generate_panel, DgpSpec, Law, PrePeriodSpec};
pub use experiment::{
    coverage_of, summarize, write_replications_csv, EstimatorConfig, Experiment, ExperimentReport, RatePoint,
    RateReport, Replication, Summary,
};
pub use oracle::{oracle_theta, oracle_theta_monte_carlo, oracle_zeta, oracle_zeta_monte_carlo, OracleValue};
