use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, WaossError>;

/// Every failure the library can surface.
///
/// Variants split into two families: data/usage problems (bad input files,
/// violated preconditions) and numerical failures (singular designs,
/// degenerate denominators). [`WaossError::is_numerical`] tells them apart.
#[derive(Debug, Error)]
pub enum WaossError {
    // panel structure
    #[error("panel is empty")]
    EmptyPanel,
    #[error("unit {unit_id:?} is a stayer (|d2 - d1| = {abs_dd} within tolerance {tolerance})")]
    StayerFound {
        unit_id: String,
        abs_dd: f64,
        tolerance: f64,
    },
    #[error("all {n_dropped} units were dropped as stayers")]
    AllUnitsDropped { n_dropped: usize },
    #[error("invalid observation for unit {unit_id:?}: {reason}")]
    InvalidObservation { unit_id: String, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // ingestion
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid column spec: {0}")]
    InvalidColumnSpec(String),
    #[error("missing column {column:?} in header")]
    MissingColumn { column: String },
    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    NonNumericCell { row: usize, column: String, value: String },
    #[error("row {row}, column {column:?}: empty cell in required column")]
    EmptyCell { row: usize, column: String },
    #[error("duplicate unit id {unit_id:?} (row {row})")]
    DuplicateUnitId { unit_id: String, row: usize },
    #[error("file {path} has no data rows")]
    EmptyFile { path: PathBuf },
    #[error("unit {unit_id:?} has no row for period {period:?}")]
    MissingPeriod { unit_id: String, period: String },
    #[error("unit {unit_id:?} has more than one row for period {period:?}")]
    DuplicatePeriod { unit_id: String, period: String },
    #[error("unit {unit_id:?} has different weights across its rows")]
    InconsistentWeight { unit_id: String },

    // parametric estimation
    #[error("design matrix is rank deficient (smallest/largest singular value = {condition:e})")]
    RankDeficientDesign { condition: f64 },
    #[error("too few units: have {n}, need at least {required}")]
    TooFewUnits { n: usize, required: usize },
    #[error("degenerate denominator: weighted sum of |dd| is zero")]
    DegenerateDenominator,
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),

    // nonparametric estimation
    #[error("no kernel mass around evaluation point (d1 = {d1}, dd = {dd}) even after widening")]
    SingularLocalFit { d1: f64, dd: f64 },
    #[error("no quasi-stayers within eta = {eta}; smallest |dd| in sample is {min_abs_dd}")]
    NoQuasiStayers { eta: f64, min_abs_dd: f64 },

    // twfe
    #[error("treatment change has no variation under the weights")]
    DegenerateRegressor,

    // placebo and specification test
    #[error("unit {unit_id:?} has no pre-period (d0, y0) record")]
    MissingPrePeriod { unit_id: String },
    #[error("only {count} pre-period quasi-stayers, need at least {required}")]
    TooFewQuasiStayers { count: usize, required: usize },
    #[error("alternative family does not strictly nest the null family")]
    NotNested,

    // simulation
    #[error("invalid data-generating process: {0}")]
    InvalidSpec(String),
    #[error("cannot parse config: {0}")]
    Config(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl WaossError {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            WaossError::RankDeficientDesign { .. }
                | WaossError::DegenerateDenominator
                | WaossError::SingularLocalFit { .. }
                | WaossError::DegenerateRegressor
        )
    }
}
