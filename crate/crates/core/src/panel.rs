//! Two-period panel model, first differencing and the stayer checks.
//!
//! Estimation works on the differenced form: per unit the outcome change
//! `dy = y2 - y1`, the treatment change `dd = d2 - d1`, its sign and the
//! period-one treatment. Every unit in a [`DifferencedSample`] is a
//! switcher; exact stayers are rejected or dropped according to the
//! [`StayerPolicy`].

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaossError};
use crate::stats;

/// Pre-period (period zero) treatment and outcome, used by placebos.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrePeriod {
    pub d0: f64,
    pub y0: f64,
}

/// One unit's record at periods one and two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitObservation {
    pub unit_id: String,
    pub d1: f64,
    pub d2: f64,
    pub y1: f64,
    pub y2: f64,
    pub weight: f64,
    pub pre: Option<PrePeriod>,
}

impl UnitObservation {
    /// Builds a unit with weight 1 and no pre-period, validating finiteness.
    pub fn new(unit_id: impl Into<String>, d1: f64, d2: f64, y1: f64, y2: f64) -> Result<Self> {
        let obs = Self {
            unit_id: unit_id.into(),
            d1,
            d2,
            y1,
            y2,
            weight: 1.0,
            pre: None,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Self> {
        self.weight = weight;
        self.validate()?;
        Ok(self)
    }

    pub fn with_pre_period(mut self, d0: f64, y0: f64) -> Result<Self> {
        self.pre = Some(PrePeriod { d0, y0 });
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(WaossError::InvalidObservation {
                unit_id: self.unit_id.clone(),
                reason: reason.to_string(),
            })
        };
        if ![self.d1, self.d2, self.y1, self.y2].iter().all(|v| v.is_finite()) {
            return bad("d1, d2, y1 and y2 must be finite");
        }
        if !(self.weight.is_finite() && self.weight >= 0.0) {
            return bad("weight must be finite and nonnegative");
        }
        if let Some(pre) = self.pre {
            if !(pre.d0.is_finite() && pre.y0.is_finite()) {
                return bad("d0 and y0 must be finite");
            }
        }
        Ok(())
    }
}

/// A switcher's first-differenced record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferencedUnit {
    pub dy: f64,
    pub dd: f64,
    /// Sign of `dd`, always -1 or +1.
    pub s: i8,
    pub d1: f64,
    pub weight: f64,
}

impl DifferencedUnit {
    pub fn s_f64(&self) -> f64 {
        f64::from(self.s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StayerMode {
    #[default]
    Error,
    Drop,
}

/// What to do with units whose treatment does not move.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StayerPolicy {
    pub mode: StayerMode,
    /// Units with |dd| ≤ tolerance count as exact stayers.
    pub tolerance: f64,
}

impl StayerPolicy {
    pub fn error() -> Self {
        Self::default()
    }

    pub fn drop() -> Self {
        Self {
            mode: StayerMode::Drop,
            tolerance: 0.0,
        }
    }

    pub fn with_tolerance(self, tolerance: f64) -> Self {
        Self { tolerance, ..self }
    }
}

/// Estimation-ready sample of switchers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferencedSample {
    units: Vec<DifferencedUnit>,
    stayer_policy_applied: StayerMode,
    n_dropped: usize,
}

impl DifferencedSample {
    /// Wraps already differenced units, checking every sample invariant.
    pub fn from_units(
        units: Vec<DifferencedUnit>,
        stayer_policy_applied: StayerMode,
        n_dropped: usize,
    ) -> Result<Self> {
        if units.is_empty() {
            return Err(WaossError::EmptyPanel);
        }
        for (i, u) in units.iter().enumerate() {
            let ok = u.dy.is_finite()
                && u.dd.is_finite()
                && u.d1.is_finite()
                && u.dd != 0.0
                && i32::from(u.s) == sign(u.dd)
                && u.weight.is_finite()
                && u.weight >= 0.0;
            if !ok {
                return Err(WaossError::InvalidObservation {
                    unit_id: format!("#{i}"),
                    reason: format!("invalid differenced unit {u:?}"),
                });
            }
        }
        let total: f64 = stats::sum(units.iter().map(|u| u.weight));
        if total <= 0.0 {
            return Err(WaossError::InvalidArgument(
                "total weight of the sample must be positive".into(),
            ));
        }
        Ok(Self {
            units,
            stayer_policy_applied,
            n_dropped,
        })
    }

    /// Builds a sample from raw (dy, dd, d1) triples with unit weights.
    pub fn from_triples(triples: &[(f64, f64, f64)]) -> Result<Self> {
        let units = triples
            .iter()
            .map(|&(dy, dd, d1)| DifferencedUnit {
                dy,
                dd,
                s: sign(dd) as i8,
                d1,
                weight: 1.0,
            })
            .collect();
        Self::from_units(units, StayerMode::Error, 0)
    }

    pub fn units(&self) -> &[DifferencedUnit] {
        &self.units
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    pub fn n_dropped(&self) -> usize {
        self.n_dropped
    }

    pub fn stayer_policy_applied(&self) -> StayerMode {
        self.stayer_policy_applied
    }

    pub fn weights(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.weight).collect()
    }

    pub fn total_weight(&self) -> f64 {
        stats::sum(self.units.iter().map(|u| u.weight))
    }

    /// Same units with every weight replaced.
    pub fn reweighted(&self, weights: &[f64]) -> Result<Self> {
        assert_eq!(weights.len(), self.units.len());
        let units = self
            .units
            .iter()
            .zip(weights)
            .map(|(u, &weight)| DifferencedUnit { weight, ..*u })
            .collect();
        Self::from_units(units, self.stayer_policy_applied, self.n_dropped)
    }

    /// Sample made of the units at `indices`, repetitions allowed.
    pub fn resample(&self, indices: &[usize]) -> Result<Self> {
        let units = indices.iter().map(|&i| self.units[i]).collect();
        Self::from_units(units, self.stayer_policy_applied, self.n_dropped)
    }
}

/// Sign convention: -1, 0 or +1.
pub fn sign(x: f64) -> i32 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// First-differences a panel, applying the stayer policy.
pub fn difference_panel(panel: &[UnitObservation], policy: StayerPolicy) -> Result<DifferencedSample> {
    if panel.is_empty() {
        return Err(WaossError::EmptyPanel);
    }
    if !(policy.tolerance.is_finite() && policy.tolerance >= 0.0) {
        return Err(WaossError::InvalidArgument(format!(
            "stayer tolerance must be nonnegative, got {}",
            policy.tolerance
        )));
    }
    let mut units = Vec::with_capacity(panel.len());
    let mut n_dropped = 0;
    for obs in panel {
        obs.validate()?;
        let dd = obs.d2 - obs.d1;
        if dd.abs() <= policy.tolerance {
            match policy.mode {
                StayerMode::Error => {
                    return Err(WaossError::StayerFound {
                        unit_id: obs.unit_id.clone(),
                        abs_dd: dd.abs(),
                        tolerance: policy.tolerance,
                    })
                }
                StayerMode::Drop => {
                    n_dropped += 1;
                    continue;
                }
            }
        }
        units.push(DifferencedUnit {
            dy: obs.y2 - obs.y1,
            dd,
            s: sign(dd) as i8,
            d1: obs.d1,
            weight: obs.weight,
        });
    }
    if units.is_empty() {
        return Err(WaossError::AllUnitsDropped { n_dropped });
    }
    DifferencedSample::from_units(units, policy.mode, n_dropped)
}

/// One row of the quasi-stayer diagnostic table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiStayerRow {
    pub eta: f64,
    pub count: usize,
    pub weight_share: f64,
    /// Set when no unit lies within `eta`.
    pub empty: bool,
}

/// Counts units with |dd| ≤ η for each η on the grid.
pub fn summarize_quasi_stayers(sample: &DifferencedSample, eta_grid: &[f64]) -> Result<Vec<QuasiStayerRow>> {
    if eta_grid.is_empty() {
        return Err(WaossError::InvalidArgument("eta grid is empty".into()));
    }
    if let Some(bad) = eta_grid.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(WaossError::InvalidArgument(format!(
            "eta values must be positive, got {bad}"
        )));
    }
    let total = sample.total_weight();
    Ok(eta_grid
        .iter()
        .map(|&eta| {
            let inside = sample.units().iter().filter(|u| u.dd.abs() <= eta);
            let (count, w) = inside.fold((0usize, stats::CompensatedSum::new()), |(c, mut w), u| {
                w.add(u.weight);
                (c + 1, w)
            });
            QuasiStayerRow {
                eta,
                count,
                weight_share: w.value() / total,
                empty: count == 0,
            }
        })
        .collect())
}
