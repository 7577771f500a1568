//! CSV ingestion in wide (one row per unit) and long (one row per unit and
//! period) layouts.
//!
//! Files are comma separated with a header row. Cells are trimmed, numbers
//! may use scientific notation, and empty cells in required columns are
//! errors.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaossError};
use crate::panel::{PrePeriod, UnitObservation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WideColumns {
    pub d1: String,
    pub d2: String,
    pub y1: String,
    pub y2: String,
    pub d0: Option<String>,
    pub y0: Option<String>,
}

impl Default for WideColumns {
    fn default() -> Self {
        Self {
            d1: "d1".into(),
            d2: "d2".into(),
            y1: "y1".into(),
            y2: "y2".into(),
            d0: None,
            y0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongColumns {
    pub period: String,
    pub d: String,
    pub y: String,
    /// Label of the optional pre-period rows.
    pub p0: Option<String>,
    pub p1: String,
    pub p2: String,
}

impl Default for LongColumns {
    fn default() -> Self {
        Self {
            period: "period".into(),
            d: "d".into(),
            y: "y".into(),
            p0: None,
            p1: "1".into(),
            p2: "2".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layout {
    Wide(WideColumns),
    Long(LongColumns),
}

/// Which columns hold what.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub unit: String,
    pub weight: Option<String>,
    pub layout: Layout,
}

impl ColumnSpec {
    pub fn wide(columns: WideColumns) -> Self {
        Self {
            unit: "unit_id".into(),
            weight: None,
            layout: Layout::Wide(columns),
        }
    }

    pub fn long(columns: LongColumns) -> Self {
        Self {
            unit: "unit_id".into(),
            weight: None,
            layout: Layout::Long(columns),
        }
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn with_weight(mut self, weight: impl Into<String>) -> Self {
        self.weight = Some(weight.into());
        self
    }

    fn required_names(&self) -> Vec<&str> {
        let mut names = vec![self.unit.as_str()];
        match &self.layout {
            Layout::Wide(c) => {
                names.extend([c.d1.as_str(), c.d2.as_str(), c.y1.as_str(), c.y2.as_str()]);
                names.extend(c.d0.as_deref());
                names.extend(c.y0.as_deref());
            }
            Layout::Long(c) => names.extend([c.period.as_str(), c.d.as_str(), c.y.as_str()]),
        }
        names.extend(self.weight.as_deref());
        names
    }

    pub fn validate(&self) -> Result<()> {
        let names = self.required_names();
        if names.iter().any(|n| n.trim().is_empty()) {
            return Err(WaossError::InvalidColumnSpec("column names must be nonempty".into()));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(WaossError::InvalidColumnSpec(format!("column {a:?} named twice")));
            }
        }
        match &self.layout {
            Layout::Wide(c) if c.d0.is_some() != c.y0.is_some() => Err(WaossError::InvalidColumnSpec(
                "d0 and y0 columns must be given together".into(),
            )),
            Layout::Long(c) => {
                let mut labels = vec![c.p1.as_str(), c.p2.as_str()];
                labels.extend(c.p0.as_deref());
                if labels.iter().any(|l| l.trim().is_empty()) {
                    return Err(WaossError::InvalidColumnSpec("period labels must be nonempty".into()));
                }
                if labels[0] == labels[1] || labels.get(2).is_some_and(|p0| labels[..2].contains(p0)) {
                    return Err(WaossError::InvalidColumnSpec("period labels must be distinct".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Reads a file in whichever layout `spec` declares.
pub fn read_panel(path: &Path, spec: &ColumnSpec) -> Result<Vec<UnitObservation>> {
    match spec.layout {
        Layout::Wide(_) => read_wide(path, spec),
        Layout::Long(_) => read_long(path, spec),
    }
}

pub fn read_wide(path: &Path, spec: &ColumnSpec) -> Result<Vec<UnitObservation>> {
    read_wide_from(open(path)?, spec, path)
}

pub fn read_long(path: &Path, spec: &ColumnSpec) -> Result<Vec<UnitObservation>> {
    read_long_from(open(path)?, spec, path)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| WaossError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Header lookup plus typed cell access with row/column error context.
struct Table<R: Read> {
    reader: csv::Reader<R>,
    header: Vec<String>,
}

impl<R: Read> Table<R> {
    fn new(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let header = reader.headers()?.iter().map(str::to_string).collect();
        Ok(Self { reader, header })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| WaossError::MissingColumn {
                column: name.to_string(),
            })
    }
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    line: usize,
}

impl Row<'_> {
    fn text(&self, idx: usize, name: &str) -> Result<&str> {
        let cell = self.record.get(idx).unwrap_or("");
        if cell.is_empty() {
            return Err(WaossError::EmptyCell {
                row: self.line,
                column: name.to_string(),
            });
        }
        Ok(cell)
    }

    fn number(&self, idx: usize, name: &str) -> Result<f64> {
        let cell = self.text(idx, name)?;
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(WaossError::NonNumericCell {
                row: self.line,
                column: name.to_string(),
                value: cell.to_string(),
            }),
        }
    }
}

/// Wide-layout reader over any byte source; `source` names it in errors.
pub fn read_wide_from<R: Read>(input: R, spec: &ColumnSpec, source: &Path) -> Result<Vec<UnitObservation>> {
    spec.validate()?;
    let Layout::Wide(cols) = &spec.layout else {
        return Err(WaossError::InvalidColumnSpec("expected a wide layout".into()));
    };
    let mut table = Table::new(input)?;
    let unit_i = table.column(&spec.unit)?;
    let d1_i = (table.column(&cols.d1)?, cols.d1.as_str());
    let d2_i = (table.column(&cols.d2)?, cols.d2.as_str());
    let y1_i = (table.column(&cols.y1)?, cols.y1.as_str());
    let y2_i = (table.column(&cols.y2)?, cols.y2.as_str());
    let pre_i = match (&cols.d0, &cols.y0) {
        (Some(d0), Some(y0)) => Some(((table.column(d0)?, d0.as_str()), (table.column(y0)?, y0.as_str()))),
        _ => None,
    };
    let weight_i = spec
        .weight
        .as_deref()
        .map(|w| table.column(w).map(|i| (i, w)))
        .transpose()?;

    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    while table.reader.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = Row { record: &record, line };
        let unit_id = row.text(unit_i, &spec.unit)?.to_string();
        if seen.insert(unit_id.clone(), line).is_some() {
            return Err(WaossError::DuplicateUnitId { unit_id, row: line });
        }
        let mut obs = UnitObservation {
            unit_id,
            d1: row.number(d1_i.0, d1_i.1)?,
            d2: row.number(d2_i.0, d2_i.1)?,
            y1: row.number(y1_i.0, y1_i.1)?,
            y2: row.number(y2_i.0, y2_i.1)?,
            weight: 1.0,
            pre: None,
        };
        if let Some(((d0i, d0n), (y0i, y0n))) = pre_i {
            obs.pre = Some(PrePeriod {
                d0: row.number(d0i, d0n)?,
                y0: row.number(y0i, y0n)?,
            });
        }
        if let Some((wi, wn)) = weight_i {
            obs.weight = row.number(wi, wn)?;
        }
        obs.validate()?;
        out.push(obs);
    }
    if out.is_empty() {
        return Err(WaossError::EmptyFile {
            path: source.to_path_buf(),
        });
    }
    Ok(out)
}

#[derive(Default)]
struct LongUnit {
    unit_id: String,
    periods: [Option<(f64, f64)>; 3],
    weight: Option<f64>,
}

/// Long-layout reader over any byte source. Rows whose period label is not
/// one of the declared labels are ignored.
pub fn read_long_from<R: Read>(input: R, spec: &ColumnSpec, source: &Path) -> Result<Vec<UnitObservation>> {
    spec.validate()?;
    let Layout::Long(cols) = &spec.layout else {
        return Err(WaossError::InvalidColumnSpec("expected a long layout".into()));
    };
    let mut table = Table::new(input)?;
    let unit_i = table.column(&spec.unit)?;
    let period_i = table.column(&cols.period)?;
    let d_i = table.column(&cols.d)?;
    let y_i = table.column(&cols.y)?;
    let weight_i = spec.weight.as_deref().map(|w| table.column(w)).transpose()?;
    // slot 0 = p1, 1 = p2, 2 = p0
    let labels = [Some(cols.p1.as_str()), Some(cols.p2.as_str()), cols.p0.as_deref()];

    let mut order: HashMap<String, usize> = HashMap::new();
    let mut units: Vec<LongUnit> = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut n_rows = 0;
    while table.reader.read_record(&mut record)? {
        n_rows += 1;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = Row { record: &record, line };
        let unit_id = row.text(unit_i, &spec.unit)?;
        let period = row.text(period_i, &cols.period)?;
        let Some(slot) = labels.iter().position(|l| *l == Some(period)) else {
            continue;
        };
        let d = row.number(d_i, &cols.d)?;
        let y = row.number(y_i, &cols.y)?;
        let weight = match (weight_i, spec.weight.as_deref()) {
            (Some(i), Some(name)) => Some(row.number(i, name)?),
            _ => None,
        };
        let k = *order.entry(unit_id.to_string()).or_insert_with(|| {
            units.push(LongUnit {
                unit_id: unit_id.to_string(),
                ..Default::default()
            });
            units.len() - 1
        });
        let unit = &mut units[k];
        if unit.periods[slot].is_some() {
            return Err(WaossError::DuplicatePeriod {
                unit_id: unit.unit_id.clone(),
                period: period.to_string(),
            });
        }
        unit.periods[slot] = Some((d, y));
        if let Some(w) = weight {
            match unit.weight {
                Some(prev) if prev != w => {
                    return Err(WaossError::InconsistentWeight {
                        unit_id: unit.unit_id.clone(),
                    })
                }
                _ => unit.weight = Some(w),
            }
        }
    }
    if n_rows == 0 {
        return Err(WaossError::EmptyFile {
            path: source.to_path_buf(),
        });
    }
    units
        .into_iter()
        .map(|u| {
            let get = |slot: usize| {
                u.periods[slot].ok_or_else(|| WaossError::MissingPeriod {
                    unit_id: u.unit_id.clone(),
                    period: labels[slot].unwrap_or_default().to_string(),
                })
            };
            let (d1, y1) = get(0)?;
            let (d2, y2) = get(1)?;
            let pre = if cols.p0.is_some() {
                let (d0, y0) = get(2)?;
                Some(PrePeriod { d0, y0 })
            } else {
                None
            };
            let obs = UnitObservation {
                unit_id: u.unit_id.clone(),
                d1,
                d2,
                y1,
                y2,
                weight: u.weight.unwrap_or(1.0),
                pre,
            };
            obs.validate()?;
            Ok(obs)
        })
        .collect()
}

/// Writes `unit_id,d1,d2,y1,y2[,d0,y0][,weight]` with shortest round-trip
/// decimal rendering, so re-reading reproduces every value exactly.
pub fn write_wide<W: Write>(out: W, panel: &[UnitObservation], with_weight: bool) -> Result<()> {
    let with_pre = !panel.is_empty() && panel.iter().all(|u| u.pre.is_some());
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["unit_id", "d1", "d2", "y1", "y2"];
    if with_pre {
        header.extend(["d0", "y0"]);
    }
    if with_weight {
        header.push("weight");
    }
    writer.write_record(&header)?;
    for u in panel {
        let mut row = vec![
            u.unit_id.clone(),
            u.d1.to_string(),
            u.d2.to_string(),
            u.y1.to_string(),
            u.y2.to_string(),
        ];
        if with_pre {
            let pre = u.pre.expect("checked above");
            row.extend([pre.d0.to_string(), pre.y0.to_string()]);
        }
        if with_weight {
            row.push(u.weight.to_string());
        }
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|source| WaossError::Io {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(())
}

pub fn write_wide_file(path: &Path, panel: &[UnitObservation], with_weight: bool) -> Result<()> {
    let file = File::create(path).map_err(|source| WaossError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_wide(std::io::BufWriter::new(file), panel, with_weight)
}
