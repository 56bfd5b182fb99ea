//! Return panels: CSV loading, row cleaning and period splitting.
//!
//! The on-disk format is a UTF-8, comma-delimited table with a header row
//! `date,ASSET1,ASSET2,...`. Dates are ISO-8601 calendar dates
//! (`YYYY-MM-DD`), values are decimal simple returns, and an empty cell marks
//! a missing observation.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";

/// A `T x k` panel of asset returns indexed by date.
///
/// Values are stored row-major. Missing observations are `NaN`; they only
/// survive until [`clean_panel`] runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    values: Vec<f64>,
}

impl ReturnsMatrix {
    /// Builds a panel, checking shape, date ordering and asset uniqueness.
    ///
    /// `values` holds `dates.len()` rows of `assets.len()` entries each.
    /// `NaN` marks a missing cell; infinities are rejected.
    pub fn new(dates: Vec<NaiveDate>, assets: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let expected = dates.len() * assets.len();
        if values.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: values.len(),
            });
        }
        check_unique(&assets)?;
        for (row, pair) in dates.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::Ordering {
                    row: row + 2,
                    date: pair[1].to_string(),
                    previous: pair[0].to_string(),
                });
            }
        }
        if let Some(pos) = values.iter().position(|v| v.is_infinite()) {
            return Err(Error::Cell {
                row: pos / assets.len().max(1) + 1,
                column: pos % assets.len().max(1) + 2,
                value: values[pos].to_string(),
            });
        }
        Ok(Self {
            dates,
            assets,
            values,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    /// Number of observations `T`.
    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    /// Number of assets `k`.
    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let k = self.n_assets();
        &self.values[t * k..(t + 1) * k]
    }

    pub fn value(&self, t: usize, asset: usize) -> f64 {
        self.values[t * self.n_assets() + asset]
    }

    pub fn column(&self, asset: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|t| self.value(t, asset)).collect()
    }

    /// Row-major cell values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(|v| v.is_nan())
    }

    fn select_rows(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for t in 0..self.n_rows() {
            if keep(t) {
                dates.push(self.dates[t]);
                values.extend_from_slice(self.row(t));
            }
        }
        Self {
            dates,
            assets: self.assets.clone(),
            values,
        }
    }
}

fn check_unique(assets: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(assets.len());
    for a in assets {
        if a.is_empty() {
            return Err(Error::Schema("empty asset identifier".into()));
        }
        if !seen.insert(a.as_str()) {
            return Err(Error::Schema(format!("duplicate asset identifier {a:?}")));
        }
    }
    Ok(())
}

/// A named, inclusive date window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub name: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl PeriodSpec {
    pub fn new(name: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Self {
        Self {
            name: name.into(),
            start,
            end,
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    fn overlaps(&self, other: &PeriodSpec) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Reads a return panel from a CSV file. Missing cells stay `NaN`.
pub fn load_returns_csv(path: impl AsRef<Path>) -> Result<ReturnsMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_returns_csv(file)
}

/// Reads a return panel from any CSV source.
pub fn read_returns_csv<R: Read>(reader: R) -> Result<ReturnsMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let header = rdr.headers()?.clone();
    let mut cols = header.iter().map(str::trim);
    match cols.next() {
        Some("date") => {}
        Some(other) => {
            return Err(Error::Format(format!(
                "first column must be `date`, found {other:?}"
            )))
        }
        None => return Err(Error::Format("empty header".into())),
    }
    let assets: Vec<String> = cols.map(str::to_owned).collect();
    if assets.is_empty() {
        return Err(Error::Format("no asset columns".into()));
    }
    check_unique(&assets)?;

    let k = assets.len();
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        if record.len() != k + 1 {
            return Err(Error::Format(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                k + 1
            )));
        }
        let raw_date = record[0].trim();
        let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT).map_err(|_| Error::Cell {
            row,
            column: 1,
            value: raw_date.to_owned(),
        })?;
        if let Some(&previous) = dates.last() {
            if date <= previous {
                return Err(Error::Ordering {
                    row,
                    date: date.to_string(),
                    previous: previous.to_string(),
                });
            }
        }
        dates.push(date);
        for (j, cell) in record.iter().skip(1).enumerate() {
            values.push(parse_cell(cell.trim()).ok_or_else(|| Error::Cell {
                row,
                column: j + 2,
                value: cell.to_owned(),
            })?);
        }
    }
    ReturnsMatrix::new(dates, assets, values)
}

fn parse_cell(cell: &str) -> Option<f64> {
    if cell.is_empty() {
        return Some(f64::NAN);
    }
    // `f64::from_str` also accepts "inf" and "NaN", which are not decimals.
    if !cell
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
    {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Writes a panel in the same CSV schema [`read_returns_csv`] accepts.
///
/// Values use Rust's shortest round-trip formatting, so reading the file back
/// yields bit-identical numbers.
pub fn write_returns_csv<W: Write>(panel: &ReturnsMatrix, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_owned()];
    header.extend(panel.assets.iter().cloned());
    wtr.write_record(&header)?;
    for t in 0..panel.n_rows() {
        let mut record = Vec::with_capacity(panel.n_assets() + 1);
        record.push(panel.dates[t].format(DATE_FORMAT).to_string());
        record.extend(panel.row(t).iter().map(|v| {
            if v.is_nan() {
                String::new()
            } else {
                v.to_string()
            }
        }));
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Drops every row that has at least one missing cell.
pub fn clean_panel(raw: &ReturnsMatrix) -> Result<ReturnsMatrix> {
    let cleaned = raw.select_rows(|t| raw.row(t).iter().all(|v| !v.is_nan()));
    if cleaned.n_rows() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} complete rows remain after cleaning, need at least 2",
            cleaned.n_rows()
        )));
    }
    Ok(cleaned)
}

/// Cuts a cleaned panel into one sub-panel per period.
///
/// Rows outside every period are discarded. Periods must not overlap and each
/// must capture at least two rows.
pub fn split_periods(
    panel: &ReturnsMatrix,
    specs: &[PeriodSpec],
) -> Result<Vec<(PeriodSpec, ReturnsMatrix)>> {
    validate_periods(specs)?;
    specs
        .iter()
        .map(|spec| {
            let sub = panel.select_rows(|t| spec.contains(panel.dates[t]));
            if sub.n_rows() < 2 {
                return Err(Error::InsufficientData(format!(
                    "period {:?} ({} to {}) contains {} rows, need at least 2",
                    spec.name,
                    spec.start,
                    spec.end,
                    sub.n_rows()
                )));
            }
            Ok((spec.clone(), sub))
        })
        .collect()
}

/// Checks `start <= end`, unique names and pairwise disjointness.
pub fn validate_periods(specs: &[PeriodSpec]) -> Result<()> {
    let mut names = HashSet::new();
    for (i, spec) in specs.iter().enumerate() {
        if spec.start > spec.end {
            return Err(Error::Config(format!(
                "period {:?} starts after it ends",
                spec.name
            )));
        }
        if !names.insert(spec.name.as_str()) {
            return Err(Error::Config(format!(
                "duplicate period name {:?}",
                spec.name
            )));
        }
        if let Some(other) = specs[..i].iter().find(|o| o.overlaps(spec)) {
            return Err(Error::Config(format!(
                "periods {:?} and {:?} overlap",
                other.name, spec.name
            )));
        }
    }
    Ok(())
}
