//! Daily spot-price series on the uniform yearly grid.
//!
//! Every observation sits at grid time `t_i = i * dt` with `dt = 1/365`,
//! weekends included. Leap days are ordinary grid steps, so a calendar year
//! containing 29 February spans 366 steps.

use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid step in years for daily data.
pub const DAILY_DT: f64 = 1.0 / 365.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub price: f64,
}

/// Consecutive daily observations starting at `start_date`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    start_date: NaiveDate,
    values: Vec<f64>,
    dt: f64,
}

impl PriceSeries {
    pub fn new(start_date: NaiveDate, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("price series must be nonempty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            start_date,
            values,
            dt: DAILY_DT,
        })
    }

    /// Builds a series from dated points, which must be consecutive days.
    pub fn from_points(points: &[PricePoint]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::domain("price series must be nonempty"))?;
        for w in points.windows(2) {
            let expected = w[0].date + Duration::days(1);
            if w[1].date != expected {
                return Err(Error::Gap {
                    expected,
                    found: w[1].date,
                });
            }
        }
        Self::new(first.date, points.iter().map(|p| p.price).collect())
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn end_date(&self) -> NaiveDate {
        self.date_at(self.values.len() - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of observations, `N + 1`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of increments `N`.
    pub fn n_increments(&self) -> usize {
        self.values.len() - 1
    }

    /// Grid time of the last observation, `T = N * dt`.
    pub fn horizon(&self) -> f64 {
        self.n_increments() as f64 * self.dt
    }

    pub fn time_at(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time_at(i)).collect()
    }

    pub fn date_at(&self, i: usize) -> NaiveDate {
        self.start_date + Duration::days(i as i64)
    }

    /// Index of `date` in the series, if it lies within the range.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date).num_days();
        (offset >= 0 && (offset as usize) < self.len()).then_some(offset as usize)
    }

    /// Grid time of an arbitrary calendar date relative to the series start.
    pub fn grid_time_of(&self, date: NaiveDate) -> f64 {
        (date - self.start_date).num_days() as f64 * self.dt
    }

    pub fn points(&self) -> Vec<PricePoint> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &price)| PricePoint {
                date: self.date_at(i),
                price,
            })
            .collect()
    }

    /// Appends `other`, which must start the day after `self` ends.
    pub fn concat(&self, other: &PriceSeries) -> Result<PriceSeries> {
        let expected = self.end_date() + Duration::days(1);
        if other.start_date != expected {
            return Err(Error::Gap {
                expected,
                found: other.start_date,
            });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        PriceSeries::new(self.start_date, values)
    }

    /// Same dates, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<PriceSeries> {
        if values.len() != self.len() {
            return Err(Error::domain(format!(
                "length mismatch: {} values for a series of {}",
                values.len(),
                self.len()
            )));
        }
        PriceSeries::new(self.start_date, values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub split_date: NaiveDate,
}

/// Splits into `[start, split_date)` and `[split_date, end]`.
pub fn split(series: &PriceSeries, spec: SplitSpec) -> Result<(PriceSeries, PriceSeries)> {
    let at = match series.index_of(spec.split_date) {
        Some(i) if i > 0 => i,
        _ => {
            return Err(Error::domain(format!(
                "split date {} not strictly inside {}..={}",
                spec.split_date,
                series.start_date(),
                series.end_date()
            )))
        }
    };
    let first = PriceSeries::new(series.start_date, series.values[..at].to_vec())?;
    let second = PriceSeries::new(spec.split_date, series.values[at..].to_vec())?;
    Ok((first, second))
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

/// Reads a headed CSV with ISO dates and '.'-decimal prices.
///
/// Row numbers in parse errors count data records from 1, header excluded.
pub fn load_csv(path: &Path, date_column: &str, price_column: &str) -> Result<PriceSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, date_column, price_column)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    date_column: &str,
    price_column: &str,
) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("missing column {name:?}")))
    };
    let date_idx = column(date_column)?;
    let price_idx = column(price_column)?;

    let mut points = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let raw_date = record.get(date_idx).unwrap_or("");
        let date = parse_date(raw_date).ok_or_else(|| Error::Parse {
            row,
            field: date_column.to_string(),
            value: raw_date.to_string(),
        })?;
        let raw_price = record.get(price_idx).unwrap_or("");
        let price = raw_price
            .parse::<f64>()
            .ok()
            .filter(|p| p.is_finite())
            .ok_or_else(|| Error::Parse {
                row,
                field: price_column.to_string(),
                value: raw_price.to_string(),
            })?;
        points.push(PricePoint { date, price });
    }
    PriceSeries::from_points(&points)
}

/// Writes `date,t,<value_column>`.
pub fn write_csv<W: std::io::Write>(series: &PriceSeries, value_column: &str, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["date", "t", value_column])?;
    for (i, v) in series.values.iter().enumerate() {
        wtr.write_record([
            series.date_at(i).to_string(),
            series.time_at(i).to_string(),
            v.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
