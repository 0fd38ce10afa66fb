//! Price series ingestion and resampling.
//!
//! All time arithmetic downstream is done in trading-step indices, so a series
//! only records the order of observations; calendar gaps are irrelevant.

use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";

/// One observation. `log_price` is always `price.ln()`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricePoint {
    pub index: usize,
    pub date: Option<NaiveDate>,
    pub price: f64,
    pub log_price: f64,
}

/// An immutable, consecutively indexed price series.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    points: Vec<PricePoint>,
    stride: usize,
}

fn check_price(row: usize, price: f64) -> Result<()> {
    if !price.is_finite() || price <= 0.0 {
        return Err(Error::InvalidRow {
            row,
            reason: format!("price must be positive and finite, got {price}"),
        });
    }
    Ok(())
}

impl PriceSeries {
    /// Builds a series from prices and optional dates. Rows are numbered from 1
    /// in error messages.
    pub fn new(prices: &[f64], dates: Option<&[NaiveDate]>, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        if prices.len() < 2 {
            return Err(Error::Empty(format!(
                "a series needs at least 2 points, got {}",
                prices.len()
            )));
        }
        if let Some(d) = dates {
            if d.len() != prices.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} dates for {} prices",
                    d.len(),
                    prices.len()
                )));
            }
        }
        let mut points = Vec::with_capacity(prices.len());
        for (i, &price) in prices.iter().enumerate() {
            check_price(i + 1, price)?;
            let date = dates.map(|d| d[i]);
            if let (Some(cur), Some(Some(prev))) =
                (date, points.last().map(|p: &PricePoint| p.date))
            {
                if cur <= prev {
                    return Err(Error::DateOrder {
                        row: i + 1,
                        date: cur.to_string(),
                        previous: prev.to_string(),
                    });
                }
            }
            points.push(PricePoint {
                index: i,
                date,
                price,
                log_price: price.ln(),
            });
        }
        Ok(Self { points, stride })
    }

    /// Convenience constructor for an undated stride-1 series.
    pub fn from_prices(prices: &[f64]) -> Result<Self> {
        Self::new(prices, None, 1)
    }

    /// Builds an undated stride-1 series from log prices.
    pub fn from_log_prices(log_prices: &[f64]) -> Result<Self> {
        let prices: Vec<f64> = log_prices.iter().map(|x| x.exp()).collect();
        Self::from_prices(&prices)
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn has_dates(&self) -> bool {
        self.points.first().is_some_and(|p| p.date.is_some())
    }

    pub fn prices(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.price)
    }

    pub fn log_prices(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.log_price)
    }

    pub fn date_of(&self, index: usize) -> Option<NaiveDate> {
        self.points.get(index).and_then(|p| p.date)
    }

    /// Index of the observation on `date`, if present.
    pub fn index_of_date(&self, date: NaiveDate) -> Option<usize> {
        self.points
            .binary_search_by(|p| p.date.cmp(&Some(date)))
            .ok()
    }

    /// Keeps indices `0..=t2`.
    pub fn truncate(&self, t2: usize) -> Result<Self> {
        if t2 + 1 < 2 || t2 >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a {}-point series at index {t2}",
                self.len()
            )));
        }
        Ok(Self {
            points: self.points[..=t2].to_vec(),
            stride: self.stride,
        })
    }

    /// Parses `date,close` CSV text. Extra columns (such as `index`) are ignored.
    /// The date column may be empty on every row, but not on only some rows.
    pub fn ingest(csv_text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(csv_text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let (date_col, close_col) = match (col("date"), col("close")) {
            (Some(d), Some(c)) => (d, c),
            _ => {
                return Err(Error::Csv(format!(
                    "header must contain `date` and `close`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                )))
            }
        };

        let mut prices = Vec::new();
        let mut dates = Vec::new();
        let mut undated = 0usize;
        for (i, record) in reader.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| Error::Csv(format!("row {row}: {e}")))?;
            let close = record.get(close_col).unwrap_or("");
            let price: f64 = close.parse().map_err(|_| Error::InvalidRow {
                row,
                reason: format!("close `{close}` is not a number"),
            })?;
            check_price(row, price)?;
            let raw_date = record.get(date_col).unwrap_or("");
            if raw_date.is_empty() {
                undated += 1;
            } else {
                let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT).map_err(|_| {
                    Error::InvalidRow {
                        row,
                        reason: format!("date `{raw_date}` is not YYYY-MM-DD"),
                    }
                })?;
                if let Some(&prev) = dates.last() {
                    if date <= prev {
                        return Err(Error::DateOrder {
                            row,
                            date: date.to_string(),
                            previous: prev.to_string(),
                        });
                    }
                }
                dates.push(date);
            }
            prices.push(price);
            if undated > 0 && !dates.is_empty() {
                return Err(Error::InvalidRow {
                    row,
                    reason: "dates must be given on every row or on none".into(),
                });
            }
        }
        if prices.is_empty() {
            return Err(Error::Empty("no data rows".into()));
        }
        let dates = (!dates.is_empty()).then_some(dates.as_slice());
        Self::new(&prices, dates, 1)
    }

    /// Emits `index,date,close`, readable by [`PriceSeries::ingest`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,date,close\n");
        for p in &self.points {
            let date = p
                .date
                .map(|d| d.format(DATE_FORMAT).to_string())
                .unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", p.index, date, p.price);
        }
        out
    }

    /// Keeps every `stride`-th point counting back from the last observation,
    /// so the final point always survives, then re-indexes from zero.
    pub fn resample(&self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be at least 1".into()));
        }
        if self.stride != 1 {
            return Err(Error::InvalidArgument(format!(
                "resampling expects a daily (stride 1) series, got stride {}",
                self.stride
            )));
        }
        let last = self.len() - 1;
        let mut kept: Vec<&PricePoint> = self.points.iter().rev().step_by(stride).collect();
        kept.reverse();
        if kept.len() < 2 {
            return Err(Error::Empty(format!(
                "resampling {} points at stride {stride} leaves {} point(s)",
                self.len(),
                kept.len()
            )));
        }
        debug_assert_eq!(kept.last().map(|p| p.index), Some(last));
        let points = kept
            .into_iter()
            .enumerate()
            .map(|(i, p)| PricePoint {
                index: i,
                ..p.clone()
            })
            .collect();
        Ok(Self { points, stride })
    }
}
