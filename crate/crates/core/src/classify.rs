//! Endogenous/exogenous crash classification from the peak indicator.

use std::cmp::Ordering;
use std::ops::RangeInclusive;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicator::IndicatorPoint;
use crate::qualify::BubbleSign;
use crate::series::PriceSeries;

/// Threshold for daily series.
pub const DAILY_THRESHOLD: f64 = 0.05;
/// Threshold for weekly and coarser series.
pub const WEEKLY_THRESHOLD: f64 = 0.02;

/// Default classification threshold for a series resampled at `stride`.
pub fn default_threshold(stride: usize) -> f64 {
    if stride <= 1 {
        DAILY_THRESHOLD
    } else {
        WEEKLY_THRESHOLD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrashType {
    Endogenous,
    Exogenous,
}

/// Endogenous iff `peak_ci >= threshold`.
pub fn classify(peak_ci: f64, threshold: f64) -> CrashType {
    if peak_ci >= threshold {
        CrashType::Endogenous
    } else {
        CrashType::Exogenous
    }
}

/// Largest indicator of `sign` among points with `t2` in `range`, with the
/// earliest endpoint winning ties. Returns `(value, t2)`.
pub fn peak_ci(
    points: &[IndicatorPoint],
    range: RangeInclusive<usize>,
    sign: BubbleSign,
) -> Result<(f64, usize)> {
    let mut best: Option<&IndicatorPoint> = None;
    for p in points.iter().filter(|p| range.contains(&p.t2)) {
        let better = match best {
            None => true,
            Some(b) => {
                let (pc, pt) = p.ratio(sign);
                let (bc, bt) = b.ratio(sign);
                // exact comparison of pc/pt against bc/bt
                match (pc * bt).cmp(&(bc * pt)) {
                    Ordering::Greater => true,
                    Ordering::Equal => p.t2 < b.t2,
                    Ordering::Less => false,
                }
            }
        };
        if better {
            best = Some(p);
        }
    }
    best.map(|p| (p.ci(sign), p.t2)).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no indicator points with t2 in [{}, {}]",
            range.start(),
            range.end()
        ))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashStats {
    pub peak_price: f64,
    pub peak_index: usize,
    pub peak_date: Option<NaiveDate>,
    pub valley_price: f64,
    pub valley_index: usize,
    pub valley_date: Option<NaiveDate>,
    pub crash_size: f64,
}

/// Peak = highest price in `review` (earliest on ties); valley = lowest price
/// after the peak within `review`.
pub fn crash_stats(series: &PriceSeries, review: RangeInclusive<usize>) -> Result<CrashStats> {
    let (start, end) = (*review.start(), *review.end());
    if start > end || end >= series.len() {
        return Err(Error::InvalidArgument(format!(
            "review interval [{start}, {end}] is not inside the {}-point series",
            series.len()
        )));
    }
    let pts = &series.points()[start..=end];
    let peak = pts
        .iter()
        .reduce(|a, b| if b.price > a.price { b } else { a })
        .expect("non-empty review");
    let valley = pts[peak.index - start + 1..]
        .iter()
        .reduce(|a, b| if b.price < a.price { b } else { a })
        .filter(|v| v.price < peak.price)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "no decline after the peak at index {} within the review interval",
                peak.index
            ))
        })?;
    Ok(CrashStats {
        peak_price: peak.price,
        peak_index: peak.index,
        peak_date: peak.date,
        valley_price: valley.price,
        valley_index: valley.index,
        valley_date: valley.date,
        crash_size: crash_size(peak.price, valley.price),
    })
}

/// `(peak - valley) / peak`.
pub fn crash_size(peak: f64, valley: f64) -> f64 {
    (peak - valley) / peak
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrashAssessment {
    pub peak_ci: f64,
    pub peak_ci_t2: usize,
    pub peak_ci_date: Option<NaiveDate>,
    pub threshold: f64,
    pub crash_type: CrashType,
    pub sign: BubbleSign,
    #[serde(flatten)]
    pub stats: CrashStats,
}

/// Peak indicator over `review` plus the crash statistics of the same interval.
pub fn assess(
    points: &[IndicatorPoint],
    series: &PriceSeries,
    review: RangeInclusive<usize>,
    sign: BubbleSign,
    threshold: f64,
) -> Result<CrashAssessment> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} must lie in (0, 1)"
        )));
    }
    let (peak, t2) = peak_ci(points, review.clone(), sign)?;
    let stats = crash_stats(series, review)?;
    Ok(CrashAssessment {
        peak_ci: peak,
        peak_ci_t2: t2,
        peak_ci_date: series.date_of(t2),
        threshold,
        crash_type: classify(peak, threshold),
        sign,
        stats,
    })
}
