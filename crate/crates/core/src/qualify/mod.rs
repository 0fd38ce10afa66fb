//! The filter battery applied to calibrated fits.

pub mod lomb;
pub mod stationarity;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::calibrate::{FitResult, SearchConfig, Window};
use crate::error::{Error, Result};
use crate::model::LpplsParams;
use crate::series::PriceSeries;

pub use lomb::{lomb_test, LombOutcome};
pub use stationarity::{ar1_unit_root_test, OuOutcome};

/// Divisor of ω in the oscillation count `(ω / d) ln((tc - t1) / (tc - t2))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OscillationDivisor {
    #[default]
    Two,
    Pi,
    TwoPi,
}

impl OscillationDivisor {
    pub fn value(self) -> f64 {
        match self {
            Self::Two => 2.0,
            Self::Pi => PI,
            Self::TwoPi => 2.0 * PI,
        }
    }
}

impl std::str::FromStr for OscillationDivisor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "2" | "two" => Ok(Self::Two),
            "pi" => Ok(Self::Pi),
            "2pi" | "twopi" => Ok(Self::TwoPi),
            other => Err(Error::InvalidArgument(format!(
                "oscillation divisor `{other}` is not one of 2, pi, 2pi"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub m_range: (f64, f64),
    pub omega_range: (f64, f64),
    /// `tc` range past `t2` as fractions of `t2 - t1`.
    pub tc_range: (f64, f64),
    pub oscillation_threshold: f64,
    pub oscillation_divisor: OscillationDivisor,
    pub max_rel_error: f64,
    pub lomb_alpha: f64,
    pub ou_alpha: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            m_range: (0.01, 0.99),
            omega_range: (2.0, 25.0),
            tc_range: (0.0, 0.2),
            oscillation_threshold: 2.5,
            oscillation_divisor: OscillationDivisor::Two,
            max_rel_error: 0.20,
            lomb_alpha: 0.05,
            ou_alpha: 0.05,
        }
    }
}

impl FilterConfig {
    /// Checks thresholds and that every range sits inside the search box.
    pub fn validate(&self, search: &SearchConfig) -> Result<()> {
        let nested = |name: &str, (lo, hi): (f64, f64), (slo, shi): (f64, f64)| {
            if lo > hi || lo < slo || hi > shi {
                Err(Error::InvalidArgument(format!(
                    "filter {name} range [{lo}, {hi}] must be nested in [{slo}, {shi}]"
                )))
            } else {
                Ok(())
            }
        };
        nested("m", self.m_range, search.m_bounds)?;
        nested("omega", self.omega_range, search.omega_bounds)?;
        nested("tc", self.tc_range, search.tc_bounds)?;
        for (name, v) in [
            ("oscillation threshold", self.oscillation_threshold),
            ("max relative error", self.max_rel_error),
            ("lomb alpha", self.lomb_alpha),
            ("ou alpha", self.ou_alpha),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Bubble direction implied by the sign of `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BubbleSign {
    Positive,
    Negative,
    Indeterminate,
}

impl BubbleSign {
    pub fn of(params: &LpplsParams) -> Self {
        if params.b < 0.0 {
            Self::Positive
        } else if params.b > 0.0 {
            Self::Negative
        } else {
            Self::Indeterminate
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationReport {
    pub m_in_range: bool,
    pub omega_in_range: bool,
    pub tc_in_range: bool,
    pub oscillations_ok: bool,
    pub rel_error_ok: bool,
    pub lomb_ok: bool,
    pub ou_ok: bool,
    pub oscillations: f64,
    pub max_rel_error: f64,
    pub lomb: LombOutcome,
    pub ou: OuOutcome,
    pub qualified: bool,
    pub sign: BubbleSign,
}

impl QualificationReport {
    pub fn conditions(&self) -> [bool; 7] {
        [
            self.m_in_range,
            self.omega_in_range,
            self.tc_in_range,
            self.oscillations_ok,
            self.rel_error_ok,
            self.lomb_ok,
            self.ou_ok,
        ]
    }
}

/// Number of log-periodic oscillations between `t1` and `t2`, `(ω/d) ln((tc-t1)/(tc-t2))`.
pub fn oscillation_count(params: &LpplsParams, window: &Window, divisor: f64) -> Result<f64> {
    let (t1, t2) = (window.t1 as f64, window.t2 as f64);
    if !(params.tc > t2) {
        return Err(Error::Domain(format!(
            "critical time {} must lie after t2 = {t2}",
            params.tc
        )));
    }
    Ok(params.omega / divisor * ((params.tc - t1) / (params.tc - t2)).ln())
}

/// Largest `|p̂ - p| / p` over the window, with `p̂ = exp(model)`.
pub fn max_relative_error(
    series: &PriceSeries,
    window: &Window,
    params: &LpplsParams,
) -> Result<f64> {
    window.check_within(series)?;
    series.points()[window.t1..=window.t2]
        .iter()
        .try_fold(0.0f64, |acc, p| {
            let fitted = params.evaluate(p.index as f64)?.exp();
            Ok(acc.max((fitted - p.price).abs() / p.price))
        })
}

/// Pairs `(ln(tc - t), (tc - t)^{-m} (ln p - A - B (tc - t)^m))`, in time order.
pub fn detrended_residual(
    series: &PriceSeries,
    window: &Window,
    params: &LpplsParams,
) -> Result<Vec<(f64, f64)>> {
    window.check_within(series)?;
    if !(params.tc > window.t2 as f64) {
        return Err(Error::Domain(format!(
            "critical time {} must lie after t2 = {}",
            params.tc, window.t2
        )));
    }
    Ok(series.points()[window.t1..=window.t2]
        .iter()
        .map(|p| {
            let dt = params.tc - p.index as f64;
            let f = dt.powf(params.m);
            (dt.ln(), (p.log_price - params.a - params.b * f) / f)
        })
        .collect())
}

/// `ln p̂_t - ln p_t` over the window.
pub fn log_residuals(
    series: &PriceSeries,
    window: &Window,
    params: &LpplsParams,
) -> Result<Vec<f64>> {
    window.check_within(series)?;
    series.points()[window.t1..=window.t2]
        .iter()
        .map(|p| Ok(params.evaluate(p.index as f64)? - p.log_price))
        .collect()
}

/// AR(1) stationarity of the log-price residuals.
pub fn ou_test(
    series: &PriceSeries,
    window: &Window,
    params: &LpplsParams,
    alpha: f64,
) -> Result<OuOutcome> {
    Ok(ar1_unit_root_test(
        &log_residuals(series, window, params)?,
        alpha,
    ))
}

/// Runs all seven conditions. Failures are reported, never returned as errors.
pub fn qualify(
    fit: &FitResult,
    series: &PriceSeries,
    window: &Window,
    cfg: &FilterConfig,
) -> QualificationReport {
    let p = &fit.params;
    let within = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
    let t2 = window.t2 as f64;
    let tc_lo = t2 + cfg.tc_range.0 * window.span();
    let tc_hi = t2 + cfg.tc_range.1 * window.span();

    let oscillations =
        oscillation_count(p, window, cfg.oscillation_divisor.value()).unwrap_or(f64::NAN);
    let max_rel_error = max_relative_error(series, window, p).unwrap_or(f64::NAN);
    let lomb = detrended_residual(series, window, p)
        .map(|pairs| lomb_test(&pairs, p.omega, cfg.lomb_alpha, cfg.omega_range))
        .unwrap_or_else(|_| lomb_test(&[], p.omega, cfg.lomb_alpha, cfg.omega_range));
    let ou = ou_test(series, window, p, cfg.ou_alpha)
        .unwrap_or_else(|_| ar1_unit_root_test(&[], cfg.ou_alpha));

    let mut report = QualificationReport {
        m_in_range: within(p.m, cfg.m_range),
        omega_in_range: within(p.omega, cfg.omega_range),
        tc_in_range: p.tc > t2 && within(p.tc, (tc_lo, tc_hi)),
        oscillations_ok: oscillations >= cfg.oscillation_threshold,
        rel_error_ok: max_rel_error <= cfg.max_rel_error,
        lomb_ok: lomb.pass,
        ou_ok: ou.pass,
        oscillations,
        max_rel_error,
        lomb,
        ou,
        qualified: false,
        sign: BubbleSign::of(p),
    };
    report.qualified = report.conditions().iter().all(|&c| c);
    report
}

#[cfg(test)]
mod tests;
