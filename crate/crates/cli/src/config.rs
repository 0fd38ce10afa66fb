//! Flat `key = value` run configuration shared by all subcommands.

use std::path::Path;

use chrono::NaiveDate;
use lppls_core::classify::default_threshold;
use lppls_core::{
    FilterConfig, IndicatorConfig, OscillationDivisor, PriceSeries, SearchConfig, WindowScheme,
};
use serde::Serialize;

use crate::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every tunable of a run. Key names in config files and `--set` flags are
/// the field names.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: Option<String>,
    pub stride: usize,
    pub max_len: usize,
    pub min_len: usize,
    pub step: usize,
    pub m_min: f64,
    pub m_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub tc_min: f64,
    pub tc_max: f64,
    pub damping_floor: f64,
    pub population: usize,
    pub max_evals: usize,
    pub restarts: usize,
    pub condition_cap: f64,
    pub filter_m_min: f64,
    pub filter_m_max: f64,
    pub filter_omega_min: f64,
    pub filter_omega_max: f64,
    pub filter_tc_min: f64,
    pub filter_tc_max: f64,
    pub oscillation_threshold: f64,
    pub oscillation_divisor: OscillationDivisor,
    pub max_rel_error: f64,
    pub lomb_alpha: f64,
    pub ou_alpha: f64,
    /// Defaults to 0.05 for daily data and 0.02 for coarser strides.
    pub threshold: Option<f64>,
    /// Scan range, as indices or `YYYY-MM-DD` dates.
    pub t2_first: Option<String>,
    pub t2_last: Option<String>,
    pub t2_step: usize,
    pub seed: Option<u64>,
    pub output: Option<String>,
    pub format: Format,
    /// 0 picks the available parallelism.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scheme = WindowScheme::default();
        let search = SearchConfig::default();
        let filter = FilterConfig::default();
        Self {
            input: None,
            stride: 1,
            max_len: scheme.max_len,
            min_len: scheme.min_len,
            step: scheme.step,
            m_min: search.m_bounds.0,
            m_max: search.m_bounds.1,
            omega_min: search.omega_bounds.0,
            omega_max: search.omega_bounds.1,
            tc_min: search.tc_bounds.0,
            tc_max: search.tc_bounds.1,
            damping_floor: search.damping_floor,
            population: search.population,
            max_evals: search.max_evals,
            restarts: search.restarts,
            condition_cap: search.condition_cap,
            filter_m_min: filter.m_range.0,
            filter_m_max: filter.m_range.1,
            filter_omega_min: filter.omega_range.0,
            filter_omega_max: filter.omega_range.1,
            filter_tc_min: filter.tc_range.0,
            filter_tc_max: filter.tc_range.1,
            oscillation_threshold: filter.oscillation_threshold,
            oscillation_divisor: filter.oscillation_divisor,
            max_rel_error: filter.max_rel_error,
            lomb_alpha: filter.lomb_alpha,
            ou_alpha: filter.ou_alpha,
            threshold: None,
            t2_first: None,
            t2_last: None,
            t2_step: 1,
            seed: None,
            output: None,
            format: Format::Csv,
            workers: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, AppError> {
    value
        .parse()
        .map_err(|_| AppError::validation(format!("config key `{key}`: cannot parse `{value}`")))
}

fn optional(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_string())
}

/// An endpoint given as a series index or a date.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Index(usize),
    Date(NaiveDate),
}

impl Endpoint {
    pub fn parse(key: &str, value: &str) -> Result<Self, AppError> {
        if let Ok(i) = value.parse() {
            return Ok(Self::Index(i));
        }
        NaiveDate::parse_from_str(value, "%Y-%m-%d")
            .map(Self::Date)
            .map_err(|_| {
                AppError::validation(format!(
                    "`{key}`: `{value}` is neither an index nor a YYYY-MM-DD date"
                ))
            })
    }

    /// Index of the endpoint; a date maps to the first point on or after it.
    pub fn resolve(self, key: &str, series: &PriceSeries) -> Result<usize, AppError> {
        let index = match self {
            Self::Index(i) => i,
            Self::Date(d) => {
                if !series.has_dates() {
                    return Err(AppError::validation(format!(
                        "`{key}` is a date but the series has none"
                    )));
                }
                series
                    .points()
                    .iter()
                    .position(|p| p.date.is_some_and(|pd| pd >= d))
                    .ok_or_else(|| {
                        AppError::validation(format!("`{key}`: no data on or after {d}"))
                    })?
            }
        };
        if index >= series.len() {
            return Err(AppError::validation(format!(
                "`{key}` = {index} is past the last index {}",
                series.len() - 1
            )));
        }
        Ok(index)
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), AppError> {
        let v = value.trim();
        match key.trim() {
            "input" => self.input = optional(v),
            "stride" => self.stride = parse(key, v)?,
            "max_len" => self.max_len = parse(key, v)?,
            "min_len" => self.min_len = parse(key, v)?,
            "step" => self.step = parse(key, v)?,
            "m_min" => self.m_min = parse(key, v)?,
            "m_max" => self.m_max = parse(key, v)?,
            "omega_min" => self.omega_min = parse(key, v)?,
            "omega_max" => self.omega_max = parse(key, v)?,
            "tc_min" => self.tc_min = parse(key, v)?,
            "tc_max" => self.tc_max = parse(key, v)?,
            "damping_floor" => self.damping_floor = parse(key, v)?,
            "population" => self.population = parse(key, v)?,
            "max_evals" => self.max_evals = parse(key, v)?,
            "restarts" => self.restarts = parse(key, v)?,
            "condition_cap" => self.condition_cap = parse(key, v)?,
            "filter_m_min" => self.filter_m_min = parse(key, v)?,
            "filter_m_max" => self.filter_m_max = parse(key, v)?,
            "filter_omega_min" => self.filter_omega_min = parse(key, v)?,
            "filter_omega_max" => self.filter_omega_max = parse(key, v)?,
            "filter_tc_min" => self.filter_tc_min = parse(key, v)?,
            "filter_tc_max" => self.filter_tc_max = parse(key, v)?,
            "oscillation_threshold" => self.oscillation_threshold = parse(key, v)?,
            "oscillation_divisor" => {
                self.oscillation_divisor = v
                    .parse()
                    .map_err(|e: lppls_core::Error| AppError::validation(e.to_string()))?
            }
            "max_rel_error" => self.max_rel_error = parse(key, v)?,
            "lomb_alpha" => self.lomb_alpha = parse(key, v)?,
            "ou_alpha" => self.ou_alpha = parse(key, v)?,
            "threshold" => {
                self.threshold = if v.is_empty() {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "t2_first" | "t2_last" => {
                if !v.is_empty() {
                    Endpoint::parse(key, v)?;
                }
                let slot = if key.trim() == "t2_first" {
                    &mut self.t2_first
                } else {
                    &mut self.t2_last
                };
                *slot = optional(v);
            }
            "t2_step" => self.t2_step = parse(key, v)?,
            "seed" => {
                self.seed = if v.is_empty() {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "output" => self.output = optional(v),
            "format" => {
                self.format = match v.to_ascii_lowercase().as_str() {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => {
                        return Err(AppError::validation(format!(
                            "format `{v}` is not csv or json"
                        )))
                    }
                }
            }
            "workers" => self.workers = parse(key, v)?,
            other => return Err(AppError::usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), AppError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                AppError::validation(format!("{origin}:{}: expected `key = value`", n + 1))
            })?;
            self.set(key, value).map_err(|e| AppError {
                message: format!("{origin}:{}: {}", n + 1, e.message),
                ..e
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Fills defaults that depend on other keys.
    pub fn resolve(&mut self) {
        if self.threshold.is_none() {
            self.threshold = Some(default_threshold(self.stride));
        }
        if self.workers == 0 {
            if let Some(n) = std::env::var("LPPLS_WORKERS")
                .ok()
                .and_then(|v| v.trim().parse().ok())
            {
                self.workers = n;
            }
        }
    }

    pub fn scheme(&self) -> WindowScheme {
        WindowScheme {
            max_len: self.max_len,
            min_len: self.min_len,
            step: self.step,
        }
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            m_bounds: (self.m_min, self.m_max),
            omega_bounds: (self.omega_min, self.omega_max),
            tc_bounds: (self.tc_min, self.tc_max),
            damping_floor: self.damping_floor,
            population: self.population,
            max_evals: self.max_evals,
            restarts: self.restarts,
            seed: self.seed.unwrap_or(0),
            condition_cap: self.condition_cap,
        }
    }

    pub fn filter(&self) -> FilterConfig {
        FilterConfig {
            m_range: (self.filter_m_min, self.filter_m_max),
            omega_range: (self.filter_omega_min, self.filter_omega_max),
            tc_range: (self.filter_tc_min, self.filter_tc_max),
            oscillation_threshold: self.oscillation_threshold,
            oscillation_divisor: self.oscillation_divisor,
            max_rel_error: self.max_rel_error,
            lomb_alpha: self.lomb_alpha,
            ou_alpha: self.ou_alpha,
        }
    }

    pub fn indicator(&self) -> Result<IndicatorConfig, AppError> {
        let cfg = IndicatorConfig {
            scheme: self.scheme(),
            search: self.search(),
            filter: self.filter(),
            base_seed: self.seed.unwrap_or(0),
            keep_windows: false,
        };
        cfg.validate().map_err(AppError::from)?;
        Ok(cfg)
    }

    /// `(key, value)` pairs in key order, with unset options as empty strings.
    pub fn entries(&self) -> Vec<(String, String)> {
        let serde_json::Value::Object(map) = serde_json::to_value(self).expect("config serialises")
        else {
            unreachable!("config is a struct")
        };
        map.into_iter()
            .map(|(k, v)| {
                let text = match v {
                    serde_json::Value::Null => String::new(),
                    serde_json::Value::String(s) => s,
                    other => other.to_string(),
                };
                (k, text)
            })
            .collect()
    }

    /// Entries that affect results; the output path and worker count do not.
    pub fn embedded_entries(&self) -> Vec<(String, String)> {
        let mut e = self.entries();
        e.retain(|(k, _)| k != "output" && k != "workers");
        e
    }

    pub fn embedded_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(map) = v.as_object_mut() {
            map.remove("output");
            map.remove("workers");
        }
        v
    }

    /// The configuration as `# key = value` comment lines.
    pub fn comment_block(&self) -> String {
        self.embedded_entries()
            .iter()
            .map(|(k, v)| format!("# {k} = {v}\n"))
            .collect()
    }
}
