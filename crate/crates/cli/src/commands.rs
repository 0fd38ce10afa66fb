use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use clap::Args;
use lppls_core::classify::assess;
use lppls_core::indicator::scan as scan_endpoints;
use lppls_core::qualify::qualify;
use lppls_core::synth::{generate, SynthSpec};
use lppls_core::{fit as fit_window, BubbleSign, IndicatorPoint, LpplsParams, PriceSeries, Window};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Endpoint, Format, RunConfig};
use crate::{AppError, Common};

fn read_text(path: &str) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|e| AppError::io(Path::new(path), e))
}

fn write_output(target: Option<&str>, text: &str) -> Result<(), AppError> {
    match target {
        Some(path) => std::fs::write(path, text).map_err(|e| AppError::io(Path::new(path), e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| AppError::io(Path::new("<stdout>"), e))
        }
    }
}

fn to_json(value: &impl Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serialises");
    text.push('\n');
    text
}

fn ingest_series(path: &str) -> Result<PriceSeries, AppError> {
    PriceSeries::ingest(&read_text(path)?).map_err(|e| AppError::validation(format!("{path}: {e}")))
}

/// The input series after resampling to the configured stride.
fn load_series(cfg: &RunConfig) -> Result<PriceSeries, AppError> {
    let path = cfg
        .input
        .as_deref()
        .ok_or_else(|| AppError::usage("no input file; pass --input or set `input`"))?;
    let series = ingest_series(path)?;
    if cfg.stride == 1 {
        return Ok(series);
    }
    Ok(series.resample(cfg.stride)?)
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, AppError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| AppError::computation(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

pub fn ingest(cfg: &RunConfig, stride: Option<usize>) -> Result<(), AppError> {
    let path = cfg
        .input
        .as_deref()
        .ok_or_else(|| AppError::usage("no input file; pass --input or set `input`"))?;
    let mut series = ingest_series(path)?;
    if let Some(s) = stride {
        series = series.resample(s)?;
    }
    eprintln!("{} points at stride {}", series.len(), series.stride());
    write_output(
        cfg.output.as_deref(),
        &format!("{}{}", cfg.comment_block(), series.to_csv()),
    )
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    tc: f64,
    #[arg(long)]
    m: f64,
    #[arg(long)]
    omega: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    a: f64,
    #[arg(long, allow_negative_numbers = true)]
    b: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    c2: f64,
    /// Number of points
    #[arg(long)]
    n: usize,
    /// Standard deviation of the additive log-price noise
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// AR(1) coefficient of the noise; 0 is white noise
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    ar_phi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model time of the first point; defaults to 0
    #[arg(long, allow_negative_numbers = true)]
    t_start: Option<f64>,
    /// Model time of the last point; defaults to n - 1
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
    /// Give the points consecutive weekday dates from this day
    #[arg(long)]
    start_date: Option<NaiveDate>,
    #[arg(long)]
    output: Option<String>,
}

pub fn synth(args: &SynthArgs) -> Result<(), AppError> {
    let params = LpplsParams {
        tc: args.tc,
        m: args.m,
        omega: args.omega,
        a: args.a,
        b: args.b,
        c1: args.c1,
        c2: args.c2,
    };
    let mut spec = SynthSpec::new(params, args.n)
        .noise(args.noise_sigma, args.seed)
        .ar(args.ar_phi);
    spec.t_range = (
        args.t_start.unwrap_or(spec.t_range.0),
        args.t_end.unwrap_or(spec.t_range.1),
    );
    spec.start_date = args.start_date;
    let series = generate(&spec)?;
    let mut header = String::new();
    for (k, v) in [
        ("tc", args.tc),
        ("m", args.m),
        ("omega", args.omega),
        ("a", args.a),
        ("b", args.b),
        ("c1", args.c1),
        ("c2", args.c2),
        ("noise_sigma", args.noise_sigma),
        ("ar_phi", args.ar_phi),
        ("t_start", spec.t_range.0),
        ("t_end", spec.t_range.1),
    ] {
        header.push_str(&format!("# {k} = {v}\n"));
    }
    header.push_str(&format!("# n = {}\n# seed = {}\n", args.n, args.seed));
    let start = args.start_date.map(|d| d.to_string()).unwrap_or_default();
    header.push_str(&format!("# start_date = {start}\n"));
    write_output(
        args.output.as_deref(),
        &format!("{header}{}", series.to_csv()),
    )
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// First index (or date) of the window
    #[arg(long)]
    t1: Option<String>,
    /// Last index (or date) of the window; defaults to the last point
    #[arg(long)]
    t2: Option<String>,
    /// Window length, as an alternative to --t1
    #[arg(long, conflicts_with = "t1")]
    len: Option<usize>,
    #[arg(long)]
    seed: Option<String>,
}

pub fn fit(args: &FitArgs) -> Result<(), AppError> {
    let cfg = args.common.load(&[("seed", args.seed.clone())])?;
    let series = load_series(&cfg)?;
    let t2 = match &args.t2 {
        Some(v) => Endpoint::parse("t2", v)?.resolve("t2", &series)?,
        None => series.len() - 1,
    };
    let t1 = match (&args.t1, args.len) {
        (Some(v), _) => Endpoint::parse("t1", v)?.resolve("t1", &series)?,
        (None, Some(len)) => (t2 + 1).checked_sub(len).ok_or_else(|| {
            AppError::validation(format!(
                "window of {len} points does not fit before t2 = {t2}"
            ))
        })?,
        (None, None) => 0,
    };
    let window = Window::new(t1, t2)?;
    window.check_within(&series)?;
    let search = cfg.search();
    let filter = cfg.filter();
    filter.validate(&search)?;
    let result = fit_window(&series, &window, &search)?;
    let report = qualify(&result, &series, &window, &filter);
    let doc = json!({
        "config": cfg.embedded_json(),
        "window": { "t1": t1, "t2": t2 },
        "t1_date": series.date_of(t1),
        "t2_date": series.date_of(t2),
        "params": result.params,
        "cost": result.cost,
        "n_points": result.n_points,
        "converged": result.converged,
        "evaluations": result.evaluations,
        "qualification": report,
        "qualified": report.qualified,
        "sign": report.sign,
    });
    write_output(cfg.output.as_deref(), &to_json(&doc))
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// Base seed of the per-window fits; recorded in the output
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    t2_first: Option<String>,
    #[arg(long)]
    t2_last: Option<String>,
    #[arg(long)]
    t2_step: Option<String>,
    #[arg(long)]
    max_len: Option<String>,
    #[arg(long)]
    min_len: Option<String>,
    #[arg(long)]
    step: Option<String>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
}

/// One row of the scan table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub date: Option<NaiveDate>,
    pub t2: usize,
    pub positive_ci: f64,
    pub negative_ci: f64,
    pub pos_count: usize,
    pub neg_count: usize,
    pub total_windows: usize,
}

impl ScanRow {
    fn from_point(p: &IndicatorPoint, series: &PriceSeries) -> Self {
        Self {
            date: series.date_of(p.t2),
            t2: p.t2,
            positive_ci: p.positive_ci,
            negative_ci: p.negative_ci,
            pos_count: p.windows_qualified_pos,
            neg_count: p.windows_qualified_neg,
            total_windows: p.windows_total,
        }
    }

    fn to_point(&self) -> IndicatorPoint {
        let ratio = |c: usize| c as f64 / self.total_windows as f64;
        IndicatorPoint {
            t2: self.t2,
            positive_ci: ratio(self.pos_count),
            negative_ci: ratio(self.neg_count),
            windows_total: self.total_windows,
            windows_qualified_pos: self.pos_count,
            windows_qualified_neg: self.neg_count,
            windows: None,
        }
    }
}

const SCAN_HEADER: &str = "date,t2,positive_ci,negative_ci,pos_count,neg_count,total_windows";

pub fn scan(args: &ScanArgs) -> Result<(), AppError> {
    let mut cfg = args.common.load(&[
        ("seed", Some(args.seed.to_string())),
        ("t2_first", args.t2_first.clone()),
        ("t2_last", args.t2_last.clone()),
        ("t2_step", args.t2_step.clone()),
        ("max_len", args.max_len.clone()),
        ("min_len", args.min_len.clone()),
        ("step", args.step.clone()),
        ("format", args.format.clone()),
    ])?;
    let series = load_series(&cfg)?;
    let indicator = cfg.indicator()?;
    let first = match &cfg.t2_first {
        Some(v) => Endpoint::parse("t2_first", v)?.resolve("t2_first", &series)?,
        None => (cfg.max_len - 1).min(series.len() - 1),
    };
    let last = match &cfg.t2_last {
        Some(v) => Endpoint::parse("t2_last", v)?.resolve("t2_last", &series)?,
        None => series.len() - 1,
    };
    cfg.t2_first = Some(first.to_string());
    cfg.t2_last = Some(last.to_string());
    let out = with_pool(cfg.workers, || {
        scan_endpoints(&series, first, last, cfg.t2_step, &indicator)
    })??;
    if out.points.is_empty() {
        return Err(AppError::validation(format!(
            "no endpoint in [{first}, {last}] has the {} points of history a {}-point window needs",
            cfg.max_len, cfg.max_len
        )));
    }
    if !out.skipped.is_empty() {
        eprintln!(
            "skipped {} endpoints without enough history",
            out.skipped.len()
        );
    }
    let rows: Vec<ScanRow> = out
        .points
        .iter()
        .map(|p| ScanRow::from_point(p, &series))
        .collect();
    let text = match cfg.format {
        Format::Csv => {
            let mut text = cfg.comment_block();
            text.push_str(SCAN_HEADER);
            text.push('\n');
            for r in &rows {
                let date = r.date.map(|d| d.to_string()).unwrap_or_default();
                text.push_str(&format!(
                    "{date},{},{},{},{},{},{}\n",
                    r.t2, r.positive_ci, r.negative_ci, r.pos_count, r.neg_count, r.total_windows
                ));
            }
            text
        }
        Format::Json => to_json(&json!({ "config": cfg.embedded_json(), "points": rows })),
    };
    write_output(cfg.output.as_deref(), &text)
}

/// Reads a scan table written by `scan`, in either format.
fn read_scan_table(path: &str) -> Result<Vec<ScanRow>, AppError> {
    let text = read_text(path)?;
    let bad = |e: String| AppError::validation(format!("{path}: {e}"));
    if text.trim_start().starts_with('{') {
        let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        return serde_json::from_value(doc["points"].clone()).map_err(|e| bad(e.to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<ScanRow>().enumerate() {
        let row = record.map_err(|e| bad(format!("record {}: {e}", i + 1)))?;
        if row.total_windows == 0 {
            return Err(bad(format!("t2 {}: total_windows is 0", row.t2)));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(bad("indicator table has no rows".into()));
    }
    Ok(rows)
}

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    #[command(flatten)]
    common: Common,
    /// Indicator table written by `scan`
    #[arg(long)]
    indicator: String,
    /// Start of the review interval (index or date); defaults to the first row
    #[arg(long)]
    review_start: Option<String>,
    /// End of the review interval; defaults to the valley after the peak price
    #[arg(long)]
    review_end: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    /// Bubble direction to classify: positive or negative
    #[arg(long, default_value = "positive")]
    sign: String,
}

pub fn classify(args: &ClassifyArgs) -> Result<(), AppError> {
    let cfg = args.common.load(&[("threshold", args.threshold.clone())])?;
    let sign = match args.sign.to_ascii_lowercase().as_str() {
        "positive" => BubbleSign::Positive,
        "negative" => BubbleSign::Negative,
        other => {
            return Err(AppError::usage(format!(
                "sign `{other}` is not positive or negative"
            )))
        }
    };
    let series = load_series(&cfg)?;
    let rows = read_scan_table(&args.indicator)?;
    let points: Vec<IndicatorPoint> = rows.iter().map(ScanRow::to_point).collect();
    let (table_first, table_last) = (points[0].t2, points[points.len() - 1].t2);
    if table_last >= series.len() {
        return Err(AppError::validation(format!(
            "indicator table reaches t2 = {table_last} but the series has {} points",
            series.len()
        )));
    }

    let start = match &args.review_start {
        Some(v) => Endpoint::parse("review_start", v)?.resolve("review_start", &series)?,
        None => table_first,
    };
    let end = match &args.review_end {
        Some(v) => Endpoint::parse("review_end", v)?.resolve("review_end", &series)?,
        None => lppls_core::crash_stats(&series, start..=table_last)?.valley_index,
    };
    if start > end {
        return Err(AppError::validation(format!(
            "review interval [{start}, {end}] is empty"
        )));
    }
    if start < table_first || end > table_last {
        return Err(AppError::validation(format!(
            "review interval [{start}, {end}] is not covered by the indicator table [{table_first}, {table_last}]"
        )));
    }
    let threshold = cfg.threshold.expect("resolved");
    let report = assess(&points, &series, start..=end, sign, threshold)?;
    let doc = json!({
        "config": cfg.embedded_json(),
        "indicator": args.indicator,
        "review": { "start": start, "end": end },
        "review_start_date": series.date_of(start),
        "review_end_date": series.date_of(end),
        "assessment": report,
        "crash_type": report.crash_type,
    });
    write_output(cfg.output.as_deref(), &to_json(&doc))
}
