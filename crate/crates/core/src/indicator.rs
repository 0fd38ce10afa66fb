//! LPPLS confidence indicators over nested windows sharing one endpoint.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{fit, FitResult, SearchConfig, Window, MIN_WINDOW_LEN};
use crate::error::{Error, Result};
use crate::qualify::{qualify, BubbleSign, FilterConfig, QualificationReport};
use crate::rng::derive_seed;
use crate::series::PriceSeries;

/// Window lengths `max_len, max_len - step, …, min_len`, all ending at `t2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowScheme {
    pub max_len: usize,
    pub min_len: usize,
    pub step: usize,
}

impl Default for WindowScheme {
    fn default() -> Self {
        Self {
            max_len: 650,
            min_len: 30,
            step: 5,
        }
    }
}

impl WindowScheme {
    pub fn new(max_len: usize, min_len: usize, step: usize) -> Result<Self> {
        let s = Self {
            max_len,
            min_len,
            step,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_len < MIN_WINDOW_LEN || self.step == 0 || self.max_len < self.min_len {
            return Err(Error::InvalidArgument(format!(
                "window scheme ({}, {}, {}) needs min_len >= {MIN_WINDOW_LEN}, step >= 1, max_len >= min_len",
                self.max_len, self.min_len, self.step
            )));
        }
        Ok(())
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> {
        (self.min_len..=self.max_len).rev().step_by(self.step)
    }

    pub fn window_count(&self) -> usize {
        (self.max_len - self.min_len) / self.step + 1
    }

    /// All windows for endpoint `t2`; needs `max_len` points of history.
    pub fn windows_for(&self, t2: usize) -> Result<Vec<Window>> {
        self.validate()?;
        if t2 + 1 < self.max_len {
            return Err(Error::InsufficientHistory {
                t2,
                needed: self.max_len,
                available: t2 + 1,
            });
        }
        self.lengths()
            .map(|len| Window::ending_at(t2, len))
            .collect()
    }
}

/// Everything [`confidence_at`] and [`scan`] need besides the data.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IndicatorConfig {
    pub scheme: WindowScheme,
    pub search: SearchConfig,
    pub filter: FilterConfig,
    pub base_seed: u64,
    /// Keep the per-window fits and reports in each [`IndicatorPoint`].
    pub keep_windows: bool,
}

impl IndicatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        self.search.validate()?;
        self.filter.validate(&self.search)
    }

    /// Seed of the fit on the window of `len` points ending at `t2`.
    pub fn window_seed(&self, t2: usize, len: usize) -> u64 {
        derive_seed(self.base_seed, &[t2 as u64, len as u64])
    }
}

/// Fit and qualification of one window. `fit` is `None` when calibration failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    pub window: Window,
    pub fit: Option<FitResult>,
    pub report: Option<QualificationReport>,
}

impl WindowOutcome {
    pub fn qualified_sign(&self) -> Option<BubbleSign> {
        self.report.as_ref().filter(|r| r.qualified).map(|r| r.sign)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorPoint {
    pub t2: usize,
    pub positive_ci: f64,
    pub negative_ci: f64,
    pub windows_total: usize,
    pub windows_qualified_pos: usize,
    pub windows_qualified_neg: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<WindowOutcome>>,
}

impl IndicatorPoint {
    /// Indicator of the requested sign as an exact `(count, total)` pair.
    pub fn ratio(&self, sign: BubbleSign) -> (usize, usize) {
        let count = match sign {
            BubbleSign::Positive => self.windows_qualified_pos,
            BubbleSign::Negative => self.windows_qualified_neg,
            BubbleSign::Indeterminate => 0,
        };
        (count, self.windows_total)
    }

    pub fn ci(&self, sign: BubbleSign) -> f64 {
        let (c, t) = self.ratio(sign);
        c as f64 / t as f64
    }

    /// Same counts, with per-window detail dropped.
    pub fn summary(&self) -> Self {
        Self {
            windows: None,
            ..self.clone()
        }
    }
}

fn evaluate_window(series: &PriceSeries, window: Window, cfg: &IndicatorConfig) -> WindowOutcome {
    let search = SearchConfig {
        seed: cfg.window_seed(window.t2, window.len()),
        ..cfg.search
    };
    match fit(series, &window, &search) {
        Ok(f) => {
            let report = qualify(&f, series, &window, &cfg.filter);
            WindowOutcome {
                window,
                fit: Some(f),
                report: Some(report),
            }
        }
        Err(_) => WindowOutcome {
            window,
            fit: None,
            report: None,
        },
    }
}

/// Fraction of windows ending at `t2` whose fits pass the filters, counted
/// separately for positive (`B < 0`) and negative (`B > 0`) bubbles.
///
/// Only data up to `t2` is read. The denominator is always the scheme's
/// window count; failed fits count as unqualified.
pub fn confidence_at(
    series: &PriceSeries,
    t2: usize,
    cfg: &IndicatorConfig,
) -> Result<IndicatorPoint> {
    cfg.validate()?;
    if t2 >= series.len() {
        return Err(Error::InvalidArgument(format!(
            "endpoint {t2} is past the last index {}",
            series.len() - 1
        )));
    }
    let windows = cfg.scheme.windows_for(t2)?;
    let outcomes: Vec<WindowOutcome> = windows
        .into_par_iter()
        .map(|w| evaluate_window(series, w, cfg))
        .collect();
    let count = |sign| {
        outcomes
            .iter()
            .filter(|o| o.qualified_sign() == Some(sign))
            .count()
    };
    let (pos, neg) = (count(BubbleSign::Positive), count(BubbleSign::Negative));
    let total = cfg.scheme.window_count();
    Ok(IndicatorPoint {
        t2,
        positive_ci: pos as f64 / total as f64,
        negative_ci: neg as f64 / total as f64,
        windows_total: total,
        windows_qualified_pos: pos,
        windows_qualified_neg: neg,
        windows: cfg.keep_windows.then_some(outcomes),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOutcome {
    pub points: Vec<IndicatorPoint>,
    /// Endpoints without a full `max_len` history.
    pub skipped: Vec<usize>,
}

/// Indicator at every `t2_step`-th endpoint of `[t2_first, t2_last]`, in
/// increasing `t2` order.
pub fn scan(
    series: &PriceSeries,
    t2_first: usize,
    t2_last: usize,
    t2_step: usize,
    cfg: &IndicatorConfig,
) -> Result<ScanOutcome> {
    cfg.validate()?;
    if t2_step == 0 {
        return Err(Error::InvalidArgument("t2 step must be at least 1".into()));
    }
    if t2_first > t2_last {
        return Err(Error::InvalidArgument(format!(
            "empty scan range [{t2_first}, {t2_last}]"
        )));
    }
    if t2_last >= series.len() {
        return Err(Error::InvalidArgument(format!(
            "scan end {t2_last} is past the last index {}",
            series.len() - 1
        )));
    }
    let (ready, skipped): (Vec<usize>, Vec<usize>) = (t2_first..=t2_last)
        .step_by(t2_step)
        .partition(|&t2| t2 + 1 >= cfg.scheme.max_len);
    let points = ready
        .into_par_iter()
        .map(|t2| confidence_at(series, t2, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanOutcome { points, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LpplsParams;
    use crate::synth::{generate, SynthSpec};

    #[test]
    fn default_scheme_has_125_windows() {
        let s = WindowScheme::default();
        assert_eq!(s.window_count(), 125);
        let ws = s.windows_for(700).unwrap();
        assert_eq!(ws.len(), 125);
        assert_eq!(ws[0].len(), 650);
        assert_eq!(ws[124].len(), 30);
        assert!(ws.iter().all(|w| w.t2 == 700));
        assert!(ws.windows(2).all(|p| p[0].len() - p[1].len() == 5));
    }

    #[test]
    fn degenerate_scheme_has_one_window() {
        let s = WindowScheme::new(30, 30, 5).unwrap();
        assert_eq!(s.window_count(), 1);
        assert_eq!(s.windows_for(29).unwrap(), vec![Window { t1: 0, t2: 29 }]);
    }

    #[test]
    fn uneven_scheme() {
        let s = WindowScheme::new(52, 30, 5).unwrap();
        let lens: Vec<usize> = s.windows_for(60).unwrap().iter().map(|w| w.len()).collect();
        assert_eq!(lens, vec![52, 47, 42, 37, 32]);
        assert_eq!(s.window_count(), 5);
    }

    #[test]
    fn insufficient_history() {
        let s = WindowScheme::default();
        assert!(matches!(
            s.windows_for(100),
            Err(Error::InsufficientHistory {
                t2: 100,
                needed: 650,
                available: 101
            })
        ));
        assert!(s.windows_for(649).is_ok());
        assert!(s.windows_for(648).is_err());
    }

    #[test]
    fn invalid_schemes() {
        assert!(WindowScheme::new(30, 7, 5).is_err());
        assert!(WindowScheme::new(30, 40, 5).is_err());
        assert!(WindowScheme::new(30, 10, 0).is_err());
    }

    #[test]
    fn published_fractions() {
        let point = |pos| IndicatorPoint {
            t2: 0,
            positive_ci: pos as f64 / 125.0,
            negative_ci: 0.0,
            windows_total: 125,
            windows_qualified_pos: pos,
            windows_qualified_neg: 0,
            windows: None,
        };
        assert_eq!(point(20).ci(BubbleSign::Positive), 0.16);
        assert_eq!(point(1).ci(BubbleSign::Positive), 0.008);
        assert_eq!(point(20).ratio(BubbleSign::Positive), (20, 125));
    }

    fn small_cfg() -> IndicatorConfig {
        IndicatorConfig {
            scheme: WindowScheme::new(120, 40, 20).unwrap(),
            search: SearchConfig {
                max_evals: 400,
                restarts: 1,
                ..Default::default()
            },
            base_seed: 17,
            keep_windows: true,
            ..Default::default()
        }
    }

    fn noisy_bubble() -> PriceSeries {
        let p = LpplsParams {
            tc: 175.0,
            m: 0.5,
            omega: 8.0,
            a: 6.0,
            b: -0.05,
            c1: 0.002,
            c2: 0.001,
        };
        generate(&SynthSpec::new(p, 170).noise(0.003, 5).ar(0.4)).unwrap()
    }

    #[test]
    fn counts_agree_with_window_reports() {
        let s = noisy_bubble();
        let cfg = small_cfg();
        let pt = confidence_at(&s, 169, &cfg).unwrap();
        let ws = pt.windows.as_ref().unwrap();
        assert_eq!(ws.len(), pt.windows_total);
        let count = |sign| {
            ws.iter()
                .filter(|w| w.qualified_sign() == Some(sign))
                .count()
        };
        assert_eq!(pt.windows_qualified_pos, count(BubbleSign::Positive));
        assert_eq!(pt.windows_qualified_neg, count(BubbleSign::Negative));
        assert!(pt.windows_qualified_pos + pt.windows_qualified_neg <= pt.windows_total);
        assert!(pt.positive_ci + pt.negative_ci <= 1.0);
        assert_eq!(
            pt.positive_ci,
            pt.windows_qualified_pos as f64 / pt.windows_total as f64
        );
    }

    #[test]
    fn causal_and_deterministic() {
        let s = noisy_bubble();
        let cfg = small_cfg();
        let full = confidence_at(&s, 150, &cfg).unwrap();
        let cut = confidence_at(&s.truncate(150).unwrap(), 150, &cfg).unwrap();
        assert_eq!(full, cut);
        assert_eq!(full, confidence_at(&s, 150, &cfg).unwrap());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let s = noisy_bubble();
        let cfg = small_cfg();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| scan(&s, 140, 145, 1, &cfg)).unwrap();
        let b = four.install(|| scan(&s, 140, 145, 1, &cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scan_shapes() {
        let s = noisy_bubble();
        let cfg = IndicatorConfig {
            keep_windows: false,
            ..small_cfg()
        };
        let single = scan(&s, 160, 160, 1, &cfg).unwrap();
        assert_eq!(single.points, vec![confidence_at(&s, 160, &cfg).unwrap()]);

        let three = scan(&s, 160, 162, 1, &cfg).unwrap();
        let t2s: Vec<usize> = three.points.iter().map(|p| p.t2).collect();
        assert_eq!(t2s, vec![160, 161, 162]);

        let partial = scan(&s, 110, 125, 5, &cfg).unwrap();
        assert_eq!(partial.skipped, vec![110, 115]);
        assert_eq!(
            partial.points.iter().map(|p| p.t2).collect::<Vec<_>>(),
            vec![120, 125]
        );

        assert!(scan(&s, 162, 160, 1, &cfg).is_err());
        assert!(scan(&s, 160, 170, 1, &cfg).is_err());
        assert!(scan(&s, 160, 161, 0, &cfg).is_err());
    }

    #[test]
    fn removing_windows_bounds_the_change() {
        let s = noisy_bubble();
        let full_cfg = small_cfg();
        let full = confidence_at(&s, 169, &full_cfg).unwrap();
        // drop the longest window: scheme (100, 40, 20) shares the remaining seeds
        let reduced_cfg = IndicatorConfig {
            scheme: WindowScheme::new(100, 40, 20).unwrap(),
            ..full_cfg
        };
        let reduced = confidence_at(&s, 169, &reduced_cfg).unwrap();
        let removed = full.windows_total - reduced.windows_total;
        let bound = removed as f64 / full.windows_total as f64;
        for sign in [BubbleSign::Positive, BubbleSign::Negative] {
            let (a, _) = full.ratio(sign);
            let (b, _) = reduced.ratio(sign);
            assert!(a >= b && a - b <= removed);
            let adjusted = b as f64 / full.windows_total as f64;
            assert!((full.ci(sign) - adjusted).abs() <= bound + 1e-15);
        }
    }
}
