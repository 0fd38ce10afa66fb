//! Calibration of the LPPLS model on one window.
//!
//! For fixed nonlinear parameters `(tc, m, ω)` the linear parameters
//! `(A, B, C1, C2)` minimise a quadratic and come from a 4×4 normal system.
//! The profiled cost that remains is searched with a restarted CMA-ES.

pub mod cmaes;
mod linear;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{basis, combine, LpplsParams};
use crate::rng::{derive_seed, seeded};
use crate::series::PriceSeries;

use self::cmaes::{minimize_unit_box, CmaesOptions};

/// Minimum distance kept between the critical time and the window end.
pub const TC_GUARD: f64 = 0.01;

/// Shortest window a fit is attempted on.
pub const MIN_WINDOW_LEN: usize = 8;

/// An inclusive index range `[t1, t2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub t1: usize,
    pub t2: usize,
}

impl Window {
    pub fn new(t1: usize, t2: usize) -> Result<Self> {
        if t1 >= t2 || t2 - t1 + 1 < MIN_WINDOW_LEN {
            return Err(Error::InvalidArgument(format!(
                "window [{t1}, {t2}] must hold at least {MIN_WINDOW_LEN} points"
            )));
        }
        Ok(Self { t1, t2 })
    }

    /// The window of `len` points ending at `t2`.
    pub fn ending_at(t2: usize, len: usize) -> Result<Self> {
        if len > t2 + 1 {
            return Err(Error::InsufficientHistory {
                t2,
                needed: len,
                available: t2 + 1,
            });
        }
        Self::new(t2 + 1 - len, t2)
    }

    pub fn len(&self) -> usize {
        self.t2 - self.t1 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `t2 - t1` in steps.
    pub fn span(&self) -> f64 {
        (self.t2 - self.t1) as f64
    }

    pub fn check_within(&self, series: &PriceSeries) -> Result<()> {
        if self.t2 >= series.len() {
            return Err(Error::InvalidArgument(format!(
                "window end {} is past the last index {}",
                self.t2,
                series.len() - 1
            )));
        }
        Ok(())
    }
}

/// Search box and optimiser settings for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub m_bounds: (f64, f64),
    pub omega_bounds: (f64, f64),
    /// `tc` range past `t2`, as fractions of the window span `t2 - t1`.
    pub tc_bounds: (f64, f64),
    /// Candidates with damping below this are rejected. `0` disables the check.
    pub damping_floor: f64,
    pub population: usize,
    /// Evaluation budget of each CMA-ES run.
    pub max_evals: usize,
    /// Runs from uniform random starts after the first, centred run.
    pub restarts: usize,
    pub seed: u64,
    pub condition_cap: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            m_bounds: (0.0, 1.0),
            omega_bounds: (1.0, 50.0),
            tc_bounds: (0.0, 1.0 / 3.0),
            damping_floor: 1.0,
            population: CmaesOptions::default_population(3),
            max_evals: 2000,
            restarts: 5,
            seed: 0,
            condition_cap: 1e12,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidArgument(format!(
            "{name} bounds [{lo}, {hi}] are malformed"
        )));
    }
    Ok(())
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("m", self.m_bounds)?;
        check_range("omega", self.omega_bounds)?;
        check_range("tc", self.tc_bounds)?;
        if self.omega_bounds.0 <= 0.0 {
            return Err(Error::InvalidArgument(
                "omega bounds must be positive".into(),
            ));
        }
        if self.tc_bounds.0 < 0.0 {
            return Err(Error::InvalidArgument(
                "tc cannot precede the window end".into(),
            ));
        }
        if self.population < 4 {
            return Err(Error::InvalidArgument(
                "population must be at least 4".into(),
            ));
        }
        if self.max_evals < self.population {
            return Err(Error::InvalidArgument(
                "evaluation budget is smaller than one generation".into(),
            ));
        }
        Ok(())
    }

    /// Absolute `tc` interval for `window`, with the singularity guard applied.
    pub fn tc_range(&self, window: &Window) -> (f64, f64) {
        let t2 = window.t2 as f64;
        let lo = t2 + self.tc_bounds.0 * window.span();
        let hi = t2 + self.tc_bounds.1 * window.span();
        (lo.max(t2 + TC_GUARD), hi.max(t2 + TC_GUARD))
    }

    fn decode(&self, window: &Window, u: &[f64]) -> (f64, f64, f64) {
        let lerp = |(lo, hi): (f64, f64), x: f64| lo + (hi - lo) * x;
        (
            lerp(self.tc_range(window), u[0]),
            lerp(self.m_bounds, u[1]),
            lerp(self.omega_bounds, u[2]),
        )
    }

    fn contains(&self, window: &Window, p: &LpplsParams) -> bool {
        let (tl, th) = self.tc_range(window);
        let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
        inside(p.tc, (tl, th)) && inside(p.m, self.m_bounds) && inside(p.omega, self.omega_bounds)
    }
}

/// `(A, B, C1, C2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
}

impl LinearParams {
    pub fn with_nonlinear(self, tc: f64, m: f64, omega: f64) -> LpplsParams {
        LpplsParams {
            tc,
            m,
            omega,
            a: self.a,
            b: self.b,
            c1: self.c1,
            c2: self.c2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: LpplsParams,
    /// Sum of squared log-price residuals over the window.
    pub cost: f64,
    pub n_points: usize,
    pub converged: bool,
    pub evaluations: usize,
}

/// Reusable buffers for evaluating the profiled cost on one window.
pub(crate) struct ProfiledCost {
    t: Vec<f64>,
    y: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
    t2: f64,
    condition_cap: f64,
}

impl ProfiledCost {
    pub(crate) fn new(series: &PriceSeries, window: &Window, condition_cap: f64) -> Result<Self> {
        window.check_within(series)?;
        let pts = &series.points()[window.t1..=window.t2];
        let n = pts.len();
        Ok(Self {
            t: pts.iter().map(|p| p.index as f64).collect(),
            y: pts.iter().map(|p| p.log_price).collect(),
            f: vec![0.0; n],
            g: vec![0.0; n],
            h: vec![0.0; n],
            t2: window.t2 as f64,
            condition_cap,
        })
    }

    /// Linear least-squares parameters and the residual sum of squares.
    pub(crate) fn solve(&mut self, tc: f64, m: f64, omega: f64) -> Result<(LinearParams, f64)> {
        if !(tc > self.t2) {
            return Err(Error::Domain(format!(
                "critical time {tc} must lie after the window end {}",
                self.t2
            )));
        }
        let n = self.t.len() as f64;
        let (mut sf, mut sg, mut sh) = (0.0, 0.0, 0.0);
        let (mut sff, mut sfg, mut sfh, mut sgg, mut sgh, mut shh) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let (mut sy, mut sfy, mut sgy, mut shy) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..self.t.len() {
            let (f, g, h) = basis(tc, m, omega, self.t[i]);
            let y = self.y[i];
            self.f[i] = f;
            self.g[i] = g;
            self.h[i] = h;
            sf += f;
            sg += g;
            sh += h;
            sff += f * f;
            sfg += f * g;
            sfh += f * h;
            sgg += g * g;
            sgh += g * h;
            shh += h * h;
            sy += y;
            sfy += f * y;
            sgy += g * y;
            shy += h * y;
        }
        let normal = [
            [n, sf, sg, sh],
            [sf, sff, sfg, sfh],
            [sg, sfg, sgg, sgh],
            [sh, sfh, sgh, shh],
        ];
        let [a, b, c1, c2] =
            linear::solve_symmetric(&normal, &[sy, sfy, sgy, shy], self.condition_cap)?;
        let mut rss = 0.0;
        for i in 0..self.t.len() {
            let r = self.y[i] - combine(a, b, c1, c2, (self.f[i], self.g[i], self.h[i]));
            rss += r * r;
        }
        Ok((LinearParams { a, b, c1, c2 }, rss))
    }
}

/// Least-squares `(A, B, C1, C2)` for fixed `(tc, m, ω)`.
pub fn linear_solve(
    series: &PriceSeries,
    window: &Window,
    tc: f64,
    m: f64,
    omega: f64,
) -> Result<LinearParams> {
    let mut pc = ProfiledCost::new(series, window, SearchConfig::default().condition_cap)?;
    pc.solve(tc, m, omega).map(|(lin, _)| lin)
}

/// The profiled cost: residual sum of squares at the [`linear_solve`] minimiser.
pub fn cost(series: &PriceSeries, window: &Window, tc: f64, m: f64, omega: f64) -> Result<f64> {
    let mut pc = ProfiledCost::new(series, window, SearchConfig::default().condition_cap)?;
    pc.solve(tc, m, omega).map(|(_, rss)| rss)
}

/// Sum of squared log-price residuals of `params` over `window`.
pub fn sum_squared_residuals(
    series: &PriceSeries,
    window: &Window,
    params: &LpplsParams,
) -> Result<f64> {
    window.check_within(series)?;
    series.points()[window.t1..=window.t2]
        .iter()
        .try_fold(0.0, |acc, p| {
            let r = p.log_price - params.evaluate(p.index as f64)?;
            Ok(acc + r * r)
        })
}

/// Cost used by the search: `+∞` for degenerate or inadmissible candidates.
fn admissible_cost(
    pc: &mut ProfiledCost,
    tc: f64,
    m: f64,
    omega: f64,
    damping_floor: f64,
) -> Option<(LpplsParams, f64)> {
    let (lin, rss) = pc.solve(tc, m, omega).ok()?;
    let params = lin.with_nonlinear(tc, m, omega);
    if !rss.is_finite() || !params.all_finite() {
        return None;
    }
    if damping_floor > 0.0 && !(params.damping().ok()? >= damping_floor) {
        return None;
    }
    Some((params, rss))
}

/// Calibrates all seven parameters on `window`.
///
/// The first CMA-ES run starts at the centre of the search box; each restart
/// starts from a uniform random point. All runs use a step of a quarter of the
/// box width. The lowest-cost admissible candidate across runs is returned.
pub fn fit(series: &PriceSeries, window: &Window, cfg: &SearchConfig) -> Result<FitResult> {
    cfg.validate()?;
    let mut pc = ProfiledCost::new(series, window, cfg.condition_cap)?;
    let opts = CmaesOptions {
        population: cfg.population,
        max_evals: cfg.max_evals,
        sigma0: 0.25,
        tol_x: 1e-12,
        tol_fun: 1e-12,
    };

    let mut best: Option<(LpplsParams, f64, bool)> = None;
    let mut evaluations = 0;
    for run in 0..=cfg.restarts {
        let mut rng = seeded(derive_seed(cfg.seed, &[run as u64]));
        let x0: Vec<f64> = if run == 0 {
            vec![0.5; 3]
        } else {
            (0..3).map(|_| rand::Rng::random::<f64>(&mut rng)).collect()
        };
        let objective = |u: &[f64]| {
            let (tc, m, omega) = cfg.decode(window, u);
            admissible_cost(&mut pc, tc, m, omega, cfg.damping_floor)
                .map_or(f64::INFINITY, |(_, rss)| rss)
        };
        let out = minimize_unit_box(objective, &x0, &opts, &mut rng);
        evaluations += out.evaluations;
        if !out.best_f.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, c, _)| out.best_f < *c) {
            let (tc, m, omega) = cfg.decode(window, &out.best_x);
            if let Some((params, rss)) = admissible_cost(&mut pc, tc, m, omega, cfg.damping_floor) {
                best = Some((params, rss, out.converged));
            }
        }
    }

    let (params, cost, converged) = best.ok_or_else(|| {
        Error::FitFailed(format!(
            "no admissible candidate in {evaluations} evaluations on window [{}, {}]",
            window.t1, window.t2
        ))
    })?;
    Ok(FitResult {
        params,
        cost,
        n_points: window.len(),
        converged: converged && cfg.contains(window, &params),
        evaluations,
    })
}

/// Explicit evaluation points for [`grid_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub tc: Vec<f64>,
    pub m: Vec<f64>,
    pub omega: Vec<f64>,
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl GridSpec {
    /// Evenly spaced axes spanning the search box of `cfg`, edges included.
    pub fn uniform(
        window: &Window,
        cfg: &SearchConfig,
        n_tc: usize,
        n_m: usize,
        n_omega: usize,
    ) -> Self {
        Self {
            tc: linspace(cfg.tc_range(window), n_tc),
            m: linspace(cfg.m_bounds, n_m),
            omega: linspace(cfg.omega_bounds, n_omega),
        }
    }

    pub fn single(tc: f64, m: f64, omega: f64) -> Self {
        Self {
            tc: vec![tc],
            m: vec![m],
            omega: vec![omega],
        }
    }

    pub fn size(&self) -> usize {
        self.tc.len() * self.m.len() * self.omega.len()
    }
}

/// Exhaustive minimisation of the profiled cost over `grid`, applying the
/// same admissibility rules as [`fit`].
pub fn grid_oracle(
    series: &PriceSeries,
    window: &Window,
    grid: &GridSpec,
    cfg: &SearchConfig,
) -> Result<FitResult> {
    if grid.size() == 0 {
        return Err(Error::InvalidArgument("grid has no points".into()));
    }
    let (tl, th) = cfg.tc_range(window);
    let tol = 1e-9;
    let outside = |v: &[f64], (lo, hi): (f64, f64)| v.iter().any(|&x| x < lo - tol || x > hi + tol);
    if outside(&grid.tc, (tl, th))
        || outside(&grid.m, cfg.m_bounds)
        || outside(&grid.omega, cfg.omega_bounds)
    {
        return Err(Error::InvalidArgument(
            "grid axes leave the search box".into(),
        ));
    }
    let mut pc = ProfiledCost::new(series, window, cfg.condition_cap)?;
    let mut best: Option<(LpplsParams, f64)> = None;
    for &tc in &grid.tc {
        for &m in &grid.m {
            for &omega in &grid.omega {
                if let Some((p, rss)) = admissible_cost(&mut pc, tc, m, omega, cfg.damping_floor) {
                    if best.as_ref().is_none_or(|(_, c)| rss < *c) {
                        best = Some((p, rss));
                    }
                }
            }
        }
    }
    let (params, cost) = best.ok_or_else(|| Error::FitFailed("no admissible grid point".into()))?;
    Ok(FitResult {
        params,
        cost,
        n_points: window.len(),
        converged: true,
        evaluations: grid.size(),
    })
}
