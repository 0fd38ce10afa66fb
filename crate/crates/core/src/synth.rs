//! Synthetic LPPLS price trajectories.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::LpplsParams;
use crate::rng::seeded;
use crate::series::PriceSeries;

/// Parameters of a synthetic trajectory.
///
/// Points sit at equally spaced times over `t_range`. The series index equals
/// the model time only for the default range `(0, n - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub params: LpplsParams,
    pub n: usize,
    /// Marginal standard deviation of the additive log-price noise. For a
    /// unit-root (`ar_phi = 1`) process this is the innovation deviation.
    pub noise_sigma: f64,
    /// Autocorrelation of the noise; 0 gives white noise.
    pub ar_phi: f64,
    pub seed: u64,
    pub t_range: (f64, f64),
    /// When set, points get consecutive weekday dates starting here.
    pub start_date: Option<NaiveDate>,
}

impl SynthSpec {
    pub fn new(params: LpplsParams, n: usize) -> Self {
        Self {
            params,
            n,
            noise_sigma: 0.0,
            ar_phi: 0.0,
            seed: 0,
            t_range: (0.0, n.saturating_sub(1) as f64),
            start_date: None,
        }
    }

    pub fn noise(mut self, sigma: f64, seed: u64) -> Self {
        self.noise_sigma = sigma;
        self.seed = seed;
        self
    }

    pub fn ar(mut self, phi: f64) -> Self {
        self.ar_phi = phi;
        self
    }

    pub fn dated(mut self, start: NaiveDate) -> Self {
        self.start_date = Some(start);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(
                "synthetic series needs n >= 2".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument("noise_sigma must be >= 0".into()));
        }
        if !(self.ar_phi > -1.0 && self.ar_phi <= 1.0) {
            return Err(Error::InvalidArgument("ar_phi must lie in (-1, 1]".into()));
        }
        let (t0, t1) = self.t_range;
        if !(t0 < t1) || !(t1 < self.params.tc) {
            return Err(Error::InvalidArgument(format!(
                "t_range ({t0}, {t1}) must be increasing and end before tc = {}",
                self.params.tc
            )));
        }
        if !self.params.all_finite() {
            return Err(Error::InvalidArgument("parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let (t0, t1) = self.t_range;
        let step = (t1 - t0) / (self.n - 1) as f64;
        (0..self.n).map(|i| t0 + step * i as f64).collect()
    }

    /// Noise-free log prices.
    pub fn clean_log_prices(&self) -> Result<Vec<f64>> {
        self.times()
            .iter()
            .map(|&t| self.params.evaluate(t))
            .collect()
    }

    /// The noise sequence added to the clean log prices.
    pub fn noise_path(&self) -> Vec<f64> {
        if self.noise_sigma == 0.0 {
            return vec![0.0; self.n];
        }
        let mut rng = seeded(self.seed);
        let phi = self.ar_phi;
        let innovation_sd = if phi < 1.0 {
            self.noise_sigma * (1.0 - phi * phi).sqrt()
        } else {
            self.noise_sigma
        };
        let mut out = Vec::with_capacity(self.n);
        let z0: f64 = rng.sample(StandardNormal);
        let mut e = if phi < 1.0 {
            self.noise_sigma * z0
        } else {
            innovation_sd * z0
        };
        out.push(e);
        for _ in 1..self.n {
            let z: f64 = rng.sample(StandardNormal);
            e = phi * e + innovation_sd * z;
            out.push(e);
        }
        out
    }
}

fn weekdays_from(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut d = start;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// Draws the trajectory described by `spec`.
pub fn generate(spec: &SynthSpec) -> Result<PriceSeries> {
    spec.validate()?;
    let clean = spec.clean_log_prices()?;
    let noise = spec.noise_path();
    let prices: Vec<f64> = clean
        .iter()
        .zip(&noise)
        .map(|(c, e)| (c + e).exp())
        .collect();
    let dates = spec.start_date.map(|d| weekdays_from(d, spec.n));
    PriceSeries::new(&prices, dates.as_deref(), 1)
}
