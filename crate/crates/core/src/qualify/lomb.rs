//! Lomb–Scargle periodogram for unevenly sampled data.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

/// Angular frequencies from `lo` to `hi` spaced by the natural resolution
/// `2π / span`, so neighbouring frequencies are roughly independent.
pub fn frequency_grid(span: f64, (lo, hi): (f64, f64)) -> Vec<f64> {
    if !(span > 0.0) || !(hi >= lo) {
        return Vec::new();
    }
    let step = TAU / span;
    let count = ((hi - lo) / step).floor() as usize + 1;
    (0..count).map(|k| lo + step * k as f64).collect()
}

/// Normalised Lomb–Scargle power of `y(x)` at each angular frequency, in units
/// of the sample variance. Returns `None` for a constant signal.
pub fn lomb_scargle(x: &[f64], y: &[f64], omegas: &[f64]) -> Option<Vec<f64>> {
    let n = y.len();
    if n < 2 || x.len() != n {
        return None;
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) || !var.is_finite() {
        return None;
    }
    let power = omegas
        .iter()
        .map(|&w| {
            let (s2, c2) = x.iter().fold((0.0, 0.0), |(s, c), &xi| {
                let (a, b) = (2.0 * w * xi).sin_cos();
                (s + a, c + b)
            });
            let tau = s2.atan2(c2) / (2.0 * w);
            let (mut yc, mut ys, mut cc, mut ss) = (0.0, 0.0, 0.0, 0.0);
            for (&xi, &yi) in x.iter().zip(y) {
                let (s, c) = (w * (xi - tau)).sin_cos();
                let d = yi - mean;
                yc += d * c;
                ys += d * s;
                cc += c * c;
                ss += s * s;
            }
            let cos_part = if cc > 0.0 { yc * yc / cc } else { 0.0 };
            let sin_part = if ss > 0.0 { ys * ys / ss } else { 0.0 };
            (cos_part + sin_part) / (2.0 * var)
        })
        .collect();
    Some(power)
}

/// Probability that the largest of `m` independent normalised powers of pure
/// noise reaches `z`: `1 - (1 - e^{-z})^m`.
pub fn false_alarm_probability(z: f64, m: usize) -> f64 {
    if !(z > 0.0) {
        return 1.0;
    }
    let single = (-z).exp();
    (-(m as f64 * (-single).ln_1p()).exp_m1()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LombOutcome {
    pub peak_omega: f64,
    pub peak_power: f64,
    pub false_alarm_probability: f64,
    pub n_frequencies: usize,
    /// Distance of the peak from the expected angular frequency.
    pub peak_offset: f64,
    pub pass: bool,
}

impl LombOutcome {
    fn no_peak(n_frequencies: usize) -> Self {
        Self {
            peak_omega: f64::NAN,
            peak_power: 0.0,
            false_alarm_probability: 1.0,
            n_frequencies,
            peak_offset: f64::NAN,
            pass: false,
        }
    }
}

/// Scans `band` for the strongest periodic component of the `(x, r)` pairs
/// and accepts it when its false-alarm probability is at most `alpha_sig`.
pub fn lomb_test(
    pairs: &[(f64, f64)],
    omega_expected: f64,
    alpha_sig: f64,
    band: (f64, f64),
) -> LombOutcome {
    if pairs.len() < 8 {
        return LombOutcome::no_peak(0);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let omegas = frequency_grid(hi - lo, band);
    if omegas.is_empty() {
        return LombOutcome::no_peak(0);
    }
    let Some(power) = lomb_scargle(&x, &y, &omegas) else {
        return LombOutcome::no_peak(omegas.len());
    };
    let (k, &peak) = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let fap = false_alarm_probability(peak, omegas.len());
    LombOutcome {
        peak_omega: omegas[k],
        peak_power: peak,
        false_alarm_probability: fap,
        n_frequencies: omegas.len(),
        peak_offset: (omegas[k] - omega_expected).abs(),
        pass: fap <= alpha_sig,
    }
}
