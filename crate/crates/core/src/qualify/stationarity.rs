//! AR(1) mean-reversion check on fit residuals.
//!
//! Residuals of a profiled fit have (near) zero mean, so the unit-root
//! regression carries no constant: `Δε_i = γ ε_{i-1} + u_i`, with `φ = 1 + γ`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Shortest residual sequence the test runs on.
pub const MIN_RESIDUALS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuOutcome {
    pub ar1_coefficient: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

impl OuOutcome {
    fn degenerate() -> Self {
        Self {
            ar1_coefficient: f64::NAN,
            t_statistic: f64::NAN,
            p_value: 1.0,
            pass: false,
        }
    }
}

/// Approximate p-value of the Dickey–Fuller τ statistic for the
/// no-constant regression (MacKinnon 1994 response surface).
pub fn dickey_fuller_p_value(tau: f64) -> f64 {
    const TAU_MAX: f64 = 1.51;
    const TAU_MIN: f64 = -19.04;
    const TAU_STAR: f64 = -1.04;
    const SMALL: [f64; 3] = [0.6344, 1.2378, 3.2496e-2];
    const LARGE: [f64; 4] = [0.4797, 9.3557e-1, -0.6999e-1, 3.3066e-2];
    if tau.is_nan() {
        return 1.0;
    }
    if tau > TAU_MAX {
        return 1.0;
    }
    if tau < TAU_MIN {
        return 0.0;
    }
    let poly = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &k| acc * tau + k);
    let z = if tau <= TAU_STAR {
        poly(&SMALL)
    } else {
        poly(&LARGE)
    };
    Normal::standard().cdf(z)
}

/// Least-squares AR(1) fit plus a unit-root test. Passes when the unit root
/// is rejected at `alpha` and `0 < φ < 1`.
pub fn ar1_unit_root_test(residuals: &[f64], alpha: f64) -> OuOutcome {
    if residuals.len() < MIN_RESIDUALS || residuals.iter().any(|r| !r.is_finite()) {
        return OuOutcome::degenerate();
    }
    let lagged = &residuals[..residuals.len() - 1];
    let sxx: f64 = lagged.iter().map(|v| v * v).sum();
    if !(sxx > 0.0) {
        return OuOutcome::degenerate();
    }
    let sxy: f64 = residuals.windows(2).map(|w| w[0] * (w[1] - w[0])).sum();
    let gamma = sxy / sxx;
    let n = lagged.len();
    let sse: f64 = residuals
        .windows(2)
        .map(|w| (w[1] - w[0] - gamma * w[0]).powi(2))
        .sum();
    let s2 = sse / (n - 1) as f64;
    let phi = 1.0 + gamma;
    if !(s2 > 0.0) {
        // a perfect AR(1) with no innovation: stationary iff |φ| < 1
        let pass = phi > 0.0 && phi < 1.0;
        return OuOutcome {
            ar1_coefficient: phi,
            t_statistic: if pass { f64::NEG_INFINITY } else { f64::NAN },
            p_value: if pass { 0.0 } else { 1.0 },
            pass,
        };
    }
    let t = gamma / (s2 / sxx).sqrt();
    let p = dickey_fuller_p_value(t);
    OuOutcome {
        ar1_coefficient: phi,
        t_statistic: t,
        p_value: p,
        pass: p <= alpha && phi > 0.0 && phi < 1.0,
    }
}
