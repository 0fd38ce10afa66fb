//! The LPPLS log-price formula in its linearised form
//!
//! ```text
//! ln p(t) = A + B (tc - t)^m + C1 (tc - t)^m cos(ω ln(tc - t)) + C2 (tc - t)^m sin(ω ln(tc - t))
//! ```
//!
//! Time is measured in trading-step indices; `tc` is real-valued.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The seven LPPLS parameters. `tc`, `m` and `omega` are nonlinear; the rest
/// enter the formula linearly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpplsParams {
    pub tc: f64,
    pub m: f64,
    pub omega: f64,
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
}

/// The three basis values at one time point: `f = (tc-t)^m`, `g = f cos(ω ln(tc-t))`,
/// `h = f sin(ω ln(tc-t))`. Shared by evaluation and calibration so both compute
/// residuals with identical floating-point operations.
#[inline]
pub(crate) fn basis(tc: f64, m: f64, omega: f64, t: f64) -> (f64, f64, f64) {
    let dt = tc - t;
    let ln_dt = dt.ln();
    let f = (m * ln_dt).exp();
    let (s, c) = (omega * ln_dt).sin_cos();
    (f, f * c, f * s)
}

#[inline]
pub(crate) fn combine(a: f64, b: f64, c1: f64, c2: f64, (f, g, h): (f64, f64, f64)) -> f64 {
    a + b * f + c1 * g + c2 * h
}

impl LpplsParams {
    pub fn all_finite(&self) -> bool {
        [
            self.tc, self.m, self.omega, self.a, self.b, self.c1, self.c2,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    /// Expected log-price at `t`. Defined only before the critical time.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(t < self.tc) {
            return Err(Error::Domain(format!(
                "t = {t} is not before the critical time {}",
                self.tc
            )));
        }
        Ok(combine(
            self.a,
            self.b,
            self.c1,
            self.c2,
            basis(self.tc, self.m, self.omega, t),
        ))
    }

    /// `m|B| / (ω √(C1² + C2²))`. A pure power law (C1 = C2 = 0) has no
    /// oscillation to make the hazard rate negative, so it maps to +∞.
    pub fn damping(&self) -> Result<f64> {
        if self.omega == 0.0 {
            return Err(Error::Domain("damping undefined for omega = 0".into()));
        }
        let c = self.c1.hypot(self.c2);
        if c == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok((self.m * self.b.abs() / (self.omega.abs() * c)).abs())
    }

    /// Oscillation amplitude and phase, `C1 = C cos φ`, `C2 = C sin φ`.
    /// Returns `(0, 0)` when both amplitudes vanish.
    pub fn phase_amplitude(&self) -> (f64, f64) {
        let c = self.c1.hypot(self.c2);
        if c == 0.0 {
            return (0.0, 0.0);
        }
        (c, self.c2.atan2(self.c1))
    }

    /// Inverse of [`LpplsParams::phase_amplitude`].
    pub fn with_phase_amplitude(self, c: f64, phi: f64) -> Self {
        let (s, co) = phi.sin_cos();
        Self {
            c1: c * co,
            c2: c * s,
            ..self
        }
    }

    /// Reflects the trajectory about `A`: a positive bubble becomes a negative one.
    pub fn mirrored(self) -> Self {
        Self {
            a: self.a,
            b: -self.b,
            c1: -self.c1,
            c2: -self.c2,
            ..self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn params(tc: f64, m: f64, omega: f64, a: f64, b: f64, c1: f64, c2: f64) -> LpplsParams {
        LpplsParams {
            tc,
            m,
            omega,
            a,
            b,
            c1,
            c2,
        }
    }

    #[test]
    fn constant_when_no_power_law() {
        let p = params(100.0, 0.4, 7.0, 3.25, 0.0, 0.0, 0.0);
        for t in [0.0, 10.0, 99.5] {
            assert_eq!(p.evaluate(t).unwrap(), 3.25);
        }
    }

    #[test]
    fn unit_distance_identity() {
        for m in [0.1, 0.5, 0.9] {
            let p = params(10.0, m, 6.0, 2.0, -0.7, 0.0, 0.0);
            assert!((p.evaluate(9.0).unwrap() - 1.3).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_distance_cosine_term() {
        let p = params(10.0, 0.5, 3.0, 1.0, -1.0, 0.2, 0.0);
        assert!((p.evaluate(9.0).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn undefined_at_and_after_tc() {
        let p = params(10.0, 0.5, 3.0, 1.0, -1.0, 0.2, 0.0);
        assert!(matches!(p.evaluate(10.0), Err(Error::Domain(_))));
        assert!(p.evaluate(11.0).is_err());
    }

    #[test]
    fn damping_examples() {
        let p = params(0.0, 0.5, 10.0, 0.0, -1.0, 0.03, 0.04);
        assert!((p.damping().unwrap() - 1.0).abs() < 1e-12);
        let p = params(0.0, 0.2, 20.0, 0.0, -0.1, 0.1, 0.0);
        let d = p.damping().unwrap();
        assert!((d - 0.01).abs() < 1e-15);
        assert!(d < 1.0);
        let p = params(0.0, 0.2, 20.0, 0.0, -0.1, 0.0, 0.0);
        assert_eq!(p.damping().unwrap(), f64::INFINITY);
        let p = params(0.0, 0.2, 0.0, 0.0, -0.1, 0.1, 0.0);
        assert!(p.damping().is_err());
    }

    #[test]
    fn phase_amplitude_axes() {
        let base = params(0.0, 0.5, 1.0, 0.0, 0.0, 1.0, 0.0);
        assert_eq!(base.phase_amplitude(), (1.0, 0.0));
        let p = LpplsParams {
            c1: 0.0,
            c2: 1.0,
            ..base
        };
        let (c, phi) = p.phase_amplitude();
        assert_eq!(c, 1.0);
        assert!((phi - FRAC_PI_2).abs() < 1e-15);
        let p = LpplsParams {
            c1: 0.0,
            c2: 0.0,
            ..base
        };
        assert_eq!(p.phase_amplitude(), (0.0, 0.0));
    }

    #[test]
    fn pure_power_law_increases_for_negative_b() {
        let p = params(120.0, 0.6, 8.0, 5.0, -0.05, 0.0, 0.0);
        let v: Vec<f64> = (0..120).map(|t| p.evaluate(t as f64).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!(v.iter().all(|&x| x < 5.0));
    }

    fn arb_params() -> impl Strategy<Value = LpplsParams> {
        (
            10.0f64..500.0,
            0.0f64..1.0,
            1.0f64..50.0,
            -10.0f64..10.0,
            -1.0f64..1.0,
            -0.1f64..0.1,
            -0.1f64..0.1,
        )
            .prop_map(|(tc, m, omega, a, b, c1, c2)| params(tc, m, omega, a, b, c1, c2))
    }

    proptest! {
        #[test]
        fn phase_amplitude_round_trip(p in arb_params(), frac in 0.0f64..0.999) {
            let (c, phi) = p.phase_amplitude();
            prop_assert!(c >= 0.0);
            prop_assert!(phi > -std::f64::consts::PI && phi <= std::f64::consts::PI);
            let q = p.with_phase_amplitude(c, phi);
            prop_assert!((q.c1 - p.c1).abs() <= 1e-15 * (1.0 + c));
            prop_assert!((q.c2 - p.c2).abs() <= 1e-15 * (1.0 + c));
            let t = frac * p.tc;
            let (x, y) = (p.evaluate(t).unwrap(), q.evaluate(t).unwrap());
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }

        #[test]
        fn mirror_reflects_about_a(p in arb_params(), frac in 0.0f64..0.999) {
            let t = frac * p.tc;
            let up = p.evaluate(t).unwrap() - p.a;
            let down = p.mirrored().evaluate(t).unwrap() - p.a;
            prop_assert!((up + down).abs() <= 1e-12 * (1.0 + up.abs()));
        }
    }
}
