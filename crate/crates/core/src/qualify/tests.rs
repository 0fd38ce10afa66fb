use super::*;
use crate::synth::{generate, SynthSpec};
use proptest::prelude::*;
use std::f64::consts::E;

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

fn as_fit(p: LpplsParams, w: &Window) -> FitResult {
    FitResult {
        params: p,
        cost: 0.0,
        n_points: w.len(),
        converged: true,
        evaluations: 0,
    }
}

#[test]
fn oscillation_examples() {
    // tc - t2 = 10, tc - t1 = 10e
    let w = Window { t1: 0, t2: 100 };
    let tc = 100.0 + 100.0 / (E - 1.0);
    let p = params(tc, 0.5, 2.0, 0.0, 0.0, 0.0, 0.0);
    assert!((oscillation_count(&p, &w, 2.0).unwrap() - 1.0).abs() < 1e-12);

    let w = Window { t1: 0, t2: 90 };
    let p = params(100.0, 0.5, 10.0, 0.0, 0.0, 0.0, 0.0);
    let n = oscillation_count(&p, &w, 2.0).unwrap();
    assert!((n - 5.0 * 10f64.ln()).abs() < 1e-12);
    assert!((n - 11.51).abs() < 0.01 && n >= 2.5);

    let w = Window { t1: 90, t2: 90 };
    assert_eq!(oscillation_count(&p, &w, 2.0).unwrap(), 0.0);

    let w = Window { t1: 0, t2: 100 };
    assert!(oscillation_count(&p, &w, 2.0).is_err());
}

#[test]
fn divisor_choices() {
    assert_eq!(OscillationDivisor::default().value(), 2.0);
    assert_eq!(
        "pi".parse::<OscillationDivisor>().unwrap(),
        OscillationDivisor::Pi
    );
    assert_eq!(
        "2pi".parse::<OscillationDivisor>().unwrap().value(),
        2.0 * PI
    );
    assert!("3".parse::<OscillationDivisor>().is_err());
}

fn bubble() -> LpplsParams {
    params(218.9, 0.5, 10.0, 8.0, -0.05, 0.004, -0.003)
}

#[test]
fn relative_error_examples() {
    let s = generate(&SynthSpec::new(bubble(), 200)).unwrap();
    let w = Window::new(0, 199).unwrap();
    assert!(max_relative_error(&s, &w, &bubble()).unwrap() < 1e-10);

    let shifted = LpplsParams {
        a: bubble().a + 1.3f64.ln(),
        ..bubble()
    };
    let e = max_relative_error(&s, &w, &shifted).unwrap();
    assert!((e - 0.3).abs() < 1e-9, "{e}");

    let mut prices: Vec<f64> = s.prices().collect();
    prices[77] *= 1.25;
    let bumped = PriceSeries::from_prices(&prices).unwrap();
    let e = max_relative_error(&bumped, &w, &bubble()).unwrap();
    // p̂ = p/1.25 at the outlier, so |p̂ - p|/p = 0.2
    assert!((e - 0.2).abs() < 1e-9, "{e}");
}

#[test]
fn outlier_relative_to_fitted_curve() {
    // a fitted curve 25% above one observation, exact elsewhere
    let s = generate(&SynthSpec::new(bubble(), 200)).unwrap();
    let w = Window::new(0, 199).unwrap();
    let mut prices: Vec<f64> = s.prices().collect();
    prices[50] /= 1.25;
    let dipped = PriceSeries::from_prices(&prices).unwrap();
    let e = max_relative_error(&dipped, &w, &bubble()).unwrap();
    assert!((e - 0.25).abs() < 1e-9, "{e}");
}

#[test]
fn detrended_residual_of_exact_data_is_a_sinusoid() {
    let p = bubble();
    let s = generate(&SynthSpec::new(p, 200)).unwrap();
    let w = Window::new(20, 199).unwrap();
    let pairs = detrended_residual(&s, &w, &p).unwrap();
    assert_eq!(pairs.len(), w.len());
    assert!(pairs.windows(2).all(|q| q[1].0 < q[0].0));
    let dev = pairs
        .iter()
        .map(|&(x, r)| (r - (p.c1 * (p.omega * x).cos() + p.c2 * (p.omega * x).sin())).abs())
        .fold(0.0, f64::max);
    assert!(dev <= 1e-10, "{dev}");

    let flat = LpplsParams {
        c1: 0.0,
        c2: 0.0,
        ..p
    };
    let s = generate(&SynthSpec::new(flat, 200)).unwrap();
    let pairs = detrended_residual(&s, &w, &flat).unwrap();
    assert!(pairs.iter().all(|&(_, r)| r.abs() < 1e-10));
}

#[test]
fn detrended_residual_shape_on_noise() {
    let s = generate(&SynthSpec::new(bubble(), 200).noise(0.05, 3)).unwrap();
    let w = Window::new(100, 199).unwrap();
    let pairs = detrended_residual(&s, &w, &bubble()).unwrap();
    assert_eq!(pairs.len(), 100);
    assert!(pairs.iter().all(|(x, r)| x.is_finite() && r.is_finite()));
}

fn qualifying_series() -> (PriceSeries, Window, LpplsParams) {
    let p = bubble();
    let s = generate(&SynthSpec::new(p, 200).noise(0.002, 21).ar(0.5)).unwrap();
    (s, Window::new(0, 199).unwrap(), p)
}

#[test]
fn synthetic_bubble_qualifies() {
    let (s, w, p) = qualifying_series();
    assert!((p.tc - (199.0 + w.span() / 10.0)).abs() < 1e-9);
    let cfg = FilterConfig::default();
    let r = qualify(&as_fit(p, &w), &s, &w, &cfg);
    assert!(r.qualified, "{r:?}");
    assert_eq!(r.sign, BubbleSign::Positive);

    assert_eq!(r.oscillations, oscillation_count(&p, &w, 2.0).unwrap());
    assert_eq!(r.max_rel_error, max_relative_error(&s, &w, &p).unwrap());
    let pairs = detrended_residual(&s, &w, &p).unwrap();
    assert_eq!(r.lomb, lomb_test(&pairs, p.omega, 0.05, (2.0, 25.0)));
    assert_eq!(r.ou, ou_test(&s, &w, &p, 0.05).unwrap());
    assert!((r.lomb.peak_omega - p.omega).abs() < 1.5, "{:?}", r.lomb);
}

#[test]
fn m_out_of_range_disqualifies() {
    let (s, w, p) = qualifying_series();
    let r = qualify(
        &as_fit(LpplsParams { m: 0.995, ..p }, &w),
        &s,
        &w,
        &FilterConfig::default(),
    );
    assert!(!r.m_in_range);
    assert!(!r.qualified);
}

#[test]
fn declining_bubble_is_negative() {
    let p = bubble().mirrored();
    let s = generate(&SynthSpec::new(p, 200).noise(0.002, 21).ar(0.5)).unwrap();
    let w = Window::new(0, 199).unwrap();
    let r = qualify(&as_fit(p, &w), &s, &w, &FilterConfig::default());
    assert_eq!(r.sign, BubbleSign::Negative);
    assert!(r.qualified, "{r:?}");
    let zero_b = LpplsParams { b: 0.0, ..p };
    assert_eq!(BubbleSign::of(&zero_b), BubbleSign::Indeterminate);
}

#[test]
fn ou_on_exact_zero_residuals_fails() {
    let p = bubble();
    let s = generate(&SynthSpec::new(
        LpplsParams {
            c1: 0.0,
            c2: 0.0,
            b: 0.0,
            ..p
        },
        100,
    ))
    .unwrap();
    let w = Window::new(0, 99).unwrap();
    let flat = LpplsParams {
        c1: 0.0,
        c2: 0.0,
        b: 0.0,
        ..p
    };
    assert!(!ou_test(&s, &w, &flat, 0.05).unwrap().pass);
}

#[test]
fn filter_config_nesting() {
    let search = SearchConfig::default();
    assert!(FilterConfig::default().validate(&search).is_ok());
    let wide = FilterConfig {
        omega_range: (0.5, 25.0),
        ..Default::default()
    };
    assert!(wide.validate(&search).is_err());
    let wide_tc = FilterConfig {
        tc_range: (0.0, 0.5),
        ..Default::default()
    };
    assert!(wide_tc.validate(&search).is_err());
    let bad = FilterConfig {
        lomb_alpha: 0.0,
        ..Default::default()
    };
    assert!(bad.validate(&search).is_err());
}

proptest! {
    #[test]
    fn qualified_is_the_conjunction(
        tc_off in 0.01f64..80.0, m in 0.0f64..1.0, omega in 1.0f64..50.0,
        b in -0.1f64..0.1, c1 in -0.01f64..0.01, c2 in -0.01f64..0.01, seed in 0u64..50,
    ) {
        let s = generate(&SynthSpec::new(bubble(), 200).noise(0.01, seed)).unwrap();
        let w = Window::new(0, 199).unwrap();
        let p = params(199.0 + tc_off, m, omega, 8.0, b, c1, c2);
        let r = qualify(&as_fit(p, &w), &s, &w, &FilterConfig::default());
        prop_assert_eq!(r.qualified, r.conditions().iter().all(|&c| c));
        prop_assert_eq!(r.sign, BubbleSign::of(&p));
    }

    #[test]
    fn oscillation_count_shift_invariant(
        t1 in 0usize..500, len in 8usize..300, tc_off in 0.01f64..100.0,
        omega in 1.0f64..50.0, shift in 0usize..1000,
    ) {
        let w = Window::new(t1, t1 + len - 1).unwrap();
        let ws = Window::new(t1 + shift, t1 + shift + len - 1).unwrap();
        let p = params(w.t2 as f64 + tc_off, 0.5, omega, 0.0, 0.0, 0.0, 0.0);
        let q = LpplsParams { tc: p.tc + shift as f64, ..p };
        let (a, b) = (oscillation_count(&p, &w, 2.0).unwrap(), oscillation_count(&q, &ws, 2.0).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn relative_error_scale_invariant(k in 0.01f64..100.0, seed in 0u64..100) {
        let s = generate(&SynthSpec::new(bubble(), 120).noise(0.02, seed)).unwrap();
        let scaled = PriceSeries::from_prices(&s.prices().map(|p| p * k).collect::<Vec<_>>()).unwrap();
        let w = Window::new(10, 119).unwrap();
        let p = LpplsParams { tc: 130.0, ..bubble() };
        let q = LpplsParams { a: p.a + k.ln(), ..p };
        let (a, b) = (max_relative_error(&s, &w, &p).unwrap(), max_relative_error(&scaled, &w, &q).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12));
    }

    #[test]
    fn filter_tc_range_nested_in_search_range(t1 in 0usize..1000, len in 8usize..700, frac in 0.0f64..1.0) {
        let w = Window::new(t1, t1 + len - 1).unwrap();
        let f = FilterConfig::default();
        let tc = w.t2 as f64 + (f.tc_range.0 + frac * (f.tc_range.1 - f.tc_range.0)) * w.span();
        let s = SearchConfig::default();
        let t2 = w.t2 as f64;
        prop_assert!(tc >= t2 + s.tc_bounds.0 * w.span() && tc <= t2 + s.tc_bounds.1 * w.span());
    }
}
