//! Detection of financial-bubble signatures with the Log-Periodic Power Law
//! Singularity (LPPLS) model.
//!
//! The pipeline runs bottom-up:
//!
//! * [`series`] ingests `date,close` CSV data and resamples it to coarser strides.
//! * [`model`] evaluates the LPPLS log-price formula.
//! * [`calibrate`] fits the model to a window: the four linear parameters are
//!   solved in closed form and the three nonlinear ones are searched with CMA-ES.
//! * [`qualify`] runs the filter battery on a calibrated fit.
//! * [`indicator`] turns qualified fits over shrinking windows into positive and
//!   negative confidence indicators and scans them over endpoints.
//! * [`classify`] labels a crash endogenous or exogenous from the peak indicator.
//! * [`synth`] generates synthetic LPPLS trajectories for testing.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod classify;
mod error;
pub mod indicator;
pub mod model;
pub mod qualify;
pub mod rng;
pub mod series;
pub mod synth;

pub use calibrate::{fit, grid_oracle, FitResult, GridSpec, LinearParams, SearchConfig, Window};
pub use classify::{classify, crash_stats, peak_ci, CrashAssessment, CrashStats, CrashType};
pub use error::{Error, Result};
pub use indicator::{
    confidence_at, scan, IndicatorConfig, IndicatorPoint, ScanOutcome, WindowScheme,
};
pub use model::LpplsParams;
pub use qualify::{qualify, BubbleSign, FilterConfig, OscillationDivisor, QualificationReport};
pub use series::{PricePoint, PriceSeries};
pub use synth::SynthSpec;
