//! Conditional state preparation of a mechanical oscillator under continuous
//! position measurement and real-gain (spring-shifting) feedback.
//!
//! All physics runs in scaled units where the natural frequency, the mass and
//! the zero-point position spread at the natural frequency are all one
//! (equivalently `hbar = 2`). [`params::UnitScale`] converts to SI.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod conditional;
pub mod criteria;
pub mod multimode;
pub mod params;
pub mod spectra;
pub mod wiener;

mod numeric;

pub use conditional::{CovarianceMatrix, QuadratureResult};
pub use params::{DimensionlessParams, FeedbackSetting, MeasurementParams, OscillatorParams};
pub use wiener::{CrossConvention, Target, WienerFilter};
