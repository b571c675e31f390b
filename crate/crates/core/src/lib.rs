//! Back-action cooling of a micromechanical resonator coupled to a driven
//! transmission-line resonator.
//!
//! All internal quantities use natural units ħ = k_B = m = ω_b = 1; see
//! [`model::UnitScale`] for conversion from SI.

// `!(x > 0.0)` is used on purpose so that NaN is rejected as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod cooling;
pub mod error;
pub mod lyapunov;
pub mod model;
pub mod optimize;
pub mod output;
pub mod quadrature;
pub mod spectrum;
pub mod stability;
pub mod steady_state;
pub mod sweep;
pub mod validation;
pub mod variance;

pub use error::{ModelError, Result};
