//! Outage analysis for free-space optical fine tracking with passive
//! corner-cube retroreflectors (CCRs).
//!
//! A ground station illuminates `M` CCRs mounted around the communication
//! telescope of an aerial platform. The reflected beacon power, normalised
//! by the link constant, is
//!
//! ```text
//! S = Σ_i U_i Z_i
//! ```
//!
//! where `U_i` is the product of correlated uplink/downlink Gamma-Gamma
//! fading and `Z_i` is the pointing loss of CCR `i` under a shared beam
//! jitter. The crate computes the 1st, 2nd and 4th moments of `S`
//! analytically ([`channel_moments`]), fits an α-μ surrogate to them
//! ([`alphamu`]) and evaluates outage from its CDF. Every analytical
//! quantity can be cross-checked against the Monte Carlo channel in
//! [`simulate`].

// `!(x > 0.0)` is the intended way to reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alphamu;
pub mod channel_moments;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod pointing;
pub mod simulate;

pub use error::{Error, Result};
