//! Special functions, adaptive quadrature and compensated summation.
//!
//! Everything here is a pure function of its inputs.

mod quadrature;
mod special;
mod summation;

pub use quadrature::{integrate, integrate_semi_infinite, QuadratureSpec};
pub use special::{bessel_i0_scaled, hyp2f1_neg_int, ln_gamma, reg_lower_incomplete_gamma};
pub(crate) use special::{bessel_i0_scaled_unchecked, ln_gamma_shift, ln_gamma_unchecked};
pub use summation::NeumaierSum;
