//! Performance analysis of IRS-assisted cell-free links.
//!
//! The crate pairs closed-form approximations of the co-phased SNR
//! ([`analytic`]) with a Monte-Carlo engine ([`montecarlo`]) that samples
//! the underlying Rayleigh channels ([`channel`], [`snr`]), and wires both
//! into reproducible experiments ([`experiments`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod montecarlo;
pub mod quad;
pub mod snr;
pub mod specfun;
pub mod streams;

pub use error::{Error, Result};

/// `10^{db/10}`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `10 log10(x)`.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
