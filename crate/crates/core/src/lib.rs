//! Multifractal detrended fluctuation analysis (MFDFA) of daily price series.
//!
//! The crate covers the whole path from closing prices to the spectrum
//! parameters used to compare funds:
//!
//! * [`series`]: price and log-return series, admission rule, shuffling.
//! * [`engine`]: profile, segment detrending, `F_q(n)` and `h(q)`.
//! * [`spectrum`]: `tau(q)`, the Legendre transform, the quartic spectrum fit
//!   and the `(alpha0, W, r)` parameters.
//! * [`surrogate`]: shuffled-ensemble comparison of those parameters.
//! * [`synth`]: cascades, fractional Gaussian noise and white noise with known
//!   scaling.
//! * [`io`], [`config`], [`report`]: CSV ingestion, analysis configuration and
//!   the per-fund report tables and plot data.

pub mod config;
pub mod engine;
pub mod error;
pub mod io;
mod linalg;
pub mod pipeline;
pub mod report;
pub mod series;
pub mod spectrum;
pub mod surrogate;
pub mod synth;

pub use error::{Error, Result, Stage};

/// Base seed used when none is configured.
pub const DEFAULT_SEED: u64 = 20_131_104;
