//! myolab: a zero-dimensional laboratory for coupling cardiac
//! force-generation models with tissue mechanics.
//!
//! The crate provides
//! - a common contract for active-force models ([`activation::ForceModel`])
//!   with the minimal distribution-moments model built in and three
//!   literature models (NHS06, L17, RDQ20-MF) in [`models`],
//! - a zero-dimensional tissue-mechanics model with quadratic and
//!   logarithmic elastic potentials and calcium/load driving programs
//!   ([`mechanics`]),
//! - monolithic, segregated, stabilized-segregated and fractional-step
//!   time-coupling schemes ([`coupling`]),
//! - a spectral stability analyzer for the minimal coupled model
//!   ([`stability`]),
//! - error norms, convergence studies, experiment presets and report
//!   emission ([`analysis`], [`presets`], [`report`], [`config`]).

pub mod activation;
pub mod analysis;
pub mod config;
pub mod coupling;
pub mod error;
pub mod linalg;
pub mod mechanics;
pub mod models;
pub mod presets;
pub mod report;
pub mod stability;

pub use error::{Error, Result};
