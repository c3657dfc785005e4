#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! PPG-to-respiration translation and respiratory-rate estimation.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`dataset`] ingests BIDMC-layout recordings and breath annotations.
//! 2. [`preprocess`] normalizes, resamples to 30 Hz and cuts 30 s windows.
//! 3. [`translator`] learns a cycle-consistent PPG <-> respiration mapping
//!    with an additional respiratory-rate loss.
//! 4. [`respmetrics`] and [`evaluation`] estimate breaths per minute from the
//!    synthetic respiration and score it with subject-disjoint k-fold MAE.

pub mod dataset;
pub mod dsp;
pub mod error;
pub mod evaluation;
pub mod parallel;
pub mod preprocess;
pub mod respmetrics;
pub mod translator;

pub use error::{Error, ErrorKind, Result};
