//! Learning-augmented one-way trading.
//!
//! A trader holds one unit of a primary currency and sees exchange rates in
//! `[1, M]` one at a time. This crate decides whether a user-chosen
//! performance [`profile`] can be respected by any online algorithm, builds
//! the threshold function that does so, runs the adaptive Pareto-optimal
//! trader of [`adaptive`], and fits linear profiles to contract schedules in
//! [`contract`].
//!
//! The crate is `no_std` and only needs `alloc`. File formats, experiment
//! orchestration and the command line live in the `oneway` companion crate.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adaptive;
pub mod contract;
mod error;
pub mod execution;
mod math;
pub mod profile;
pub mod sequences;
pub mod threshold;

pub use error::{Error, Result};
pub use execution::{execute, ExecutionTrace, OnlineTrader, Session, TickRecord, TraderState};
pub use sequences::RateSequence;
pub use threshold::{optimal_competitive_ratio, ExpSegment, ThresholdFunction};
