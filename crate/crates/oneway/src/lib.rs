//! File formats, synthetic data, experiments and the `oneway` command line
//! around [`oneway_core`].

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod formats;
pub mod harness;
pub mod ingest;
pub mod synthetic;

pub use error::IngestError;
