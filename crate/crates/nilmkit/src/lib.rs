//! Appliance-level load disaggregation from aggregate mains measurements.
//!
//! The crate takes high-rate voltage/current recordings (or synthesizes
//! them), detects appliance switching events, reduces each event to a
//! delta-form signature cycle, extracts feature vectors from the V-I
//! trajectory, trains classifiers, and benchmarks the whole pipeline under
//! controlled noise and appliance dynamics.
//!
//! Start with the runnable examples in `examples/`; each one exercises a
//! major capability end to end. The `nilm` binary exposes the same pipeline
//! as subcommands for file-based workflows.

pub mod bench;
pub mod cli;
pub mod error;
pub mod events;
pub mod features;
pub mod ingest;
pub mod learn;
pub mod optimize;
pub mod simulate;
pub mod seed;
pub mod signal;

pub use error::{Error, Result};
