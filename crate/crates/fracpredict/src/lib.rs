//! Experiment harness, file formats and command-line front end for
//! [`fracpredict_core`].
//!
//! * [`config`]: TOML experiment configuration.
//! * [`harness`]: single experiments, table sweeps, the discrete-to-continuous
//!   convergence study and exact-versus-network comparisons.
//! * [`io`]: CSV and binary formats for paths, networks and tabulations.

pub mod config;
mod error;
pub mod harness;
pub mod io;

pub use error::{Error, Result};
pub use fracpredict_core as core;
