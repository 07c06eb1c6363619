//! Files, configuration, parallel execution and the command line around
//! [`sparsemech_core`].

pub mod cli;
pub mod conditions;
pub mod config;
pub mod error;
pub mod formats;
pub mod runner;

pub use error::{Error, Result};
pub use sparsemech_core as core;
