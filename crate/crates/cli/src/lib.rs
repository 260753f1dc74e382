//! File formats, experiment configuration, and the staged pipeline behind
//! the `hire` command.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod qvol;
pub mod slice;

pub use error::{CliError, Result};
