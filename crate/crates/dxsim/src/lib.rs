//! Command-line and HTTP front ends for `dxsim-core`.

pub mod cli;
pub mod error;
pub mod pipeline;
pub mod service;
pub mod settings;

pub use error::CliError;
