//! Command-line surface of the superpoint grounding toolkit: file formats and
//! the `spg` subcommands.

pub mod commands;
pub mod formats;

pub use commands::run;
