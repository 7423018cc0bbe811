//! IO companion to [`noise_core`]: JSON schemas for spaces, random
//! variables, and decompositions, full-precision CSV output, and the
//! `noise-lab` command-line interface.

pub mod cli;
pub mod formats;
pub mod parse;

pub use cli::{run, Cli, CliError};
