//! File formats, configuration and subcommands behind the `mixgeo` binary.

pub mod commands;
pub mod config;
pub mod csvlog;
pub mod io;
pub mod pgm;
pub mod sidecar;
