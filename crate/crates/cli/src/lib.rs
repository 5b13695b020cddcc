//! Library side of the `growthlab` command-line tool: the function catalog,
//! configuration handling and the subcommand drivers.

pub mod catalog;
pub mod commands;
pub mod config;
pub mod output;
