//! File formats and subcommand implementations behind the `netcert`
//! binary, exposed as a library so tests and downstream tooling can parse
//! the same JSON artifacts the CLI reads and writes.

pub mod commands;
pub mod formats;
