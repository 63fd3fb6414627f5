//! Command-line front end and console server for `spir-core`.

pub mod server;
pub mod trials;
