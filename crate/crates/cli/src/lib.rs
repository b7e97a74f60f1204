//! Scene files, report formatting and command dispatch for the `partrans`
//! binary.

pub mod commands;
pub mod report;
pub mod scene;
