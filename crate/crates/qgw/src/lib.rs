//! JSON formats, reports and the `qgw` command-line front end.

pub mod cli;
pub mod error;
pub mod json;
pub mod report;
