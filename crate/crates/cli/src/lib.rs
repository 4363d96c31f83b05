//! Command-line front end: config parsing, output writers, error tables and validation.

pub mod config;
pub mod output;
pub mod table;
pub mod validate;
