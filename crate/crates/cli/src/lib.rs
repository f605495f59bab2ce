//! Command-line front end: file formats, a polynomial text reader, and the
//! `formsos` subcommands.

pub mod app;
pub mod commands;
pub mod files;
pub mod parse;

pub use app::run_with;
