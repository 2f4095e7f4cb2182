//! Text formats, the command-line interface and the HTTP service.

pub mod cli;
pub mod dsl;
pub mod service;

pub use dsl::{parse_cpt_lines, parse_model, serialize_model, Diagnostic, DiagnosticKind, ParseErrors};
