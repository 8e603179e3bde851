//! Command-line front end: data ingestion, tree documents and the `bct` subcommands.

pub mod commands;
pub mod ingest;
pub mod tree_format;

pub use commands::{run_command, CliError};
pub use ingest::{ingest, Format, IngestSpec};
pub use tree_format::{parse_document, parse_tree, serialize_tree, Annotations, TreeDocument};
