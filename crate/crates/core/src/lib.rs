//! All-pairs cosine similarity join for sparse non-negative matrices.
//!
//! Columns are sketched with signed random projections, candidate pairs are
//! generated by wedge sampling over shared rows, and only pairs whose sketch
//! estimate clears a filter are emitted. Communication between the rounds is
//! accounted with an explicit byte model instead of being sent over a network.
//!
//! Modules follow the data flow: [`matrix`] ingests and normalizes,
//! [`simhash`] and [`wedges`] build the per-column and per-row structures,
//! [`engine`] runs the join, and [`oracle`] evaluates it against exact products.

pub mod engine;
pub mod error;
pub mod matrix;
pub mod oracle;
pub mod rng;
pub mod simhash;
pub mod wedges;

pub use engine::{run_join, run_self_join, Candidate, CostReport, JoinConfig, JoinOutput};
pub use error::{Error, Result};
pub use matrix::{build_column_matrix, clean_degree_cap, clean_degree_cap_stream, ingest_edge_list, EdgeFormat, IdDictionary, Orientation, RawGraph, SparseColumnMatrix};
pub use simhash::Sketch;
