//! Character-level extraction of time-series relations from short texts,
//! checked against a reference store and combined through a fusion gate.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod fusion;
pub mod io;
pub mod network;
pub mod parser;
pub mod pipeline;
pub mod symbols;
pub mod tsdb;
pub mod types;

pub use error::{Error, Result};
pub use parser::{Document, EntitySpan, EntityType, ExtractionCandidate};
pub use symbols::{SymbolInfo, SymbolTable};
pub use tsdb::{ScoredCandidate, TimeSeriesStore};
pub use types::{RelationKind, Span};
