//! Semantically enriched context models of source code.
//!
//! Modules are represented by typed identifier vectors or data-dependency
//! graphs, compared through kernels that fold in conceptual similarity from a
//! per-system semantic network and lexical similarity of identifier names,
//! clustered with complete linkage, and evaluated against the package tree.

pub mod cluster;
pub mod concept;
pub mod ddg;
pub mod export;
pub mod facts;
pub mod fixtures;
pub mod lexical;
pub mod linalg;
pub mod network;
pub mod pipeline;
pub mod syntax;
pub mod tree;
pub mod vector;

/// Sentinel type of identifiers whose declared type is unknown.
pub const UNTYPED: &str = "⊥";

/// Virtual root concept dominating every type.
pub const TOP: &str = "⊤";
