//! Induces executable visual-classification programs from a handful of labeled images.
//!
//! The pipeline grounds task-specific symbols with a vision-language model, extracts per-image
//! scene representations, compiles the typed DSL plus those symbols into a probabilistic
//! context-free grammar and searches it best-first for the most accurate, most probable
//! program.

pub mod dsl;
pub mod executor;
pub mod grammar;
pub mod perception;
pub mod pipeline;
pub mod scene;
pub mod search;
pub mod tasks;

pub use dsl::{Builtin, DslConfig, Expr, Profile, Program, SemanticType, Symbol, SymbolKind};
