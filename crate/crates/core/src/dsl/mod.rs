//! Typed DSL: semantic types, the primitive catalog, programs and their text form.

mod config;
mod program;
pub mod sexpr;
mod types;

use thiserror::Error;

pub use config::{DslConfig, DslEdit};
pub use program::{normalize_symbol, typecheck, typecheck_with, Expr, Program, Symbol, TypeReport};
pub use sexpr::{parse_expr, parse_program, serialize, ParseError, ParseErrorKind};
pub use types::{
    catalog, Builtin, Catalog, Primitive, PrimitiveKind, Profile, ProfileDefaults, SceneKind, SemanticType,
    Signature, SymbolCounts, SymbolKind,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("unknown dataset profile `{0}`")]
    UnknownProfile(String),
    #[error("unknown primitive `{name}`; valid names: {}", valid.join(", "))]
    UnknownPrimitive { name: String, valid: Vec<String> },
    #[error("unknown symbol `{name}`; valid symbols: {}", valid.join(", "))]
    UnknownSymbol { name: String, valid: Vec<String> },
    #[error("invalid DSL config: {0}")]
    Format(String),
    #[error("{0}: {1}")]
    Io(String, String),
}
