//! Nested relation schemas and the field paths that address parts of them.

mod path;
mod types;

pub use path::{
    enumerate_paths, mask_kind, parse_field_path, render_field_path, resolve_path, FieldPath,
    MaskKind, PathBinding, PathOp, ResolutionError, UnnestKind,
};
pub use types::{AtomicType, Column, RelationSchema, SchemaType, StructField};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("unknown atomic type `{0}`")]
    UnknownAtomicType(String),
    #[error("duplicate struct field `{0}`")]
    DuplicateField(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("map key type must be atomic, found {0}")]
    NonAtomicMapKey(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("subject id column `{0}` must be an integral atomic column")]
    SubjectIdNotNumeric(String),
    #[error("type syntax error at {position}: expected {expected}")]
    TypeSyntax { position: usize, expected: String },
    #[error("invalid schema document: {0}")]
    Json(String),
}
