//! Purpose- and consent-based masking views over nested relations.
//!
//! Policies attach to labels, labels attach to field paths of nested tables, and
//! each (table, purpose) gets one schema-preserving view that masks whatever the
//! purpose may not see for a given data subject. See the crate README and the
//! `examples/` directory for a tour.

pub mod bench;
pub mod compiler;
pub mod condition;
pub mod consent;
pub mod evaluator;
pub mod lexer;
pub mod pipeline;
pub mod planner;
pub mod policy;
pub mod samples;
pub mod schema;
pub mod value;
pub mod viewshift;
pub mod workspace;

use thiserror::Error;

/// Any failure surfaced by the workspace commands.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Schema(#[from] schema::SchemaError),
    #[error(transparent)]
    Policy(#[from] policy::PolicyError),
    #[error(transparent)]
    Compile(#[from] compiler::CompileError),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
    #[error(transparent)]
    Value(#[from] value::ValueError),
    #[error(transparent)]
    Eval(#[from] evaluator::EvalError),
    #[error(transparent)]
    Consent(#[from] consent::ConsentError),
    #[error(transparent)]
    ViewShift(#[from] viewshift::ViewShiftError),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    /// Some (relation, purpose) pairs failed to compile; `report` lists them all.
    #[error("{first}")]
    PairFailures { first: String, report: serde_json::Value },
}

impl Error {
    /// Bad input (catalogs, schemas, paths, data shape) as opposed to a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Policy(_)
                | Error::Compile(_)
                | Error::Pipeline(_)
                | Error::Value(value::ValueError::Shape { .. } | value::ValueError::Json { .. })
                | Error::Eval(evaluator::EvalError::SchemaMismatch { .. })
                | Error::Config(_)
                | Error::PairFailures { .. }
        )
    }
}
