//! match → schema tree → prune → compile, for one (relation, purpose).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::compiler::{compile_view, inputs_digest, CompileError, ViewDefinition};
use crate::planner::{build_schema_tree, prune_policies, SchemaTreeNode};
use crate::policy::{effective_policies, match_policies, LabelAssignments, Policy, PolicyCatalog, PolicyError};
use crate::schema::{FieldPath, RelationSchema};

/// Everything view maintenance reads: table schemas, label metadata and policies.
#[derive(Debug, Clone)]
pub struct Inventory {
    pub schemas: BTreeMap<String, RelationSchema>,
    pub assignments: LabelAssignments,
    pub catalog: PolicyCatalog,
}

impl Inventory {
    pub fn new(
        schemas: impl IntoIterator<Item = RelationSchema>,
        assignments: LabelAssignments,
        catalog: PolicyCatalog,
    ) -> Result<Self, PolicyError> {
        let schemas: BTreeMap<_, _> = schemas.into_iter().map(|s| (s.name.clone(), s)).collect();
        assignments.validate(&schemas, &catalog.labels)?;
        Ok(Inventory {
            schemas,
            assignments,
            catalog,
        })
    }

    pub fn purposes(&self) -> Vec<String> {
        self.catalog.purposes.names().map(str::to_string).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{relation} for {purpose}: {source}")]
    Compile {
        relation: String,
        purpose: String,
        source: CompileError,
    },
}

/// Intermediate artifacts of one compilation.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub view: ViewDefinition,
    /// Matched pairs before pruning, in match order.
    pub pairs: Vec<(FieldPath, Policy)>,
    pub tree: SchemaTreeNode,
    pub pruned_tree: SchemaTreeNode,
}

impl Compiled {
    pub fn summary(&self) -> CompileSummary {
        CompileSummary {
            view: self.view.id(),
            relation: self.view.relation.clone(),
            purpose: self.view.purpose.clone(),
            version: self.view.version.to_string(),
            matched: self.pairs.len(),
            pruned: self.pruned_tree.pruned_count(),
            row_filters: self.view.row_filter_count(),
            column_masks: self.view.column_mask_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompileSummary {
    pub view: String,
    pub relation: String,
    pub purpose: String,
    pub version: String,
    pub matched: usize,
    pub pruned: usize,
    pub row_filters: usize,
    pub column_masks: usize,
}

/// Compiles the view of `relation` for `purpose`, with its inputs digest set.
/// The version is left at 1.0.0; the registry decides the real one.
pub fn compile_pair(inv: &Inventory, relation: &str, purpose: &str) -> Result<Compiled, PipelineError> {
    let schema = inv
        .schemas
        .get(relation)
        .ok_or_else(|| PipelineError::UnknownRelation(relation.to_string()))?;
    let effective = effective_policies(purpose, &inv.catalog)?;
    let assignments: Vec<_> = inv.assignments.for_relation(relation).cloned().collect();
    let pairs = match_policies(schema, &assignments, &effective);
    let tree = build_schema_tree(&pairs);
    let pruned_tree = prune_policies(&tree);
    let mut view = compile_view(schema, &pruned_tree.pairs(), purpose).map_err(|source| PipelineError::Compile {
        relation: relation.to_string(),
        purpose: purpose.to_string(),
        source,
    })?;
    view.inputs_digest = inputs_digest(schema, &assignments, &effective);
    Ok(Compiled {
        view,
        pairs,
        tree,
        pruned_tree,
    })
}

/// Whether any policy of `purpose` (or its ancestors) applies to `relation`.
pub fn has_matches(inv: &Inventory, relation: &str, purpose: &str) -> Result<bool, PipelineError> {
    let schema = inv
        .schemas
        .get(relation)
        .ok_or_else(|| PipelineError::UnknownRelation(relation.to_string()))?;
    let effective = effective_policies(purpose, &inv.catalog)?;
    let assignments: Vec<_> = inv.assignments.for_relation(relation).cloned().collect();
    Ok(!match_policies(schema, &assignments, &effective).is_empty())
}
