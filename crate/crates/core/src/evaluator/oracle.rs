//! Reference semantics for testing the compiled plan.
//!
//! Works pair by pair straight from the matched `(path, policy)` list, without a
//! schema tree, pruning or a compiled plan: first collect the addresses a path
//! reaches in the row, then mask them deepest-index first so removals do not
//! shift addresses still waiting to be processed.

use std::sync::Arc;

use super::{eval_condition, Bindings, EvalError};
use crate::consent::ConsentResolver;
use crate::policy::Policy;
use crate::schema::{FieldPath, PathOp, RelationSchema, SchemaType, StructField, UnnestKind};
use crate::value::{Relation, Row, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Step {
    Field(usize),
    Elem(usize),
    Key(usize),
    Val(usize),
}

fn element_matches(cond: &crate::condition::Condition, v: &Value, ty: &SchemaType) -> Result<bool, EvalError> {
    match (v, ty.fields()) {
        (Value::Struct(vals), Some(fields)) => eval_condition(cond, &Bindings::element(fields, vals)),
        _ => Ok(false),
    }
}

fn locate(
    v: &Value,
    ty: &SchemaType,
    ops: &[PathOp],
    prefix: &mut Vec<Step>,
    out: &mut Vec<Vec<Step>>,
) -> Result<(), EvalError> {
    let Some(op) = ops.first() else {
        out.push(prefix.clone());
        return Ok(());
    };
    let mismatch = || EvalError::PathTypeMismatch {
        path: op.render(),
        reason: format!("applied to {ty}"),
    };
    match op {
        PathOp::Deref(name) => {
            let (i, f) = ty.field(name).ok_or_else(mismatch)?;
            if let Value::Struct(vals) = v {
                prefix.push(Step::Field(i));
                locate(&vals[i], &f.data_type, &ops[1..], prefix, out)?;
                prefix.pop();
            }
        }
        PathOp::Unnest(kind) => {
            let (filter, rest) = match ops.get(1) {
                Some(PathOp::Filter(c)) => (Some(c), &ops[2..]),
                _ => (None, &ops[1..]),
            };
            match (kind, ty, v) {
                (UnnestKind::Item, SchemaType::Array { element }, Value::Array(items)) => {
                    for (i, it) in items.iter().enumerate() {
                        if let Some(c) = filter {
                            if !element_matches(c, it, element)? {
                                continue;
                            }
                        }
                        prefix.push(Step::Elem(i));
                        locate(it, element, rest, prefix, out)?;
                        prefix.pop();
                    }
                }
                (UnnestKind::Key, SchemaType::Map { key, .. }, Value::Map(pairs)) => {
                    if filter.is_some() {
                        return Err(mismatch());
                    }
                    for (i, (k, _)) in pairs.iter().enumerate() {
                        prefix.push(Step::Key(i));
                        locate(k, key, rest, prefix, out)?;
                        prefix.pop();
                    }
                }
                (UnnestKind::Value, SchemaType::Map { value, .. }, Value::Map(pairs)) => {
                    for (i, (_, val)) in pairs.iter().enumerate() {
                        if let Some(c) = filter {
                            if !element_matches(c, val, value)? {
                                continue;
                            }
                        }
                        prefix.push(Step::Val(i));
                        locate(val, value, rest, prefix, out)?;
                        prefix.pop();
                    }
                }
                (UnnestKind::Item, SchemaType::Array { .. }, _)
                | (UnnestKind::Key | UnnestKind::Value, SchemaType::Map { .. }, _) => {}
                _ => return Err(mismatch()),
            }
        }
        PathOp::Filter(_) | PathOp::Root => return Err(mismatch()),
    }
    Ok(())
}

fn apply_at(v: &mut Value, addr: &[Step]) {
    let (last, head) = addr.split_last().expect("addresses are never empty");
    let mut cur = v;
    for step in head {
        cur = match (step, cur) {
            (Step::Field(i), Value::Struct(vals)) => &mut Arc::make_mut(vals)[*i],
            (Step::Elem(i), Value::Array(items)) => &mut Arc::make_mut(items)[*i],
            (Step::Key(i), Value::Map(pairs)) => &mut Arc::make_mut(pairs)[*i].0,
            (Step::Val(i), Value::Map(pairs)) => &mut Arc::make_mut(pairs)[*i].1,
            _ => unreachable!("address located on this value"),
        };
    }
    match (last, cur) {
        (Step::Field(i), Value::Struct(vals)) => Arc::make_mut(vals)[*i] = Value::Null,
        (Step::Elem(i), Value::Array(items)) => {
            Arc::make_mut(items).remove(*i);
        }
        (Step::Key(i), Value::Map(pairs)) => {
            Arc::make_mut(pairs).remove(*i);
        }
        (Step::Val(i), Value::Map(pairs)) => Arc::make_mut(pairs)[*i].1 = Value::Null,
        _ => unreachable!("address located on this value"),
    }
}

/// Applies every matched pair to one row in list order. `None` when the row is
/// dropped. Conditions see the input row; filters see the element as it stands
/// when the pair is applied.
pub fn oracle_mask(
    schema: &RelationSchema,
    row: &Row,
    pairs: &[(FieldPath, Policy)],
    resolver: &ConsentResolver,
) -> Result<Option<Row>, EvalError> {
    let fields: Vec<StructField> = schema
        .columns
        .iter()
        .map(|c| StructField::new(c.name.clone(), c.data_type.clone()))
        .collect();
    let row_type = SchemaType::Struct { fields: fields.clone() };
    let subject = schema
        .subject_id_column
        .as_deref()
        .and_then(|c| schema.column(c))
        .and_then(|(i, _)| row[i].as_i64());
    let ctx = Bindings::subject(subject, resolver);

    let mut current = Value::Struct(Arc::new(row.clone()));
    for (path, policy) in pairs {
        let mut ops = &path.ops()[1..];
        if let Some(PathOp::Filter(sel)) = ops.first() {
            if !eval_condition(sel, &Bindings::element(&fields, row))? {
                continue;
            }
            ops = &ops[1..];
        }
        if eval_condition(&policy.keep_condition(), &ctx)? {
            continue;
        }
        if ops.is_empty() {
            return Ok(None);
        }
        let mut addrs = Vec::new();
        locate(&current, &row_type, ops, &mut Vec::new(), &mut addrs)?;
        addrs.sort_unstable_by(|a, b| b.cmp(a));
        for a in &addrs {
            apply_at(&mut current, a);
        }
    }
    match current {
        Value::Struct(vals) => Ok(Some(Arc::unwrap_or_clone(vals))),
        _ => unreachable!(),
    }
}

/// Folds the unpruned pair list over a relation.
pub fn oracle_fold(
    rel: &Relation,
    pairs: &[(FieldPath, Policy)],
    resolver: &ConsentResolver,
) -> Result<Relation, EvalError> {
    let mut rows = Vec::new();
    for row in &rel.rows {
        if let Some(r) = oracle_mask(&rel.schema, row, pairs, resolver)? {
            rows.push(r);
        }
    }
    Ok(Relation {
        schema: rel.schema.clone(),
        rows,
    })
}
