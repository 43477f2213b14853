//! Plan execution over in-memory relations.
//!
//! Conditions use SQL three-valued logic internally; an unknown result counts as
//! "not satisfied" wherever a decision is taken (keep a row, keep a value, match a
//! filter). All conditions of a plan are evaluated against the input row, so the
//! order in which masks are applied never changes which masks fire.

mod oracle;

pub use oracle::{oracle_fold, oracle_mask};

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::compiler::{MaskStep, ViewDefinition};
use crate::condition::{AttrClass, Condition, Literal, Operator, Predicate};
use crate::consent::{ConsentError, ConsentResolver, ConsentSnapshot, SnapshotStore};
use crate::lexer::CmpOp;
use crate::schema::{resolve_path, Column, FieldPath, PathOp, RelationSchema, ResolutionError, SchemaType, StructField, UnnestKind};
use crate::value::{Relation, Row, Value};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("attribute `{0}` is not bound")]
    UnboundAttribute(String),
    #[error("path `{path}` does not fit the value: {reason}")]
    PathTypeMismatch { path: String, reason: String },
    #[error("relation schema does not match view `{view}`")]
    SchemaMismatch { view: String },
    #[error(transparent)]
    Consent(#[from] ConsentError),
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
}

/// Values a condition can refer to.
#[derive(Clone, Copy)]
pub struct Bindings<'a> {
    /// Current element for `@.` references: its struct fields and values.
    pub element: Option<(&'a [StructField], &'a [Value])>,
    /// Data subject of the row, for consent attributes.
    pub subject: Option<i64>,
    pub consents: Option<&'a ConsentResolver>,
    /// Accessor and system attributes.
    pub attributes: Option<&'a HashMap<String, Value>>,
}

impl<'a> Bindings<'a> {
    pub fn element(fields: &'a [StructField], values: &'a [Value]) -> Self {
        Bindings {
            element: Some((fields, values)),
            subject: None,
            consents: None,
            attributes: None,
        }
    }

    pub fn subject(subject: Option<i64>, consents: &'a ConsentResolver) -> Self {
        Bindings {
            element: None,
            subject,
            consents: Some(consents),
            attributes: None,
        }
    }

    fn lookup(&self, p: &Predicate) -> Result<Value, EvalError> {
        let name = &p.attr.name;
        let unbound = || EvalError::UnboundAttribute(name.clone());
        match p.attr.class {
            AttrClass::Element => {
                let (fields, values) = self.element.ok_or_else(unbound)?;
                let i = fields.iter().position(|f| &f.name == name).ok_or_else(unbound)?;
                Ok(values[i].clone())
            }
            AttrClass::Consent => {
                let resolver = self.consents.ok_or_else(unbound)?;
                Ok(Value::Bool(resolver.lookup(name, self.subject)?))
            }
            AttrClass::Accessor | AttrClass::System => self
                .attributes
                .and_then(|m| m.get(name))
                .cloned()
                .ok_or_else(unbound),
            AttrClass::Unresolved => Err(unbound()),
        }
    }
}

fn cmp_literal(v: &Value, lit: &Literal) -> Option<Ordering> {
    match (v, lit) {
        (Value::Int(a), Literal::Int(b)) => Some(a.cmp(b)),
        (Value::Int(a), Literal::Float(b)) => (*a as f64).partial_cmp(b),
        (Value::Double(a), Literal::Int(b)) => a.partial_cmp(&(*b as f64)),
        (Value::Double(a), Literal::Float(b)) => a.partial_cmp(b),
        (Value::Str(a), Literal::Str(b)) => Some((**a).cmp(b.as_str())),
        (Value::Bool(a), Literal::Bool(b)) => Some(a.cmp(b)),
        (Value::Timestamp(a), Literal::Str(b)) => DateTime::parse_from_rfc3339(b)
            .ok()
            .map(|t| a.cmp(&t.timestamp_micros())),
        (Value::Timestamp(a), Literal::Int(b)) => Some(a.cmp(b)),
        _ => None,
    }
}

fn cmp_holds(op: CmpOp, ord: Ordering) -> bool {
    match op {
        CmpOp::Eq => ord == Ordering::Equal,
        CmpOp::Ne => ord != Ordering::Equal,
        CmpOp::Lt => ord == Ordering::Less,
        CmpOp::Gt => ord == Ordering::Greater,
        CmpOp::Le => ord != Ordering::Greater,
        CmpOp::Ge => ord != Ordering::Less,
    }
}

/// SQL LIKE with `%` and `_` wildcards.
pub fn like_match(text: &str, pattern: &str) -> bool {
    let t: Vec<char> = text.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    let (mut ti, mut pi) = (0, 0);
    let (mut star, mut mark) = (None, 0);
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '_' || p[pi] == t[ti]) {
            ti += 1;
            pi += 1;
        } else if pi < p.len() && p[pi] == '%' {
            star = Some(pi);
            mark = ti;
            pi += 1;
        } else if let Some(s) = star {
            pi = s + 1;
            mark += 1;
            ti = mark;
        } else {
            return false;
        }
    }
    while pi < p.len() && p[pi] == '%' {
        pi += 1;
    }
    pi == p.len()
}

fn eval_predicate(p: &Predicate, b: &Bindings) -> Result<Option<bool>, EvalError> {
    let v = b.lookup(p)?;
    if let Operator::IsNull = p.op {
        return Ok(Some(v.is_null()));
    }
    if v.is_null() {
        return Ok(None);
    }
    Ok(match &p.op {
        Operator::Cmp(op, lit) => cmp_literal(&v, lit).map(|o| cmp_holds(*op, o)),
        Operator::Between(lo, hi) => {
            let lo = cmp_literal(&v, lo).map(|o| o != Ordering::Less);
            let hi = cmp_literal(&v, hi).map(|o| o != Ordering::Greater);
            and3(lo, hi)
        }
        Operator::In(items) => {
            let mut unknown = false;
            for lit in items {
                match cmp_literal(&v, lit) {
                    Some(Ordering::Equal) => return Ok(Some(true)),
                    Some(_) => {}
                    None => unknown = true,
                }
            }
            if unknown {
                None
            } else {
                Some(false)
            }
        }
        Operator::Like(pat) => v.as_str().map(|s| like_match(s, pat)),
        Operator::IsNull => unreachable!(),
    })
}

fn and3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(false), _) | (_, Some(false)) => Some(false),
        (Some(true), Some(true)) => Some(true),
        _ => None,
    }
}

fn or3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(true), _) | (_, Some(true)) => Some(true),
        (Some(false), Some(false)) => Some(false),
        _ => None,
    }
}

/// Three-valued result: `None` is SQL unknown.
pub fn eval_tristate(cond: &Condition, b: &Bindings) -> Result<Option<bool>, EvalError> {
    Ok(match cond {
        Condition::Const(v) => Some(*v),
        Condition::Pred(p) => eval_predicate(p, b)?,
        Condition::Not(c) => eval_tristate(c, b)?.map(|v| !v),
        Condition::And(l, r) => {
            let lv = eval_tristate(l, b)?;
            if lv == Some(false) {
                return Ok(Some(false));
            }
            and3(lv, eval_tristate(r, b)?)
        }
        Condition::Or(l, r) => {
            let lv = eval_tristate(l, b)?;
            if lv == Some(true) {
                return Ok(Some(true));
            }
            or3(lv, eval_tristate(r, b)?)
        }
    })
}

/// Decision value of a condition: unknown counts as false.
pub fn eval_condition(cond: &Condition, b: &Bindings) -> Result<bool, EvalError> {
    Ok(eval_tristate(cond, b)?.unwrap_or(false))
}

/// Whether a filter matches an element; NULL or non-struct elements never match.
fn filter_matches(cond: &Condition, elem: &Value, ty: &SchemaType) -> Result<bool, EvalError> {
    match (elem, ty) {
        (Value::Struct(vals), SchemaType::Struct { fields }) => {
            eval_condition(cond, &Bindings::element(fields, vals))
        }
        _ => Ok(false),
    }
}

fn split_filter(ops: &[PathOp]) -> (Option<&Condition>, &[PathOp]) {
    match ops.first() {
        Some(PathOp::Filter(c)) => (Some(c), &ops[1..]),
        _ => (None, ops),
    }
}

/// Rewrites `v` so the elements addressed by `ops` are masked. Only the spine
/// leading to masked elements is rebuilt.
pub(crate) fn mask_ops(v: &Value, ops: &[PathOp], ty: &SchemaType) -> Result<Value, EvalError> {
    let Some(op) = ops.first() else {
        return Ok(Value::Null);
    };
    if v.is_null() {
        return Ok(Value::Null);
    }
    let mismatch = |reason: &str| EvalError::PathTypeMismatch {
        path: crate::schema::FieldPath::from_ops([PathOp::Root].into_iter().chain(ops.iter().cloned()).collect())
            .map(|p| p.render())
            .unwrap_or_default(),
        reason: reason.to_string(),
    };
    match (op, v, ty) {
        (PathOp::Deref(name), Value::Struct(vals), SchemaType::Struct { .. }) => {
            let (i, f) = ty.field(name).ok_or_else(|| mismatch("no such field"))?;
            let masked = mask_ops(&vals[i], &ops[1..], &f.data_type)?;
            let mut out = Vec::clone(vals);
            out[i] = masked;
            Ok(Value::Struct(Arc::new(out)))
        }
        (PathOp::Unnest(UnnestKind::Item), Value::Array(items), SchemaType::Array { element }) => {
            let (filter, rest) = split_filter(&ops[1..]);
            let mut out = Vec::with_capacity(items.len());
            for it in items.iter() {
                let hit = match filter {
                    Some(f) => filter_matches(f, it, element)?,
                    None => true,
                };
                if !hit {
                    out.push(it.clone());
                } else if !rest.is_empty() {
                    out.push(mask_ops(it, rest, element)?);
                }
            }
            Ok(Value::Array(Arc::new(out)))
        }
        (PathOp::Unnest(UnnestKind::Key), Value::Map(_), SchemaType::Map { .. }) => {
            if ops.len() > 1 {
                return Err(mismatch("map keys cannot be traversed"));
            }
            Ok(Value::Map(Arc::new(Vec::new())))
        }
        (PathOp::Unnest(UnnestKind::Value), Value::Map(pairs), SchemaType::Map { value, .. }) => {
            let (filter, rest) = split_filter(&ops[1..]);
            let mut out = Vec::with_capacity(pairs.len());
            for (k, val) in pairs.iter() {
                let hit = match filter {
                    Some(f) => filter_matches(f, val, value)?,
                    None => true,
                };
                let nv = if hit { mask_ops(val, rest, value)? } else { val.clone() };
                out.push((k.clone(), nv));
            }
            Ok(Value::Map(Arc::new(out)))
        }
        _ => Err(mismatch(&format!("cannot apply `{}` to {ty}", op.render()))),
    }
}

fn column_ops(path: &str) -> Result<Vec<PathOp>, EvalError> {
    let text = if path.starts_with('$') {
        path.to_string()
    } else if path.is_empty() {
        "$.c".to_string()
    } else {
        format!("$.c.{path}")
    };
    let parsed = FieldPath::parse(&text).map_err(|e| EvalError::PathTypeMismatch {
        path: path.to_string(),
        reason: e.to_string(),
    })?;
    if parsed.row_selector().is_some() || parsed.is_row_level() {
        return Err(EvalError::PathTypeMismatch {
            path: path.to_string(),
            reason: "expected a path into a column".into(),
        });
    }
    Ok(parsed.ops_within_column().to_vec())
}

fn check_ops(ops: &[PathOp], ty: &SchemaType, text: &str) -> Result<(), EvalError> {
    let probe = RelationSchema {
        name: String::new(),
        columns: vec![Column {
            name: "c".into(),
            data_type: ty.clone(),
        }],
        subject_id_column: None,
    };
    let path = FieldPath::from_ops(
        [PathOp::Root, PathOp::Deref("c".into())]
            .into_iter()
            .chain(ops.iter().cloned())
            .collect(),
    )
    .map_err(|e| EvalError::PathTypeMismatch {
        path: text.to_string(),
        reason: e.to_string(),
    })?;
    resolve_path(&probe, &path).map_err(|e| EvalError::PathTypeMismatch {
        path: text.to_string(),
        reason: e.reason,
    })?;
    Ok(())
}

/// Masks the elements of `attr` addressed by `path` when `cond` holds.
///
/// `path` is either column-qualified (`$.col3.[item]`) or relative to the
/// attribute (`[item]`, `field21`, or empty for the attribute itself).
pub fn mask_field_if(cond: bool, attr: &Value, path: &str, attr_type: &SchemaType) -> Result<Value, EvalError> {
    let ops = column_ops(path)?;
    check_ops(&ops, attr_type, path)?;
    if !cond {
        return Ok(attr.clone());
    }
    mask_ops(attr, &ops, attr_type)
}

struct CompiledFilter {
    selector: Option<Condition>,
    keep: Condition,
}

struct CompiledMask {
    column: usize,
    ops: Vec<PathOp>,
    ty: SchemaType,
    selector: Option<Condition>,
    keep: Condition,
}

/// A view's plan bound to column positions, ready to run over many rows.
pub struct CompiledPlan {
    view_id: String,
    schema: RelationSchema,
    row_fields: Vec<StructField>,
    subject: Option<usize>,
    filters: Vec<CompiledFilter>,
    masks: Vec<CompiledMask>,
    consents: BTreeSet<String>,
}

/// Per-step counters from one plan run.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct ApplyStats {
    pub rows_in: usize,
    pub rows_out: usize,
    /// Times each column-mask step fired, in plan order.
    pub masks_fired: Vec<(String, usize)>,
}

impl CompiledPlan {
    pub fn new(view: &ViewDefinition) -> Result<Self, EvalError> {
        let schema = view.schema.clone();
        let mut filters = Vec::new();
        let mut masks = Vec::new();
        for step in &view.plan {
            match step {
                MaskStep::RowFilter { selector, keep, .. } => filters.push(CompiledFilter {
                    selector: selector.clone(),
                    keep: keep.clone(),
                }),
                MaskStep::ColumnMask {
                    column,
                    selector,
                    path,
                    keep,
                    ..
                } => {
                    let (pos, col) = schema.column(column).ok_or_else(|| EvalError::SchemaMismatch {
                        view: view.id(),
                    })?;
                    let binding = resolve_path(&schema, path)?;
                    debug_assert!(binding.root_attribute.as_deref() == Some(column.as_str()));
                    masks.push(CompiledMask {
                        column: pos,
                        ops: path.ops_within_column().to_vec(),
                        ty: col.data_type.clone(),
                        selector: selector.clone(),
                        keep: keep.clone(),
                    });
                }
            }
        }
        let subject = schema
            .subject_id_column
            .as_deref()
            .and_then(|c| schema.column(c))
            .map(|(i, _)| i);
        let row_fields = match schema.row_type() {
            SchemaType::Struct { fields } => fields,
            _ => unreachable!(),
        };
        Ok(CompiledPlan {
            view_id: view.id(),
            consents: view.consents(),
            schema,
            row_fields,
            subject,
            filters,
            masks,
        })
    }

    pub fn consents(&self) -> impl Iterator<Item = &str> {
        self.consents.iter().map(String::as_str)
    }

    fn subject_of(&self, row: &Row) -> Option<i64> {
        self.subject.and_then(|i| row[i].as_i64())
    }

    fn selected(&self, selector: &Option<Condition>, row: &Row) -> Result<bool, EvalError> {
        match selector {
            None => Ok(true),
            Some(s) => eval_condition(s, &Bindings::element(&self.row_fields, row)),
        }
    }

    /// Attaches consent snapshots, resolving each consent once for all rows.
    pub fn bind<'a>(&'a self, resolver: &'a ConsentResolver) -> Result<BoundPlan<'a>, EvalError> {
        let bind_keep = |c: &'a Condition| -> Result<BoundKeep<'a>, EvalError> {
            let mut lits = Vec::new();
            if !consent_literals(c, &mut lits) {
                return Ok(BoundKeep::General(c));
            }
            let mut out = Vec::with_capacity(lits.len());
            for (name, pol) in lits {
                let snap = resolver.snapshot(name).ok_or_else(|| ConsentError::NoSnapshotAvailable {
                    consent: name.to_string(),
                    access_time: resolver.access_time().unwrap_or(DateTime::<Utc>::MIN_UTC),
                })?;
                out.push((&**snap, pol));
            }
            Ok(BoundKeep::Consents(out))
        };
        Ok(BoundPlan {
            plan: self,
            resolver,
            filters: self.filters.iter().map(|f| bind_keep(&f.keep)).collect::<Result<_, _>>()?,
            masks: self.masks.iter().map(|m| bind_keep(&m.keep)).collect::<Result<_, _>>()?,
        })
    }

    pub fn apply(&self, rel: &Relation, resolver: &ConsentResolver) -> Result<(Relation, ApplyStats), EvalError> {
        if rel.schema != self.schema {
            return Err(EvalError::SchemaMismatch {
                view: self.view_id.clone(),
            });
        }
        let bound = self.bind(resolver)?;
        let mut counts = vec![0usize; self.masks.len()];
        let mut rows = Vec::with_capacity(rel.rows.len());
        for row in &rel.rows {
            if let Some(r) = bound.apply_row(row, |i| counts[i] += 1)? {
                rows.push(r);
            }
        }
        let stats = ApplyStats {
            rows_in: rel.rows.len(),
            rows_out: rows.len(),
            masks_fired: self
                .masks
                .iter()
                .zip(counts)
                .map(|(m, n)| {
                    let col = &self.schema.columns[m.column].name;
                    let rel_text = crate::schema::FieldPath::from_ops(
                        [PathOp::Root, PathOp::Deref(col.clone())]
                            .into_iter()
                            .chain(m.ops.iter().cloned())
                            .collect(),
                    )
                    .map(|p| p.render())
                    .unwrap_or_default();
                    (rel_text, n)
                })
                .collect(),
        };
        Ok((
            Relation {
                schema: rel.schema.clone(),
                rows,
            },
            stats,
        ))
    }
}

/// Flattens a conjunction of consent tests into (consent, expected value) pairs.
fn consent_literals<'a>(c: &'a Condition, out: &mut Vec<(&'a str, bool)>) -> bool {
    let lit = |p: &Predicate| {
        if p.attr.class == AttrClass::Consent {
            p.boolean_polarity()
        } else {
            None
        }
    };
    match c {
        Condition::Const(true) => true,
        Condition::Pred(p) => match lit(p) {
            Some(pol) => {
                out.push((&p.attr.name, pol));
                true
            }
            None => false,
        },
        Condition::Not(inner) => match &**inner {
            Condition::Pred(p) => match lit(p) {
                Some(pol) => {
                    out.push((&p.attr.name, !pol));
                    true
                }
                None => false,
            },
            _ => false,
        },
        Condition::And(l, r) => consent_literals(l, out) && consent_literals(r, out),
        _ => false,
    }
}

enum BoundKeep<'a> {
    /// Holds when every consent has the expected value.
    Consents(Vec<(&'a ConsentSnapshot, bool)>),
    General(&'a Condition),
}

impl BoundKeep<'_> {
    #[inline]
    fn holds(&self, subject: Option<i64>, ctx: &Bindings) -> Result<bool, EvalError> {
        match self {
            BoundKeep::Consents(lits) => Ok(lits
                .iter()
                .all(|(snap, pol)| subject.is_some_and(|s| snap.contains(s)) == *pol)),
            BoundKeep::General(c) => eval_condition(c, ctx),
        }
    }
}

/// A compiled plan with its consent snapshots attached; see [`CompiledPlan::bind`].
pub struct BoundPlan<'a> {
    plan: &'a CompiledPlan,
    resolver: &'a ConsentResolver,
    filters: Vec<BoundKeep<'a>>,
    masks: Vec<BoundKeep<'a>>,
}

impl BoundPlan<'_> {
    /// Masks one row; `None` when a row filter drops it. `fired` receives the
    /// indices of the column masks that applied.
    pub fn apply_row(&self, row: &Row, fired: impl FnMut(usize)) -> Result<Option<Row>, EvalError> {
        self.apply_owned(row.clone(), fired)
    }

    /// [`apply_row`](Self::apply_row) rewriting the row in place.
    pub fn apply_owned(&self, mut row: Row, mut fired: impl FnMut(usize)) -> Result<Option<Row>, EvalError> {
        let plan = self.plan;
        let subject = plan.subject_of(&row);
        let ctx = Bindings::subject(subject, self.resolver);
        for (f, keep) in plan.filters.iter().zip(&self.filters) {
            if plan.selected(&f.selector, &row)? && !keep.holds(subject, &ctx)? {
                return Ok(None);
            }
        }
        // Decide every mask on the input row before rewriting anything.
        let mut hits = Vec::new();
        for (i, (m, keep)) in plan.masks.iter().zip(&self.masks).enumerate() {
            if plan.selected(&m.selector, &row)? && !keep.holds(subject, &ctx)? {
                hits.push(i);
            }
        }
        for i in hits {
            fired(i);
            let m = &plan.masks[i];
            row[m.column] = mask_ops(&row[m.column], &m.ops, &m.ty)?;
        }
        Ok(Some(row))
    }
}

/// Runs a view over a relation, binding every consent lookup to `access_time`.
pub fn apply_plan(
    view: &ViewDefinition,
    rel: &Relation,
    access_time: DateTime<Utc>,
    store: &dyn SnapshotStore,
) -> Result<Relation, EvalError> {
    let plan = CompiledPlan::new(view)?;
    let resolver = ConsentResolver::bind(store, access_time, plan.consents())?;
    Ok(plan.apply(rel, &resolver)?.0)
}

/// Like [`apply_plan`] with an already bound resolver, also returning counters.
pub fn apply_plan_with(
    view: &ViewDefinition,
    rel: &Relation,
    resolver: &ConsentResolver,
) -> Result<(Relation, ApplyStats), EvalError> {
    CompiledPlan::new(view)?.apply(rel, resolver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condition::{parse_condition, parse_filter_condition};
    use crate::samples;

    fn ghj() -> Row {
        samples::nested_relation().rows[2].clone()
    }

    fn col_type(name: &str) -> SchemaType {
        samples::nested_relation_schema().column(name).unwrap().1.data_type.clone()
    }

    #[test]
    fn false_condition_is_identity() {
        let row = ghj();
        let out = mask_field_if(false, &row[2], "$.col3", &col_type("col3")).unwrap();
        assert_eq!(out, row[2]);
    }

    #[test]
    fn filtered_array_elements_are_removed() {
        let row = ghj();
        let out = mask_field_if(true, &row[2], "[item].[?(@.field31='s1')]", &col_type("col3")).unwrap();
        let Value::Array(items) = out else { panic!() };
        assert_eq!(items.len(), 1);
        assert_eq!(items[0], Value::structure(vec![Value::str("s3"), Value::Double(212.0)]));
    }

    #[test]
    fn map_values_set_null() {
        let row = ghj();
        let out = mask_field_if(true, &row[3], "$.col4.[value]", &col_type("col4")).unwrap();
        let Value::Map(pairs) = out else { panic!() };
        assert_eq!(pairs.len(), 2);
        assert!(pairs.iter().all(|(_, v)| v.is_null()));
        assert_eq!(pairs[0].0, Value::str("k1"));
    }

    #[test]
    fn map_keys_remove_pairs() {
        let row = ghj();
        let out = mask_field_if(true, &row[3], "[key]", &col_type("col4")).unwrap();
        assert_eq!(out, Value::map(vec![]));
    }

    #[test]
    fn struct_field_nulled_sibling_intact() {
        let row = ghj();
        let out = mask_field_if(true, &row[1], "field21", &col_type("col2")).unwrap();
        assert_eq!(out, Value::structure(vec![Value::Null, Value::str("bar")]));
    }

    #[test]
    fn nested_field_inside_filtered_elements() {
        let row = ghj();
        let out = mask_field_if(true, &row[3], "[value].[item].[?(@.field42=false)].field41", &col_type("col4")).unwrap();
        let Value::Map(pairs) = out else { panic!() };
        let Value::Array(items) = &pairs[0].1 else { panic!() };
        assert_eq!(items[0], Value::structure(vec![Value::str("v1"), Value::Bool(true)]));
        assert_eq!(items[1], Value::structure(vec![Value::Null, Value::Bool(false)]));
        assert!(pairs[1].1.is_null());
    }

    #[test]
    fn path_type_mismatch() {
        let row = ghj();
        assert!(matches!(
            mask_field_if(true, &row[1], "[item]", &col_type("col2")),
            Err(EvalError::PathTypeMismatch { .. })
        ));
    }

    #[test]
    fn three_valued_collapse() {
        let fields = vec![StructField::new("x", SchemaType::bigint())];
        let c = parse_filter_condition("@.x = 5").unwrap();
        let five = [Value::Int(5)];
        let null = [Value::Null];
        assert!(eval_condition(&c, &Bindings::element(&fields, &five)).unwrap());
        assert!(!eval_condition(&c, &Bindings::element(&fields, &null)).unwrap());
        let neg = Condition::not(c.clone());
        assert!(!eval_condition(&neg, &Bindings::element(&fields, &null)).unwrap());
        let or = parse_filter_condition("@.x = 5 OR @.x IS NULL").unwrap();
        assert!(eval_condition(&or, &Bindings::element(&fields, &null)).unwrap());
        let unbound = parse_filter_condition("@.y = 1").unwrap();
        assert!(matches!(
            eval_condition(&unbound, &Bindings::element(&fields, &five)),
            Err(EvalError::UnboundAttribute(_))
        ));
    }

    #[test]
    fn other_operators() {
        let fields = vec![StructField::new("s", SchemaType::varchar()), StructField::new("n", SchemaType::double())];
        let vals = [Value::str("hello"), Value::Double(2.5)];
        let b = Bindings::element(&fields, &vals);
        for (text, want) in [
            ("@.s LIKE 'h%o'", true),
            ("@.s LIKE 'h_llo'", true),
            ("@.s LIKE 'x%'", false),
            ("@.n BETWEEN 2 AND 3", true),
            ("@.n NOT BETWEEN 2 AND 3", false),
            ("@.s IN ('a', 'hello')", true),
            ("@.s NOT IN ('a')", true),
            ("@.n >= 2.5 AND @.n < 3", true),
            ("@.s IS NOT NULL", true),
        ] {
            assert_eq!(eval_condition(&parse_filter_condition(text).unwrap(), &b).unwrap(), want, "{text}");
        }
    }

    #[test]
    fn consent_leaves_use_resolver() {
        let snaps = crate::consent::build_snapshots(
            &[
                crate::consent::ConsentRecord::new(1, "c", true),
                crate::consent::ConsentRecord::new(2, "c", false),
            ],
            Utc::now(),
        )
        .unwrap();
        let resolver = ConsentResolver::from_snapshots(snaps);
        let mut c = parse_condition("c").unwrap();
        c.classify(|_| Some(AttrClass::Consent)).unwrap();
        assert!(eval_condition(&c, &Bindings::subject(Some(1), &resolver)).unwrap());
        assert!(!eval_condition(&c, &Bindings::subject(Some(2), &resolver)).unwrap());
        assert!(!eval_condition(&c, &Bindings::subject(None, &resolver)).unwrap());
    }
}
