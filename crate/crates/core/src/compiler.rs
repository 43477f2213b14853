//! Translation of pruned (path, policy) pairs into a view: SQL text plus an
//! executable masking plan generated from the same steps.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use semver::Version;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::condition::{parse_condition, parse_filter_condition, AttrClass, Condition, Literal, Operator, Predicate};
use crate::policy::{LabelAssignment, Policy};
use crate::schema::{resolve_path, FieldPath, MaskKind, RelationSchema, ResolutionError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("relation `{relation}` has consent-based policy `{policy}` but no subject id column")]
    MissingSubjectId { relation: String, policy: String },
    #[error("policy `{policy}`: {reason}")]
    UnsupportedCondition { policy: String, reason: String },
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
}

/// One masking operation of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MaskStep {
    /// Rows survive when `keep` holds, or when the selector does not match.
    RowFilter {
        policy_id: String,
        #[serde(default, with = "selector_text", skip_serializing_if = "Option::is_none")]
        selector: Option<Condition>,
        #[serde(with = "keep_text")]
        keep: Condition,
    },
    /// `path` inside `column` is masked in rows where `keep` fails (and the selector matches).
    ColumnMask {
        policy_id: String,
        column: String,
        #[serde(default, with = "selector_text", skip_serializing_if = "Option::is_none")]
        selector: Option<Condition>,
        path: FieldPath,
        #[serde(with = "keep_text")]
        keep: Condition,
        mask: MaskKind,
    },
}

impl MaskStep {
    pub fn policy_id(&self) -> &str {
        match self {
            MaskStep::RowFilter { policy_id, .. } | MaskStep::ColumnMask { policy_id, .. } => policy_id,
        }
    }

    pub fn keep(&self) -> &Condition {
        match self {
            MaskStep::RowFilter { keep, .. } | MaskStep::ColumnMask { keep, .. } => keep,
        }
    }

    pub fn selector(&self) -> Option<&Condition> {
        match self {
            MaskStep::RowFilter { selector, .. } | MaskStep::ColumnMask { selector, .. } => selector.as_ref(),
        }
    }

    pub fn is_row_filter(&self) -> bool {
        matches!(self, MaskStep::RowFilter { .. })
    }
}

/// Keep conditions in plans only reference consents, so their text form is enough.
mod keep_text {
    use super::*;

    pub fn serialize<S: Serializer>(c: &Condition, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&c.render())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Condition, D::Error> {
        let text = String::deserialize(d)?;
        let mut c = parse_condition(&text).map_err(serde::de::Error::custom)?;
        c.classify(|_| Some(AttrClass::Consent))
            .map_err(serde::de::Error::custom)?;
        Ok(c)
    }
}

mod selector_text {
    use super::*;

    pub fn serialize<S: Serializer>(c: &Option<Condition>, s: S) -> Result<S::Ok, S::Error> {
        match c {
            Some(c) => s.serialize_some(&c.render()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Condition>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|t| parse_filter_condition(&t).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// A compiled, versioned masking view of one relation for one purpose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDefinition {
    pub relation: String,
    pub purpose: String,
    pub version: Version,
    pub sql: String,
    pub plan: Vec<MaskStep>,
    pub created_at: DateTime<Utc>,
    pub inputs_digest: String,
    /// Schema of the underlying relation, which is also the view's output schema.
    pub schema: RelationSchema,
}

impl ViewDefinition {
    pub fn row_filter_count(&self) -> usize {
        self.plan.iter().filter(|s| s.is_row_filter()).count()
    }

    pub fn column_mask_count(&self) -> usize {
        self.plan.len() - self.row_filter_count()
    }

    /// Consent names referenced anywhere in the plan.
    pub fn consents(&self) -> BTreeSet<String> {
        self.plan
            .iter()
            .flat_map(|s| s.keep().attributes_of(AttrClass::Consent))
            .collect()
    }

    pub fn id(&self) -> String {
        format!("{}.{}@{}", self.purpose, self.relation, self.version)
    }
}

fn check_condition(relation: &RelationSchema, policy: &Policy) -> Result<(), CompileError> {
    for p in policy.condition.predicates() {
        match p.attr.class {
            AttrClass::Consent => {
                if p.boolean_polarity().is_none() {
                    return Err(CompileError::UnsupportedCondition {
                        policy: policy.id.clone(),
                        reason: format!("consent `{}` may only be compared with a boolean", p.attr.name),
                    });
                }
                if relation.subject_id_column.is_none() {
                    return Err(CompileError::MissingSubjectId {
                        relation: relation.name.clone(),
                        policy: policy.id.clone(),
                    });
                }
            }
            class => {
                return Err(CompileError::UnsupportedCondition {
                    policy: policy.id.clone(),
                    reason: format!("attribute `{}` of class {class:?} cannot be compiled", p.attr.name),
                })
            }
        }
    }
    Ok(())
}

/// Builds the masking plan for the pruned pairs. Row filters come first, ordered by
/// path text; column masks follow ordered by column position, then path text.
pub fn build_plan(
    relation: &RelationSchema,
    pruned: &[(FieldPath, Policy)],
) -> Result<Vec<MaskStep>, CompileError> {
    let mut filters = Vec::new();
    let mut masks = Vec::new();
    for (path, policy) in pruned {
        check_condition(relation, policy)?;
        let binding = resolve_path(relation, path)?;
        let selector = path.row_selector().cloned();
        let keep = policy.keep_condition();
        let text = path.render();
        match binding.root_attribute {
            None => filters.push((
                text,
                MaskStep::RowFilter {
                    policy_id: policy.id.clone(),
                    selector,
                    keep,
                },
            )),
            Some(column) => {
                let (pos, _) = relation.column(&column).expect("resolved column exists");
                let column_path = FieldPath::parse(&path.column_path_text().expect("column path"))
                    .expect("canonical path text parses");
                masks.push((
                    (pos, text),
                    MaskStep::ColumnMask {
                        policy_id: policy.id.clone(),
                        column,
                        selector,
                        path: column_path,
                        keep,
                        mask: binding.mask,
                    },
                ));
            }
        }
    }
    filters.sort_by(|a, b| (&a.0, a.1.policy_id()).cmp(&(&b.0, b.1.policy_id())));
    masks.sort_by(|a, b| (&a.0, a.1.policy_id()).cmp(&(&b.0, b.1.policy_id())));
    masks.dedup_by(|a, b| a.1 == b.1);
    Ok(filters.into_iter().map(|(_, s)| s).chain(masks.into_iter().map(|(_, s)| s)).collect())
}

/// Compiles a view (version 1.0.0, empty digest; see [`assign_version`] and [`inputs_digest`]).
pub fn compile_view(
    relation: &RelationSchema,
    pruned: &[(FieldPath, Policy)],
    purpose: &str,
) -> Result<ViewDefinition, CompileError> {
    let plan = build_plan(relation, pruned)?;
    let sql = render_sql(relation, &plan);
    Ok(ViewDefinition {
        relation: relation.name.clone(),
        purpose: purpose.to_string(),
        version: Version::new(1, 0, 0),
        sql,
        plan,
        created_at: Utc::now(),
        inputs_digest: String::new(),
        schema: relation.clone(),
    })
}

/// SQL text of a plan.
pub fn render_sql(relation: &RelationSchema, plan: &[MaskStep]) -> String {
    let subject = relation.subject_id_column.as_deref().unwrap_or("NULL");
    let mut items = Vec::new();
    for col in &relation.columns {
        let mut expr = col.name.clone();
        for step in plan {
            if let MaskStep::ColumnMask {
                column,
                selector,
                path,
                keep,
                ..
            } = step
            {
                if column != &col.name {
                    continue;
                }
                let keep_sql = sql_keep(keep, subject);
                let cond = match selector {
                    None => format!("NOT {}", wrap(&keep_sql, keep)),
                    Some(s) => format!("COALESCE({}, FALSE) AND NOT {}", sql_selector(s), wrap(&keep_sql, keep)),
                };
                expr = format!("MASK_FIELD_IF({cond}, {expr}, {})", sql_string(&path.render()));
            }
        }
        if expr != col.name {
            let _ = write!(expr, " AS {}", col.name);
        }
        items.push(expr);
    }
    let mut where_parts = Vec::new();
    for step in plan {
        if let MaskStep::RowFilter { selector, keep, .. } = step {
            let keep_sql = sql_keep(keep, subject);
            where_parts.push(match selector {
                None => wrap(&keep_sql, keep),
                Some(s) => format!("(NOT COALESCE({}, FALSE) OR {})", sql_selector(s), wrap(&keep_sql, keep)),
            });
        }
    }
    let mut sql = format!("SELECT\n  {}\nFROM {}", items.join(",\n  "), relation.name);
    if !where_parts.is_empty() {
        let _ = write!(sql, "\nWHERE {}", where_parts.join("\n  AND "));
    }
    sql.push(';');
    sql
}

fn wrap(sql: &str, cond: &Condition) -> String {
    let atomic = match cond {
        Condition::Const(_) | Condition::Pred(_) => true,
        Condition::And(..) => cond.consent_conjunction().is_some(),
        _ => false,
    };
    if atomic {
        sql.to_string()
    } else {
        format!("({sql})")
    }
}

fn sql_string(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn has_consent_call(names: &BTreeSet<String>, subject: &str) -> String {
    let list: Vec<&str> = names.iter().map(String::as_str).collect();
    format!(
        "HAS_USER_CONSENT({}, {subject}, CURRENT_TIMESTAMP())",
        sql_string(&list.join(","))
    )
}

/// Keep condition as SQL; consent conjunctions collapse into one lookup call.
fn sql_keep(c: &Condition, subject: &str) -> String {
    if let Some(names) = c.consent_conjunction() {
        return has_consent_call(&names, subject);
    }
    match c {
        Condition::Const(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
        Condition::Pred(p) => {
            let call = has_consent_call(&BTreeSet::from([p.attr.name.clone()]), subject);
            if p.boolean_polarity() == Some(true) {
                call
            } else {
                format!("NOT {call}")
            }
        }
        Condition::Not(inner) => format!("NOT {}", wrap(&sql_keep(inner, subject), inner)),
        Condition::And(l, r) => format!("{} AND {}", wrap_bin(l, subject, true), wrap_bin(r, subject, true)),
        Condition::Or(l, r) => format!("{} OR {}", wrap_bin(l, subject, false), wrap_bin(r, subject, false)),
    }
}

fn wrap_bin(c: &Condition, subject: &str, in_and: bool) -> String {
    let s = sql_keep(c, subject);
    match c {
        Condition::Or(..) if in_and => format!("({s})"),
        Condition::And(..) if !in_and && c.consent_conjunction().is_none() => format!("({s})"),
        _ => s,
    }
}

fn sql_literal(l: &Literal) -> String {
    match l {
        Literal::Bool(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
        other => other.to_string(),
    }
}

fn sql_predicate(p: &Predicate) -> String {
    let a = &p.attr.name;
    match &p.op {
        Operator::Cmp(op, lit) => format!("{a} {op} {}", sql_literal(lit)),
        Operator::Between(lo, hi) => format!("{a} BETWEEN {} AND {}", sql_literal(lo), sql_literal(hi)),
        Operator::In(items) => format!(
            "{a} IN ({})",
            items.iter().map(sql_literal).collect::<Vec<_>>().join(", ")
        ),
        Operator::Like(pat) => format!("{a} LIKE {}", sql_string(pat)),
        Operator::IsNull => format!("{a} IS NULL"),
    }
}

/// Row selector predicate over column names.
fn sql_selector(c: &Condition) -> String {
    fn go(c: &Condition, min: u8) -> String {
        let (prec, s) = match c {
            Condition::Const(b) => (4, if *b { "TRUE" } else { "FALSE" }.to_string()),
            Condition::Pred(p) => (4, sql_predicate(p)),
            Condition::Not(inner) => (3, format!("NOT {}", go(inner, 3))),
            Condition::And(l, r) => (2, format!("{} AND {}", go(l, 2), go(r, 3))),
            Condition::Or(l, r) => (1, format!("{} OR {}", go(l, 1), go(r, 2))),
        };
        if prec < min {
            format!("({s})")
        } else {
            s
        }
    }
    go(c, 4)
}

/// What changed between two compilations of the same (relation, purpose).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    /// No previous view.
    Initial,
    /// Masking semantics changed, or columns were removed or retyped.
    Major,
    /// Columns were added; existing masking unchanged.
    Minor,
    /// Only SQL text or inputs changed.
    Patch,
    Unchanged,
}

/// Classifies `next` against `previous`.
pub fn classify_change(previous: Option<&ViewDefinition>, next: &ViewDefinition) -> ChangeKind {
    let Some(prev) = previous else {
        return ChangeKind::Initial;
    };
    if prev.plan != next.plan {
        return ChangeKind::Major;
    }
    if prev.schema != next.schema {
        let additive = prev
            .schema
            .columns
            .iter()
            .all(|c| next.schema.column(&c.name).is_some_and(|(_, n)| n == c))
            && prev.schema.subject_id_column == next.schema.subject_id_column;
        return if additive { ChangeKind::Minor } else { ChangeKind::Major };
    }
    if prev.sql != next.sql || prev.inputs_digest != next.inputs_digest {
        return ChangeKind::Patch;
    }
    ChangeKind::Unchanged
}

/// Next version for a change of the given kind.
pub fn assign_version(previous: Option<&Version>, change: ChangeKind) -> Version {
    let Some(prev) = previous else {
        return Version::new(1, 0, 0);
    };
    match change {
        ChangeKind::Initial => Version::new(1, 0, 0),
        ChangeKind::Major => Version::new(prev.major + 1, 0, 0),
        ChangeKind::Minor => Version::new(prev.major, prev.minor + 1, 0),
        ChangeKind::Patch => Version::new(prev.major, prev.minor, prev.patch + 1),
        ChangeKind::Unchanged => prev.clone(),
    }
}

/// Hash of everything a view of `relation` depends on: its schema, its label
/// assignments and the effective policies on the labels it uses.
pub fn inputs_digest(
    relation: &RelationSchema,
    assignments: &[LabelAssignment],
    effective: &[Policy],
) -> String {
    let mut labeled: Vec<(String, &str)> = assignments
        .iter()
        .filter(|a| a.relation == relation.name)
        .map(|a| (a.path.render(), a.label.as_str()))
        .collect();
    labeled.sort();
    labeled.dedup();
    let labels: BTreeSet<&str> = labeled.iter().map(|(_, l)| *l).collect();
    let mut policies: Vec<_> = effective
        .iter()
        .filter(|p| labels.contains(p.label.as_str()))
        .map(Policy::to_record)
        .collect();
    policies.sort_by(|a, b| (&a.label, &a.id, &a.purpose).cmp(&(&b.label, &b.id, &b.purpose)));
    let doc = serde_json::json!({
        "schema": relation,
        "labels": labeled,
        "policies": policies,
    });
    hex::encode(Sha256::digest(doc.to_string().as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{build_schema_tree, prune_policies};
    use crate::samples;

    fn squash(s: &str) -> String {
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    fn table1_view() -> ViewDefinition {
        let pruned = prune_policies(&build_schema_tree(&samples::table1_pairs())).pairs();
        compile_view(&samples::table1_schema(), &pruned, "ads").unwrap()
    }

    #[test]
    fn table1_sql() {
        let view = table1_view();
        let expected = "SELECT col1, col2, \
            MASK_FIELD_IF(NOT HAS_USER_CONSENT('consent2', col1, CURRENT_TIMESTAMP()), col3, '$.col3') AS col3, \
            MASK_FIELD_IF(NOT HAS_USER_CONSENT('consent3,consent4', col1, CURRENT_TIMESTAMP()), col4, '$.col4.[value]') AS col4 \
            FROM R WHERE HAS_USER_CONSENT('consent1', col1, CURRENT_TIMESTAMP());";
        assert_eq!(squash(&view.sql), squash(expected));
        assert_eq!(view.row_filter_count(), 1);
        assert_eq!(view.column_mask_count(), 2);
    }

    #[test]
    fn plan_json_round_trip() {
        let view = table1_view();
        let json = serde_json::to_string(&view).unwrap();
        let back: ViewDefinition = serde_json::from_str(&json).unwrap();
        assert_eq!(back, view);
    }

    #[test]
    fn empty_plan_passes_columns_through() {
        let view = compile_view(&samples::t1_schema(), &[], "ads").unwrap();
        assert_eq!(squash(&view.sql), "SELECT id, col1, col2 FROM T1;");
    }

    #[test]
    fn selectors_and_negative_consents() {
        let reg = samples::table1_registry();
        let p = Policy::new("p", "ads", "l", "consent1 OR NOT consent2", crate::policy::Action::Keep, &reg).unwrap();
        let pairs = vec![
            (FieldPath::parse("$.[?(@.col1 = 7)]").unwrap(), p.clone()),
            (FieldPath::parse("$.[?(@.col1 = 7)].col2.field22").unwrap(), p),
        ];
        let view = compile_view(&samples::table1_schema(), &pairs, "ads").unwrap();
        let sql = squash(&view.sql);
        assert!(sql.contains(
            "MASK_FIELD_IF(COALESCE(col1 = 7, FALSE) AND NOT (HAS_USER_CONSENT('consent1', col1, CURRENT_TIMESTAMP()) \
             OR NOT HAS_USER_CONSENT('consent2', col1, CURRENT_TIMESTAMP())), col2, '$.col2.field22') AS col2"
        ), "{sql}");
        assert!(sql.contains("WHERE (NOT COALESCE(col1 = 7, FALSE) OR (HAS_USER_CONSENT"), "{sql}");
    }

    #[test]
    fn errors() {
        let reg = samples::table1_registry();
        let p = Policy::new("p", "ads", "l", "consent1", crate::policy::Action::Keep, &reg).unwrap();
        let no_id = samples::nested_relation_schema();
        assert!(matches!(
            compile_view(&no_id, &[(FieldPath::column("col2"), p)], "ads"),
            Err(CompileError::MissingSubjectId { .. })
        ));
        let mut reg = reg;
        reg.insert("region", AttrClass::Accessor).unwrap();
        let q = Policy::new("q", "ads", "l", "region = 'eu'", crate::policy::Action::Keep, &reg).unwrap();
        assert!(matches!(
            compile_view(&samples::table1_schema(), &[(FieldPath::column("col2"), q)], "ads"),
            Err(CompileError::UnsupportedCondition { .. })
        ));
    }

    #[test]
    fn versioning() {
        let v1 = table1_view();
        assert_eq!(assign_version(None, classify_change(None, &v1)), Version::new(1, 0, 0));

        let mut wider = v1.clone();
        wider.schema.columns.push(crate::schema::Column {
            name: "col5".into(),
            data_type: crate::schema::SchemaType::varchar(),
        });
        let kind = classify_change(Some(&v1), &wider);
        assert_eq!(kind, ChangeKind::Minor);
        assert_eq!(assign_version(Some(&Version::new(1, 2, 3)), kind), Version::new(1, 3, 0));

        let mut stricter = v1.clone();
        stricter.plan.pop();
        assert_eq!(classify_change(Some(&v1), &stricter), ChangeKind::Major);
        assert_eq!(classify_change(Some(&v1), &v1), ChangeKind::Unchanged);
    }
}
