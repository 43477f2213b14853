//! Field-path expressions addressing rows, columns, cells and sub-cell elements.
//!
//! A path is `$` followed by `.`-separated operators:
//!
//! * `name` dereferences a column or struct field,
//! * `[?(<condition>)]` keeps elements satisfying a condition over `@.` attributes,
//! * `[item]`, `[key]`, `[value]` unnest arrays and maps.
//!
//! A filter may appear only directly after `$` (a row selector) or after an unnest.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::types::{RelationSchema, SchemaType};
use crate::condition::{AttrClass, CondParser, Condition, Dialect};
use crate::lexer::{tokenize, SyntaxError, Tok, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnnestKind {
    Item,
    Key,
    Value,
}

impl UnnestKind {
    pub fn keyword(self) -> &'static str {
        match self {
            UnnestKind::Item => "item",
            UnnestKind::Key => "key",
            UnnestKind::Value => "value",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathOp {
    Root,
    Deref(String),
    Filter(Condition),
    Unnest(UnnestKind),
}

impl PathOp {
    /// Canonical text of this single operator (without the leading dot).
    pub fn render(&self) -> String {
        match self {
            PathOp::Root => "$".to_string(),
            PathOp::Deref(name) => name.clone(),
            PathOp::Filter(c) => format!("[?({})]", c.render()),
            PathOp::Unnest(k) => format!("[{}]", k.keyword()),
        }
    }
}

/// What the masking function does to the element a path addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    /// Path addresses whole rows: masking removes them.
    DropRow,
    /// A column or struct field: set to NULL.
    SetNull,
    /// Array elements: removed from the array.
    RemoveElement,
    /// Map keys: the key-value pair is removed.
    RemovePair,
    /// Map values: set to NULL.
    NullValue,
}

/// Parsed field path. The first operator is always `Root`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPath {
    ops: Vec<PathOp>,
}

impl FieldPath {
    pub fn root() -> Self {
        FieldPath {
            ops: vec![PathOp::Root],
        }
    }

    /// Validates operator placement and builds a path.
    pub fn from_ops(ops: Vec<PathOp>) -> Result<Self, SyntaxError> {
        if ops.first() != Some(&PathOp::Root) {
            return Err(SyntaxError::new(0, "'$' as the first operator"));
        }
        for (i, op) in ops.iter().enumerate().skip(1) {
            match op {
                PathOp::Root => return Err(SyntaxError::new(i, "'$' only as the first operator")),
                PathOp::Filter(_) => {
                    if !matches!(ops[i - 1], PathOp::Root | PathOp::Unnest(_)) {
                        return Err(SyntaxError::new(i, "filter only after '$' or an unnest"));
                    }
                }
                _ => {}
            }
        }
        Ok(FieldPath { ops })
    }

    /// `$.column`
    pub fn column(name: impl Into<String>) -> Self {
        FieldPath {
            ops: vec![PathOp::Root, PathOp::Deref(name.into())],
        }
    }

    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        parse_field_path(text)
    }

    pub fn ops(&self) -> &[PathOp] {
        &self.ops
    }

    pub fn render(&self) -> String {
        render_field_path(self)
    }

    /// Appends an operator, re-checking placement.
    pub fn child(&self, op: PathOp) -> Result<Self, SyntaxError> {
        let mut ops = self.ops.clone();
        ops.push(op);
        FieldPath::from_ops(ops)
    }

    /// `$.[?(pred)]` prefix predicate, if the path starts with a row selector.
    pub fn row_selector(&self) -> Option<&Condition> {
        match self.ops.get(1) {
            Some(PathOp::Filter(c)) => Some(c),
            _ => None,
        }
    }

    /// Index of the operator that enters a top-level column.
    fn column_deref_index(&self) -> Option<usize> {
        self.ops.iter().position(|op| matches!(op, PathOp::Deref(_)))
    }

    /// Top-level column the path enters, if any.
    pub fn root_attribute(&self) -> Option<&str> {
        match self.column_deref_index().map(|i| &self.ops[i]) {
            Some(PathOp::Deref(name)) => Some(name),
            _ => None,
        }
    }

    /// True for `$` and `$.[?(pred)]`.
    pub fn is_row_level(&self) -> bool {
        self.column_deref_index().is_none()
    }

    /// Operators after the top-level column dereference.
    pub fn ops_within_column(&self) -> &[PathOp] {
        match self.column_deref_index() {
            Some(i) => &self.ops[i + 1..],
            None => &[],
        }
    }

    /// Text relative to the column, e.g. `[item].[?(@.field31='s1')]` for
    /// `$.col3.[item].[?(@.field31='s1')]`; empty when the column itself is addressed.
    pub fn relative_text(&self) -> String {
        join_ops(self.ops_within_column())
    }

    /// `$.<column>.<relative>` with any row selector stripped.
    pub fn column_path_text(&self) -> Option<String> {
        let column = self.root_attribute()?;
        let rel = self.relative_text();
        Some(if rel.is_empty() {
            format!("$.{column}")
        } else {
            format!("$.{column}.{rel}")
        })
    }

    /// Whether `self` is a prefix of `other` (operator-wise).
    pub fn is_prefix_of(&self, other: &FieldPath) -> bool {
        self.ops.len() <= other.ops.len() && self.ops.iter().zip(&other.ops).all(|(a, b)| a == b)
    }
}

pub(crate) fn join_ops(ops: &[PathOp]) -> String {
    ops.iter().map(PathOp::render).collect::<Vec<_>>().join(".")
}

impl fmt::Display for FieldPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for FieldPath {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_field_path(s)
    }
}

impl Serialize for FieldPath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for FieldPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_field_path(&text).map_err(serde::de::Error::custom)
    }
}

/// Parses field-path text into its operator sequence.
pub fn parse_field_path(text: &str) -> Result<FieldPath, SyntaxError> {
    if text.trim().is_empty() {
        return Err(SyntaxError::new(0, "'$'"));
    }
    let tokens = tokenize(text)?;
    let mut p = PathParser {
        tokens: &tokens,
        pos: 0,
        end: text.len(),
    };
    p.parse()
}

/// Canonical text; `parse_field_path(render_field_path(p)) == p`.
pub fn render_field_path(path: &FieldPath) -> String {
    join_ops(&path.ops)
}

struct PathParser<'t> {
    tokens: &'t [Token],
    pos: usize,
    end: usize,
}

impl PathParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.pos)
    }

    fn err(&self, expected: &str) -> SyntaxError {
        SyntaxError::new(self.here(), expected)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), SyntaxError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(what))
        }
    }

    fn parse(&mut self) -> Result<FieldPath, SyntaxError> {
        self.expect(Tok::Dollar, "'$'")?;
        let mut ops = vec![PathOp::Root];
        while self.pos < self.tokens.len() {
            self.expect(Tok::Dot, "'.'")?;
            let at = self.here();
            let op = match self.peek() {
                Some(Tok::Ident(name)) => {
                    let name = name.clone();
                    self.pos += 1;
                    PathOp::Deref(name)
                }
                Some(Tok::LBracket) => {
                    self.pos += 1;
                    self.parse_bracketed()?
                }
                Some(Tok::Dollar) => return Err(self.err("'$' only as the first operator")),
                _ => return Err(self.err("field name or '['")),
            };
            if let PathOp::Filter(_) = op {
                if !matches!(ops.last(), Some(PathOp::Root | PathOp::Unnest(_))) {
                    return Err(SyntaxError::new(at, "filter only after '$' or an unnest"));
                }
            }
            ops.push(op);
        }
        Ok(FieldPath { ops })
    }

    fn parse_bracketed(&mut self) -> Result<PathOp, SyntaxError> {
        match self.peek() {
            Some(Tok::Question) => {
                self.pos += 1;
                self.expect(Tok::LParen, "'('")?;
                let mut cp = CondParser::new(&self.tokens[self.pos..], Dialect::Filter, self.end);
                let cond = cp.parse_or()?;
                self.pos += cp.pos;
                self.expect(Tok::RParen, "')' closing the filter")?;
                self.expect(Tok::RBracket, "']'")?;
                Ok(PathOp::Filter(cond))
            }
            Some(Tok::Ident(word)) => {
                let kind = match word.as_str() {
                    "item" => UnnestKind::Item,
                    "key" => UnnestKind::Key,
                    "value" => UnnestKind::Value,
                    _ => return Err(self.err("unnest keyword 'item', 'key' or 'value'")),
                };
                self.pos += 1;
                self.expect(Tok::RBracket, "']'")?;
                Ok(PathOp::Unnest(kind))
            }
            _ => Err(self.err("'?', 'item', 'key' or 'value'")),
        }
    }
}

/// A path resolved against a relation schema.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBinding {
    pub path: FieldPath,
    /// Type of the addressed element; the row type for row-level paths.
    pub resolved_type: SchemaType,
    pub root_attribute: Option<String>,
    pub mask: MaskKind,
}

/// Resolution failure naming the offending operator.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot apply operator #{index} `{operator}` of `{path}` to {applied_to}: {reason}")]
pub struct ResolutionError {
    pub path: String,
    pub index: usize,
    pub operator: String,
    /// The type (or `ROW`) the operator was applied to.
    pub applied_to: String,
    pub reason: String,
}

enum Level<'a> {
    Row,
    Type(&'a SchemaType),
}

/// Walks `path` over `schema` and returns the addressed element.
pub fn resolve_path(schema: &RelationSchema, path: &FieldPath) -> Result<PathBinding, ResolutionError> {
    let ops = path.ops();
    let fail = |index: usize, applied_to: String, reason: &str| ResolutionError {
        path: path.render(),
        index,
        operator: ops[index].render(),
        applied_to,
        reason: reason.to_string(),
    };
    let row_type = schema.row_type();
    let mut level = Level::Row;
    let mut root_attribute = None;
    for (i, op) in ops.iter().enumerate().skip(1) {
        level = match (&level, op) {
            (Level::Row, PathOp::Deref(name)) => match schema.column(name) {
                Some((_, col)) => {
                    root_attribute = Some(name.clone());
                    Level::Type(&col.data_type)
                }
                None => return Err(fail(i, "ROW".into(), "no such column")),
            },
            (Level::Row, PathOp::Filter(cond)) => {
                check_filter_attrs(cond, &row_type).map_err(|r| fail(i, "ROW".into(), &r))?;
                Level::Row
            }
            (Level::Row, PathOp::Unnest(_)) => {
                return Err(fail(i, "ROW".into(), "rows are not a collection"))
            }
            (Level::Type(ty), PathOp::Deref(name)) => match ty.field(name) {
                Some((_, f)) => Level::Type(&f.data_type),
                None if ty.fields().is_some() => {
                    return Err(fail(i, ty.to_string(), "no such field"))
                }
                None => return Err(fail(i, ty.to_string(), "dereference requires a STRUCT")),
            },
            (Level::Type(ty), PathOp::Unnest(kind)) => match (ty, kind) {
                (SchemaType::Array { element }, UnnestKind::Item) => Level::Type(element),
                (SchemaType::Map { key, .. }, UnnestKind::Key) => Level::Type(key),
                (SchemaType::Map { value, .. }, UnnestKind::Value) => Level::Type(value),
                (_, UnnestKind::Item) => {
                    return Err(fail(i, ty.to_string(), "[item] requires an ARRAY"))
                }
                _ => return Err(fail(i, ty.to_string(), "[key]/[value] require a MAP")),
            },
            (Level::Type(ty), PathOp::Filter(cond)) => {
                if matches!(ops[i - 1], PathOp::Unnest(UnnestKind::Key)) {
                    return Err(fail(i, ty.to_string(), "map keys cannot be filtered"));
                }
                check_filter_attrs(cond, ty).map_err(|r| fail(i, ty.to_string(), &r))?;
                Level::Type(ty)
            }
            (_, PathOp::Root) => return Err(fail(i, "path".into(), "'$' only as the first operator")),
        };
    }
    let resolved_type = match level {
        Level::Row => row_type,
        Level::Type(t) => t.clone(),
    };
    Ok(PathBinding {
        mask: mask_kind(ops),
        path: path.clone(),
        resolved_type,
        root_attribute,
    })
}

/// Masking behaviour implied by the final operator(s).
pub fn mask_kind(ops: &[PathOp]) -> MaskKind {
    let last_non_filter = ops.iter().rev().find(|op| !matches!(op, PathOp::Filter(_)));
    match last_non_filter {
        None | Some(PathOp::Root) => MaskKind::DropRow,
        Some(PathOp::Deref(_)) => MaskKind::SetNull,
        Some(PathOp::Unnest(UnnestKind::Item)) => MaskKind::RemoveElement,
        Some(PathOp::Unnest(UnnestKind::Key)) => MaskKind::RemovePair,
        Some(PathOp::Unnest(UnnestKind::Value)) => MaskKind::NullValue,
        Some(PathOp::Filter(_)) => unreachable!(),
    }
}

fn check_filter_attrs(cond: &Condition, ty: &SchemaType) -> Result<(), String> {
    let Some(_) = ty.fields() else {
        return Err("filters require STRUCT elements".into());
    };
    for p in cond.predicates() {
        if p.attr.class != AttrClass::Element {
            return Err(format!("filter attribute `{}` is not an element reference", p.attr.name));
        }
        if ty.field(&p.attr.name).is_none() {
            return Err(format!("filter attribute `{}` does not exist here", p.attr.name));
        }
    }
    Ok(())
}

/// Every dereference/unnest path reachable in the schema, in schema order.
pub fn enumerate_paths(schema: &RelationSchema) -> Vec<FieldPath> {
    fn walk(prefix: &[PathOp], ty: &SchemaType, out: &mut Vec<FieldPath>) {
        let push = |op: PathOp, child: &SchemaType, out: &mut Vec<FieldPath>| {
            let mut ops = prefix.to_vec();
            ops.push(op);
            out.push(FieldPath { ops: ops.clone() });
            walk(&ops, child, out);
        };
        match ty {
            SchemaType::Atomic { .. } => {}
            SchemaType::Struct { fields } => {
                for f in fields {
                    push(PathOp::Deref(f.name.clone()), &f.data_type, out);
                }
            }
            SchemaType::Array { element } => push(PathOp::Unnest(UnnestKind::Item), element, out),
            SchemaType::Map { key, value } => {
                push(PathOp::Unnest(UnnestKind::Key), key, out);
                push(PathOp::Unnest(UnnestKind::Value), value, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(&[PathOp::Root], &schema.row_type(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condition::parse_filter_condition;
    use crate::samples;

    fn p(text: &str) -> FieldPath {
        parse_field_path(text).unwrap()
    }

    #[test]
    fn parses_examples() {
        assert_eq!(p("$.col1").ops(), &[PathOp::Root, PathOp::Deref("col1".into())]);
        assert_eq!(
            p("$.[?(@.col1='def')]").ops(),
            &[
                PathOp::Root,
                PathOp::Filter(parse_filter_condition("@.col1='def'").unwrap())
            ]
        );
        assert_eq!(
            p("$.col3.[item].[?(@.field31='s1')]").ops(),
            &[
                PathOp::Root,
                PathOp::Deref("col3".into()),
                PathOp::Unnest(UnnestKind::Item),
                PathOp::Filter(parse_filter_condition("@.field31 = 's1'").unwrap()),
            ]
        );
        assert_eq!(p("$").ops(), &[PathOp::Root]);
        assert_eq!(p(" $ . col1 ").render(), "$.col1");
    }

    #[test]
    fn renders_examples() {
        assert_eq!(FieldPath::column("col1").render(), "$.col1");
        assert_eq!(p("$.[?(@.col1 = 'def')]").render(), "$.[?(@.col1='def')]");
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_field_path("").is_err());
        assert!(parse_field_path("col1").is_err());
        assert!(parse_field_path("$.col1.$").is_err());
        assert!(parse_field_path("$.col1.[items]").is_err());
        assert!(parse_field_path("$.col1.[?(@.a=1)]").is_err());
        assert!(parse_field_path("$.[?(@.a=1)].[?(@.b=1)]").is_err());
        assert!(parse_field_path("$..col1").is_err());
        assert!(parse_field_path("$.col3.[item].[?(@.a='x')").is_err());
        let err = parse_field_path("$.col1.[bogus]").unwrap_err();
        assert_eq!(err.position, 8);
    }

    #[test]
    fn resolves_against_nested_schema() {
        let schema = samples::nested_relation_schema();
        let b = resolve_path(&schema, &p("$.col2.field21")).unwrap();
        assert_eq!(b.resolved_type, SchemaType::bigint());
        assert_eq!(b.root_attribute.as_deref(), Some("col2"));
        assert_eq!(b.mask, MaskKind::SetNull);

        let b = resolve_path(&schema, &p("$.col4.[value]")).unwrap();
        assert_eq!(
            b.resolved_type.to_string(),
            "ARRAY<STRUCT<field41:VARCHAR, field42:BOOLEAN>>"
        );
        assert_eq!(b.mask, MaskKind::NullValue);

        let b = resolve_path(&schema, &p("$.[?(@.col1='def')]")).unwrap();
        assert_eq!(b.root_attribute, None);
        assert_eq!(b.resolved_type, schema.row_type());
        assert_eq!(b.mask, MaskKind::DropRow);

        let b = resolve_path(&schema, &p("$.col3.[item].[?(@.field31='s1')]")).unwrap();
        assert_eq!(b.mask, MaskKind::RemoveElement);

        let b = resolve_path(&schema, &p("$.[?(@.col1='ghj')].col2")).unwrap();
        assert_eq!(b.root_attribute.as_deref(), Some("col2"));
    }

    #[test]
    fn resolution_errors_name_operator() {
        let schema = samples::nested_relation_schema();
        let err = resolve_path(&schema, &p("$.col2.[item]")).unwrap_err();
        assert_eq!(err.index, 2);
        assert_eq!(err.operator, "[item]");
        assert!(err.applied_to.starts_with("STRUCT<"));

        assert!(resolve_path(&schema, &p("$.nope")).is_err());
        assert!(resolve_path(&schema, &p("$.col1.x")).is_err());
        assert!(resolve_path(&schema, &p("$.[item]")).is_err());
        assert!(resolve_path(&schema, &p("$.[?(@.zzz=1)]")).is_err());
        assert!(resolve_path(&schema, &p("$.col4.[key].[?(@.a=1)]")).is_err());
        assert!(resolve_path(&schema, &p("$.col4.[value].[item].[?(@.nope=1)]")).is_err());
        assert!(resolve_path(&schema, &p("$.col4.[item]")).is_err());
    }

    #[test]
    fn every_enumerated_path_resolves() {
        let schema = samples::nested_relation_schema();
        let paths = enumerate_paths(&schema);
        assert!(paths.len() > 10);
        for path in paths {
            resolve_path(&schema, &path).unwrap();
        }
    }

    #[test]
    fn relative_text_strips_column_and_selector() {
        let path = p("$.[?(@.col1='ghj')].col2.field21");
        assert_eq!(path.relative_text(), "field21");
        assert_eq!(path.column_path_text().unwrap(), "$.col2.field21");
        assert!(p("$").is_row_level());
        assert_eq!(p("$.col3").relative_text(), "");
    }
}
