//! In-memory nested values and relations.
//!
//! Containers are reference counted so masking can rebuild only the spine of the
//! path it touches and share every untouched sub-tree with the input.

use std::cmp::Ordering;
use std::io::{BufRead, Write};
use std::sync::Arc;

use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::{Map as JsonMap, Value as Json};
use thiserror::Error;

use crate::schema::{AtomicType, RelationSchema, SchemaType};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueError {
    #[error("at {at}: expected {expected}, found {found}")]
    Shape {
        at: String,
        expected: String,
        found: String,
    },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Double(f64),
    Str(Arc<str>),
    /// Microseconds since the Unix epoch.
    Timestamp(i64),
    /// Positional fields in schema order.
    Struct(Arc<Vec<Value>>),
    Array(Arc<Vec<Value>>),
    /// Pairs in ingestion order.
    Map(Arc<Vec<(Value, Value)>>),
}

impl Value {
    pub fn str(s: &str) -> Self {
        Value::Str(Arc::from(s))
    }

    pub fn structure(fields: Vec<Value>) -> Self {
        Value::Struct(Arc::new(fields))
    }

    pub fn array(items: Vec<Value>) -> Self {
        Value::Array(Arc::new(items))
    }

    pub fn map(pairs: Vec<(Value, Value)>) -> Self {
        Value::Map(Arc::new(pairs))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Value::Null => "NULL",
            Value::Bool(_) => "boolean",
            Value::Int(_) => "integer",
            Value::Double(_) => "double",
            Value::Str(_) => "string",
            Value::Timestamp(_) => "timestamp",
            Value::Struct(_) => "struct",
            Value::Array(_) => "array",
            Value::Map(_) => "map",
        }
    }

    /// Checks that the value's shape matches `ty`; NULL conforms everywhere.
    pub fn check(&self, ty: &SchemaType) -> Result<(), ValueError> {
        check_at(self, ty, &mut String::from("$"))
    }

    /// SQL-style comparison; `None` when either side is NULL or the kinds differ.
    pub fn sql_cmp(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Int(a), Value::Double(b)) => (*a as f64).partial_cmp(b),
            (Value::Double(a), Value::Int(b)) => a.partial_cmp(&(*b as f64)),
            (Value::Double(a), Value::Double(b)) => a.partial_cmp(b),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            (Value::Timestamp(a), Value::Timestamp(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    /// Decodes a JSON value of the given type.
    pub fn from_json(json: &Json, ty: &SchemaType) -> Result<Value, ValueError> {
        from_json_at(json, ty, &mut String::from("$"))
    }

    /// Encodes to JSON; maps become `[{"key": .., "value": ..}]` lists.
    pub fn to_json(&self, ty: &SchemaType) -> Json {
        match (self, ty) {
            (Value::Null, _) => Json::Null,
            (Value::Bool(b), _) => Json::Bool(*b),
            (Value::Int(i), _) => Json::from(*i),
            (Value::Double(x), _) => serde_json::Number::from_f64(*x).map_or(Json::Null, Json::Number),
            (Value::Str(s), _) => Json::String(s.to_string()),
            (Value::Timestamp(us), _) => Json::String(format_timestamp(*us)),
            (Value::Struct(fields), SchemaType::Struct { fields: tys }) => {
                let mut obj = JsonMap::new();
                for (v, f) in fields.iter().zip(tys) {
                    obj.insert(f.name.clone(), v.to_json(&f.data_type));
                }
                Json::Object(obj)
            }
            (Value::Array(items), SchemaType::Array { element }) => {
                Json::Array(items.iter().map(|v| v.to_json(element)).collect())
            }
            (Value::Map(pairs), SchemaType::Map { key, value }) => Json::Array(
                pairs
                    .iter()
                    .map(|(k, v)| {
                        let mut obj = JsonMap::new();
                        obj.insert("key".into(), k.to_json(key));
                        obj.insert("value".into(), v.to_json(value));
                        Json::Object(obj)
                    })
                    .collect(),
            ),
            // shape was checked on ingestion; a mismatch here is a caller bug
            (other, ty) => panic!("value {other:?} does not conform to {ty}"),
        }
    }
}

pub fn format_timestamp(micros: i64) -> String {
    DateTime::<Utc>::from_timestamp_micros(micros)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::AutoSi, true))
        .unwrap_or_else(|| micros.to_string())
}

fn mismatch(at: &str, expected: impl ToString, found: &str) -> ValueError {
    ValueError::Shape {
        at: at.to_string(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

fn check_at(v: &Value, ty: &SchemaType, at: &mut String) -> Result<(), ValueError> {
    let ok = match (v, ty) {
        (Value::Null, _) => true,
        (_, SchemaType::Atomic { name }) => matches!(
            (v, name),
            (Value::Bool(_), AtomicType::Boolean)
                | (Value::Int(_), AtomicType::Bigint | AtomicType::Integer)
                | (Value::Double(_), AtomicType::Double)
                | (Value::Str(_), AtomicType::Varchar)
                | (Value::Timestamp(_), AtomicType::Timestamp)
        ),
        (Value::Struct(vals), SchemaType::Struct { fields }) => {
            if vals.len() != fields.len() {
                return Err(mismatch(at, format!("{} fields", fields.len()), &vals.len().to_string()));
            }
            for (v, f) in vals.iter().zip(fields) {
                let len = at.len();
                at.push('.');
                at.push_str(&f.name);
                check_at(v, &f.data_type, at)?;
                at.truncate(len);
            }
            true
        }
        (Value::Array(items), SchemaType::Array { element }) => {
            let len = at.len();
            at.push_str(".[item]");
            for v in items.iter() {
                check_at(v, element, at)?;
            }
            at.truncate(len);
            true
        }
        (Value::Map(pairs), SchemaType::Map { key, value }) => {
            let len = at.len();
            for (k, v) in pairs.iter() {
                if k.is_null() {
                    return Err(mismatch(at, "non-null map key", "NULL"));
                }
                at.push_str(".[key]");
                check_at(k, key, at)?;
                at.truncate(len);
                at.push_str(".[value]");
                check_at(v, value, at)?;
                at.truncate(len);
            }
            true
        }
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(mismatch(at, ty, v.kind()))
    }
}

fn json_kind(j: &Json) -> &'static str {
    match j {
        Json::Null => "null",
        Json::Bool(_) => "boolean",
        Json::Number(_) => "number",
        Json::String(_) => "string",
        Json::Array(_) => "array",
        Json::Object(_) => "object",
    }
}

fn from_json_at(json: &Json, ty: &SchemaType, at: &mut String) -> Result<Value, ValueError> {
    if json.is_null() {
        return Ok(Value::Null);
    }
    let bad = |at: &str| mismatch(at, ty, json_kind(json));
    Ok(match ty {
        SchemaType::Atomic { name } => match (name, json) {
            (AtomicType::Boolean, Json::Bool(b)) => Value::Bool(*b),
            (AtomicType::Bigint | AtomicType::Integer, Json::Number(n)) => {
                Value::Int(n.as_i64().ok_or_else(|| bad(at))?)
            }
            (AtomicType::Double, Json::Number(n)) => Value::Double(n.as_f64().ok_or_else(|| bad(at))?),
            (AtomicType::Varchar, Json::String(s)) => Value::str(s),
            (AtomicType::Timestamp, Json::String(s)) => {
                let t = DateTime::parse_from_rfc3339(s).map_err(|_| bad(at))?;
                Value::Timestamp(t.timestamp_micros())
            }
            (AtomicType::Timestamp, Json::Number(n)) => Value::Timestamp(n.as_i64().ok_or_else(|| bad(at))?),
            _ => return Err(bad(at)),
        },
        SchemaType::Struct { fields } => {
            let Json::Object(obj) = json else {
                return Err(bad(at));
            };
            if let Some(extra) = obj.keys().find(|k| !fields.iter().any(|f| &f.name == *k)) {
                return Err(mismatch(at, ty, &format!("unknown field `{extra}`")));
            }
            let mut vals = Vec::with_capacity(fields.len());
            for f in fields {
                let len = at.len();
                at.push('.');
                at.push_str(&f.name);
                vals.push(from_json_at(obj.get(&f.name).unwrap_or(&Json::Null), &f.data_type, at)?);
                at.truncate(len);
            }
            Value::structure(vals)
        }
        SchemaType::Array { element } => {
            let Json::Array(items) = json else {
                return Err(bad(at));
            };
            let len = at.len();
            at.push_str(".[item]");
            let vals = items
                .iter()
                .map(|j| from_json_at(j, element, at))
                .collect::<Result<Vec<_>, _>>()?;
            at.truncate(len);
            Value::array(vals)
        }
        SchemaType::Map { key, value } => {
            let Json::Array(items) = json else {
                return Err(bad(at));
            };
            let mut pairs = Vec::with_capacity(items.len());
            for item in items {
                let (Some(k), v) = (item.get("key"), item.get("value").unwrap_or(&Json::Null)) else {
                    return Err(mismatch(at, "{\"key\", \"value\"} entry", json_kind(item)));
                };
                let len = at.len();
                at.push_str(".[key]");
                let k = from_json_at(k, key, at)?;
                if k.is_null() {
                    return Err(mismatch(at, "non-null map key", "null"));
                }
                at.truncate(len);
                at.push_str(".[value]");
                let v = from_json_at(v, value, at)?;
                at.truncate(len);
                pairs.push((k, v));
            }
            Value::map(pairs)
        }
    })
}

pub type Row = Vec<Value>;

/// A relation: schema plus rows of positional values.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub schema: RelationSchema,
    pub rows: Vec<Row>,
}

impl Relation {
    /// Builds a relation after checking every row against the schema.
    pub fn new(schema: RelationSchema, rows: Vec<Row>) -> Result<Self, ValueError> {
        let rel = Relation { schema, rows };
        rel.check()?;
        Ok(rel)
    }

    pub fn check(&self) -> Result<(), ValueError> {
        let row_type = self.schema.row_type();
        for (i, row) in self.rows.iter().enumerate() {
            check_at(&Value::Struct(Arc::new(row.clone())), &row_type, &mut format!("row {i}"))?;
        }
        Ok(())
    }

    pub fn row_from_json(schema: &RelationSchema, json: &Json) -> Result<Row, ValueError> {
        match Value::from_json(json, &schema.row_type())? {
            Value::Struct(fields) => Ok(Arc::unwrap_or_clone(fields)),
            _ => Err(mismatch("$", "row object", json_kind(json))),
        }
    }

    pub fn row_to_json(schema: &RelationSchema, row: &Row) -> Json {
        let mut obj = JsonMap::new();
        for (c, v) in schema.columns.iter().zip(row) {
            obj.insert(c.name.clone(), v.to_json(&c.data_type));
        }
        Json::Object(obj)
    }

    /// Reads one JSON object per line; blank lines are skipped.
    pub fn read_jsonl(schema: RelationSchema, reader: impl BufRead) -> Result<Self, ValueError> {
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ValueError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let json: Json = serde_json::from_str(&line).map_err(|e| ValueError::Json {
                line: i + 1,
                message: e.to_string(),
            })?;
            rows.push(Self::row_from_json(&schema, &json).map_err(|e| ValueError::Json {
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(Relation { schema, rows })
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> Result<(), ValueError> {
        for row in &self.rows {
            let line = Self::row_to_json(&self.schema, row);
            writeln!(out, "{line}").map_err(|e| ValueError::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn json_round_trip_of_nested_rows() {
        let rel = samples::nested_relation();
        let mut buf = Vec::new();
        rel.write_jsonl(&mut buf).unwrap();
        let back = Relation::read_jsonl(rel.schema.clone(), buf.as_slice()).unwrap();
        assert_eq!(back, rel);
    }

    #[test]
    fn shape_errors_report_location() {
        let schema = samples::nested_relation_schema();
        let bad = serde_json::json!({"col1": "x", "col2": {"field21": "oops"}});
        let err = Relation::row_from_json(&schema, &bad).unwrap_err().to_string();
        assert!(err.contains("$.col2.field21"), "{err}");
    }

    #[test]
    fn null_comparisons_are_unknown() {
        assert_eq!(Value::Null.sql_cmp(&Value::Int(1)), None);
        assert_eq!(Value::Int(2).sql_cmp(&Value::Double(1.5)), Some(Ordering::Greater));
    }
}
