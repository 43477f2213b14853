//! Nested data types for warehouse relations.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SchemaError;

/// Scalar type names a column or nested field may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AtomicType {
    Varchar,
    Bigint,
    Integer,
    Double,
    Boolean,
    Timestamp,
}

impl AtomicType {
    pub fn is_integral(self) -> bool {
        matches!(self, AtomicType::Bigint | AtomicType::Integer)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AtomicType::Varchar => "VARCHAR",
            AtomicType::Bigint => "BIGINT",
            AtomicType::Integer => "INTEGER",
            AtomicType::Double => "DOUBLE",
            AtomicType::Boolean => "BOOLEAN",
            AtomicType::Timestamp => "TIMESTAMP",
        }
    }
}

impl FromStr for AtomicType {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "VARCHAR" | "STRING" => Ok(AtomicType::Varchar),
            "BIGINT" | "LONG" => Ok(AtomicType::Bigint),
            "INTEGER" | "INT" => Ok(AtomicType::Integer),
            "DOUBLE" => Ok(AtomicType::Double),
            "BOOLEAN" | "BOOL" => Ok(AtomicType::Boolean),
            "TIMESTAMP" => Ok(AtomicType::Timestamp),
            other => Err(SchemaError::UnknownAtomicType(other.to_string())),
        }
    }
}

/// A named member of a struct type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructField {
    pub name: String,
    #[serde(rename = "type")]
    pub data_type: SchemaType,
}

impl StructField {
    pub fn new(name: impl Into<String>, data_type: SchemaType) -> Self {
        Self {
            name: name.into(),
            data_type,
        }
    }
}

/// Recursive type descriptor. Encoded in JSON as `{"kind": ..., ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SchemaType {
    Atomic { name: AtomicType },
    Struct { fields: Vec<StructField> },
    Array { element: Box<SchemaType> },
    Map {
        key: Box<SchemaType>,
        value: Box<SchemaType>,
    },
}

impl SchemaType {
    pub fn atomic(name: AtomicType) -> Self {
        SchemaType::Atomic { name }
    }

    pub fn varchar() -> Self {
        Self::atomic(AtomicType::Varchar)
    }

    pub fn bigint() -> Self {
        Self::atomic(AtomicType::Bigint)
    }

    pub fn double() -> Self {
        Self::atomic(AtomicType::Double)
    }

    pub fn boolean() -> Self {
        Self::atomic(AtomicType::Boolean)
    }

    pub fn struct_of<I, S>(fields: I) -> Self
    where
        I: IntoIterator<Item = (S, SchemaType)>,
        S: Into<String>,
    {
        SchemaType::Struct {
            fields: fields
                .into_iter()
                .map(|(n, t)| StructField::new(n, t))
                .collect(),
        }
    }

    pub fn array_of(element: SchemaType) -> Self {
        SchemaType::Array {
            element: Box::new(element),
        }
    }

    pub fn map_of(key: SchemaType, value: SchemaType) -> Self {
        SchemaType::Map {
            key: Box::new(key),
            value: Box::new(value),
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, SchemaType::Atomic { .. })
    }

    pub fn as_atomic(&self) -> Option<AtomicType> {
        match self {
            SchemaType::Atomic { name } => Some(*name),
            _ => None,
        }
    }

    /// Field list when this is a struct.
    pub fn fields(&self) -> Option<&[StructField]> {
        match self {
            SchemaType::Struct { fields } => Some(fields),
            _ => None,
        }
    }

    pub fn field(&self, name: &str) -> Option<(usize, &StructField)> {
        self.fields()?
            .iter()
            .enumerate()
            .find(|(_, f)| f.name == name)
    }

    /// Nesting depth: atomic types have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            SchemaType::Atomic { .. } => 0,
            SchemaType::Struct { fields } => {
                1 + fields.iter().map(|f| f.data_type.depth()).max().unwrap_or(0)
            }
            SchemaType::Array { element } => 1 + element.depth(),
            SchemaType::Map { key, value } => 1 + key.depth().max(value.depth()),
        }
    }

    /// Checks struct-name uniqueness and atomic map keys at every level.
    pub fn validate(&self) -> Result<(), SchemaError> {
        match self {
            SchemaType::Atomic { .. } => Ok(()),
            SchemaType::Struct { fields } => {
                let mut seen = HashSet::new();
                for f in fields {
                    if !seen.insert(f.name.as_str()) {
                        return Err(SchemaError::DuplicateField(f.name.clone()));
                    }
                    f.data_type.validate()?;
                }
                Ok(())
            }
            SchemaType::Array { element } => element.validate(),
            SchemaType::Map { key, value } => {
                if !key.is_atomic() {
                    return Err(SchemaError::NonAtomicMapKey(key.to_string()));
                }
                value.validate()
            }
        }
    }
}

impl fmt::Display for SchemaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaType::Atomic { name } => f.write_str(name.as_str()),
            SchemaType::Struct { fields } => {
                f.write_str("STRUCT<")?;
                for (i, field) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}:{}", field.name, field.data_type)?;
                }
                f.write_str(">")
            }
            SchemaType::Array { element } => write!(f, "ARRAY<{element}>"),
            SchemaType::Map { key, value } => write!(f, "MAP<{key}, {value}>"),
        }
    }
}

/// Parses the `STRUCT<a:BIGINT, b:ARRAY<VARCHAR>>` notation produced by `Display`.
impl FromStr for SchemaType {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = TypeParser { src: s, pos: 0 };
        let ty = p.parse_type()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.error("end of input"));
        }
        ty.validate()?;
        Ok(ty)
    }
}

struct TypeParser<'a> {
    src: &'a str,
    pos: usize,
}

impl TypeParser<'_> {
    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn error(&self, expected: &str) -> SchemaError {
        SchemaError::TypeSyntax {
            position: self.pos,
            expected: expected.to_string(),
        }
    }

    fn ident(&mut self) -> Result<&str, SchemaError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .char_indices()
            .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_'))
            .map(|(i, _)| i)
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.error("identifier"));
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn expect(&mut self, c: char) -> Result<(), SchemaError> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("'{c}'")))
        }
    }

    fn peek(&mut self, c: char) -> bool {
        self.skip_ws();
        self.src[self.pos..].starts_with(c)
    }

    fn parse_type(&mut self) -> Result<SchemaType, SchemaError> {
        let start = self.pos;
        let word = self.ident()?.to_ascii_uppercase();
        match word.as_str() {
            "STRUCT" => {
                self.expect('<')?;
                let mut fields = Vec::new();
                if !self.peek('>') {
                    loop {
                        let name = self.ident()?.to_string();
                        self.expect(':')?;
                        let ty = self.parse_type()?;
                        fields.push(StructField::new(name, ty));
                        if self.peek(',') {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                self.expect('>')?;
                Ok(SchemaType::Struct { fields })
            }
            "ARRAY" => {
                self.expect('<')?;
                let element = self.parse_type()?;
                self.expect('>')?;
                Ok(SchemaType::array_of(element))
            }
            "MAP" => {
                self.expect('<')?;
                let key = self.parse_type()?;
                self.expect(',')?;
                let value = self.parse_type()?;
                self.expect('>')?;
                Ok(SchemaType::map_of(key, value))
            }
            other => other.parse::<AtomicType>().map(SchemaType::atomic).map_err(|_| {
                SchemaError::TypeSyntax {
                    position: start,
                    expected: "type name".into(),
                }
            }),
        }
    }
}

/// A top-level column of a relation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub data_type: SchemaType,
}

/// Schema of a warehouse table or view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSchema {
    pub name: String,
    pub columns: Vec<Column>,
    /// Column carrying data-subject identifiers, used for consent lookups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id_column: Option<String>,
}

impl RelationSchema {
    /// Builds and validates a schema.
    pub fn new<I, S>(
        name: impl Into<String>,
        columns: I,
        subject_id_column: Option<&str>,
    ) -> Result<Self, SchemaError>
    where
        I: IntoIterator<Item = (S, SchemaType)>,
        S: Into<String>,
    {
        let schema = RelationSchema {
            name: name.into(),
            columns: columns
                .into_iter()
                .map(|(n, t)| Column {
                    name: n.into(),
                    data_type: t,
                })
                .collect(),
            subject_id_column: subject_id_column.map(str::to_string),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(SchemaError::DuplicateColumn(c.name.clone()));
            }
            c.data_type.validate()?;
        }
        if let Some(id_col) = &self.subject_id_column {
            match self.column(id_col) {
                Some((_, c)) if c.data_type.as_atomic().is_some_and(AtomicType::is_integral) => {}
                Some(_) => return Err(SchemaError::SubjectIdNotNumeric(id_col.clone())),
                None => return Err(SchemaError::UnknownColumn(id_col.clone())),
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<(usize, &Column)> {
        self.columns.iter().enumerate().find(|(_, c)| c.name == name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// The row viewed as a struct, which is what row selectors filter over.
    pub fn row_type(&self) -> SchemaType {
        SchemaType::Struct {
            fields: self
                .columns
                .iter()
                .map(|c| StructField::new(c.name.clone(), c.data_type.clone()))
                .collect(),
        }
    }

    /// Parses a JSON schema document and validates it.
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let schema: RelationSchema =
            serde_json::from_str(text).map_err(|e| SchemaError::Json(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_notation_round_trips() {
        let text = "MAP<VARCHAR, ARRAY<STRUCT<field41:VARCHAR, field42:BOOLEAN>>>";
        let ty: SchemaType = text.parse().unwrap();
        assert_eq!(ty.to_string(), text);
        assert_eq!(ty.depth(), 3);
    }

    #[test]
    fn rejects_duplicate_struct_fields() {
        let err = "STRUCT<a:BIGINT, a:VARCHAR>".parse::<SchemaType>().unwrap_err();
        assert!(matches!(err, SchemaError::DuplicateField(n) if n == "a"));
    }

    #[test]
    fn rejects_composite_map_keys() {
        let err = "MAP<STRUCT<a:BIGINT>, VARCHAR>".parse::<SchemaType>().unwrap_err();
        assert!(matches!(err, SchemaError::NonAtomicMapKey(_)));
    }

    #[test]
    fn subject_id_must_be_numeric() {
        let err = RelationSchema::new("t", [("id", SchemaType::varchar())], Some("id")).unwrap_err();
        assert!(matches!(err, SchemaError::SubjectIdNotNumeric(_)));
        let err = RelationSchema::new("t", [("id", SchemaType::bigint())], Some("nope")).unwrap_err();
        assert!(matches!(err, SchemaError::UnknownColumn(_)));
        RelationSchema::new("t", [("id", SchemaType::bigint())], Some("id")).unwrap();
    }

    #[test]
    fn duplicate_columns_rejected() {
        let err = RelationSchema::new(
            "t",
            [("a", SchemaType::bigint()), ("a", SchemaType::bigint())],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, SchemaError::DuplicateColumn(_)));
    }

    #[test]
    fn json_encoding_uses_kind_tags() {
        let schema = RelationSchema::new(
            "r",
            [("c", "ARRAY<STRUCT<x:DOUBLE>>".parse::<SchemaType>().unwrap())],
            None,
        )
        .unwrap();
        let json = serde_json::to_value(&schema).unwrap();
        assert_eq!(json["columns"][0]["type"]["kind"], "array");
        assert_eq!(json["columns"][0]["type"]["element"]["kind"], "struct");
        let back = RelationSchema::from_json(&json.to_string()).unwrap();
        assert_eq!(back, schema);
    }
}
