use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Action, Policy, PolicyError, Purpose, PurposeGraph};
use crate::condition::AttrClass;
use crate::schema::{resolve_path, FieldPath, RelationSchema};

/// Declares which class each policy attribute belongs to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeRegistry {
    classes: BTreeMap<String, AttrClass>,
}

impl AttributeRegistry {
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self, PolicyError>
    where
        I: IntoIterator<Item = (S, AttrClass)>,
        S: Into<String>,
    {
        let reg = AttributeRegistry {
            classes: pairs.into_iter().map(|(n, c)| (n.into(), c)).collect(),
        };
        reg.validate()?;
        Ok(reg)
    }

    fn validate(&self) -> Result<(), PolicyError> {
        for (name, class) in &self.classes {
            if matches!(class, AttrClass::Element | AttrClass::Unresolved) {
                return Err(PolicyError::BadAttributeClass(name.clone(), *class));
            }
        }
        Ok(())
    }

    pub fn class_of(&self, name: &str) -> Option<AttrClass> {
        self.classes.get(name).copied()
    }

    pub fn insert(&mut self, name: impl Into<String>, class: AttrClass) -> Result<(), PolicyError> {
        let name = name.into();
        if matches!(class, AttrClass::Element | AttrClass::Unresolved) {
            return Err(PolicyError::BadAttributeClass(name, class));
        }
        self.classes.insert(name, class);
        Ok(())
    }

    pub fn consents(&self) -> impl Iterator<Item = &str> {
        self.classes
            .iter()
            .filter(|(_, c)| **c == AttrClass::Consent)
            .map(|(n, _)| n.as_str())
    }
}

/// On-disk form of a policy; the condition is kept as text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub id: String,
    pub purpose: String,
    pub label: String,
    pub condition: String,
    #[serde(default = "default_action")]
    pub action: Action,
}

fn default_action() -> Action {
    Action::Keep
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogDoc {
    version: String,
    #[serde(default)]
    purposes: Vec<Purpose>,
    #[serde(default)]
    attributes: AttributeRegistry,
    #[serde(default)]
    labels: Vec<String>,
    #[serde(default)]
    policies: Vec<PolicyRecord>,
}

/// Purposes, labels, attribute classes and policies, validated together.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCatalog {
    pub version: String,
    pub labels: BTreeSet<String>,
    pub purposes: PurposeGraph,
    pub attributes: AttributeRegistry,
    pub policies: Vec<Policy>,
}

impl PolicyCatalog {
    pub fn new(
        version: impl Into<String>,
        labels: impl IntoIterator<Item = String>,
        purposes: impl IntoIterator<Item = Purpose>,
        attributes: AttributeRegistry,
        policies: impl IntoIterator<Item = Policy>,
    ) -> Result<Self, PolicyError> {
        let mut label_set = BTreeSet::new();
        for l in labels {
            if !label_set.insert(l.clone()) {
                return Err(PolicyError::DuplicateLabel(l));
            }
        }
        let purposes = PurposeGraph::new(purposes)?;
        let policies: Vec<Policy> = policies.into_iter().collect();
        let mut keys = BTreeSet::new();
        for p in &policies {
            if !purposes.contains(&p.purpose) {
                return Err(PolicyError::UnknownPurpose(p.purpose.clone()));
            }
            if !label_set.contains(&p.label) {
                return Err(PolicyError::UnknownLabel(p.label.clone()));
            }
            if !keys.insert(p.key()) {
                return Err(PolicyError::DuplicatePolicy {
                    purpose: p.purpose.clone(),
                    label: p.label.clone(),
                    id: p.id.clone(),
                });
            }
        }
        Ok(PolicyCatalog {
            version: version.into(),
            labels: label_set,
            purposes,
            attributes,
            policies,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let doc: CatalogDoc =
            serde_json::from_str(text).map_err(|e| PolicyError::Json(e.to_string()))?;
        doc.attributes.validate()?;
        let policies = doc
            .policies
            .into_iter()
            .map(|r| Policy::new(r.id, r.purpose, r.label, &r.condition, r.action, &doc.attributes))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(doc.version, doc.labels, doc.purposes, doc.attributes, policies)
    }

    pub fn to_json(&self) -> String {
        let doc = CatalogDoc {
            version: self.version.clone(),
            purposes: self.purposes.purposes(),
            attributes: self.attributes.clone(),
            labels: self.labels.iter().cloned().collect(),
            policies: self.policies.iter().map(Policy::to_record).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("catalog serializes")
    }
}

/// A label attached to a field path of one relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub relation: String,
    pub path: FieldPath,
    pub label: String,
}

impl LabelAssignment {
    pub fn new(
        relation: impl Into<String>,
        path: &str,
        label: impl Into<String>,
    ) -> Result<Self, PolicyError> {
        let relation = relation.into();
        let parsed = FieldPath::parse(path).map_err(|source| PolicyError::PathSyntax {
            relation: relation.clone(),
            path: path.to_string(),
            source,
        })?;
        Ok(LabelAssignment {
            relation,
            path: parsed,
            label: label.into(),
        })
    }
}

/// All label assignments of a workspace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelAssignments {
    pub entries: Vec<LabelAssignment>,
}

impl LabelAssignments {
    pub fn new(entries: Vec<LabelAssignment>) -> Self {
        LabelAssignments { entries }
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        serde_json::from_str(text).map_err(|e| PolicyError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("assignments serialize")
    }

    /// Checks that every relation is known, every path resolves and every label is declared.
    pub fn validate(
        &self,
        schemas: &BTreeMap<String, RelationSchema>,
        labels: &BTreeSet<String>,
    ) -> Result<(), PolicyError> {
        for a in &self.entries {
            let schema = schemas
                .get(&a.relation)
                .ok_or_else(|| PolicyError::UnknownRelation(a.relation.clone()))?;
            resolve_path(schema, &a.path).map_err(|source| PolicyError::Resolution {
                relation: a.relation.clone(),
                source,
            })?;
            if !labels.contains(&a.label) {
                return Err(PolicyError::UnknownLabel(a.label.clone()));
            }
        }
        Ok(())
    }

    pub fn for_relation<'a>(&'a self, relation: &'a str) -> impl Iterator<Item = &'a LabelAssignment> {
        self.entries.iter().filter(move |a| a.relation == relation)
    }

    pub fn as_slice(&self) -> &[LabelAssignment] {
        &self.entries
    }
}
