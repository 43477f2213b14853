//! Purposes, policy labels, policies and the catalogs that hold them.

mod catalog;
mod purpose;

pub use catalog::{
    AttributeRegistry, LabelAssignment, LabelAssignments, PolicyCatalog, PolicyRecord,
};
pub use purpose::{Purpose, PurposeGraph};

pub use crate::condition::{parse_condition, AttrClass, Condition};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::SyntaxError;
use crate::schema::{FieldPath, RelationSchema, ResolutionError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("condition of policy `{policy}`: {source}")]
    Condition {
        policy: String,
        #[source]
        source: SyntaxError,
    },
    #[error("policy `{policy}` references unregistered attribute `{attribute}`")]
    UnknownAttribute { policy: String, attribute: String },
    #[error("unknown purpose `{0}`")]
    UnknownPurpose(String),
    #[error("unknown policy label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("duplicate purpose `{0}`")]
    DuplicatePurpose(String),
    #[error("duplicate policy ({purpose}, {label}, {id})")]
    DuplicatePolicy {
        purpose: String,
        label: String,
        id: String,
    },
    #[error("purpose graph has a cycle through `{0}`")]
    PurposeCycle(String),
    #[error("attribute `{0}` may not be registered with class {1:?}")]
    BadAttributeClass(String, AttrClass),
    #[error("unknown relation `{0}` in label assignment")]
    UnknownRelation(String),
    #[error("label assignment for {relation}: {source}")]
    Resolution {
        relation: String,
        #[source]
        source: ResolutionError,
    },
    #[error("label assignment for {relation}: bad path `{path}`: {source}")]
    PathSyntax {
        relation: String,
        path: String,
        #[source]
        source: SyntaxError,
    },
    #[error("invalid catalog document: {0}")]
    Json(String),
}

/// What happens to a labeled element when a policy's condition holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Action {
    /// Preserve when the condition holds, mask otherwise.
    Keep,
    /// Mask when the condition holds.
    Mask,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Keep => "KEEP",
            Action::Mask => "MASK",
        })
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "KEEP" => Ok(Action::Keep),
            "MASK" => Ok(Action::Mask),
            other => Err(format!("unknown action `{other}`")),
        }
    }
}

/// `(purpose, label, <condition, action>)` with a stable id.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub id: String,
    pub purpose: String,
    pub label: String,
    pub condition: Condition,
    pub action: Action,
    consents: BTreeSet<String>,
}

impl Policy {
    /// Parses `condition` and classifies its attributes against `registry`.
    pub fn new(
        id: impl Into<String>,
        purpose: impl Into<String>,
        label: impl Into<String>,
        condition: &str,
        action: Action,
        registry: &AttributeRegistry,
    ) -> Result<Self, PolicyError> {
        let id = id.into();
        let mut parsed = parse_condition(condition).map_err(|source| PolicyError::Condition {
            policy: id.clone(),
            source,
        })?;
        parsed
            .classify(|name| registry.class_of(name))
            .map_err(|attribute| PolicyError::UnknownAttribute {
                policy: id.clone(),
                attribute,
            })?;
        Ok(Self::from_condition(id, purpose, label, parsed, action))
    }

    /// Builds a policy from an already classified condition.
    pub fn from_condition(
        id: impl Into<String>,
        purpose: impl Into<String>,
        label: impl Into<String>,
        condition: Condition,
        action: Action,
    ) -> Self {
        let consents = condition.attributes_of(AttrClass::Consent);
        Policy {
            id: id.into(),
            purpose: purpose.into(),
            label: label.into(),
            condition,
            action,
            consents,
        }
    }

    /// Consent attributes referenced by the condition.
    pub fn consents(&self) -> &BTreeSet<String> {
        &self.consents
    }

    /// Condition under which the labeled element is preserved.
    pub fn keep_condition(&self) -> Condition {
        match self.action {
            Action::Keep => self.condition.clone(),
            Action::Mask => Condition::not(self.condition.clone()),
        }
    }

    /// Consents whose joint truth preserves the element, for KEEP policies whose
    /// condition is a plain conjunction of consent tests. Only such policies take
    /// part in masking deduplication.
    pub fn coverable_consents(&self) -> Option<BTreeSet<String>> {
        match self.action {
            Action::Keep => self.condition.consent_conjunction(),
            Action::Mask => None,
        }
    }

    pub fn key(&self) -> (&str, &str, &str) {
        (&self.purpose, &self.label, &self.id)
    }

    pub fn to_record(&self) -> PolicyRecord {
        PolicyRecord {
            id: self.id.clone(),
            purpose: self.purpose.clone(),
            label: self.label.clone(),
            condition: self.condition.render(),
            action: self.action,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: ({}, {}, <{}, {}>)",
            self.id, self.purpose, self.label, self.condition, self.action
        )
    }
}

/// Policies in force for `purpose`: its own plus every ancestor's, deduplicated.
/// When a label carries any MASK policy, KEEP policies on that label are dropped.
pub fn effective_policies(
    purpose: &str,
    catalog: &PolicyCatalog,
) -> Result<Vec<Policy>, PolicyError> {
    let mut scope = catalog.purposes.ancestors(purpose)?;
    scope.insert(purpose.to_string());

    let mut by_key: BTreeMap<(String, String, String), &Policy> = BTreeMap::new();
    for p in catalog.policies.iter().filter(|p| scope.contains(&p.purpose)) {
        by_key
            .entry((p.label.clone(), p.id.clone(), p.purpose.clone()))
            .or_insert(p);
    }
    let masked_labels: BTreeSet<&str> = by_key
        .values()
        .filter(|p| p.action == Action::Mask)
        .map(|p| p.label.as_str())
        .collect();
    // Identical (label, condition, action) inherited along several routes collapse to one.
    let mut seen = BTreeSet::new();
    Ok(by_key
        .into_values()
        .filter(|p| p.action == Action::Mask || !masked_labels.contains(p.label.as_str()))
        .filter(|p| seen.insert((p.label.clone(), p.action, p.condition.render())))
        .cloned()
        .collect())
}

/// Pairs every labeled path of `relation` with the policies carrying that label,
/// ordered by path text, then policy id.
pub fn match_policies(
    relation: &RelationSchema,
    assignments: &[LabelAssignment],
    policies: &[Policy],
) -> Vec<(FieldPath, Policy)> {
    let mut out: BTreeMap<(String, String, String), (FieldPath, Policy)> = BTreeMap::new();
    for a in assignments.iter().filter(|a| a.relation == relation.name) {
        for p in policies.iter().filter(|p| p.label == a.label) {
            out.entry((a.path.render(), p.id.clone(), p.purpose.clone()))
                .or_insert_with(|| (a.path.clone(), p.clone()));
        }
    }
    out.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    fn registry() -> AttributeRegistry {
        AttributeRegistry::from_pairs([
            ("c1", AttrClass::Consent),
            ("c2", AttrClass::Consent),
            ("region", AttrClass::Accessor),
        ])
        .unwrap()
    }

    fn catalog(purposes: &[(&str, &[&str])], policies: &[(&str, &str, &str, &str, Action)]) -> PolicyCatalog {
        let reg = registry();
        PolicyCatalog::new(
            "test",
            ["L", "M"].map(String::from),
            purposes
                .iter()
                .map(|(n, ps)| Purpose::new(*n, ps.iter().copied())),
            reg.clone(),
            policies
                .iter()
                .map(|(id, g, l, c, a)| Policy::new(*id, *g, *l, c, *a, &reg).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn consents_are_exactly_consent_attributes() {
        let p = Policy::new("p", "ads", "L", "c1 AND region = 'eu' OR NOT c2", Action::Keep, &registry()).unwrap();
        assert_eq!(p.consents().iter().collect::<Vec<_>>(), ["c1", "c2"]);
        assert!(p.coverable_consents().is_none());
        let q = Policy::new("q", "ads", "L", "c1 AND c2", Action::Keep, &registry()).unwrap();
        assert_eq!(q.coverable_consents().unwrap().len(), 2);
    }

    #[test]
    fn unknown_attribute_rejected() {
        let err = Policy::new("p", "ads", "L", "mystery", Action::Keep, &registry()).unwrap_err();
        assert!(matches!(err, PolicyError::UnknownAttribute { attribute, .. } if attribute == "mystery"));
    }

    #[test]
    fn child_inherits_parent_policies() {
        let cat = catalog(
            &[("ads", &[]), ("ads_child", &["ads"])],
            &[("p1", "ads", "L", "c1", Action::Keep)],
        );
        let eff = effective_policies("ads_child", &cat).unwrap();
        assert_eq!(eff.len(), 1);
        assert_eq!(eff[0].id, "p1");
        assert_eq!(eff, effective_policies("ads", &cat).unwrap());
    }

    #[test]
    fn mask_beats_keep_on_same_label() {
        let cat = catalog(
            &[("parent", &[]), ("child", &["parent"])],
            &[
                ("keep", "parent", "L", "c1", Action::Keep),
                ("mask", "child", "L", "TRUE", Action::Mask),
                ("other", "parent", "M", "c2", Action::Keep),
            ],
        );
        let ids: Vec<_> = effective_policies("child", &cat)
            .unwrap()
            .into_iter()
            .map(|p| p.id)
            .collect();
        assert_eq!(ids, ["mask", "other"]);
        let parent: Vec<_> = effective_policies("parent", &cat)
            .unwrap()
            .into_iter()
            .map(|p| p.id)
            .collect();
        assert_eq!(parent, ["keep", "other"]);
    }

    #[test]
    fn diamond_inheritance_deduplicates() {
        let cat = catalog(
            &[("root", &[]), ("a", &["root"]), ("b", &["root"]), ("leaf", &["a", "b"])],
            &[
                ("pa", "a", "L", "c1", Action::Keep),
                ("pb", "b", "L", "c1", Action::Keep),
            ],
        );
        let eff = effective_policies("leaf", &cat).unwrap();
        assert_eq!(eff.len(), 1);
        assert_eq!(eff[0].id, "pa");
    }

    #[test]
    fn unknown_purpose() {
        let cat = catalog(&[("ads", &[])], &[]);
        assert!(matches!(
            effective_policies("jobs", &cat),
            Err(PolicyError::UnknownPurpose(_))
        ));
    }

    #[test]
    fn matching_pairs_labels_with_policies() {
        let schema = samples::t1_schema();
        let reg = AttributeRegistry::from_pairs([("allowEduForAds", AttrClass::Consent)]).unwrap();
        let p = Policy::new("edu_ads", "ads", "education", "allowEduForAds", Action::Keep, &reg).unwrap();
        let q = Policy::new("edu_ads_2", "ads", "education", "allowEduForAds", Action::Keep, &reg).unwrap();
        let assignments = vec![LabelAssignment::new("T1", "$.col2", "education").unwrap()];

        let pairs = match_policies(&schema, &assignments, std::slice::from_ref(&p));
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].0.render(), "$.col2");

        assert!(match_policies(&schema, &[], &[p.clone()]).is_empty());

        let pairs = match_policies(&schema, &assignments, &[q, p]);
        let ids: Vec<_> = pairs.iter().map(|(_, p)| p.id.as_str()).collect();
        assert_eq!(ids, ["edu_ads", "edu_ads_2"]);
    }
}
