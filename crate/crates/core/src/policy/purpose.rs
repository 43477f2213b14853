use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PolicyError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Purpose {
    pub name: String,
    #[serde(default)]
    pub parents: Vec<String>,
}

impl Purpose {
    pub fn new<I, S>(name: impl Into<String>, parents: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Purpose {
            name: name.into(),
            parents: parents.into_iter().map(Into::into).collect(),
        }
    }
}

/// Purposes with parent edges; always acyclic once constructed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PurposeGraph {
    parents: BTreeMap<String, Vec<String>>,
}

impl PurposeGraph {
    pub fn new(purposes: impl IntoIterator<Item = Purpose>) -> Result<Self, PolicyError> {
        let mut parents = BTreeMap::new();
        for p in purposes {
            if parents.insert(p.name.clone(), p.parents).is_some() {
                return Err(PolicyError::DuplicatePurpose(p.name));
            }
        }
        for ps in parents.values() {
            if let Some(missing) = ps.iter().find(|p| !parents.contains_key(*p)) {
                return Err(PolicyError::UnknownPurpose(missing.clone()));
            }
        }
        let graph = PurposeGraph { parents };
        graph.check_acyclic()?;
        Ok(graph)
    }

    fn check_acyclic(&self) -> Result<(), PolicyError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Visiting,
            Done,
        }
        let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
        fn visit<'a>(
            g: &'a PurposeGraph,
            node: &'a str,
            marks: &mut BTreeMap<&'a str, Mark>,
        ) -> Result<(), PolicyError> {
            match marks.get(node) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Visiting) => return Err(PolicyError::PurposeCycle(node.to_string())),
                None => {}
            }
            marks.insert(node, Mark::Visiting);
            for parent in &g.parents[node] {
                visit(g, parent, marks)?;
            }
            marks.insert(node, Mark::Done);
            Ok(())
        }
        for node in self.parents.keys() {
            visit(self, node, &mut marks)?;
        }
        Ok(())
    }

    pub fn contains(&self, purpose: &str) -> bool {
        self.parents.contains_key(purpose)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(String::as_str)
    }

    pub fn parents_of(&self, purpose: &str) -> Option<&[String]> {
        self.parents.get(purpose).map(Vec::as_slice)
    }

    /// All transitive parents of `purpose` (excluding itself).
    pub fn ancestors(&self, purpose: &str) -> Result<BTreeSet<String>, PolicyError> {
        if !self.contains(purpose) {
            return Err(PolicyError::UnknownPurpose(purpose.to_string()));
        }
        let mut out = BTreeSet::new();
        let mut stack = vec![purpose];
        while let Some(node) = stack.pop() {
            for parent in &self.parents[node] {
                if out.insert(parent.clone()) {
                    stack.push(parent);
                }
            }
        }
        Ok(out)
    }

    pub fn purposes(&self) -> Vec<Purpose> {
        self.parents
            .iter()
            .map(|(n, ps)| Purpose::new(n.clone(), ps.iter().cloned()))
            .collect()
    }
}
