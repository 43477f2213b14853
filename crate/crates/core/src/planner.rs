//! Schema tree over matched field paths, and removal of redundant maskings.
//!
//! Each node is one path operator; a node that ends a matched path carries the
//! policies applying there. Pruning walks the tree top-down. A node only needs to
//! check consents its ancestors have not already checked, and among its own
//! policies it keeps a small subset that still checks all of them.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::policy::Policy;
use crate::schema::{FieldPath, PathOp};

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaTreeNode {
    pub op: PathOp,
    /// Canonical text of `op`; siblings have distinct keys and are sorted by it.
    pub key: String,
    pub children: Vec<SchemaTreeNode>,
    /// Policies applying to the path ending at this node.
    pub policies: Vec<Policy>,
    /// Policies removed by pruning (kept for reporting).
    pub pruned: Vec<Policy>,
}

impl SchemaTreeNode {
    fn new(op: PathOp) -> Self {
        SchemaTreeNode {
            key: op.render(),
            op,
            children: Vec::new(),
            policies: Vec::new(),
            pruned: Vec::new(),
        }
    }

    fn child_mut(&mut self, op: &PathOp) -> &mut SchemaTreeNode {
        let key = op.render();
        let idx = match self.children.binary_search_by(|c| c.key.as_str().cmp(&key)) {
            Ok(i) => i,
            Err(i) => {
                self.children.insert(i, SchemaTreeNode::new(op.clone()));
                i
            }
        };
        &mut self.children[idx]
    }

    /// Number of policies attached anywhere in the tree.
    pub fn policy_count(&self) -> usize {
        self.policies.len() + self.children.iter().map(Self::policy_count).sum::<usize>()
    }

    pub fn pruned_count(&self) -> usize {
        self.pruned.len() + self.children.iter().map(Self::pruned_count).sum::<usize>()
    }

    /// `(path, policy)` pairs in pre-order, policies at a node in id order.
    pub fn pairs(&self) -> Vec<(FieldPath, Policy)> {
        let mut out = Vec::new();
        let mut ops = Vec::new();
        self.collect(&mut ops, &mut out, false);
        out
    }

    /// Pairs removed by pruning, in pre-order.
    pub fn pruned_pairs(&self) -> Vec<(FieldPath, Policy)> {
        let mut out = Vec::new();
        let mut ops = Vec::new();
        self.collect(&mut ops, &mut out, true);
        out
    }

    fn collect(&self, ops: &mut Vec<PathOp>, out: &mut Vec<(FieldPath, Policy)>, pruned: bool) {
        ops.push(self.op.clone());
        let list = if pruned { &self.pruned } else { &self.policies };
        if !list.is_empty() {
            let path = FieldPath::from_ops(ops.clone()).expect("tree paths come from valid paths");
            out.extend(list.iter().map(|p| (path.clone(), p.clone())));
        }
        for c in &self.children {
            c.collect(ops, out, pruned);
        }
        ops.pop();
    }

    /// Indented dump: one line per node with retained and pruned policy ids.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_into(&mut out, 0);
        out
    }

    fn dump_into(&self, out: &mut String, depth: usize) {
        let _ = write!(out, "{:indent$}{}", "", self.key, indent = depth * 2);
        if !self.policies.is_empty() {
            let ids: Vec<_> = self.policies.iter().map(|p| p.id.as_str()).collect();
            let _ = write!(out, "  keep=[{}]", ids.join(", "));
        }
        if !self.pruned.is_empty() {
            let ids: Vec<_> = self.pruned.iter().map(|p| p.id.as_str()).collect();
            let _ = write!(out, "  pruned=[{}]", ids.join(", "));
        }
        out.push('\n');
        for c in &self.children {
            c.dump_into(out, depth + 1);
        }
    }
}

/// Merges shared path prefixes; policies attach to the node ending each path.
pub fn build_schema_tree(pairs: &[(FieldPath, Policy)]) -> SchemaTreeNode {
    let mut root = SchemaTreeNode::new(PathOp::Root);
    for (path, policy) in pairs {
        let mut node = &mut root;
        for op in &path.ops()[1..] {
            node = node.child_mut(op);
        }
        if !node.policies.iter().any(|p| p.key() == policy.key()) {
            node.policies.push(policy.clone());
        }
    }
    sort_policies(&mut root);
    root
}

fn sort_policies(node: &mut SchemaTreeNode) {
    node.policies.sort_by(|a, b| (&a.id, &a.purpose).cmp(&(&b.id, &b.purpose)));
    for c in &mut node.children {
        sort_policies(c);
    }
}

/// Greedy cover of `delta` by the candidate consent sets. Each round picks the
/// candidate covering the most uncovered consents; ties prefer the larger set,
/// then the smaller id. Returns indices into `candidates` in pick order.
pub fn greedy_cover(delta: &BTreeSet<String>, candidates: &[(&str, &BTreeSet<String>)]) -> Vec<usize> {
    let mut remaining = delta.clone();
    let mut used = vec![false; candidates.len()];
    let mut picked = Vec::new();
    while !remaining.is_empty() {
        let best = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, (id, cs))| (i, cs.intersection(&remaining).count(), cs.len(), *id))
            .filter(|(_, gain, _, _)| *gain > 0)
            .max_by(|a, b| a.1.cmp(&b.1).then(a.2.cmp(&b.2)).then(b.3.cmp(a.3)));
        let Some((i, ..)) = best else {
            break;
        };
        used[i] = true;
        for c in candidates[i].1 {
            remaining.remove(c);
        }
        picked.push(i);
    }
    picked
}

/// Returns a pruned copy of the tree.
///
/// Only KEEP policies whose condition is a conjunction of consent tests take part:
/// their consents are what ancestors can cover. Any other policy is retained as is
/// and covers nothing.
pub fn prune_policies(root: &SchemaTreeNode) -> SchemaTreeNode {
    let mut out = root.clone();
    prune_node(&mut out, &BTreeSet::new());
    out
}

fn prune_node(node: &mut SchemaTreeNode, covered: &BTreeSet<String>) {
    let all = std::mem::take(&mut node.policies);
    let mut retained = Vec::new();
    let mut coverable: Vec<(Policy, BTreeSet<String>)> = Vec::new();
    for p in all {
        match p.coverable_consents() {
            Some(cs) => coverable.push((p, cs)),
            None => retained.push(p),
        }
    }

    let node_consents: BTreeSet<String> = coverable.iter().flat_map(|(_, cs)| cs.iter().cloned()).collect();
    let delta: BTreeSet<String> = node_consents.difference(covered).cloned().collect();
    let candidates: Vec<(&str, &BTreeSet<String>)> =
        coverable.iter().map(|(p, cs)| (p.id.as_str(), cs)).collect();
    let picked: BTreeSet<usize> = greedy_cover(&delta, &candidates).into_iter().collect();

    let mut child_cover = covered.clone();
    for (i, (p, cs)) in coverable.into_iter().enumerate() {
        if picked.contains(&i) {
            child_cover.extend(cs);
            retained.push(p);
        } else {
            node.pruned.push(p);
        }
    }
    retained.sort_by(|a, b| (&a.id, &a.purpose).cmp(&(&b.id, &b.purpose)));
    node.policies = retained;

    for c in &mut node.children {
        prune_node(c, &child_cover);
    }
}
