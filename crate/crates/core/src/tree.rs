//! Verification trees.
//!
//! A tree starts as a single root node holding the lemma name and grows one
//! endpoint at a time: expanding an endpoint merges the two-depth subtree
//! reported by the prover (the endpoint plus its applicable rules) into the
//! tree. Nodes are addressed by [`NodeIdx`] handles, i.e. by tree position;
//! the `(id, step)` pair is only used to match states across trees.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Identifier of a rule: the low 32 bits of its FNV-1a hash, shown as 8 hex digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn value(self) -> u32 {
        self.0
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.len() != 8 || !text.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(Error::InvalidArgument(format!(
                "node id must be 8 lowercase hex digits, got {text:?}"
            )));
        }
        u32::from_str_radix(text, 16)
            .map(NodeId)
            .map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08x}", self.0)
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        NodeId::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// Hashes a rule into its node id.
pub fn node_id(rule: &str) -> Result<NodeId> {
    if rule.is_empty() {
        return Err(Error::InvalidArgument("rule text must be non-empty".into()));
    }
    Ok(NodeId(fnv1a64(rule.as_bytes()) as u32))
}

/// One proof state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleNode {
    pub id: NodeId,
    pub step: usize,
    pub rule: String,
}

impl RuleNode {
    pub fn new(rule: impl Into<String>, step: usize) -> Result<Self> {
        let rule = rule.into();
        Ok(RuleNode { id: node_id(&rule)?, step, rule })
    }

    /// The `(id, step)` pair used to recognise the same state in different trees.
    pub fn key(&self) -> (NodeId, usize) {
        (self.id, self.step)
    }
}

/// Outcome of correctness determination for one path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathVerdict {
    IncorrectLoop,
    CorrectIncomplete,
    CorrectComplete,
}

/// A root-to-node sequence of proof states.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofPath {
    pub nodes: Vec<RuleNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<PathVerdict>,
}

impl ProofPath {
    pub fn new(nodes: Vec<RuleNode>) -> Self {
        ProofPath { nodes, verdict: None }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn last(&self) -> Option<&RuleNode> {
        self.nodes.last()
    }

    pub fn rules(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.rule.as_str())
    }
}

/// Handle to a node position inside one [`VerificationTree`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIdx(pub(crate) usize);

impl NodeIdx {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
struct Slot {
    node: RuleNode,
    parent: Option<NodeIdx>,
    /// `None` while the node is a collapsed endpoint.
    children: Option<Vec<NodeIdx>>,
}

/// An incrementally expanded tree of proof states.
///
/// Endpoints are the nodes that have not been expanded yet. A node expanded
/// with an empty child list is a terminal leaf and is no longer an endpoint.
#[derive(Clone, Debug)]
pub struct VerificationTree {
    slots: Vec<Slot>,
    endpoints: usize,
    depth_bound: usize,
}

impl VerificationTree {
    pub const ROOT: NodeIdx = NodeIdx(0);

    pub fn new(lemma: &str, depth_bound: usize) -> Result<Self> {
        if depth_bound == 0 {
            return Err(Error::InvalidArgument("depth bound must be positive".into()));
        }
        let root = RuleNode::new(lemma, 0)?;
        Ok(VerificationTree {
            slots: vec![Slot { node: root, parent: None, children: None }],
            endpoints: 1,
            depth_bound,
        })
    }

    pub fn root(&self) -> &RuleNode {
        &self.slots[0].node
    }

    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    pub fn extend_depth_bound(&mut self, by: usize) {
        self.depth_bound += by;
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn node(&self, idx: NodeIdx) -> Result<&RuleNode> {
        self.slot(idx).map(|s| &s.node)
    }

    pub fn parent(&self, idx: NodeIdx) -> Result<Option<NodeIdx>> {
        self.slot(idx).map(|s| s.parent)
    }

    /// Children of an expanded node; `None` for endpoints.
    pub fn children(&self, idx: NodeIdx) -> Result<Option<&[NodeIdx]>> {
        self.slot(idx).map(|s| s.children.as_deref())
    }

    pub fn is_endpoint(&self, idx: NodeIdx) -> bool {
        self.slot(idx).map(|s| s.children.is_none()).unwrap_or(false)
    }

    pub fn endpoint_count(&self) -> usize {
        self.endpoints
    }

    pub fn endpoints(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.children.is_none())
            .map(|(i, _)| NodeIdx(i))
    }

    /// Position of `idx` among its siblings (0 for the root).
    pub fn sibling_index(&self, idx: NodeIdx) -> Result<usize> {
        let slot = self.slot(idx)?;
        match slot.parent {
            None => Ok(0),
            Some(p) => Ok(self.slots[p.0]
                .children
                .as_ref()
                .and_then(|c| c.iter().position(|&i| i == idx))
                .expect("child listed under its parent")),
        }
    }

    /// First node position holding the given `(id, step)` state.
    pub fn find(&self, id: NodeId, step: usize) -> Option<NodeIdx> {
        self.slots
            .iter()
            .position(|s| s.node.id == id && s.node.step == step)
            .map(NodeIdx)
    }

    /// Merges the two-depth subtree rooted at `endpoint` into the tree.
    pub fn expand_endpoint<S: AsRef<str>>(
        &mut self,
        endpoint: NodeIdx,
        children: &[S],
    ) -> Result<Vec<NodeIdx>> {
        let slot = self.slot(endpoint)?;
        if slot.children.is_some() {
            return Err(Error::InvalidState(format!(
                "node {} at step {} is not an endpoint",
                slot.node.id, slot.node.step
            )));
        }
        let step = slot.node.step + 1;
        if step > self.depth_bound {
            return Err(Error::DepthExceeded { step, bound: self.depth_bound });
        }
        // Validate everything before touching the tree.
        let nodes = children
            .iter()
            .map(|rule| RuleNode::new(rule.as_ref(), step))
            .collect::<Result<Vec<_>>>()?;

        let first = self.slots.len();
        let handles: Vec<NodeIdx> = (first..first + nodes.len()).map(NodeIdx).collect();
        self.slots.extend(nodes.into_iter().map(|node| Slot {
            node,
            parent: Some(endpoint),
            children: None,
        }));
        self.slots[endpoint.0].children = Some(handles.clone());
        self.endpoints = self.endpoints - 1 + handles.len();
        Ok(handles)
    }

    pub fn path_indices(&self, idx: NodeIdx) -> Result<Vec<NodeIdx>> {
        let mut chain = vec![idx];
        let mut cur = self.slot(idx)?.parent;
        while let Some(p) = cur {
            chain.push(p);
            cur = self.slots[p.0].parent;
        }
        chain.reverse();
        Ok(chain)
    }

    /// The root-to-`idx` path.
    pub fn path_to(&self, idx: NodeIdx) -> Result<ProofPath> {
        let nodes = self
            .path_indices(idx)?
            .into_iter()
            .map(|i| self.slots[i.0].node.clone())
            .collect();
        Ok(ProofPath::new(nodes))
    }

    fn slot(&self, idx: NodeIdx) -> Result<&Slot> {
        self.slots
            .get(idx.0)
            .ok_or_else(|| Error::NotFound(format!("node handle {} is not in this tree", idx.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_tree() -> VerificationTree {
        let mut tree = VerificationTree::new("Key_secrecy", 5).unwrap();
        tree.expand_endpoint(VerificationTree::ROOT, &["simplify", "induction"]).unwrap();
        tree
    }

    #[test]
    fn node_id_is_deterministic_hex() {
        let a = node_id("simplify").unwrap();
        assert_eq!(a, node_id("simplify").unwrap());
        let text = a.to_string();
        assert_eq!(text.len(), 8);
        assert!(text.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()));
        assert_eq!(NodeId::parse(&text).unwrap(), a);
    }

    #[test]
    fn node_id_distinguishes_simplify_and_induction() {
        // Independent evaluation of FNV-1a 64, truncated to 32 bits.
        fn reference(s: &str) -> u32 {
            let mut h: u64 = 14695981039346656037;
            for b in s.bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(1099511628211);
            }
            (h & 0xffff_ffff) as u32
        }
        let s = node_id("simplify").unwrap();
        let i = node_id("induction").unwrap();
        assert_eq!(s.value(), reference("simplify"));
        assert_eq!(i.value(), reference("induction"));
        assert_ne!(s, i);
    }

    #[test]
    fn empty_rule_rejected() {
        assert!(matches!(node_id(""), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn first_split_matches_construction_figure() {
        let tree = sample_tree();
        assert_eq!(tree.len(), 3);
        assert_eq!(tree.endpoint_count(), 2);
        let kids = tree.children(VerificationTree::ROOT).unwrap().unwrap();
        let rules: Vec<_> = kids.iter().map(|&k| tree.node(k).unwrap().rule.clone()).collect();
        assert_eq!(rules, ["simplify", "induction"]);
        assert!(kids.iter().all(|&k| tree.node(k).unwrap().step == 1));
    }

    #[test]
    fn empty_expansion_makes_terminal_leaf() {
        let mut tree = sample_tree();
        let leaf = tree.children(VerificationTree::ROOT).unwrap().unwrap()[1];
        tree.expand_endpoint::<&str>(leaf, &[]).unwrap();
        assert_eq!(tree.endpoint_count(), 1);
        assert!(!tree.is_endpoint(leaf));
        assert_eq!(tree.children(leaf).unwrap().unwrap().len(), 0);
    }

    #[test]
    fn expanding_twice_is_invalid_state() {
        let mut tree = sample_tree();
        let err = tree.expand_endpoint(VerificationTree::ROOT, &["x"]).unwrap_err();
        assert!(matches!(err, Error::InvalidState(_)));
    }

    #[test]
    fn depth_bound_enforced() {
        let mut tree = VerificationTree::new("lemma", 1).unwrap();
        let kids = tree.expand_endpoint(VerificationTree::ROOT, &["a"]).unwrap();
        let err = tree.expand_endpoint(kids[0], &["b"]).unwrap_err();
        assert_eq!(err, Error::DepthExceeded { step: 2, bound: 1 });
        tree.extend_depth_bound(5);
        tree.expand_endpoint(kids[0], &["b"]).unwrap();
    }

    #[test]
    fn path_lengths_follow_steps() {
        let mut tree = sample_tree();
        assert_eq!(tree.path_to(VerificationTree::ROOT).unwrap().len(), 1);
        let simplify = tree.children(VerificationTree::ROOT).unwrap().unwrap()[0];
        let kids = tree
            .expand_endpoint(simplify, &["Send( S, k ) >o #i", "KU( h(k) ) @ #vk"])
            .unwrap();
        let path = tree.path_to(kids[1]).unwrap();
        assert_eq!(path.len(), 3);
        assert_eq!(path.nodes[0], *tree.root());
        assert_eq!(path.nodes[2].rule, "KU( h(k) ) @ #vk");
        assert!(matches!(tree.path_to(NodeIdx(99)), Err(Error::NotFound(_))));
    }

    #[test]
    fn merged_tree_matches_direct_construction() {
        // (a) first split, (b) two-depth subtree under c3f00ae8-like node, (c) merge.
        let mut grown = sample_tree();
        let simplify = grown.children(VerificationTree::ROOT).unwrap().unwrap()[0];
        grown.expand_endpoint(simplify, &["Send( S, k ) >o #i", "KU( h(k) ) @ #vk"]).unwrap();
        let ku = grown.children(simplify).unwrap().unwrap()[1];
        grown.expand_endpoint(ku, &["KU( h(k) ) @ #vk"]).unwrap();

        let expected = [
            ("Key_secrecy", 0, None),
            ("simplify", 1, Some(0)),
            ("induction", 1, Some(0)),
            ("Send( S, k ) >o #i", 2, Some(1)),
            ("KU( h(k) ) @ #vk", 2, Some(1)),
            ("KU( h(k) ) @ #vk", 3, Some(4)),
        ];
        assert_eq!(grown.len(), expected.len());
        for (i, (rule, step, parent)) in expected.iter().enumerate() {
            let node = grown.node(NodeIdx(i)).unwrap();
            assert_eq!((node.rule.as_str(), node.step), (*rule, *step));
            assert_eq!(grown.parent(NodeIdx(i)).unwrap().map(|p| p.0), *parent);
        }
        // Same rule at two depths: same id, distinct (id, step) keys.
        let a = grown.node(NodeIdx(4)).unwrap();
        let b = grown.node(NodeIdx(5)).unwrap();
        assert_eq!(a.id, b.id);
        assert_ne!(a.key(), b.key());
        assert_eq!(grown.endpoint_count(), 3);
    }
}
