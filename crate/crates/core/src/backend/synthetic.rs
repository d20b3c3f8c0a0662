use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BackendFactory, BackendReply, ProverBackend};
use crate::error::{Error, Result};
use crate::loop_detect::{levenshtein_within, LoopDetectorConfig, PathLoopDetector};
use crate::rng::{derive_seed, stream};
use crate::trace::{TraceFlags, TraceRecord};
use crate::tree::{node_id, NodeId, ProofPath, RuleNode};

/// Where the supporting child sits among the children of a planted node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportPosition {
    Random,
    First,
    Last,
}

/// Shape of a generated proof tree with one planted supporting path.
///
/// Every planted node has `branching` children: one supporting child and
/// `branching - 1` decoys. A decoy subtree fans out `decoys_per_node` ways
/// with mutually dissimilar rules for `decoy_delay` steps, then turns into an
/// endless chain of rules from `loop_template` with `{K}` counting up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub lemma: String,
    pub correct_depth: usize,
    pub branching: usize,
    pub decoy_delay: usize,
    pub decoys_per_node: usize,
    pub loop_template: String,
    pub supporting_position: SupportPosition,
    /// Probability that a decoy node before the loop onset is a dead end.
    pub dead_rate: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 7,
            lemma: "Key_secrecy".into(),
            correct_depth: 30,
            branching: 2,
            decoy_delay: 10,
            decoys_per_node: 2,
            loop_template: "!KU( aenc(<'2', ~ni.{K}, nr.{K}, $R.{K}>, pk(~ltkA.{K}))) @ #vk.{K}".into(),
            supporting_position: SupportPosition::Last,
            dead_rate: 0.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self, bmax: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.correct_depth < 1 {
            return bad("backend.synthetic.correct_depth must be >= 1".into());
        }
        if self.branching < 2 {
            return bad("backend.synthetic.branching must be >= 2".into());
        }
        if self.decoys_per_node < 1 {
            return bad("backend.synthetic.decoys_per_node must be >= 1".into());
        }
        if self.branching > bmax || self.decoys_per_node > bmax {
            return Err(Error::BranchingExceeded { got: self.branching.max(self.decoys_per_node), max: bmax });
        }
        if !self.loop_template.contains("{K}") {
            return bad("backend.synthetic.loop_template must contain {K}".into());
        }
        if !(0.0..1.0).contains(&self.dead_rate) {
            return bad("backend.synthetic.dead_rate must lie in [0, 1)".into());
        }
        if self.lemma.is_empty() {
            return bad("backend.synthetic.lemma must be non-empty".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Planted { depth: usize },
    Decoy { age: usize },
    Loop { k: usize },
}

#[derive(Clone, Copy, Debug)]
struct NodeState {
    kind: Kind,
    key: u64,
}

#[derive(Clone, Debug)]
struct Expansion {
    reply: BackendReply,
    children: Vec<NodeState>,
}

/// Deterministic generator of the tree described by a [`SyntheticSpec`].
///
/// Replies depend only on the [`SyntheticSpec`] and the queried path. Generated nodes are
/// cached by a hash of their root path, so repeated queries are cheap.
#[derive(Clone, Debug)]
pub struct SyntheticBackend {
    spec: SyntheticSpec,
    states: HashMap<u64, NodeState>,
    expansions: HashMap<u64, Expansion>,
    // (id, path hash) per position of the last resolved path, so a query that
    // shares a prefix with the previous one only rehashes the new suffix.
    chain: Vec<(NodeId, u64)>,
}

const MIN_DISTANCE: f64 = 0.5;
const MAX_ATTEMPTS: usize = 64;

fn path_hash(prev: Option<u64>, rule: &str) -> u64 {
    let mut h = prev.unwrap_or(0xcbf2_9ce4_8422_2325);
    for &b in rule.as_bytes().iter().chain(b"\n") {
        h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl SyntheticBackend {
    pub fn new(spec: SyntheticSpec) -> Self {
        let root = NodeState { kind: Kind::Planted { depth: 0 }, key: derive_seed(spec.seed, "synthetic-root", &[]) };
        let mut states = HashMap::new();
        states.insert(path_hash(None, &spec.lemma), root);
        SyntheticBackend { spec, states, expansions: HashMap::new(), chain: Vec::new() }
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    /// Rule texts of the planted path, root first. Ground truth for tests.
    pub fn planted_path(&mut self) -> Result<Vec<String>> {
        let mut rules = vec![self.spec.lemma.clone()];
        let mut ancestry = vec![path_hash(None, &self.spec.lemma)];
        for _ in 0..self.spec.correct_depth {
            let path = ProofPath::new(
                rules.iter().enumerate().map(|(i, r)| RuleNode::new(r.as_str(), i)).collect::<Result<_>>()?,
            );
            let hash = *ancestry.last().unwrap();
            let exp = self.expansion(hash, &path)?;
            let (rule, _) = exp
                .children
                .iter()
                .zip(match &exp.reply {
                    BackendReply::Children(c) => c.iter(),
                    _ => unreachable!("planted nodes above the target depth have children"),
                })
                .find(|(s, _)| matches!(s.kind, Kind::Planted { .. }))
                .map(|(s, r)| (r.clone(), *s))
                .expect("one supporting child");
            ancestry.push(path_hash(Some(hash), &rule));
            rules.push(rule);
        }
        Ok(rules)
    }

    /// Whether every node of the path lies on the planted path.
    pub fn is_planted(&mut self, path: &ProofPath) -> Result<bool> {
        let state = self.resolve(path)?;
        Ok(matches!(state.kind, Kind::Planted { depth } if depth + 1 == path.len()))
    }

    /// Index of the supporting child of a planted node, if the path ends at one.
    pub fn supporting_index(&mut self, path: &ProofPath) -> Result<Option<usize>> {
        let hash = self.resolve_hash(path)?;
        if !matches!(self.states[&hash].kind, Kind::Planted { .. }) {
            return Ok(None);
        }
        let exp = self.expansion(hash, path)?;
        Ok(exp.children.iter().position(|s| matches!(s.kind, Kind::Planted { .. })))
    }

    fn resolve(&mut self, path: &ProofPath) -> Result<NodeState> {
        let hash = self.resolve_hash(path)?;
        Ok(self.states[&hash])
    }

    fn resolve_hash(&mut self, path: &ProofPath) -> Result<u64> {
        let root = path.nodes.first().ok_or_else(|| Error::InvalidPath("empty path".into()))?;
        if root.rule != self.spec.lemma || root.step != 0 {
            return Err(Error::InvalidPath(format!("path is not rooted at {:?}", self.spec.lemma)));
        }
        let shared = path.nodes.iter().zip(&self.chain).enumerate().take_while(|(i, (n, c))| n.step == *i && n.id == c.0).count();
        self.chain.truncate(shared.max(1));
        if self.chain.is_empty() {
            self.chain.push((root.id, path_hash(None, &root.rule)));
        }
        let mut hash = self.chain.last().expect("root entry").1;
        for (i, node) in path.nodes.iter().enumerate().skip(self.chain.len()) {
            if node.step != i {
                return Err(Error::InvalidPath(format!("node {i} has step {}", node.step)));
            }
            let child = path_hash(Some(hash), &node.rule);
            if !self.states.contains_key(&child) {
                // Not generated by this instance yet: regenerate the parent.
                let prefix = ProofPath::new(path.nodes[..i].to_vec());
                self.expansion(hash, &prefix)?;
                if !self.states.contains_key(&child) {
                    return Err(Error::InvalidPath(format!(
                        "rule {:?} is not a child of step {}",
                        node.rule,
                        i - 1
                    )));
                }
            }
            self.chain.push((node.id, child));
            hash = child;
        }
        Ok(self.chain[path.nodes.len() - 1].1)
    }

    fn expansion(&mut self, hash: u64, path: &ProofPath) -> Result<Expansion> {
        if let Some(exp) = self.expansions.get(&hash) {
            return Ok(exp.clone());
        }
        let state = self.states[&hash];
        let exp = self.generate(state, path);
        if let BackendReply::Children(rules) = &exp.reply {
            for (rule, child) in rules.iter().zip(&exp.children) {
                self.states.insert(path_hash(Some(hash), rule), *child);
            }
        }
        self.expansions.insert(hash, exp.clone());
        Ok(exp)
    }

    fn generate(&self, state: NodeState, path: &ProofPath) -> Expansion {
        let spec = &self.spec;
        let child_key = |i: usize| derive_seed(state.key, "child", &[i as u64]);
        let decoy_or_loop = |key: u64| NodeState {
            kind: if spec.decoy_delay == 0 { Kind::Loop { k: 1 } } else { Kind::Decoy { age: 1 } },
            key,
        };
        let ancestors = || path.rules().collect::<Vec<&str>>();
        match state.kind {
            Kind::Planted { depth } if depth == spec.correct_depth => {
                Expansion { reply: BackendReply::Complete, children: Vec::new() }
            }
            Kind::Planted { depth } => {
                let support = match spec.supporting_position {
                    SupportPosition::First => 0,
                    SupportPosition::Last => spec.branching - 1,
                    SupportPosition::Random => {
                        stream(state.key, "support", &[]).gen_range(0..spec.branching)
                    }
                };
                let children: Vec<NodeState> = (0..spec.branching)
                    .map(|i| {
                        if i == support {
                            NodeState { kind: Kind::Planted { depth: depth + 1 }, key: child_key(i) }
                        } else {
                            decoy_or_loop(child_key(i))
                        }
                    })
                    .collect();
                self.with_rules(children, &ancestors())
            }
            Kind::Decoy { age } => {
                if spec.dead_rate > 0.0 && stream(state.key, "dead", &[]).gen::<f64>() < spec.dead_rate {
                    return Expansion { reply: BackendReply::Dead, children: Vec::new() };
                }
                let children = if age >= spec.decoy_delay {
                    vec![NodeState { kind: Kind::Loop { k: 1 }, key: child_key(0) }]
                } else {
                    (0..spec.decoys_per_node)
                        .map(|i| NodeState { kind: Kind::Decoy { age: age + 1 }, key: child_key(i) })
                        .collect()
                };
                self.with_rules(children, &ancestors())
            }
            Kind::Loop { k } => {
                let children = vec![NodeState { kind: Kind::Loop { k: k + 1 }, key: child_key(0) }];
                self.with_rules(children, &[])
            }
        }
    }

    fn with_rules(&self, children: Vec<NodeState>, ancestors: &[&str]) -> Expansion {
        let rules = children.iter().map(|c| self.rule_for(*c, ancestors)).collect();
        Expansion { reply: BackendReply::Children(rules), children }
    }

    fn rule_for(&self, state: NodeState, ancestors: &[&str]) -> String {
        match state.kind {
            Kind::Loop { k } => self.spec.loop_template.replace("{K}", &k.to_string()),
            Kind::Planted { .. } | Kind::Decoy { .. } => {
                let mut rng = stream(state.key, "rule", &[]);
                let planted = matches!(state.kind, Kind::Planted { .. });
                let mut candidate = String::new();
                for _ in 0..MAX_ATTEMPTS {
                    candidate = if planted { planted_rule(&mut rng) } else { decoy_rule(&mut rng) };
                    if ancestors.iter().all(|a| far_apart(a, &candidate)) {
                        break;
                    }
                }
                candidate
            }
        }
    }

    /// Depth-first export of the generated tree as trace records, cutting each
    /// branch one level below where `loop_cfg` reports a loop, or at a terminal reply.
    pub fn export_trace(&mut self, loop_cfg: &LoopDetectorConfig, max_nodes: usize) -> Result<Vec<TraceRecord>> {
        let mut records: Vec<TraceRecord> = Vec::new();
        let mut index: HashMap<(crate::tree::NodeId, usize), usize> = HashMap::new();
        let mut detector = PathLoopDetector::new(*loop_cfg);
        let root = RuleNode::new(self.spec.lemma.as_str(), 0)?;
        // Stack of (path, pending children to visit).
        let mut path = vec![root];
        let mut pending: Vec<Vec<String>> = Vec::new();
        detector.push(&path[0].rule);
        loop {
            let current = ProofPath::new(path.clone());
            let last = path.last().unwrap().clone();
            let looped = detector.detect();
            let state = self.resolve(&current)?;
            let reply = self.expand(&current)?;
            let (children, complete) = match &reply {
                BackendReply::Children(c) => (c.clone(), false),
                BackendReply::Complete => (Vec::new(), true),
                BackendReply::Dead => (Vec::new(), false),
            };
            let record = TraceRecord {
                id: last.id,
                step: last.step,
                rule: last.rule.clone(),
                children: children.iter().map(|c| node_id(c)).collect::<Result<_>>()?,
                flags: TraceFlags { supporting: matches!(state.kind, Kind::Planted { .. }), complete },
            };
            match index.get(&last.key()) {
                Some(&at) => {
                    if records[at].children.is_empty() && !record.children.is_empty() {
                        records[at] = record;
                    }
                }
                None => {
                    if records.len() >= max_nodes {
                        return Err(Error::InvalidArgument(format!(
                            "trace export exceeds {max_nodes} nodes; lower the depth or delay"
                        )));
                    }
                    index.insert(last.key(), records.len());
                    records.push(record);
                }
            }
            if looped {
                // Searchers query one level past the path end, so the children
                // of a cut node are recorded as bare leaves.
                for rule in &children {
                    let leaf = RuleNode::new(rule.as_str(), last.step + 1)?;
                    if let std::collections::hash_map::Entry::Vacant(e) = index.entry(leaf.key()) {
                        e.insert(records.len());
                        let mut path = current.nodes.clone();
                        path.push(leaf.clone());
                        let kind = self.resolve(&ProofPath::new(path))?.kind;
                        records.push(TraceRecord {
                            id: leaf.id,
                            step: leaf.step,
                            rule: leaf.rule,
                            children: Vec::new(),
                            flags: TraceFlags { supporting: matches!(kind, Kind::Planted { .. }), complete: false },
                        });
                    }
                }
                pending.push(Vec::new());
            } else {
                let mut next = children;
                next.reverse();
                pending.push(next);
            }
            // Advance to the next unvisited node.
            loop {
                match pending.last_mut() {
                    None => return Ok(records),
                    Some(stack) => match stack.pop() {
                        Some(rule) => {
                            let step = path.len();
                            detector.push(&rule);
                            path.push(RuleNode::new(rule, step)?);
                            break;
                        }
                        None => {
                            pending.pop();
                            path.pop();
                            detector.pop();
                            if path.is_empty() {
                                return Ok(records);
                            }
                        }
                    },
                }
            }
        }
    }
}

impl ProverBackend for SyntheticBackend {
    fn lemma(&self) -> &str {
        &self.spec.lemma
    }

    fn expand(&mut self, path: &ProofPath) -> Result<BackendReply> {
        let hash = self.resolve_hash(path)?;
        Ok(self.expansion(hash, path)?.reply)
    }
}

/// Normalized distance of at least [`MIN_DISTANCE`] in both directions.
fn far_apart(a: &str, b: &str) -> bool {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let need = (MIN_DISTANCE * a.len().max(b.len()) as f64).ceil() as usize;
    // Distance >= need  <=>  not within need - 1.
    need == 0 || levenshtein_within(&a, &b, need - 1).is_none()
}

const CONSONANTS: &[u8] = b"bcdfghjklmnpqrstvwxz";
const VOWELS: &[u8] = b"aeiouy";

fn word<R: Rng>(rng: &mut R, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
        if rng.gen_bool(0.5) {
            w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        }
    }
    w
}

fn capitalized<R: Rng>(rng: &mut R, syllables: usize) -> String {
    let w = word(rng, syllables);
    let mut chars = w.chars();
    match chars.next() {
        Some(c) => c.to_ascii_uppercase().to_string() + chars.as_str(),
        None => w,
    }
}

/// Protocol-state goal, e.g. `St_Vakor( ~lim, qesu ) @ #tob`.
fn planted_rule<R: Rng>(rng: &mut R) -> String {
    format!(
        "St_{}( ~{}, {} ) @ #{}",
        capitalized(rng, 3),
        word(rng, 2),
        word(rng, 3),
        word(rng, 2)
    )
}

/// Adversary-knowledge goal, e.g. `!KU( senc(<nir, ~vat>, kup) ) @ #vk`.
fn decoy_rule<R: Rng>(rng: &mut R) -> String {
    format!(
        "!KU( {}(<{}, ~{}>, {}) ) @ #{}",
        word(rng, 2),
        word(rng, 2),
        word(rng, 3),
        word(rng, 2),
        word(rng, 2)
    )
}

/// Creates same-seed [`SyntheticBackend`] instances.
#[derive(Clone, Debug)]
pub struct SyntheticFactory {
    pub spec: SyntheticSpec,
}

impl SyntheticFactory {
    pub fn new(spec: SyntheticSpec) -> Self {
        SyntheticFactory { spec }
    }
}

impl BackendFactory for SyntheticFactory {
    fn create(&self) -> Box<dyn ProverBackend> {
        Box::new(SyntheticBackend::new(self.spec.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loop_detect::{detect_loop, edit_distance};

    fn spec(depth: usize, branching: usize, delay: usize) -> SyntheticSpec {
        SyntheticSpec { correct_depth: depth, branching, decoy_delay: delay, ..SyntheticSpec::default() }
    }

    fn extend(path: &ProofPath, rule: &str) -> ProofPath {
        let mut nodes = path.nodes.clone();
        nodes.push(RuleNode::new(rule, nodes.len()).unwrap());
        ProofPath::new(nodes)
    }

    fn root_path(b: &SyntheticBackend) -> ProofPath {
        ProofPath::new(vec![RuleNode::new(b.lemma(), 0).unwrap()])
    }

    fn children(b: &mut SyntheticBackend, p: &ProofPath) -> Vec<String> {
        match b.expand(p).unwrap() {
            BackendReply::Children(c) => c,
            other => panic!("expected children, got {other:?}"),
        }
    }

    #[test]
    fn minimal_planted_path() {
        let mut b = SyntheticBackend::new(SyntheticSpec { seed: 7, ..spec(1, 2, 3) });
        let root = root_path(&b);
        let kids = children(&mut b, &root);
        assert_eq!(kids.len(), 2);
        let planted = b.planted_path().unwrap();
        assert_eq!(planted.len(), 2);
        assert!(kids.contains(&planted[1]));
        assert_eq!(b.expand(&extend(&root, &planted[1])).unwrap(), BackendReply::Complete);
        let decoy = kids.iter().find(|k| **k != planted[1]).unwrap();
        assert!(matches!(b.expand(&extend(&root, decoy)).unwrap(), BackendReply::Children(_)));
    }

    #[test]
    fn same_seed_same_tree() {
        let mut a = SyntheticBackend::new(spec(4, 3, 2));
        let mut b = SyntheticBackend::new(spec(4, 3, 2));
        let mut frontier = vec![root_path(&a)];
        for _ in 0..4 {
            let mut next = Vec::new();
            for p in &frontier {
                let ka = a.expand(p).unwrap();
                assert_eq!(ka, b.expand(p).unwrap());
                if let BackendReply::Children(kids) = ka {
                    next.extend(kids.iter().map(|k| extend(p, k)));
                }
            }
            frontier = next;
        }
        // A fresh instance resolves deep paths without having seen their prefixes.
        let mut fresh = SyntheticBackend::new(spec(4, 3, 2));
        let deep = frontier.last().unwrap();
        assert_eq!(fresh.expand(deep).unwrap(), a.expand(deep).unwrap());
    }

    #[test]
    fn rejects_foreign_paths() {
        let mut b = SyntheticBackend::new(spec(3, 2, 2));
        let bad_root = ProofPath::new(vec![RuleNode::new("other", 0).unwrap()]);
        assert!(matches!(b.expand(&bad_root), Err(Error::InvalidPath(_))));
        let bogus = extend(&root_path(&b), "not a generated rule");
        assert!(matches!(b.expand(&bogus), Err(Error::InvalidPath(_))));
    }

    #[test]
    fn support_position_modes() {
        for (mode, want) in [(SupportPosition::First, 0), (SupportPosition::Last, 2)] {
            let mut b = SyntheticBackend::new(SyntheticSpec { supporting_position: mode, ..spec(5, 3, 2) });
            let planted = b.planted_path().unwrap();
            let mut path = root_path(&b);
            for rule in &planted[1..] {
                assert_eq!(b.supporting_index(&path).unwrap(), Some(want));
                let kids = children(&mut b, &path);
                assert_eq!(kids[want], *rule);
                path = extend(&path, rule);
            }
            assert!(b.is_planted(&path).unwrap());
        }
    }

    /// Walks the first decoy below the root, always taking child 0.
    fn decoy_walk(b: &mut SyntheticBackend, steps: usize) -> ProofPath {
        let planted = b.planted_path().unwrap();
        let mut path = root_path(b);
        let kids = children(b, &path);
        let decoy = kids.iter().find(|k| **k != planted[1]).unwrap().clone();
        path = extend(&path, &decoy);
        while path.len() < steps + 1 {
            let kids = children(b, &path);
            path = extend(&path, &kids[0]);
        }
        path
    }

    #[test]
    fn decoys_loop_after_delay() {
        let d = 10;
        let mut b = SyntheticBackend::new(spec(30, 2, d));
        let cfg = LoopDetectorConfig::default();
        let path = decoy_walk(&mut b, d + cfg.alpha);
        let rules: Vec<&str> = path.rules().collect();
        let tail = &rules[rules.len() - cfg.alpha..];
        assert!(detect_loop(tail, &cfg));
        assert!(detect_loop(&rules, &cfg));
        // Before the loop onset the branch never trips the detector.
        let onset = &rules[..=d];
        assert!(!detect_loop(onset, &LoopDetectorConfig { alpha: 1, ..cfg }));
    }

    #[test]
    fn detection_before_twice_delay_plus_alpha() {
        let cfg = LoopDetectorConfig::default();
        for d in [0, 2, 5, 10] {
            let mut b = SyntheticBackend::new(spec(30, 2, d));
            let path = decoy_walk(&mut b, 2 * (d + cfg.alpha));
            let rules: Vec<&str> = path.rules().collect();
            let first = (1..=rules.len()).find(|&n| detect_loop(&rules[..n], &cfg));
            assert!(first.is_some_and(|n| n < 2 * (d + cfg.alpha)), "d = {d}: {first:?}");
        }
    }

    #[test]
    fn pre_loop_rules_are_far_apart() {
        let mut b = SyntheticBackend::new(spec(12, 2, 8));
        let planted = b.planted_path().unwrap();
        let decoy = decoy_walk(&mut b, 8);
        for rules in [planted.clone(), decoy.rules().map(String::from).collect()] {
            for (i, x) in rules.iter().enumerate() {
                for y in rules.iter().skip(i + 1) {
                    let d = edit_distance(x, y) as f64;
                    assert!(d / x.chars().count() as f64 >= 0.5, "{x:?} ~ {y:?}");
                    assert!(d / y.chars().count() as f64 >= 0.5, "{y:?} ~ {x:?}");
                }
            }
        }
    }

    #[test]
    fn dead_ends_appear_at_positive_rate() {
        let mut b = SyntheticBackend::new(SyntheticSpec { dead_rate: 0.5, ..spec(6, 2, 6) });
        let mut dead = 0;
        let mut frontier = vec![root_path(&b)];
        for _ in 0..5 {
            let mut next = Vec::new();
            for p in &frontier {
                match b.expand(p).unwrap() {
                    BackendReply::Children(kids) => next.extend(kids.iter().map(|k| extend(p, k))),
                    BackendReply::Dead => dead += 1,
                    BackendReply::Complete => {}
                }
            }
            frontier = next;
        }
        assert!(dead > 0);
    }

    #[test]
    fn export_covers_small_tree() {
        let mut b = SyntheticBackend::new(spec(2, 2, 1));
        let records = b.export_trace(&LoopDetectorConfig::default(), 10_000).unwrap();
        assert!(records.iter().any(|r| r.flags.complete));
        assert_eq!(records.iter().filter(|r| r.step == 0).count(), 1);
        assert_eq!(records.iter().filter(|r| r.flags.supporting).count(), 3);
    }
}
