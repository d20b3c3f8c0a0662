use std::collections::HashMap;
use std::io::BufRead;
use std::sync::Arc;

use super::{BackendFactory, BackendReply, ProverBackend};
use crate::error::{Error, Result};
use crate::trace::{read_trace, TraceRecord};
use crate::tree::{NodeId, ProofPath};

/// Replays a recorded tree. Nodes are looked up by `(id, step)`.
#[derive(Clone, Debug)]
pub struct TraceBackend {
    records: Arc<Vec<TraceRecord>>,
    index: Arc<HashMap<(NodeId, usize), usize>>,
    root: usize,
}

impl TraceBackend {
    pub fn from_reader<R: BufRead>(input: R) -> Result<Self> {
        Self::from_records(read_trace(input)?)
    }

    pub fn from_records(records: Vec<TraceRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::TraceFormat { line: 0, message: "trace has no records".into() });
        }
        let mut index = HashMap::new();
        let mut kept: Vec<TraceRecord> = Vec::new();
        for (i, record) in records.into_iter().enumerate() {
            match index.get(&(record.id, record.step)) {
                Some(&at) if kept[at] == record => {}
                Some(_) => {
                    return Err(Error::TraceFormat {
                        line: i + 1,
                        message: format!("conflicting duplicate of {} at step {}", record.id, record.step),
                    })
                }
                None => {
                    index.insert((record.id, record.step), kept.len());
                    kept.push(record);
                }
            }
        }
        for (i, record) in kept.iter().enumerate() {
            for child in &record.children {
                if !index.contains_key(&(*child, record.step + 1)) {
                    return Err(Error::TraceFormat {
                        line: i + 1,
                        message: format!("child {child} of {} has no record at step {}", record.id, record.step + 1),
                    });
                }
            }
        }
        let roots: Vec<usize> = (0..kept.len()).filter(|&i| kept[i].step == 0).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(Error::TraceFormat { line: 0, message: "trace has no step-0 record".into() }),
            _ => return Err(Error::TraceFormat { line: roots[1] + 1, message: "trace has several roots".into() }),
        };
        Ok(TraceBackend { records: Arc::new(kept), index: Arc::new(index), root })
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    fn lookup(&self, path: &ProofPath) -> Result<&TraceRecord> {
        let first = path.nodes.first().ok_or_else(|| Error::InvalidPath("empty path".into()))?;
        let mut at = self.root;
        if first.key() != (self.records[at].id, 0) {
            return Err(Error::InvalidPath(format!("path is not rooted at {}", self.records[at].id)));
        }
        for node in &path.nodes[1..] {
            let parent = &self.records[at];
            if node.step != parent.step + 1 || !parent.children.contains(&node.id) {
                return Err(Error::InvalidPath(format!("{} at step {} is not a recorded child", node.id, node.step)));
            }
            at = self.index[&node.key()];
        }
        Ok(&self.records[at])
    }
}

impl ProverBackend for TraceBackend {
    fn lemma(&self) -> &str {
        &self.records[self.root].rule
    }

    fn expand(&mut self, path: &ProofPath) -> Result<BackendReply> {
        let record = self.lookup(path)?;
        Ok(if record.flags.complete {
            BackendReply::Complete
        } else if record.children.is_empty() {
            BackendReply::Dead
        } else {
            BackendReply::Children(
                record.children.iter().map(|c| self.records[self.index[&(*c, record.step + 1)]].rule.clone()).collect(),
            )
        })
    }
}

#[derive(Clone, Debug)]
pub struct TraceFactory {
    backend: TraceBackend,
}

impl TraceFactory {
    pub fn new(backend: TraceBackend) -> Self {
        TraceFactory { backend }
    }
}

impl BackendFactory for TraceFactory {
    fn create(&self) -> Box<dyn ProverBackend> {
        Box::new(self.backend.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{SyntheticBackend, SyntheticSpec};
    use crate::loop_detect::LoopDetectorConfig;
    use crate::trace::{write_trace, TraceFlags};
    use crate::tree::{node_id, RuleNode};

    fn rec(rule: &str, step: usize, children: &[&str], complete: bool) -> TraceRecord {
        TraceRecord {
            id: node_id(rule).unwrap(),
            step,
            rule: rule.into(),
            children: children.iter().map(|c| node_id(c).unwrap()).collect(),
            flags: TraceFlags { supporting: false, complete },
        }
    }

    fn path(rules: &[&str]) -> ProofPath {
        ProofPath::new(rules.iter().enumerate().map(|(i, r)| RuleNode::new(*r, i).unwrap()).collect())
    }

    #[test]
    fn replays_recorded_children() {
        let records = vec![
            rec("Key_secrecy", 0, &["simplify", "induction"], false),
            rec("simplify", 1, &[], true),
            rec("induction", 1, &[], false),
        ];
        let mut bytes = Vec::new();
        write_trace(&records, &mut bytes).unwrap();
        let mut b = TraceBackend::from_reader(bytes.as_slice()).unwrap();
        assert_eq!(b.lemma(), "Key_secrecy");
        assert_eq!(
            b.expand(&path(&["Key_secrecy"])).unwrap(),
            BackendReply::Children(vec!["simplify".into(), "induction".into()])
        );
        assert_eq!(b.expand(&path(&["Key_secrecy", "simplify"])).unwrap(), BackendReply::Complete);
        assert_eq!(b.expand(&path(&["Key_secrecy", "induction"])).unwrap(), BackendReply::Dead);
        assert!(matches!(b.expand(&path(&["Key_secrecy", "other"])), Err(Error::InvalidPath(_))));
    }

    #[test]
    fn empty_trace_is_a_format_error() {
        assert!(matches!(TraceBackend::from_reader(&b""[..]), Err(Error::TraceFormat { .. })));
    }

    #[test]
    fn same_id_at_different_steps() {
        let records = vec![
            rec("L", 0, &["simplify"], false),
            rec("simplify", 1, &["simplify"], false),
            rec("simplify", 2, &[], true),
        ];
        let mut b = TraceBackend::from_records(records).unwrap();
        assert_eq!(b.expand(&path(&["L", "simplify", "simplify"])).unwrap(), BackendReply::Complete);
    }

    #[test]
    fn dangling_child_and_conflicts() {
        let dangling = vec![rec("L", 0, &["x"], false)];
        assert!(matches!(TraceBackend::from_records(dangling), Err(Error::TraceFormat { line: 1, .. })));
        let conflict = vec![rec("L", 0, &["x"], false), rec("x", 1, &[], false), rec("x", 1, &[], true)];
        assert!(matches!(TraceBackend::from_records(conflict), Err(Error::TraceFormat { line: 3, .. })));
        let two_roots = vec![rec("L", 0, &[], false), rec("M", 0, &[], false)];
        assert!(TraceBackend::from_records(two_roots).is_err());
    }

    #[test]
    fn synthetic_export_replays_identically() {
        let spec = SyntheticSpec { correct_depth: 3, branching: 2, decoy_delay: 2, ..SyntheticSpec::default() };
        let mut live = SyntheticBackend::new(spec);
        let records = live.export_trace(&LoopDetectorConfig::default(), 100_000).unwrap();
        let mut replay = TraceBackend::from_records(records).unwrap();
        let planted = live.planted_path().unwrap();
        for n in 1..=planted.len() {
            let refs: Vec<&str> = planted[..n].iter().map(String::as_str).collect();
            assert_eq!(replay.expand(&path(&refs)).unwrap(), live.expand(&path(&refs)).unwrap());
        }
    }
}
