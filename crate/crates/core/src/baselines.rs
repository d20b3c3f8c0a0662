//! Depth-first and breadth-first baselines sharing the loop detector.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::backend::{BackendFactory, BackendReply, ProverBackend};
use crate::error::{Error, Result};
use crate::loop_detect::{LoopDetectorConfig, PathLoopDetector};
use crate::search::EpochStats;
use crate::tree::{NodeId, PathVerdict, ProofPath, RuleNode};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "prefixes", rename_all = "snake_case")]
pub enum NodeOrder {
    /// Children in the order the backend lists them.
    #[default]
    FirstListed,
    /// Children whose rule starts with an earlier prefix come first; ties keep
    /// the listed order and unmatched rules go last.
    StaticRank(Vec<String>),
}

impl NodeOrder {
    fn arrange(&self, children: &mut [String]) {
        if let NodeOrder::StaticRank(prefixes) = self {
            let rank = |rule: &str| prefixes.iter().position(|p| rule.starts_with(p.as_str())).unwrap_or(prefixes.len());
            children.sort_by_key(|c| rank(c));
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub max_nodes: usize,
    pub max_time_ms: Option<u64>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_nodes: 2_000_000, max_time_ms: None }
    }
}

impl Limits {
    fn validate(&self) -> Result<()> {
        if self.max_nodes == 0 || self.max_time_ms == Some(0) {
            return Err(Error::InvalidArgument("baseline limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineVerdict {
    Found,
    Exhausted,
    TimedOut,
}

#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub verdict: BaselineVerdict,
    /// Distinct `(id, step)` pairs visited.
    pub coverage: usize,
    /// Paths abandoned because of a loop or a dead end.
    pub backtracks: usize,
    pub wall_ms: u64,
    pub path: Option<ProofPath>,
    /// Progress rows in the orchestrator's stats layout.
    pub rows: Vec<EpochStats>,
}

struct Progress {
    started: Instant,
    deadline: Option<Duration>,
    limits: Limits,
    visited: HashSet<(NodeId, usize)>,
    backtracks: usize,
    rows: Vec<EpochStats>,
}

impl Progress {
    fn new(limits: Limits) -> Self {
        Progress {
            started: Instant::now(),
            deadline: limits.max_time_ms.map(Duration::from_millis),
            limits,
            visited: HashSet::new(),
            backtracks: 0,
            rows: Vec::new(),
        }
    }

    fn exceeded(&self) -> bool {
        self.visited.len() > self.limits.max_nodes || self.deadline.is_some_and(|d| self.started.elapsed() > d)
    }

    fn row(&mut self, complete: bool) {
        let coverage = self.visited.len();
        self.rows.push(EpochStats {
            epoch: self.rows.len(),
            eps: 0.0,
            loss: None,
            transitions: 0,
            verdicts: Vec::new(),
            incorrect: self.backtracks,
            incomplete: 0,
            complete: usize::from(complete),
            coverage,
            acquired: coverage,
            wall_ms: 0,
        });
    }

    fn finish(mut self, verdict: BaselineVerdict, path: Option<ProofPath>) -> BaselineResult {
        self.row(verdict == BaselineVerdict::Found);
        BaselineResult {
            verdict,
            coverage: self.visited.len(),
            backtracks: self.backtracks,
            wall_ms: self.started.elapsed().as_millis() as u64,
            path,
            rows: self.rows,
        }
    }
}

/// Rows are emitted every this many newly visited nodes.
const DFS_ROW_EVERY: usize = 1024;

pub fn dfs_search(
    factory: &dyn BackendFactory,
    loop_cfg: &LoopDetectorConfig,
    order: &NodeOrder,
    limits: Limits,
) -> Result<BaselineResult> {
    limits.validate()?;
    loop_cfg.validate()?;
    let mut backend = factory.create();
    let mut progress = Progress::new(limits);
    let mut detector = PathLoopDetector::new(*loop_cfg);
    let mut path = ProofPath::new(vec![RuleNode::new(backend.lemma(), 0)?]);
    // Children still to try, per path position, in reverse order.
    let mut pending: Vec<Vec<String>> = Vec::new();
    detector.push(&path.nodes[0].rule);
    loop {
        let node = path.last().expect("non-empty path");
        if progress.visited.insert(node.key()) && progress.visited.len().is_multiple_of(DFS_ROW_EVERY) {
            progress.row(false);
        }
        if progress.exceeded() {
            return Ok(progress.finish(BaselineVerdict::TimedOut, None));
        }
        let mut children = Vec::new();
        if detector.detect() {
            progress.backtracks += 1;
        } else {
            match backend.expand(&path)? {
                BackendReply::Complete => {
                    let mut found = path;
                    found.verdict = Some(PathVerdict::CorrectComplete);
                    return Ok(progress.finish(BaselineVerdict::Found, Some(found)));
                }
                BackendReply::Dead => progress.backtracks += 1,
                BackendReply::Children(mut kids) => {
                    order.arrange(&mut kids);
                    kids.reverse();
                    children = kids;
                }
            }
        }
        pending.push(children);
        loop {
            match pending.last_mut() {
                None => return Ok(progress.finish(BaselineVerdict::Exhausted, None)),
                Some(stack) => match stack.pop() {
                    Some(rule) => {
                        detector.push(&rule);
                        let step = path.len();
                        path.nodes.push(RuleNode::new(rule, step)?);
                        break;
                    }
                    None => {
                        pending.pop();
                        path.nodes.pop();
                        detector.pop();
                        if path.is_empty() {
                            return Ok(progress.finish(BaselineVerdict::Exhausted, None));
                        }
                    }
                },
            }
        }
    }
}

struct Frontier {
    path: Vec<RuleNode>,
    detector: PathLoopDetector,
}

enum Visit {
    Complete,
    Pruned,
    Children(Vec<String>),
}

fn visit(backend: &mut dyn ProverBackend, entry: &Frontier) -> Result<Visit> {
    if entry.detector.detect() {
        return Ok(Visit::Pruned);
    }
    Ok(match backend.expand(&ProofPath::new(entry.path.clone()))? {
        BackendReply::Complete => Visit::Complete,
        BackendReply::Dead => Visit::Pruned,
        BackendReply::Children(kids) => Visit::Children(kids),
    })
}

/// Level-synchronous breadth-first search; each level is split across
/// `threads` backend instances and joined before the next level.
pub fn bfs_search(
    factory: &dyn BackendFactory,
    loop_cfg: &LoopDetectorConfig,
    limits: Limits,
    threads: usize,
) -> Result<BaselineResult> {
    limits.validate()?;
    loop_cfg.validate()?;
    let threads = threads.max(1);
    let mut backends: Vec<Box<dyn ProverBackend>> = (0..threads).map(|_| factory.create()).collect();
    let mut progress = Progress::new(limits);
    let root = RuleNode::new(backends[0].lemma(), 0)?;
    let mut detector = PathLoopDetector::new(*loop_cfg);
    detector.push(&root.rule);
    let mut level = vec![Frontier { path: vec![root], detector }];
    while !level.is_empty() {
        for entry in &level {
            progress.visited.insert(entry.path.last().expect("non-empty").key());
        }
        if progress.exceeded() {
            return Ok(progress.finish(BaselineVerdict::TimedOut, None));
        }
        let chunk = level.len().div_ceil(threads);
        let visits: Vec<Result<Vec<Visit>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = backends
                .iter_mut()
                .zip(level.chunks(chunk))
                .map(|(backend, part)| {
                    scope.spawn(move || part.iter().map(|e| visit(backend.as_mut(), e)).collect::<Result<Vec<_>>>())
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::InvalidState("BFS worker panicked".into()))))
                .collect()
        });
        let mut next = Vec::new();
        let mut found = None;
        for (entry, visit) in level.iter().zip(visits.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten()) {
            match visit {
                Visit::Complete => {
                    found.get_or_insert_with(|| entry.path.clone());
                }
                Visit::Pruned => progress.backtracks += 1,
                Visit::Children(kids) => {
                    for rule in kids {
                        let mut detector = entry.detector.clone();
                        detector.push(&rule);
                        let mut path = entry.path.clone();
                        let step = path.len();
                        path.push(RuleNode::new(rule, step)?);
                        next.push(Frontier { path, detector });
                    }
                }
            }
        }
        if let Some(path) = found {
            let mut path = ProofPath::new(path);
            path.verdict = Some(PathVerdict::CorrectComplete);
            return Ok(progress.finish(BaselineVerdict::Found, Some(path)));
        }
        progress.row(false);
        level = next;
    }
    Ok(progress.finish(BaselineVerdict::Exhausted, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{SupportPosition, SyntheticFactory, SyntheticSpec};

    fn factory(depth: usize, delay: usize, pos: SupportPosition) -> SyntheticFactory {
        SyntheticFactory::new(SyntheticSpec {
            correct_depth: depth,
            branching: 2,
            decoy_delay: delay,
            supporting_position: pos,
            ..SyntheticSpec::default()
        })
    }

    fn confirm(f: &SyntheticFactory, r: &BaselineResult) {
        assert_eq!(r.verdict, BaselineVerdict::Found);
        let path = r.path.as_ref().unwrap();
        assert!(r.coverage >= path.len());
        assert_eq!(f.create().expand(path).unwrap(), BackendReply::Complete);
    }

    #[test]
    fn dfs_with_supporting_first_is_greedy() {
        let f = factory(3, 5, SupportPosition::First);
        let r = dfs_search(&f, &LoopDetectorConfig::default(), &NodeOrder::FirstListed, Limits::default()).unwrap();
        confirm(&f, &r);
        assert_eq!(r.coverage, 4);
        assert_eq!(r.backtracks, 0);
    }

    #[test]
    fn dfs_supporting_last_explores_decoys() {
        let f = factory(3, 5, SupportPosition::Last);
        let r = dfs_search(&f, &LoopDetectorConfig::default(), &NodeOrder::FirstListed, Limits::default()).unwrap();
        confirm(&f, &r);
        assert!(r.coverage > 4);
        assert!(r.backtracks > 0);
    }

    #[test]
    fn static_rank_reorders_children() {
        let f = factory(3, 5, SupportPosition::Last);
        let order = NodeOrder::StaticRank(vec!["St_".into()]);
        let r = dfs_search(&f, &LoopDetectorConfig::default(), &order, Limits::default()).unwrap();
        confirm(&f, &r);
        assert_eq!(r.coverage, 4);
        let mut kids = vec!["b".to_string(), "St_x".into(), "a".into()];
        order.arrange(&mut kids);
        assert_eq!(kids, ["St_x", "b", "a"]);
    }

    #[test]
    fn dfs_without_detector_hits_limit() {
        let f = factory(3, 2, SupportPosition::Last);
        let limits = Limits { max_nodes: 5_000, max_time_ms: None };
        let r = dfs_search(&f, &LoopDetectorConfig::disabled(), &NodeOrder::FirstListed, limits).unwrap();
        assert_eq!(r.verdict, BaselineVerdict::TimedOut);
    }

    #[test]
    fn bfs_depth_one_covers_first_level() {
        let f = factory(1, 2, SupportPosition::Random);
        let r = bfs_search(&f, &LoopDetectorConfig::default(), Limits::default(), 2).unwrap();
        confirm(&f, &r);
        assert_eq!(r.coverage, 3);
        assert_eq!(r.path.unwrap().len(), 2);
    }

    #[test]
    fn bfs_covers_at_least_dfs_on_supporting_first() {
        let f = factory(3, 5, SupportPosition::First);
        let cfg = LoopDetectorConfig::default();
        let bfs = bfs_search(&f, &cfg, Limits::default(), 4).unwrap();
        let dfs = dfs_search(&f, &cfg, &NodeOrder::FirstListed, Limits::default()).unwrap();
        confirm(&f, &bfs);
        assert!(bfs.coverage >= dfs.coverage);
        let single = bfs_search(&f, &cfg, Limits::default(), 1).unwrap();
        assert_eq!(single.coverage, bfs.coverage);
        assert_eq!(single.path, bfs.path);
    }

    #[test]
    fn bfs_node_limit_times_out() {
        let f = factory(30, 10, SupportPosition::Random);
        let limits = Limits { max_nodes: 10, max_time_ms: None };
        let r = bfs_search(&f, &LoopDetectorConfig::default(), limits, 1).unwrap();
        assert_eq!(r.verdict, BaselineVerdict::TimedOut);
    }

    #[test]
    fn zero_limits_rejected() {
        let f = factory(1, 2, SupportPosition::Random);
        let limits = Limits { max_nodes: 0, max_time_ms: None };
        assert!(dfs_search(&f, &LoopDetectorConfig::default(), &NodeOrder::FirstListed, limits).is_err());
    }
}
