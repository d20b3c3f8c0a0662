//! The epoch loop: σ workers acquire paths under a shared policy snapshot,
//! verdicts become rewards, and the policy is trained between epochs.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendFactory, BackendReply, ProverBackend};
use crate::error::{Error, Result};
use crate::loop_detect::{LoopDetectorConfig, PathLoopDetector};
use crate::qlearn::{DqnConfig, NextState, QNetwork, ReplayMemory, StateFeatures, Transition};
use crate::rng::stream;
use crate::tree::{NodeId, NodeIdx, PathVerdict, ProofPath, VerificationTree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub workers: usize,
    pub max_epochs: usize,
    pub depth_bound_initial: usize,
    pub depth_bound_increment: usize,
    /// Selections after which a path counts as looping.
    pub max_selections: usize,
    /// Off by default so that emitted row data is reproducible.
    pub record_wall_time: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            workers: 8,
            max_epochs: 200,
            depth_bound_initial: 5,
            depth_bound_increment: 5,
            max_selections: 500,
            record_wall_time: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.workers == 0 {
            return bad("search.workers must be >= 1");
        }
        if self.depth_bound_initial == 0 || self.depth_bound_increment == 0 {
            return bad("search depth bounds must be positive");
        }
        if self.max_selections == 0 {
            return bad("search.max_selections must be >= 1");
        }
        Ok(())
    }
}

/// Everything one learned search needs besides the backend.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub seed: u64,
    pub search: SearchConfig,
    pub loop_detector: LoopDetectorConfig,
    pub dqn: DqnConfig,
}

/// One policy decision along a path.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub state: StateFeatures,
    pub valid: usize,
    pub action: usize,
    pub next: NextState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub eps: f64,
    /// Mean pre-update loss over the epoch's train steps.
    pub loss: Option<f64>,
    pub transitions: usize,
    /// Final verdict per worker; `None` for workers cancelled by a lower-index success.
    pub verdicts: Vec<Option<PathVerdict>>,
    pub incorrect: usize,
    /// Depth-bound extensions.
    pub incomplete: usize,
    pub complete: usize,
    /// Distinct `(id, step)` pairs ever sent to the backend.
    pub coverage: usize,
    /// Distinct `(id, step)` pairs ever placed in a tree.
    pub acquired: usize,
    pub wall_ms: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchVerdict {
    Found,
    Exhausted,
    Cancelled,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub verdict: SearchVerdict,
    pub path: Option<ProofPath>,
    /// Decisions taken along `path`.
    pub selections: Vec<Selection>,
    pub epochs: usize,
    pub stats: Vec<EpochStats>,
    pub network: QNetwork,
}

impl SearchOutcome {
    pub fn coverage(&self) -> usize {
        self.stats.last().map_or(0, |s| s.coverage)
    }

    pub fn acquired(&self) -> usize {
        self.stats.last().map_or(0, |s| s.acquired)
    }
}

/// Transitions for a finished path: one per selection, the last terminal.
/// Successful paths only produce transitions when `dqn.positive_rewards` is set.
pub fn assign_rewards(selections: &[Selection], verdict: PathVerdict, dqn: &DqnConfig) -> Result<Vec<Transition>> {
    let reward = match verdict {
        PathVerdict::IncorrectLoop => -dqn.reward,
        PathVerdict::CorrectComplete if dqn.positive_rewards => dqn.reward,
        PathVerdict::CorrectComplete => return Ok(Vec::new()),
        PathVerdict::CorrectIncomplete => {
            return Err(Error::InvalidArgument("an incomplete path has no rewards yet".into()))
        }
    };
    let last = selections.len().saturating_sub(1);
    Ok(selections
        .iter()
        .enumerate()
        .map(|(i, s)| Transition {
            state: s.state.clone(),
            action: s.action,
            reward,
            next: if i == last { None } else { Some(s.next.clone()) },
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Leaf {
    Complete,
    Dead,
}

struct WorkerRun {
    verdict: PathVerdict,
    incomplete: usize,
    path: ProofPath,
    selections: Vec<Selection>,
    expanded: Vec<(NodeId, usize)>,
    acquired: Vec<(NodeId, usize)>,
}

struct Worker<'a> {
    index: usize,
    settings: &'a SearchSettings,
    policy: &'a QNetwork,
    epsilon: f64,
    winner: &'a AtomicUsize,
    cancel: Option<&'a AtomicBool>,
}

impl Worker<'_> {
    fn stopped(&self) -> bool {
        self.winner.load(Ordering::Acquire) < self.index
            || self.cancel.is_some_and(|c| c.load(Ordering::Relaxed))
    }

    /// Queries the backend for an endpoint, raising the depth bound if the reply
    /// does not fit.
    fn ensure_expanded(
        &self,
        tree: &mut VerificationTree,
        backend: &mut dyn ProverBackend,
        leaves: &mut Vec<Option<Leaf>>,
        run: &mut WorkerRun,
        node: NodeIdx,
    ) -> Result<()> {
        if !tree.is_endpoint(node) {
            return Ok(());
        }
        let path = tree.path_to(node)?;
        run.expanded.push(path.last().expect("non-empty").key());
        let (children, leaf) = match backend.expand(&path)? {
            BackendReply::Children(c) => (c, None),
            BackendReply::Complete => (Vec::new(), Some(Leaf::Complete)),
            BackendReply::Dead => (Vec::new(), Some(Leaf::Dead)),
        };
        if children.len() > self.settings.dqn.bmax {
            return Err(Error::BranchingExceeded { got: children.len(), max: self.settings.dqn.bmax });
        }
        let added = loop {
            match tree.expand_endpoint(node, &children) {
                Ok(added) => break added,
                Err(Error::DepthExceeded { .. }) => {
                    tree.extend_depth_bound(self.settings.search.depth_bound_increment);
                    run.incomplete += 1;
                }
                Err(e) => return Err(e),
            }
        };
        leaves.resize(tree.len(), None);
        leaves[node.index()] = leaf;
        for idx in added {
            run.acquired.push(tree.node(idx)?.key());
        }
        Ok(())
    }

    fn run(&self, backend: &mut dyn ProverBackend, rng_epoch: usize) -> Result<Option<WorkerRun>> {
        let settings = self.settings;
        let featurizer = settings.dqn.featurizer();
        let mut rng = stream(settings.seed, "worker", &[rng_epoch as u64, self.index as u64]);
        let mut tree = VerificationTree::new(backend.lemma(), settings.search.depth_bound_initial)?;
        let mut leaves: Vec<Option<Leaf>> = vec![None];
        let mut detector = PathLoopDetector::new(settings.loop_detector);
        let root = tree.root().clone();
        detector.push(&root.rule);
        let mut run = WorkerRun {
            verdict: PathVerdict::IncorrectLoop,
            incomplete: 0,
            path: ProofPath::new(vec![root.clone()]),
            selections: Vec::new(),
            expanded: Vec::new(),
            acquired: vec![root.key()],
        };
        let mut current = VerificationTree::ROOT;
        loop {
            if self.stopped() {
                return Ok(None);
            }
            match leaves[current.index()] {
                Some(Leaf::Complete) => {
                    run.verdict = PathVerdict::CorrectComplete;
                    break;
                }
                Some(Leaf::Dead) => break,
                None => {}
            }
            if run.selections.len() >= settings.search.max_selections {
                break;
            }
            // Two-depth frontier: the node and each of its children are expanded.
            self.ensure_expanded(&mut tree, backend, &mut leaves, &mut run, current)?;
            if leaves[current.index()].is_some() {
                continue;
            }
            let children: Vec<NodeIdx> = tree.children(current)?.unwrap_or(&[]).to_vec();
            for &child in &children {
                self.ensure_expanded(&mut tree, backend, &mut leaves, &mut run, child)?;
            }
            let bound = tree.depth_bound();
            let state = featurizer.featurize(tree.node(current)?, tree.sibling_index(current)?, bound)?;
            let action = self.policy.select_action(&state, children.len(), self.epsilon, &mut rng)?;
            let chosen = children[action];
            let next = NextState {
                features: featurizer.featurize(tree.node(chosen)?, action, bound)?,
                valid: tree.children(chosen)?.map_or(0, <[NodeIdx]>::len),
            };
            run.selections.push(Selection { state, valid: children.len(), action, next });
            let node = tree.node(chosen)?.clone();
            detector.push(&node.rule);
            run.path.nodes.push(node);
            current = chosen;
            if detector.detect() {
                break;
            }
        }
        run.path.verdict = Some(run.verdict);
        Ok(Some(run))
    }
}

/// Runs the learned search. `cancel` requests a cooperative stop; the stats
/// gathered so far are returned with [`SearchVerdict::Cancelled`].
pub fn run_search(
    settings: &SearchSettings,
    factory: &dyn BackendFactory,
    cancel: Option<&AtomicBool>,
) -> Result<SearchOutcome> {
    settings.search.validate()?;
    settings.loop_detector.validate()?;
    settings.dqn.validate()?;
    let dqn = &settings.dqn;
    let mut network = QNetwork::new(dqn, &mut stream(settings.seed, "qnet", &[]));
    let mut memory = ReplayMemory::new(dqn.capacity);
    let mut backends: Vec<Box<dyn ProverBackend>> = (0..settings.search.workers).map(|_| factory.create()).collect();
    let mut expanded: HashSet<(NodeId, usize)> = HashSet::new();
    let mut acquired: HashSet<(NodeId, usize)> = HashSet::new();
    let mut stats = Vec::new();
    let schedule = dqn.epsilon();

    for epoch in 0..settings.search.max_epochs {
        if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Ok(SearchOutcome {
                verdict: SearchVerdict::Cancelled,
                path: None,
                selections: Vec::new(),
                epochs: epoch,
                stats,
                network,
            });
        }
        let started = Instant::now();
        let eps = schedule.at(epoch);
        let winner = AtomicUsize::new(usize::MAX);
        let policy = &network;
        let results: Vec<Result<Option<WorkerRun>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = backends
                .iter_mut()
                .enumerate()
                .map(|(index, backend)| {
                    let worker = Worker { index, settings, policy, epsilon: eps, winner: &winner, cancel };
                    let winner = &winner;
                    scope.spawn(move || {
                        let out = worker.run(backend.as_mut(), epoch);
                        if let Ok(Some(run)) = &out {
                            if run.verdict == PathVerdict::CorrectComplete {
                                winner.fetch_min(index, Ordering::AcqRel);
                            }
                        }
                        out
                    })
                })
                .collect();
            handles
                .into_iter()
                .enumerate()
                .map(|(i, h)| {
                    h.join().unwrap_or_else(|panic| {
                        let msg = panic
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_default();
                        Err(Error::InvalidState(format!("worker {i} panicked in epoch {epoch}: {msg}")))
                    })
                })
                .collect()
        });
        let winner = winner.load(Ordering::Acquire);

        let mut row = EpochStats {
            epoch,
            eps,
            loss: None,
            transitions: 0,
            verdicts: Vec::with_capacity(results.len()),
            incorrect: 0,
            incomplete: 0,
            complete: 0,
            coverage: 0,
            acquired: 0,
            wall_ms: 0,
        };
        let mut found = None;
        for (index, result) in results.into_iter().enumerate() {
            // Workers past the winner may have been cut short; ignore them.
            let run = match result? {
                Some(run) if index <= winner => run,
                _ => {
                    row.verdicts.push(None);
                    continue;
                }
            };
            row.verdicts.push(Some(run.verdict));
            row.incomplete += run.incomplete;
            expanded.extend(run.expanded.iter().copied());
            acquired.extend(run.acquired.iter().copied());
            match run.verdict {
                PathVerdict::CorrectComplete => {
                    row.complete += 1;
                    let transitions = assign_rewards(&run.selections, run.verdict, dqn)?;
                    row.transitions += transitions.len();
                    memory.extend(transitions);
                    found = Some(run);
                }
                _ => {
                    row.incorrect += 1;
                    let transitions = assign_rewards(&run.selections, PathVerdict::IncorrectLoop, dqn)?;
                    row.transitions += transitions.len();
                    memory.extend(transitions);
                }
            }
        }
        row.coverage = expanded.len();
        row.acquired = acquired.len();

        if found.is_none() && !memory.is_empty() {
            let mut rng = stream(settings.seed, "replay", &[epoch as u64]);
            let mut total = 0.0;
            for _ in 0..dqn.train_steps {
                total += network.train_step(&memory, dqn.batch, &mut rng)?;
            }
            if dqn.train_steps > 0 {
                row.loss = Some(total / dqn.train_steps as f64);
            }
        }
        if settings.search.record_wall_time {
            row.wall_ms = started.elapsed().as_millis() as u64;
        }
        stats.push(row);

        if let Some(run) = found {
            return Ok(SearchOutcome {
                verdict: SearchVerdict::Found,
                path: Some(run.path),
                selections: run.selections,
                epochs: epoch + 1,
                stats,
                network,
            });
        }
    }
    Ok(SearchOutcome {
        verdict: SearchVerdict::Exhausted,
        path: None,
        selections: Vec::new(),
        epochs: settings.search.max_epochs,
        stats,
        network,
    })
}
