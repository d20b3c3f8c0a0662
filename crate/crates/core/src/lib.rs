//! Reinforcement-learning-guided proof-path search.
//!
//! The crate builds verification trees over a pluggable prover backend,
//! classifies candidate proof paths with a textual loop detector, trains a
//! Q-network from the rewards of incorrect paths, and provides depth-first
//! and breadth-first baselines plus a brute-force checker for the result
//! that supporting children are less likely to lie on incorrect paths
//! under a uniform random strategy.

pub mod backend;
pub mod baselines;
pub mod config;
pub mod error;
pub mod loop_detect;
pub mod qlearn;
pub mod report;
pub mod rng;
pub mod search;
pub mod theorem;
pub mod trace;
pub mod tree;

pub use backend::{BackendFactory, BackendReply, ProverBackend, SupportPosition, SyntheticBackend, SyntheticFactory, SyntheticSpec, TraceBackend, TraceFactory};
pub use baselines::{bfs_search, dfs_search, BaselineResult, BaselineVerdict, Limits, NodeOrder};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use loop_detect::{detect_loop, edit_distance, is_similar, LoopDetectorConfig, PathLoopDetector};
pub use qlearn::{DqnConfig, EpsilonSchedule, QNetwork, ReplayMemory, StateFeatures, Transition};
pub use search::{assign_rewards, run_search, EpochStats, SearchConfig, SearchOutcome, SearchSettings, SearchVerdict};
pub use theorem::{enumerate_report, monte_carlo_p, sweep, FiniteTree, TheoremReport};
pub use trace::{read_trace, write_trace, TraceFlags, TraceRecord};
pub use tree::{node_id, NodeId, NodeIdx, PathVerdict, ProofPath, RuleNode, VerificationTree};
