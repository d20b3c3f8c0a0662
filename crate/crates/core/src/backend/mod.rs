//! Prover backends answer "what can be applied at the end of this path?".

mod synthetic;
mod trace_backend;

use crate::error::Result;
use crate::tree::ProofPath;

pub use synthetic::{SupportPosition, SyntheticBackend, SyntheticFactory, SyntheticSpec};
pub use trace_backend::{TraceBackend, TraceFactory};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackendReply {
    /// Applicable rules, in the order the prover reports them.
    Children(Vec<String>),
    /// The proof closes at this endpoint.
    Complete,
    /// No rule applies and the path is not a proof.
    Dead,
}

pub trait ProverBackend: Send {
    /// Rule text of the root node (the lemma name).
    fn lemma(&self) -> &str;

    /// Expands the endpoint of a root-anchored path.
    fn expand(&mut self, path: &ProofPath) -> Result<BackendReply>;
}

/// Produces independent backend instances that answer identically.
pub trait BackendFactory: Send + Sync {
    fn create(&self) -> Box<dyn ProverBackend>;
}
