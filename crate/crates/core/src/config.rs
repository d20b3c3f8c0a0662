//! The run configuration read by the command-line front end.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::backend::SyntheticSpec;
use crate::baselines::{Limits, NodeOrder};
use crate::error::{Error, Result};
use crate::loop_detect::LoopDetectorConfig;
use crate::qlearn::DqnConfig;
use crate::search::{SearchConfig, SearchSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub order: NodeOrder,
    pub limits: Limits,
    /// Threads for breadth-first frontier expansion.
    pub threads: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { order: NodeOrder::FirstListed, limits: Limits::default(), threads: 4 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    pub synthetic: SyntheticSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Root of every random stream used by a run.
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(rename = "loop")]
    pub loop_detector: LoopDetectorConfig,
    pub dqn: DqnConfig,
    pub search: SearchConfig,
    pub baseline: BaselineConfig,
    pub backend: BackendConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            output_dir: PathBuf::from("out"),
            loop_detector: LoopDetectorConfig::default(),
            dqn: DqnConfig::default(),
            search: SearchConfig::default(),
            baseline: BaselineConfig::default(),
            backend: BackendConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.loop_detector.validate()?;
        self.dqn.validate()?;
        self.search.validate()?;
        self.backend.synthetic.validate(self.dqn.bmax)
    }

    pub fn search_settings(&self) -> SearchSettings {
        SearchSettings {
            seed: self.seed,
            search: self.search.clone(),
            loop_detector: self.loop_detector,
            dqn: self.dqn.clone(),
        }
    }
}
