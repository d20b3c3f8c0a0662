//! The Q-network policy: featurization, ε-greedy selection over a masked
//! action head, replay memory and the one-step Q-learning update.

mod features;
mod network;
mod replay;
mod schedule;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::tree::fnv1a64;

pub use features::{Featurizer, StateFeatures};
pub use network::{Dense, Gradients, Mlp};
pub use replay::ReplayMemory;
pub use schedule::EpsilonSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub gamma: f64,
    pub lr: f64,
    pub capacity: usize,
    pub batch: usize,
    /// Gradient steps after each epoch's path selection.
    pub train_steps: usize,
    pub bmax: usize,
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_anneal: usize,
    /// Scale of the output layer's initial weights relative to He-uniform.
    pub output_init: f64,
    /// Magnitude of the per-edge reward.
    pub reward: f64,
    /// Also reward the edges of a complete path positively.
    pub positive_rewards: bool,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            gamma: 0.9,
            lr: 0.01,
            capacity: 7000,
            batch: 7000,
            train_steps: 1,
            bmax: 16,
            hidden: vec![64, 64],
            feature_dim: 64,
            eps_start: 0.99,
            eps_end: 0.1,
            eps_anneal: 100,
            output_init: 0.1,
            reward: 10.0,
            positive_rewards: false,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("dqn.gamma must lie in [0, 1]");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("dqn.lr must be positive");
        }
        if self.capacity == 0 || self.batch == 0 || self.bmax == 0 || self.feature_dim == 0 {
            return bad("dqn.capacity, dqn.batch, dqn.bmax and dqn.feature_dim must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("dqn.hidden layer widths must be positive");
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return bad("dqn.eps_start and dqn.eps_end must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn featurizer(&self) -> Featurizer {
        Featurizer::new(self.feature_dim, self.bmax)
    }

    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule { start: self.eps_start, end: self.eps_end, anneal_epochs: self.eps_anneal }
    }

    /// Stable 64-bit digest of the configuration.
    pub fn digest(&self) -> u64 {
        fnv1a64(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

/// The state reached by an action, with how many of its actions are valid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NextState {
    pub features: StateFeatures,
    pub valid: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: StateFeatures,
    pub action: usize,
    pub reward: f64,
    /// Absent at the end of a path.
    pub next: Option<NextState>,
}

/// Action-value network over a fixed head of `bmax` child slots.
#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork {
    mlp: Mlp,
    gamma: f64,
    lr: f64,
    bmax: usize,
}

impl QNetwork {
    pub fn new(cfg: &DqnConfig, rng: &mut StreamRng) -> Self {
        let mut sizes = vec![cfg.feature_dim + 2];
        sizes.extend(&cfg.hidden);
        sizes.push(cfg.bmax);
        QNetwork::from_mlp(Mlp::new(&sizes, cfg.output_init, rng), cfg.gamma, cfg.lr)
    }

    pub fn from_mlp(mlp: Mlp, gamma: f64, lr: f64) -> Self {
        let bmax = mlp.output_dim();
        QNetwork { mlp, gamma, lr, bmax }
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn bmax(&self) -> usize {
        self.bmax
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn q_values(&self, state: &StateFeatures) -> Result<Vec<f64>> {
        if state.len() != self.mlp.input_dim() || !state.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "state must be {} finite values, got {}",
                self.mlp.input_dim(),
                state.len()
            )));
        }
        if !self.mlp.all_finite() {
            return Err(Error::NumericFault("network parameters are not finite".into()));
        }
        let q = self.mlp.forward(state.as_slice());
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFault("Q-values are not finite".into()));
        }
        Ok(q)
    }

    /// ε-greedy over the first `valid` actions; ties go to the lowest index.
    pub fn select_action(
        &self,
        state: &StateFeatures,
        valid: usize,
        epsilon: f64,
        rng: &mut StreamRng,
    ) -> Result<usize> {
        if valid == 0 {
            return Err(Error::NoAction);
        }
        if valid > self.bmax {
            return Err(Error::BranchingExceeded { got: valid, max: self.bmax });
        }
        // Draw both numbers unconditionally so the stream advances uniformly.
        let explore = rng.gen::<f64>() < epsilon;
        let random = rng.gen_range(0..valid);
        if explore {
            return Ok(random);
        }
        Ok(argmax(&self.q_values(state)?[..valid]))
    }

    /// `reward` at a terminal transition, else `reward + γ max_a' Q(next, a')`
    /// over the valid actions of the next state.
    pub fn compute_target(&self, reward: f64, next: Option<&NextState>) -> Result<f64> {
        match next {
            None => Ok(reward),
            Some(next) => {
                let q = self.q_values(&next.features)?;
                let valid = next.valid.clamp(1, self.bmax);
                let best = q[..valid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(reward + self.gamma * best)
            }
        }
    }

    /// Mean squared TD error of a batch with targets from the current
    /// parameters, plus its gradient.
    pub fn batch_loss(&self, batch: &[&Transition]) -> Result<(f64, Gradients)> {
        let targets = batch
            .iter()
            .map(|t| self.compute_target(t.reward, t.next.as_ref()))
            .collect::<Result<Vec<f64>>>()?;
        let samples: Vec<(&[f64], usize, f64)> = batch
            .iter()
            .zip(&targets)
            .map(|(t, &y)| (t.state.as_slice(), t.action, y))
            .collect();
        Ok(self.mlp.loss_and_gradient(&samples))
    }

    /// One gradient step on a uniformly sampled minibatch. Returns the loss
    /// before the update.
    pub fn train_step(&mut self, memory: &ReplayMemory, batch_size: usize, rng: &mut StreamRng) -> Result<f64> {
        if memory.is_empty() {
            return Err(Error::InvalidState("replay memory is empty".into()));
        }
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        let batch = memory.sample(batch_size, rng);
        if let Some(t) = batch.iter().find(|t| t.action >= self.bmax || !t.reward.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "transition with action {} and reward {} does not fit the network",
                t.action, t.reward
            )));
        }
        let (loss, grads) = self.batch_loss(&batch)?;
        let before = self.mlp.clone();
        self.mlp.apply_gradients(&grads, self.lr);
        if !self.mlp.all_finite() {
            self.mlp = before;
            return Err(Error::NumericFault("gradient step produced non-finite parameters".into()));
        }
        Ok(loss)
    }

    pub fn checkpoint(&self, config_hash: u64) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            config_hash: format!("{config_hash:016x}"),
            gamma: self.gamma,
            lr: self.lr,
            shapes: self.mlp.shapes(),
            params: self.mlp.params(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidArgument(format!("unknown checkpoint format {:?}", ck.format)));
        }
        if ck.shapes.is_empty() || ck.shapes.windows(2).any(|w| w[0][0] != w[1][1]) {
            return Err(Error::InvalidArgument("checkpoint layer shapes do not chain".into()));
        }
        let mut mlp = Mlp {
            layers: ck.shapes.iter().map(|&[out, inp]| Dense::zeros(inp, out)).collect(),
        };
        if ck.params.len() != mlp.param_count() {
            return Err(Error::InvalidArgument(format!(
                "checkpoint holds {} parameters, shapes need {}",
                ck.params.len(),
                mlp.param_count()
            )));
        }
        mlp.set_params(&ck.params);
        Ok(QNetwork::from_mlp(mlp, ck.gamma, ck.lr))
    }
}

pub const CHECKPOINT_FORMAT: &str = "proofpath-qnet/1";

/// Serialized network parameters, flattened layer by layer (weights row-major
/// as `[outputs, inputs]`, then biases).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub config_hash: String,
    pub gamma: f64,
    pub lr: f64,
    pub shapes: Vec<[usize; 2]>,
    pub params: Vec<f64>,
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
