use serde::{Deserialize, Serialize};

/// Linear annealing of the exploration rate over epochs, then constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_epochs: usize,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule { start: 0.99, end: 0.1, anneal_epochs: 100 }
    }
}

impl EpsilonSchedule {
    pub fn at(&self, epoch: usize) -> f64 {
        if self.anneal_epochs == 0 {
            return self.end;
        }
        if epoch >= self.anneal_epochs {
            return self.end;
        }
        let progress = epoch as f64 / self.anneal_epochs as f64;
        self.start * (1.0 - progress) + self.end * progress
    }
}
