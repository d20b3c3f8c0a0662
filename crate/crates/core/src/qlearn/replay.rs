use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;

use super::Transition;

/// Bounded FIFO of transitions; the oldest entry is evicted first.
#[derive(Clone, Debug)]
pub struct ReplayMemory {
    buffer: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayMemory { buffer: VecDeque::with_capacity(capacity.min(1 << 16)), capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn push(&mut self, transition: Transition) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(transition);
    }

    pub fn extend<I: IntoIterator<Item = Transition>>(&mut self, transitions: I) {
        for t in transitions {
            self.push(t);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.buffer.iter()
    }

    /// Uniform sample of `min(n, len)` distinct entries.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let n = n.min(self.buffer.len());
        sample(rng, self.buffer.len(), n).into_iter().map(|i| &self.buffer[i]).collect()
    }
}
