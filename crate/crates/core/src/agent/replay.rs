use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::context::ArmContext;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceSample {
    pub context: ArmContext,
    /// Observed cell reliability, 0 or 1.
    pub label: f64,
}

/// FIFO store that evicts the oldest sample at capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    samples: VecDeque<ExperienceSample>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, samples: VecDeque::with_capacity(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, sample: ExperienceSample) {
        if self.capacity == 0 {
            return;
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
    }

    pub fn iter(&self) -> impl Iterator<Item = &ExperienceSample> {
        self.samples.iter()
    }

    /// `q` distinct samples chosen uniformly; `None` if fewer are stored.
    pub fn sample<R: Rng + ?Sized>(&self, q: usize, rng: &mut R) -> Option<Vec<&ExperienceSample>> {
        if q == 0 || self.samples.len() < q {
            return None;
        }
        Some(index::sample(rng, self.samples.len(), q).into_iter().map(|i| &self.samples[i]).collect())
    }
}
