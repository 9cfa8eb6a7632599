//! Cycling minibatch index streams, reshuffled each pass.

use crate::rng::stream;
use rand::seq::SliceRandom;

pub(crate) struct BatchCycle {
    order: Vec<usize>,
    cursor: usize,
    batch: usize,
    rng: rand_chacha::ChaCha12Rng,
}

impl BatchCycle {
    pub fn new(n: usize, batch: usize, seed: u64, tag: &str) -> Self {
        BatchCycle {
            order: (0..n).collect(),
            cursor: n, // force shuffle on first use
            batch: batch.clamp(1, n.max(1)),
            rng: stream(seed, tag),
        }
    }

    pub fn next(&mut self) -> Vec<usize> {
        if self.order.is_empty() {
            return Vec::new();
        }
        if self.cursor + self.batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let out = self.order[self.cursor..self.cursor + self.batch].to_vec();
        self.cursor += self.batch;
        out
    }
}
