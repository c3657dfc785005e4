//! History of generated windows shown to the discriminators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Self {
        Self {
            capacity,
            items: Vec::with_capacity(capacity),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Store `fake` and return the window to use for the discriminator step:
    /// while filling, the input itself; afterwards, with probability 0.5 a
    /// stored window that `fake` replaces, otherwise `fake`.
    pub fn query(&mut self, fake: Vec<f64>) -> Vec<f64> {
        if self.capacity == 0 {
            return fake;
        }
        if self.items.len() < self.capacity {
            self.items.push(fake.clone());
            return fake;
        }
        if self.rng.random::<f64>() < 0.5 {
            let i = self.rng.random_range(0..self.capacity);
            std::mem::replace(&mut self.items[i], fake)
        } else {
            fake
        }
    }
}
