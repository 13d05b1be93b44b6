use std::collections::VecDeque;

use rand::seq::index;

use super::Transition;
use crate::rng::SimRng;

/// Bounded FIFO of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Up to `n` distinct transitions, uniformly without replacement.
    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Vec<Transition> {
        let n = n.min(self.items.len());
        index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| self.items[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Action;
    use crate::env::{ActionLevels, EpiState};
    use crate::rng::rng_from_seed;

    fn t(r: f64) -> Transition {
        let s = EpiState::from_array([0.0; 4]);
        Transition {
            state: s,
            action: Action::Levels(ActionLevels::uniform(0)),
            reward: r,
            next_state: s,
            done: false,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(t(i as f64));
        }
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sample_bounded_by_len() {
        let mut buf = ReplayBuffer::new(10);
        for i in 0..4 {
            buf.push(t(i as f64));
        }
        let mut rng = rng_from_seed(0);
        let s = buf.sample(8, &mut rng);
        assert_eq!(s.len(), 4);
        let mut r: Vec<f64> = s.iter().map(|t| t.reward).collect();
        r.sort_by(f64::total_cmp);
        assert_eq!(r, vec![0.0, 1.0, 2.0, 3.0]);
    }
}
