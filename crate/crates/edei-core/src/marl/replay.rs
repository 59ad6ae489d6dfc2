//! Experience replay over extended transition tuples.
//!
//! Each transition stores, beyond the usual (s, u, r, s′, done), the
//! assignment progress snapshot, the incident set, and the prediction set
//! active when the actions were chosen, so training sees exactly what the
//! policies saw.

use rand::Rng;

/// One stored step of experience. Observations and masks are kept for both
/// endpoints because actor updates replay the decision at s and target
/// actors re-decide at s′.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub obs: Vec<Vec<f64>>,
    pub masks: Vec<Vec<bool>>,
    /// Chosen action slot per agent.
    pub actions: Vec<u32>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_obs: Vec<Vec<f64>>,
    pub next_masks: Vec<Vec<bool>>,
    pub done: bool,
    /// Assignment status codes at decision time.
    pub omega: Vec<u8>,
    /// Incident node ids at decision time.
    pub incident_set: Vec<u32>,
    /// Prediction set entries at decision time.
    pub prediction: Vec<(u32, f64)>,
}

/// Fixed-capacity ring buffer with uniform without-replacement sampling.
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer needs capacity");
        ReplayBuffer { items: Vec::new(), capacity, next: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
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

    pub fn get(&self, index: usize) -> &Transition {
        &self.items[index]
    }

    /// `batch` distinct uniform indices. Rejection sampling keeps this
    /// allocation-light for the usual batch ≪ len case.
    pub fn sample_indices(&self, batch: usize, rng: &mut impl Rng) -> Vec<usize> {
        assert!(batch <= self.items.len(), "batch exceeds stored transitions");
        let mut picked = Vec::with_capacity(batch);
        while picked.len() < batch {
            let idx = rng.random_range(0..self.items.len());
            if !picked.contains(&idx) {
                picked.push(idx);
            }
        }
        picked
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition(tag: f64) -> Transition {
        Transition {
            state: vec![tag, tag + 0.5],
            obs: vec![vec![tag]],
            masks: vec![vec![true, false]],
            actions: vec![0],
            reward: tag,
            next_state: vec![tag + 1.0, tag + 1.5],
            next_obs: vec![vec![tag + 1.0]],
            next_masks: vec![vec![false, true]],
            done: false,
            omega: vec![0, 1],
            incident_set: vec![3],
            prediction: vec![(2, 0.7)],
        }
    }

    #[test]
    fn ring_overwrites_the_oldest_entries() {
        let mut buf = ReplayBuffer::new(4);
        for i in 0..6 {
            buf.push(transition(i as f64));
        }
        assert_eq!(buf.len(), 4);
        let rewards: Vec<f64> = (0..4).map(|i| buf.get(i).reward).collect();
        assert_eq!(rewards, vec![4.0, 5.0, 2.0, 3.0], "slots 0 and 1 were reused");
    }

    #[test]
    fn sampled_transitions_are_identical_to_stored_ones() {
        let mut buf = ReplayBuffer::new(16);
        for i in 0..10 {
            buf.push(transition(i as f64));
        }
        let mut rng = crate::seed::derive_rng(1, 0xF0);
        let idxs = buf.sample_indices(5, &mut rng);
        assert_eq!(idxs.len(), 5);
        let mut sorted = idxs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 5, "indices are distinct");
        for idx in idxs {
            assert_eq!(*buf.get(idx), transition(idx as f64));
        }
    }

    #[test]
    fn sampling_same_stream_is_deterministic() {
        let mut buf = ReplayBuffer::new(64);
        for i in 0..50 {
            buf.push(transition(i as f64));
        }
        let mut a = crate::seed::derive_rng(2, 0xF1);
        let mut b = crate::seed::derive_rng(2, 0xF1);
        assert_eq!(buf.sample_indices(32, &mut a), buf.sample_indices(32, &mut b));
    }

    #[test]
    fn single_item_batches_are_uniform() {
        let mut buf = ReplayBuffer::new(4);
        for i in 0..4 {
            buf.push(transition(i as f64));
        }
        let mut rng = crate::seed::derive_rng(3, 0xF2);
        let mut counts = [0u32; 4];
        for _ in 0..10_000 {
            counts[buf.sample_indices(1, &mut rng)[0]] += 1;
        }
        for c in counts {
            let freq = f64::from(c) / 10_000.0;
            assert!((freq - 0.25).abs() < 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn full_batch_returns_every_index() {
        let mut buf = ReplayBuffer::new(8);
        for i in 0..8 {
            buf.push(transition(i as f64));
        }
        let mut rng = crate::seed::derive_rng(4, 0xF3);
        let mut idxs = buf.sample_indices(8, &mut rng);
        idxs.sort_unstable();
        assert_eq!(idxs, (0..8).collect::<Vec<_>>());
    }
}
