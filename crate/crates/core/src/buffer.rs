//! Transitions and the FIFO replay buffer.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Mat;

/// One environment interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub skill: usize,
    /// Squashed action, every component strictly inside (-1, 1).
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    /// Kept for reference-policy training; skill discovery ignores it.
    pub extrinsic_reward: f64,
    /// True terminal state: the TD target does not bootstrap past it.
    /// Time-limit truncation is not terminal.
    pub done: bool,
}

/// Shapes every stored transition must match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionShape {
    pub state_dim: usize,
    pub action_dim: usize,
    pub num_skills: usize,
}

impl TransitionShape {
    pub fn validate(&self, t: &Transition) -> Result<()> {
        if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim {
            return Err(Error::Validation(format!(
                "transition state length {}/{} does not match state_dim {}",
                t.state.len(),
                t.next_state.len(),
                self.state_dim
            )));
        }
        if t.action.len() != self.action_dim {
            return Err(Error::Validation(format!(
                "transition action length {} does not match action_dim {}",
                t.action.len(),
                self.action_dim
            )));
        }
        if t.skill >= self.num_skills {
            return Err(Error::Validation(format!(
                "skill {} outside [0, {})",
                t.skill, self.num_skills
            )));
        }
        if let Some(a) = t.action.iter().find(|a| !(a.abs() < 1.0)) {
            return Err(Error::Validation(format!("action component {a} outside (-1, 1)")));
        }
        Ok(())
    }
}

/// Bounded ring of transitions; once full, the oldest entry is overwritten.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    shape: TransitionShape,
    storage: Vec<Transition>,
    write_cursor: usize,
}

/// Column-stacked minibatch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub states: Mat,
    pub skills: Vec<usize>,
    pub actions: Mat,
    pub next_states: Mat,
    pub extrinsic_rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions<'a>(items: impl IntoIterator<Item = &'a Transition>) -> Self {
        let items: Vec<&Transition> = items.into_iter().collect();
        let states: Vec<&[f64]> = items.iter().map(|t| t.state.as_slice()).collect();
        let actions: Vec<&[f64]> = items.iter().map(|t| t.action.as_slice()).collect();
        let next: Vec<&[f64]> = items.iter().map(|t| t.next_state.as_slice()).collect();
        Batch {
            states: Mat::from_rows(&states),
            skills: items.iter().map(|t| t.skill).collect(),
            actions: Mat::from_rows(&actions),
            next_states: Mat::from_rows(&next),
            extrinsic_rewards: items.iter().map(|t| t.extrinsic_reward).collect(),
            dones: items.iter().map(|t| t.done).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }
}

impl ReplayBuffer {
    pub fn new(capacity: usize, shape: TransitionShape) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        ReplayBuffer {
            capacity,
            shape,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            write_cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn shape(&self) -> TransitionShape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn add(&mut self, t: Transition) -> Result<()> {
        self.shape.validate(&t)?;
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.write_cursor] = t;
        }
        self.write_cursor = (self.write_cursor + 1) % self.capacity;
        Ok(())
    }

    /// Raw slot order and the next write position, for exact checkpointing.
    pub fn slots(&self) -> (&[Transition], usize) {
        (&self.storage, self.write_cursor)
    }

    /// Inverse of [`ReplayBuffer::slots`].
    pub fn from_slots(capacity: usize, shape: TransitionShape, storage: Vec<Transition>, write_cursor: usize) -> Result<Self> {
        if capacity == 0 || storage.len() > capacity || write_cursor >= capacity {
            return Err(Error::Validation(format!(
                "buffer slots inconsistent: {} stored, cursor {write_cursor}, capacity {capacity}",
                storage.len()
            )));
        }
        if storage.len() < capacity && write_cursor != storage.len() {
            return Err(Error::Validation("partially filled buffer must write at its end".into()));
        }
        for t in &storage {
            shape.validate(t)?;
        }
        Ok(ReplayBuffer {
            capacity,
            shape,
            storage,
            write_cursor,
        })
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.write_cursor
        };
        self.storage[split..].iter().chain(&self.storage[..split])
    }

    /// `n` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.storage.is_empty() {
            return Err(Error::Validation("cannot sample from an empty replay buffer".into()));
        }
        Ok((0..n).map(|_| rng.gen_range(0..self.storage.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        let idx = self.sample_indices(n, rng)?;
        Ok(Batch::from_transitions(idx.iter().map(|&i| &self.storage[i])))
    }

    /// Raw slot access (insertion order is not implied).
    pub fn slot(&self, i: usize) -> &Transition {
        &self.storage[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::component_rng;

    const SHAPE: TransitionShape = TransitionShape {
        state_dim: 2,
        action_dim: 1,
        num_skills: 3,
    };

    fn transition(tag: f64) -> Transition {
        Transition {
            state: vec![tag, 0.0],
            skill: 0,
            action: vec![0.5],
            next_state: vec![tag, 1.0],
            extrinsic_reward: 0.0,
            done: false,
        }
    }

    #[test]
    fn add_counts() {
        let mut buf = ReplayBuffer::new(10, SHAPE);
        buf.add(transition(1.0)).unwrap();
        assert_eq!(buf.len(), 1);
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(2, SHAPE);
        for tag in [1.0, 2.0, 3.0] {
            buf.add(transition(tag)).unwrap();
        }
        let tags: Vec<f64> = buf.iter().map(|t| t.state[0]).collect();
        assert_eq!(tags, vec![2.0, 3.0]);
    }

    #[test]
    fn rejects_bad_transitions() {
        let mut buf = ReplayBuffer::new(2, SHAPE);
        let mut t = transition(0.0);
        t.skill = 3;
        assert!(matches!(buf.add(t), Err(Error::Validation(_))));
        let mut t = transition(0.0);
        t.action = vec![1.0];
        assert!(buf.add(t).is_err());
        let mut t = transition(0.0);
        t.next_state = vec![0.0];
        assert!(buf.add(t).is_err());
        assert!(buf.is_empty());
    }

    #[test]
    fn single_element_sampling() {
        let mut buf = ReplayBuffer::new(4, SHAPE);
        buf.add(transition(7.0)).unwrap();
        let batch = buf.sample(4, &mut component_rng(0, "t")).unwrap();
        assert_eq!(batch.len(), 4);
        assert!(batch.states.data.chunks(2).all(|r| r[0] == 7.0));
    }

    #[test]
    fn empty_sampling_fails() {
        let buf = ReplayBuffer::new(4, SHAPE);
        assert!(buf.sample(1, &mut component_rng(0, "t")).is_err());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut buf = ReplayBuffer::new(100, SHAPE);
        for i in 0..100 {
            buf.add(transition(i as f64)).unwrap();
        }
        let a = buf.sample_indices(32, &mut component_rng(9, "s")).unwrap();
        let b = buf.sample_indices(32, &mut component_rng(9, "s")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_is_uniform() {
        // 10k distinct entries, repeated batches of 1000; each count is
        // Binomial(N, 1e-4), so every count should sit within 5 sigma.
        let n = 10_000;
        let mut buf = ReplayBuffer::new(n, SHAPE);
        for i in 0..n {
            buf.add(transition(i as f64)).unwrap();
        }
        let mut rng = component_rng(11, "uniform");
        let mut counts = vec![0u32; n];
        let draws = 1000 * 1000;
        for _ in 0..1000 {
            for i in buf.sample_indices(1000, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        let p = 1.0 / n as f64;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        let worst = counts.iter().map(|&c| (c as f64 - mean).abs() / sigma).fold(0.0, f64::max);
        assert!(worst < 5.0, "worst deviation {worst} sigma");
    }
}
