//! Environment contract, the built-in point maze and the external adapter.

mod external;
mod maze;

pub use external::{serve, ChildPipe, ExternalEnv, Opcode, PROTOCOL_MAGIC, PROTOCOL_VERSION};
pub use maze::{
    kernel_reward, optimal_return, pointmaze_reset, pointmaze_step, PointMaze, PointMazeState,
    KERNEL_BANDWIDTH, KERNEL_CENTER, MAX_DISPLACEMENT, WALL_HIGH, WALL_LOW,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
}

impl EnvSpec {
    /// Spec with the symmetric `(-1, 1)` action box.
    pub fn unit_box(state_dim: usize, action_dim: usize, max_episode_steps: usize) -> Self {
        EnvSpec {
            state_dim,
            action_dim,
            action_low: vec![-1.0; action_dim],
            action_high: vec![1.0; action_dim],
            max_episode_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.action_dim == 0 || self.max_episode_steps == 0 {
            return Err(Error::Validation(format!(
                "environment dimensions must be positive: {self:?}"
            )));
        }
        if self.action_low.len() != self.action_dim || self.action_high.len() != self.action_dim {
            return Err(Error::Validation("action bounds length differs from action_dim".into()));
        }
        if self.action_low.iter().zip(&self.action_high).any(|(l, h)| !(l < h)) {
            return Err(Error::Validation("action_low must be below action_high".into()));
        }
        Ok(())
    }

    /// Checks the dimensions an agent was built for.
    pub fn expect_dims(&self, state_dim: usize, action_dim: usize) -> Result<()> {
        if self.state_dim != state_dim || self.action_dim != action_dim {
            return Err(Error::Validation(format!(
                "environment has |S|={}, |A|={} but the agent expects |S|={state_dim}, |A|={action_dim}",
                self.state_dim, self.action_dim
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub extrinsic_reward: f64,
    pub done: bool,
    /// Set when `done` comes from the episode time limit rather than a
    /// terminal state; such transitions keep bootstrapping.
    pub truncated: bool,
}

impl StepResult {
    pub fn terminal(&self) -> bool {
        self.done && !self.truncated
    }
}

/// Uniform reset/step contract for the built-in maze and external adapters.
///
/// Actions are expected in the `(-1, 1)` box; adapters rescale to the
/// environment's native bounds.
pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    /// Reseeds the environment's start-state randomness.
    fn seed(&mut self, seed: u64) -> Result<()>;

    fn reset(&mut self) -> Result<Vec<f64>>;

    /// Fails when the current episode has already finished.
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn spec(&self) -> &EnvSpec {
        (**self).spec()
    }

    fn seed(&mut self, seed: u64) -> Result<()> {
        (**self).seed(seed)
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        (**self).reset()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        (**self).step(action)
    }
}

pub(crate) fn check_action(action: &[f64], action_dim: usize) -> Result<()> {
    if action.len() != action_dim {
        return Err(Error::Validation(format!(
            "action has {} components, expected {action_dim}",
            action.len()
        )));
    }
    if let Some(a) = action.iter().find(|a| !(a.abs() < 1.0)) {
        return Err(Error::Validation(format!("action component {a} outside (-1, 1)")));
    }
    Ok(())
}
