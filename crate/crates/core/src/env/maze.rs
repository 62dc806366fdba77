//! Open 2-D plane enclosed by walls, with a Gaussian-kernel reward toward
//! the lower right.

use rand::Rng;
use rand::SeedableRng;

use super::{check_action, EnvSpec, Environment, StepResult};
use crate::error::{Error, Result};
use crate::seeding::Rng as SeededRng;

pub const WALL_LOW: f64 = 1.0 / 7.0;
pub const WALL_HIGH: f64 = 6.0 / 7.0;
/// Per-axis displacement of a unit action.
pub const MAX_DISPLACEMENT: f64 = 1.0 / 70.0;
pub const KERNEL_CENTER: [f64; 2] = [9.0 / 14.0, 3.0 / 14.0];
pub const KERNEL_BANDWIDTH: f64 = 1.0 / 14.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMazeState {
    pub x: f64,
    pub y: f64,
}

impl PointMazeState {
    /// Start position for start noise `(eps_x, eps_y)` in `[-1, 1]`.
    pub fn from_noise(eps_x: f64, eps_y: f64) -> Self {
        PointMazeState {
            x: (7.0 + eps_x) / 14.0,
            y: (7.0 + eps_y) / 14.0,
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.y]
    }
}

/// Draws a start position; `shared_noise` uses one draw for both axes.
pub fn pointmaze_reset<R: Rng + ?Sized>(rng: &mut R, shared_noise: bool) -> PointMazeState {
    let eps_x = rng.gen_range(-1.0..=1.0);
    let eps_y = if shared_noise {
        eps_x
    } else {
        rng.gen_range(-1.0..=1.0)
    };
    PointMazeState::from_noise(eps_x, eps_y)
}

/// Peak-one Gaussian kernel around [`KERNEL_CENTER`].
pub fn kernel_reward(pos: PointMazeState) -> f64 {
    let dx = pos.x - KERNEL_CENTER[0];
    let dy = pos.y - KERNEL_CENTER[1];
    (-(dx * dx + dy * dy) / (2.0 * KERNEL_BANDWIDTH * KERNEL_BANDWIDTH)).exp()
}

/// Moves by `action / 70` per axis and clips to the walls. Returns the new
/// position and its kernel reward.
pub fn pointmaze_step(state: PointMazeState, action: &[f64]) -> Result<(PointMazeState, f64)> {
    check_action(action, 2)?;
    let next = PointMazeState {
        x: (state.x + action[0] * MAX_DISPLACEMENT).clamp(WALL_LOW, WALL_HIGH),
        y: (state.y + action[1] * MAX_DISPLACEMENT).clamp(WALL_LOW, WALL_HIGH),
    };
    Ok((next, kernel_reward(next)))
}

/// Return of the best possible episode from `start`.
///
/// Distance to the kernel center is separable per axis, so moving each axis
/// toward the center at full speed minimizes the distance at every step;
/// that greedy path is optimal for any reward decreasing in distance.
pub fn optimal_return(start: PointMazeState, horizon: usize) -> f64 {
    let mut pos = start;
    let mut total = 0.0;
    for _ in 0..horizon {
        let toward = |p: f64, c: f64| {
            let d = c - p;
            p + d.clamp(-MAX_DISPLACEMENT, MAX_DISPLACEMENT)
        };
        pos = PointMazeState {
            x: toward(pos.x, KERNEL_CENTER[0]).clamp(WALL_LOW, WALL_HIGH),
            y: toward(pos.y, KERNEL_CENTER[1]).clamp(WALL_LOW, WALL_HIGH),
        };
        total += kernel_reward(pos);
    }
    total
}

/// The maze behind the [`Environment`] contract.
#[derive(Debug, Clone)]
pub struct PointMaze {
    spec: EnvSpec,
    shared_noise: bool,
    rng: SeededRng,
    position: PointMazeState,
    steps: usize,
    /// None before the first reset.
    finished: Option<bool>,
}

impl PointMaze {
    pub fn new(horizon: usize, shared_noise: bool, seed: u64) -> Self {
        PointMaze {
            spec: EnvSpec::unit_box(2, 2, horizon),
            shared_noise,
            rng: SeededRng::seed_from_u64(seed),
            position: PointMazeState::from_noise(0.0, 0.0),
            steps: 0,
            finished: None,
        }
    }

    pub fn position(&self) -> PointMazeState {
        self.position
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

impl Environment for PointMaze {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn seed(&mut self, seed: u64) -> Result<()> {
        self.rng = SeededRng::seed_from_u64(seed);
        Ok(())
    }

    fn reset(&mut self) -> Result<Vec<f64>> {
        self.position = pointmaze_reset(&mut self.rng, self.shared_noise);
        self.steps = 0;
        self.finished = Some(false);
        Ok(self.position.to_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        match self.finished {
            None => return Err(Error::Validation("step called before reset".into())),
            Some(true) => return Err(Error::Validation("episode already finished; reset first".into())),
            Some(false) => {}
        }
        let (next, reward) = pointmaze_step(self.position, action)?;
        self.position = next;
        self.steps += 1;
        let done = self.steps >= self.spec.max_episode_steps;
        self.finished = Some(done);
        Ok(StepResult {
            next_state: next.to_vec(),
            extrinsic_reward: reward,
            done,
            truncated: done,
        })
    }
}
