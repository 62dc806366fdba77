//! Skill discovery on a point maze, with the skill discriminator reading a
//! learned linear projection of the state.

pub mod approx;
pub mod buffer;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod env;
pub mod eval;
pub mod error;
pub mod nn;
pub mod project;
pub mod sac;
pub mod seeding;
pub mod skill;

pub use config::Config;
pub use error::{Error, Result};
