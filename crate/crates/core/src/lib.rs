//! Human-feedback-guided reinforcement learning for sparse-reward 2D navigation.
//!
//! The pipeline has two learning stages over one [`env::NavEnv`]:
//!
//! 1. [`hf`]: an online classifier `F̂(s, a)` is fit to binary feedback on the
//!    agent's own actions (from a noisy oracle built on [`planner`], or a live
//!    person), and `π_HF(s) = argmax_a F̂(s, a)` is read off it.
//! 2. [`trainer`]: PPO ([`ppo`]) learns from the sparse reward while, per
//!    episode, the behavior policy is `π_HF` with a probability that decays
//!    linearly to zero.
//!
//! [`metrics`] holds SPL, seeding and CSV/JSON persistence; [`experiment`]
//! wires whole runs and sweeps together.

pub mod env;
pub mod error;
pub mod experiment;
pub mod hf;
pub mod metrics;
pub mod nn;
pub mod planner;
pub mod ppo;
pub mod trainer;

pub use error::{Error, Result};
