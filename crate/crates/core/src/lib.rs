//! Hybrid reinforcement-learning benchmarks: native environments, sim2real
//! and offline2real error injection, offline dataset generation, simulator
//! anchored model-based agents, and exact oracles to check them against.

pub mod agents;
pub mod bench;
pub mod datagen;
pub mod dynmodel;
pub mod envs;
pub mod error;
pub mod features;
pub mod linalg;
pub mod oracle;
pub mod perturb;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
