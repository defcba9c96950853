//! Grid-world delivery pipeline: plan a route with tabular Q-learning or a
//! deep Q-network, publish it as JSON over HTTP, decode it into motion
//! primitives, and drive a simulated four-wheel robot along it.

pub mod cli;
pub mod dqn;
pub mod gridworld;
pub mod pathcodec;
pub mod policy;
pub mod pathserver;
pub mod qlearning;
pub mod robotsim;

pub use gridworld::{Action, Cell, GridSpec, RewardSchedule};
pub use pathcodec::{MovePrimitive, PathPlan};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG every seeded component uses.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
