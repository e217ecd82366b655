//! Simulator, PPO trainer and baseline solvers for distributing CNN
//! inference layers across a UAV swarm while planning its grid trajectory.

pub mod baselines;
pub mod catalog;
pub mod env;
pub mod error;
pub mod harness;
pub mod latency;
pub mod ppo;
pub mod radio;
pub mod swarm;

pub use error::{Constraint, Error, Result};
