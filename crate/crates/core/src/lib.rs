//! Algorithmic core for learned operator selection in Adaptive Large
//! Neighbourhood Search on the capacitated vehicle routing problem.
//!
//! The crate is `no_std` and only needs an allocator. Everything that touches
//! files, the clock or threads lives in the companion `opsel` crate.
//!
//! Layout:
//!
//! - [`instance`] / [`solution`]: CVRP data model, objective, feasibility and
//!   the incremental insertion/removal primitives.
//! - [`operators`]: the twelve destroy and two repair operators and portfolios.
//! - [`mdp`]: the operator-selection episode environment.
//! - [`selectors`]: random and roulette-wheel selection (classic and learned).
//! - [`neural`]: MLP and graph-attention Q-networks with exact gradients, Adam
//!   and the state encoder.
//! - [`dqn`]: replay, target network, epsilon-greedy training and the softmax
//!   inference policy.
//! - [`alns`]: the simulated-annealing ALNS loop driven by any selector.
#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod alns;
pub mod dqn;
mod error;
pub mod instance;
pub(crate) mod math;
pub mod mdp;
pub mod neural;
pub mod operators;
pub mod selectors;
pub mod solution;
pub mod stats;

pub use error::{Error, Result};
pub use instance::{Instance, NodeRecord};
pub use solution::{Solution, Violation};
