//! Random times, their canonical pairs, and Monte Carlo checks of the
//! resulting path constructions.
//!
//! The crate is organised by model family. `discrete_time` works on finite
//! trees and is exact; `levy`, `diffusion` and `finite_horizon` simulate the
//! two-step randomized-stopping-time recipe and the direct P-dynamics;
//! `oracles` holds closed-form laws and `stats` the goodness-of-fit tools
//! that tie the two together.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod bridge;
pub mod config;
pub mod diffusion;
pub mod discrete_time;
pub mod error;
pub mod eta;
pub mod expr;
pub mod finite_horizon;
pub mod grid;
pub mod levy;
pub mod oracles;
pub mod path;
pub mod quad;
pub mod rng;
pub mod special;
pub mod stats;
pub mod validation;

pub use config::MonteCarloConfig;
pub use error::{Error, Result};
pub use eta::{eta_u, EtaIndex};
pub use grid::{Horizon, StepPolicy, TimeGrid};
pub use path::{SamplePath, StopReason};
pub use rng::RngStream;
