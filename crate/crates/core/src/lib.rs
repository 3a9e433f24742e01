//! Reward-free exploration in low-rank MDPs with continuous actions.
//!
//! The crate provides exact finite-state models over the action cube
//! `[0,1]^m`, synthetic environment and hypothesis-class factories, the MLE
//! and sampling oracles, the elliptical planner, the FLAMBE outer loop with
//! its theoretical hyperparameter calculator, and numerical verifiers for the
//! smoothness inequalities the continuous-action analysis relies on.

pub mod env;
pub mod error;
pub mod flambe;
pub mod grid;
pub mod io;
pub mod mdp;
pub mod oracles;
pub mod planner;
pub mod rng;
pub mod smoothness;

pub use error::{Error, Result};
pub use grid::ActionGrid;
pub use mdp::{
    hellinger_distance, rollout, tv_distance, value_exact, value_mc, DeterministicPolicy,
    FeatureMap, GridPolicy, LowRankMdp, Policy, RewardFunction, RewardShape, StateEmbedding,
    Trajectory,
};
