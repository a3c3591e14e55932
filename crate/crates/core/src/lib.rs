//! Maximum-entropy exploration for deterministic tabular MDPs.
//!
//! The entropy-maximizing policy is found through a fixed-point iteration on the
//! left Perron eigenvector of a reward-tilted state-action transition operator,
//! wrapped in posterior policy iteration. Baselines (reward-mixing soft Q-iteration
//! and a Frank–Wolfe policy mixture) live alongside for comparison.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, seeding and the
//! command line are in the companion `eve-harness` crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod baselines;
mod error;
pub mod eve;
pub mod graph;
pub mod matrix;
pub mod mdp;
pub mod num;
pub mod spectral;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use mdp::{
    build_gridworld, index_of_primitivity, sa_operator, support_equal, Action, CliffMode, GridCell,
    GridSpec, Policy, SAOperator, TabularMDP,
};
pub use spectral::{Distribution, EigenPair, RewardVector, TiltedOperator};
