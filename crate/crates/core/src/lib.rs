//! Iterative sampling alternating directions (ISAD) for
//! `min_x h(x) + P(E[M]x)` when `E[M]` is only reachable through samples.
//!
//! Each round draws more matrices, refreshes the running mean `M̄`, and takes
//! one y-prox step, one Bregman-regularized x step and one dual step on the
//! augmented Lagrangian built from `M̄`. A penalty oracle adjusts `β` a finite
//! number of times.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(v > 0.0)` deliberately rejects NaN

pub mod driver;
pub mod error;
pub mod lagrangian;
pub mod objective;
pub mod penalty;
pub mod problems;
pub mod rng;
pub mod sampling;
pub mod verify;

pub use error::{IsadError, Result};
