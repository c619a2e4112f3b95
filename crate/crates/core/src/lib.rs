//! Planning, posture control and trajectory correction for a two-link
//! robot performing a flying-trapeze release and catch.
//!
//! The pipeline is: plan a two-phase minimum-effort trajectory with
//! Hermite-Simpson collocation ([`planner`]), stabilize it with a
//! time-varying LQR ([`control`]), re-plan the flight after the real release
//! is observed, and stress-test the whole loop on a perturbed plant
//! ([`sim`]).

// validation compares with `!(x > 0.0)` so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::field_reassign_with_default))]

pub mod control;
pub mod dynamics;
pub mod error;
pub mod planner;
pub mod plot;
pub mod sim;

pub use error::{Error, Result};
