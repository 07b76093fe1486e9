//! Modeling, simulation and trajectory optimization for a double pendulum
//! driven by clutch-switched series-elastic joints, with a
//! variable-stiffness baseline.

#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::manual_is_multiple_of
)]

pub mod ad;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod friction;
pub mod hybrid;
pub mod linalg;
pub mod nlp;
pub mod ocp;
pub mod params;
pub mod power;
pub mod sim;
pub mod verify;
pub mod vsa;

pub use error::{Error, Result};
pub use params::PendulumParams;
