//! Numerical laboratory for Hardy numbers of comb domains.
//!
//! Two independent routes estimate the Hardy number `h(D)`:
//! the deterministic chain built on the angular-width profile `Θ(t)` of the
//! arc through the positive real axis, and Monte Carlo exit times of planar
//! Brownian motion, whose tail exponent is `h(D)/2`.

// `!(x > 0.0)` is how parameters reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod constructions;
pub mod estimators;
pub mod stochastic;
pub mod io;
pub mod verify;
pub mod cli;
