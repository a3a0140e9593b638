//! Simulation and verification laboratory for mean-field interacting particle systems.
//!
//! The crate simulates Newton's mean-field dynamics on the torus, estimates cumulants and
//! correlation pairings of the empirical measure by Monte Carlo, and solves the kinetic
//! reference equations (Vlasov, linearized Vlasov, Bogolyubov, Lenard–Balescu) used to
//! check the particle statistics against their mean-field predictions.

pub mod bogolyubov;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod lenard_balescu;
pub mod model;
pub mod numerics;
pub mod partitions;
pub mod stats;
pub mod verify;
pub mod vlasov;

pub use error::{Error, Result};
