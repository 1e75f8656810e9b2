//! Inertial Nash equilibria of population games with switching costs.
//!
//! A population of mass `gamma` spreads over `n` actions; moving from action
//! `i` to `j` costs `c_ij`. A state is inertial when nobody gains by paying to
//! switch. The crate verifies that property, searches for such states with a
//! projected-utility iteration or with better-response dynamics, and ships
//! the ride-hailing scenario that motivates the model.

// Negated float comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod game;
pub mod instances;
pub mod io;
pub mod multiclass;
pub mod par;
pub mod probe;
pub mod scenarios;
pub mod solvers;

pub use error::{Error, Result};
pub use game::{PopulationGame, SimplexPoint, SwitchingCosts, UtilityModel};
pub use par::Execution;
