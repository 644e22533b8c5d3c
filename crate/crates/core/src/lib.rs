//! Optimal dispatch of heterogeneous energy-store fleets against a
//! demand/surplus signal.
//!
//! The crate provides:
//!
//! - a fleet model with explicit units and validation ([`model`]);
//! - greedy duration-based dispatch policies — GGDDF for discharge, GGCDF
//!   for charge, and their combination — plus baselines ([`policies`]);
//! - energy–power transforms, the convex calculus that decides exactly how
//!   much of a demand any dispatch can serve ([`transforms`]);
//! - an exact event-driven simulator producing piecewise-constant
//!   trajectories with no integration error at breakpoints ([`sim`]);
//! - an independent linear-programming oracle and a property verifier that
//!   checks the optimality claims behind the greedy policies on randomized
//!   instances ([`oracle`]).
//!
//! Conventions: energy in MWh, power in MW, time in hours; positive rates
//! discharge, negative rates charge; demand signals are piecewise constant
//! with positive values meaning demand to serve and negative values surplus
//! available for charging.

pub mod io;
pub mod model;
pub mod oracle;
pub mod policies;
pub mod sim;
pub mod transforms;

/// Default numeric tolerance used when callers do not supply one: grouping
/// of nearly-equal durations, emptiness checks, and feasibility slack.
pub const DEFAULT_EPS: f64 = 1e-9;
