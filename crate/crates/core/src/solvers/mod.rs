//! Equilibrium-seeking iterations: the projected-utility method, the
//! better-response dynamics and their shared result types.

mod better_response;
mod potential;
mod projection;
mod simplex;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use better_response::{
    better_response_solve, better_response_step, check_better_response_preconditions,
    check_transfer_bounds, BetterResponseConfig, BoundKind, RedistributionPolicy, StepResult,
    TransferBoundViolation, TransferCheck, Transfers, UpdateMode,
};
pub(crate) use better_response::{block_preconditions, run_dynamics, BlockGame};
pub use potential::potential_value;
pub use projection::{projection_solve, ProjectionConfig};
pub use simplex::project_simplex;

/// Trajectories are recorded in full up to this iteration, then every
/// [`THIN_EVERY`]-th step.
pub const FULL_TRAJECTORY_STEPS: usize = 100_000;
pub const THIN_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIter,
    CycleDetected,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Converged => "Converged",
            Status::MaxIter => "MaxIter",
            Status::CycleDetected => "CycleDetected",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord<P> {
    pub k: usize,
    pub x: P,
    /// `min_i u_i(x(k))`.
    pub min_utility: f64,
    pub gap: f64,
    /// Mass moved (better response) or `||x(k) - x(k-1)||_1` (projection) to reach this state.
    pub moved_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult<P> {
    pub status: Status,
    pub x_final: P,
    pub iterations: usize,
    pub gap_final: f64,
    /// The post-hoc equilibrium check passed at the solver's verification tolerance.
    pub verified: bool,
    pub cycle_period: Option<usize>,
    pub trajectory: Vec<TrajectoryRecord<P>>,
}

/// Issues that block the convergence guarantees of a solver.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PreconditionIssue {
    NonPositiveStep { rho: f64 },
    StepTooLarge { rho: f64, limit: f64 },
    IncreasingUtility { action: usize },
    ZeroCMin,
    NonPositiveEpsilon { epsilon: f64 },
    InflowCapNonPositive { cap: f64 },
    InfeasibleInflow { max_inflow: f64, cap: f64 },
}

impl fmt::Display for PreconditionIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PreconditionIssue::NonPositiveStep { rho } => write!(f, "step size {rho} is not positive"),
            PreconditionIssue::StepTooLarge { rho, limit } => {
                write!(f, "step size {rho} is not below 2/L = {limit}")
            }
            PreconditionIssue::IncreasingUtility { action } => {
                write!(f, "utility of action {} is not non-increasing", action + 1)
            }
            PreconditionIssue::ZeroCMin => write!(f, "ZeroCMin: minimum switching cost is zero"),
            PreconditionIssue::NonPositiveEpsilon { epsilon } => {
                write!(f, "epsilon {epsilon} is not positive")
            }
            PreconditionIssue::InflowCapNonPositive { cap } => {
                write!(f, "inflow cap c_min/L - epsilon = {cap} is not positive")
            }
            PreconditionIssue::InfeasibleInflow { max_inflow, cap } => write!(
                f,
                "per-step inflow up to {max_inflow} exceeds cap c_min/L - epsilon = {cap}"
            ),
        }
    }
}

pub(crate) fn should_record(k: usize) -> bool {
    k <= FULL_TRAJECTORY_STEPS || k % THIN_EVERY == 0
}

pub(crate) fn norm2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

pub(crate) fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}
