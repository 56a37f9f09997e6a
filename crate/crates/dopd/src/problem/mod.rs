//! Online constrained problems as seen by the optimization engine.
//!
//! A problem instance owns everything agent-specific: the per-round cost
//! stream `f_{i,t}`, the time-invariant constraint maps `g_i`, the feasible
//! sets `X_i` (exposed through their Euclidean projectors), and the bound
//! constants the analysis needs. The engine drives it through one
//! [`OnlineProblem::advance`] call per round and evaluates the revealed costs
//! only at already-committed points, preserving the online protocol; metrics
//! replay the same stream after [`OnlineProblem::reset`], which must
//! reproduce it exactly.

use crate::linalg::Mat;

pub mod projection;
pub mod routing;
pub mod synthetic;

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("problem must have at least one agent")]
    NoAgents,
    #[error("{what} has length {got}, expected one entry per agent ({expected})")]
    BadLength { what: &'static str, got: usize, expected: usize },
    #[error("jitter amplitude must be nonnegative, got {0}")]
    NegativeJitter(f64),
    #[error("rate curve needs 0 <= lower < upper, got lower = {lower}, upper = {upper}")]
    BadRateWindow { lower: f64, upper: f64 },
    #[error("noise amplitude must be nonnegative, got {0}")]
    NegativeNoise(f64),
    #[error("minimum aggregate rate must be positive, got {0}")]
    NonPositiveRateFloor(f64),
    #[error("auxiliary-variable box radius must be positive, got {0}")]
    NonPositiveBox(f64),
    #[error("positions list has {got} points, expected {expected} (sources + access points)")]
    BadPositionCount { got: usize, expected: usize },
    #[error("routing needs at least one source and one access point")]
    DegenerateTopology,
}

/// Bound constants a problem declares about itself. All are suprema over the
/// feasible sets and the whole cost stream; downstream bounds take them at
/// face value, so they must genuinely dominate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProblemConstants {
    /// `C_x`: per-agent feasible-set radius, `||x|| <= C_x` on every `X_i`.
    pub c_x: f64,
    /// `C_f`: bound on `|f_{i,t}|` over `X_i`, all agents and rounds.
    pub c_f: f64,
    /// `C_g`: bound on `||g_i||` over `X_i`.
    pub c_g: f64,
    /// `L_f`: bound on `||grad f_{i,t}||` over `X_i`.
    pub l_f: f64,
    /// `L_g`: bound on the operator norm of the `g_i` Jacobians over `X_i`.
    pub l_g: f64,
}

/// An online constrained optimization problem over `N` agents.
///
/// Rounds are 1-based. After construction (or [`reset`](Self::reset)) the
/// instance sits at round 0 with no cost revealed; each
/// [`advance`](Self::advance) reveals the next round's costs. Cost queries
/// refer to the current round. Constraint maps, projectors, and bounds are
/// time-invariant.
///
/// Determinism contract: two instances built with identical parameters and
/// seed, advanced the same number of times, answer every query identically.
pub trait OnlineProblem {
    fn num_agents(&self) -> usize;

    /// Dimension `m` of each `g_i`'s value (shared across agents).
    fn constraint_dim(&self) -> usize;

    /// Dimension of agent `i`'s decision variable.
    fn decision_dim(&self, agent: usize) -> usize;

    fn constants(&self) -> ProblemConstants;

    /// Starting point in `X_i`.
    fn initial_point(&self, agent: usize) -> Vec<f64>;

    /// Reveals the next round's costs.
    fn advance(&mut self);

    /// Rounds revealed so far; 0 until the first [`advance`](Self::advance).
    fn round(&self) -> usize;

    /// Returns to round 0; the subsequent rounds replay the same stream.
    fn reset(&mut self);

    /// `f_{i,t}(x)` for the current round `t`.
    fn cost(&self, agent: usize, x: &[f64]) -> f64;

    /// Gradient of `f_{i,t}` at `x` for the current round `t`.
    fn cost_grad(&self, agent: usize, x: &[f64]) -> Vec<f64>;

    /// `(1/t) * sum_{s<=t} f_{i,s}(x)` over the rounds revealed so far.
    fn averaged_cost(&self, agent: usize, x: &[f64]) -> f64;

    /// Gradient of [`averaged_cost`](Self::averaged_cost) at `x`.
    fn averaged_cost_grad(&self, agent: usize, x: &[f64]) -> Vec<f64>;

    /// `g_i(x)`, length [`constraint_dim`](Self::constraint_dim).
    fn constraint(&self, agent: usize, x: &[f64]) -> Vec<f64>;

    /// Jacobian of `g_i` at `x`, `m` rows by `decision_dim(i)` columns.
    fn constraint_jacobian(&self, agent: usize, x: &[f64]) -> Mat;

    /// Euclidean projection onto `X_i`.
    fn project(&self, agent: usize, x: &[f64]) -> Vec<f64>;

    /// Axis-aligned bounding box of `X_i`, one `(lo, hi)` pair per
    /// coordinate. Used for grid search and randomized initialization; the
    /// box may be a strict superset of `X_i`.
    fn box_bounds(&self, agent: usize) -> Vec<(f64, f64)>;
}

/// `grad g_i(x)' v` for a dense Jacobian; the common way the engine consumes
/// the Jacobian.
#[must_use]
pub fn jacobian_transpose_vec(jac: &Mat, v: &[f64]) -> Vec<f64> {
    jac.tmatvec(v)
}
