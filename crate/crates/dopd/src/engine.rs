//! The distributed online primal-dual iteration.
//!
//! Each agent `i` holds a primal iterate `x_i` in its feasible set, a dual
//! iterate `lambda_i` in the nonnegative orthant, and a tracker `y_i`
//! estimating the network-average constraint value. One round consists of
//!
//! ```text
//!     consensus   lt_i = sum_j W[i][j] lambda_j
//!                 yt_i = sum_j W[i][j] y_j
//!     primal      x_i  <- Proj_{X_i}( x_i - alpha * s_i ),
//!                 s_i  =  grad f_{i,t}(x_i)
//!                       + (1/N) Jg_i(x_i)' dF(N yt_i) lt_i
//!     dual        lambda_i <- [ lt_i + (alpha/N) F(N yt_i) ]_+
//!     tracker     y_i  <- yt_i + g_i(x_i_new) - g_i(x_i_old)
//! ```
//!
//! The tracker update is conservative: summing it over agents shows that
//! `sum_i y_i = sum_i g_i(x_i)` at every round (double stochasticity keeps
//! the consensus part sum-preserving, and the correction terms telescope), so
//! `N yt_i` is each agent's running estimate of the aggregate constraint
//! value that nobody can evaluate locally.
//!
//! Rounds are 1-based and the round-1 iterate is the initial point, so a
//! horizon-`T` run applies `T` updates and additionally exposes the final
//! post-update state. Costs are revealed after decisions: round `t` evaluates
//! `f_{i,t}` only at points already determined by rounds `< t` (and at fixed
//! comparators).
//!
//! [`run_centralized`] is an independent reference loop: projected gradient
//! descent on the full penalized objective with dual ascent on the aggregate
//! constraint, the saddle-point scheme the distributed iteration collapses to
//! when `N = 1` and consensus is trivial. The two are implemented separately
//! so agreement between them is a genuine cross-check.

use serde::{Deserialize, Serialize};

use crate::graph::{GraphSequence, ValidationReport, WeightMatrix};
use crate::linalg::{axpy, dist2, norm2, norm_inf, sub};
use crate::penalty::PenaltyFunction;
use crate::problem::OnlineProblem;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("graph has {graph} nodes but the problem has {problem} agents")]
    AgentCountMismatch { graph: usize, problem: usize },
    #[error("penalty has dimension {penalty} but the problem's constraints have dimension {problem}")]
    PenaltyDimMismatch { penalty: usize, problem: usize },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("stepsize must be positive, got {0}")]
    NonPositiveStepsize(f64),
    #[error("graph sequence fails validation: {0:?}")]
    InvalidGraph(Box<ValidationReport>),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error("non-finite iterate at round {round}; diverging run aborted")]
    NonFinite { round: usize },
    #[error("audit requires a trajectory recorded with snapshots enabled")]
    SnapshotsRequired,
    #[error("comparator point for agent {agent} is not in its feasible set")]
    ComparatorInfeasible { agent: usize },
    #[error("comparator dual vector must be nonnegative")]
    ComparatorDualNegative,
    #[error("trajectory and problem disagree: {0}")]
    TrajectoryMismatch(String),
}

/// Stepsize schedule. Every variant is positive and nonincreasing in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepsizeRule {
    /// `alpha_t = 1 / sqrt(t)`, the schedule behind every bound here.
    InverseSqrt,
    /// `alpha_t = scale / sqrt(t)`.
    ScaledInverseSqrt { scale: f64 },
    /// Constant stepsize, mainly for diagnostics.
    Constant { value: f64 },
}

impl StepsizeRule {
    #[must_use]
    pub fn alpha(&self, t: usize) -> f64 {
        debug_assert!(t >= 1);
        match *self {
            StepsizeRule::InverseSqrt => 1.0 / (t as f64).sqrt(),
            StepsizeRule::ScaledInverseSqrt { scale } => scale / (t as f64).sqrt(),
            StepsizeRule::Constant { value } => value,
        }
    }

    fn validate(&self) -> Result<(), EngineError> {
        let a1 = self.alpha(1);
        if !(a1 > 0.0 && a1.is_finite()) {
            return Err(EngineError::NonPositiveStepsize(a1));
        }
        Ok(())
    }
}

/// Run options. `Default` gives the standard diminishing-step run with no
/// snapshots: `horizon` is the only field most callers change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub horizon: usize,
    #[serde(default = "default_stepsize")]
    pub stepsize: StepsizeRule,
    /// Keep full per-round state (needed by the iterate audit). Off by
    /// default: long routing runs would hold hundreds of MB.
    #[serde(default)]
    pub record_snapshots: bool,
    /// Evaluate the tracker conservation gap every this many rounds
    /// (0 disables; skipped rounds record NaN).
    #[serde(default = "default_conservation_cadence")]
    pub conservation_check_every: usize,
    /// Optional safeguard radius for the dual iterates: after the dual step,
    /// project onto the ball of this radius intersected with the orthant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_cap: Option<f64>,
    /// Check the graph sequence over the whole horizon before running.
    #[serde(default = "default_true")]
    pub validate_graph: bool,
}

fn default_stepsize() -> StepsizeRule {
    StepsizeRule::InverseSqrt
}
fn default_conservation_cadence() -> usize {
    1
}
fn default_true() -> bool {
    true
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            horizon: 1000,
            stepsize: default_stepsize(),
            record_snapshots: false,
            conservation_check_every: default_conservation_cadence(),
            lambda_cap: None,
            validate_graph: true,
        }
    }
}

/// One agent's live state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub y: Vec<f64>,
}

/// All agents at one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    /// The round this state is the iterate of.
    pub round: usize,
    pub agents: Vec<AgentState>,
}

/// Full per-round state kept when snapshots are enabled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub y: Vec<f64>,
    /// Consensus outputs of this round.
    pub lambda_tilde: Vec<f64>,
    pub y_tilde: Vec<f64>,
    /// Primal search direction of this round.
    pub direction: Vec<f64>,
    /// Perturbations applied in the transition to the next round: the dual's
    /// post-projection innovation and the tracker's constraint drift. Both
    /// satisfy `state_{t+1} = mix(states_t) + eps` exactly.
    pub eps_lambda: Vec<f64>,
    pub eps_y: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: usize,
    pub alpha: f64,
    pub agents: Vec<AgentSnapshot>,
}

/// Per-round scalar diagnostics, always recorded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub alpha: f64,
    /// `f_{i,t}(x_{i,t})` per agent.
    pub costs: Vec<f64>,
    /// `sum_i g_i(x_{i,t})`.
    pub constraint_sum: Vec<f64>,
    /// `sum_i ||lt_i - mean(lambda)||` after consensus.
    pub lambda_disagreement: f64,
    /// `sum_i ||yt_i - mean(y)||` after consensus.
    pub y_disagreement: f64,
    /// Same sums before consensus; mixing never increases them.
    pub pre_lambda_disagreement: f64,
    pub pre_y_disagreement: f64,
    /// `max_i ||lambda_{i,t}||`.
    pub max_lambda_norm: f64,
    /// `max_i ||y_{i,t}||`.
    pub max_y_norm: f64,
    /// `||sum_i y_{i,t} - sum_i g_i(x_{i,t})||_inf`; NaN on skipped rounds.
    pub conservation_gap: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub horizon: usize,
    pub num_agents: usize,
    pub constraint_dim: usize,
    /// Graph parameters the run used, for bound evaluation.
    pub eta: f64,
    pub q: usize,
    pub stepsize: StepsizeRule,
    pub rounds: Vec<RoundRecord>,
    /// Post-update state after the last round (round `horizon + 1`).
    pub final_state: SystemState,
    pub snapshots: Option<Vec<Snapshot>>,
    /// Empirical dual radius: `max ||lambda_{i,t}||` over all agents and
    /// observed rounds `t = 1..=horizon` (the radius the bounds consume; the
    /// post-horizon state never enters a bound term).
    pub max_lambda_norm: f64,
    /// Empirical tracker radius: max over `||y_{i,t}||` and `||yt_{i,t}||`
    /// for observed rounds.
    pub max_y_norm: f64,
    /// Empirical penalty radius: `max ||F(N yt_{i,t})||`.
    pub max_penalty_norm: f64,
}

// --- the four update maps ---

/// Neighborhood averaging: `out[i] = sum_j W[i][j] states[j]`.
#[must_use]
pub fn consensus_step(w: &WeightMatrix, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
    w.mix(states)
}

/// Projected gradient step on the local penalized Lagrangian. Returns the
/// new point and the search direction used.
#[must_use]
pub fn primal_step(
    problem: &dyn OnlineProblem,
    penalty: &PenaltyFunction,
    agent: usize,
    x: &[f64],
    lambda_tilde: &[f64],
    y_tilde: &[f64],
    alpha: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = problem.num_agents() as f64;
    let scaled: Vec<f64> = y_tilde.iter().map(|v| n * v).collect();
    let diag = penalty.jacobian_diag(&scaled);
    let weighted: Vec<f64> = diag.iter().zip(lambda_tilde).map(|(d, l)| d * l).collect();
    let jac = problem.constraint_jacobian(agent, x);
    let mut direction = problem.cost_grad(agent, x);
    axpy(&mut direction, 1.0 / n, &jac.tmatvec(&weighted));
    let stepped: Vec<f64> = x.iter().zip(&direction).map(|(xi, si)| xi - alpha * si).collect();
    (problem.project(agent, &stepped), direction)
}

/// Projected dual ascent: `[lt + (alpha/N) F(N yt)]_+`, optionally kept
/// inside a ball around the origin.
///
/// The cap composes the orthant projection with radial scaling; for the
/// nonnegative orthant (a cone) and a centered ball that composition is the
/// exact Euclidean projection onto their intersection.
#[must_use]
pub fn dual_step(
    penalty: &PenaltyFunction,
    lambda_tilde: &[f64],
    y_tilde: &[f64],
    alpha: f64,
    num_agents: usize,
    cap: Option<f64>,
) -> Vec<f64> {
    let n = num_agents as f64;
    let scaled: Vec<f64> = y_tilde.iter().map(|v| n * v).collect();
    let value = penalty.eval(&scaled);
    let mut next: Vec<f64> = lambda_tilde
        .iter()
        .zip(&value)
        .map(|(l, f)| (l + alpha / n * f).max(0.0))
        .collect();
    if let Some(radius) = cap {
        let norm = norm2(&next);
        if norm > radius {
            let scale = radius / norm;
            for v in &mut next {
                *v *= scale;
            }
        }
    }
    next
}

/// Tracker correction: `yt + g(x_new) - g(x_old)`.
#[must_use]
pub fn tracker_step(y_tilde: &[f64], g_new: &[f64], g_old: &[f64]) -> Vec<f64> {
    y_tilde
        .iter()
        .zip(g_new.iter().zip(g_old))
        .map(|(yt, (gn, go))| yt + gn - go)
        .collect()
}

// --- the distributed run ---

struct RunningStats {
    max_lambda: f64,
    max_y: f64,
    max_penalty: f64,
}

/// Runs the distributed iteration for `config.horizon` rounds.
///
/// The problem must sit at round 0 (fresh or [`OnlineProblem::reset`]); it is
/// left advanced to the horizon, so metrics can query its averaged costs
/// directly afterwards.
pub fn run_distributed(
    problem: &mut dyn OnlineProblem,
    graph: &GraphSequence,
    penalty: &PenaltyFunction,
    config: &RunConfig,
) -> Result<Trajectory, EngineError> {
    let n = problem.num_agents();
    if graph.n() != n {
        return Err(EngineError::AgentCountMismatch { graph: graph.n(), problem: n });
    }
    if penalty.dim() != problem.constraint_dim() {
        return Err(EngineError::PenaltyDimMismatch {
            penalty: penalty.dim(),
            problem: problem.constraint_dim(),
        });
    }
    if config.horizon == 0 {
        return Err(EngineError::ZeroHorizon);
    }
    config.stepsize.validate()?;
    if config.validate_graph {
        let report = graph.validate(config.horizon)?;
        if !report.pass() {
            return Err(EngineError::InvalidGraph(Box::new(report)));
        }
    }
    if problem.round() != 0 {
        return Err(EngineError::TrajectoryMismatch(format!(
            "problem already advanced to round {}; reset it first",
            problem.round()
        )));
    }

    let m = problem.constraint_dim();
    let mut x: Vec<Vec<f64>> = (0..n).map(|i| problem.project(i, &problem.initial_point(i))).collect();
    let mut lambda: Vec<Vec<f64>> = vec![vec![0.0; m]; n];
    let mut g_curr: Vec<Vec<f64>> = (0..n).map(|i| problem.constraint(i, &x[i])).collect();
    let mut y: Vec<Vec<f64>> = g_curr.clone();

    let mut rounds = Vec::with_capacity(config.horizon);
    let mut snapshots = config.record_snapshots.then(|| Vec::with_capacity(config.horizon));
    let mut stats = RunningStats { max_lambda: 0.0, max_y: 0.0, max_penalty: 0.0 };

    for t in 1..=config.horizon {
        problem.advance();
        debug_assert_eq!(problem.round(), t);
        let w = graph.matrix_at(t);
        let alpha = config.stepsize.alpha(t);

        let lambda_tilde = consensus_step(&w, &lambda);
        let y_tilde = consensus_step(&w, &y);

        let record = observe_round(
            t,
            alpha,
            problem,
            &x,
            &g_curr,
            &lambda,
            &y,
            &lambda_tilde,
            &y_tilde,
            config.conservation_check_every,
        );
        update_stats(&mut stats, penalty, n, &lambda, &y, &y_tilde);
        rounds.push(record);

        let mut x_next = Vec::with_capacity(n);
        let mut lambda_next = Vec::with_capacity(n);
        let mut y_next = Vec::with_capacity(n);
        let mut g_next = Vec::with_capacity(n);
        let mut agent_snaps = config.record_snapshots.then(Vec::new);
        for i in 0..n {
            let (xi_next, direction) =
                primal_step(problem, penalty, i, &x[i], &lambda_tilde[i], &y_tilde[i], alpha);
            let li_next =
                dual_step(penalty, &lambda_tilde[i], &y_tilde[i], alpha, n, config.lambda_cap);
            let gi_next = problem.constraint(i, &xi_next);
            let yi_next = tracker_step(&y_tilde[i], &gi_next, &g_curr[i]);
            if !(is_finite(&xi_next) && is_finite(&li_next) && is_finite(&yi_next)) {
                return Err(EngineError::NonFinite { round: t });
            }
            if let Some(snaps) = agent_snaps.as_mut() {
                snaps.push(AgentSnapshot {
                    x: x[i].clone(),
                    lambda: lambda[i].clone(),
                    y: y[i].clone(),
                    lambda_tilde: lambda_tilde[i].clone(),
                    y_tilde: y_tilde[i].clone(),
                    direction,
                    eps_lambda: sub(&li_next, &lambda_tilde[i]),
                    eps_y: sub(&gi_next, &g_curr[i]),
                });
            }
            x_next.push(xi_next);
            lambda_next.push(li_next);
            y_next.push(yi_next);
            g_next.push(gi_next);
        }
        if let (Some(snaps), Some(agents)) = (snapshots.as_mut(), agent_snaps) {
            snaps.push(Snapshot { t, alpha, agents });
        }
        x = x_next;
        lambda = lambda_next;
        y = y_next;
        g_curr = g_next;
    }

    Ok(Trajectory {
        horizon: config.horizon,
        num_agents: n,
        constraint_dim: m,
        eta: graph.eta(),
        q: graph.q(),
        stepsize: config.stepsize,
        rounds,
        final_state: SystemState {
            round: config.horizon + 1,
            agents: (0..n)
                .map(|i| AgentState {
                    x: x[i].clone(),
                    lambda: lambda[i].clone(),
                    y: y[i].clone(),
                })
                .collect(),
        },
        snapshots,
        max_lambda_norm: stats.max_lambda,
        max_y_norm: stats.max_y,
        max_penalty_norm: stats.max_penalty,
    })
}

#[allow(clippy::too_many_arguments)]
fn observe_round(
    t: usize,
    alpha: f64,
    problem: &dyn OnlineProblem,
    x: &[Vec<f64>],
    g_curr: &[Vec<f64>],
    lambda: &[Vec<f64>],
    y: &[Vec<f64>],
    lambda_tilde: &[Vec<f64>],
    y_tilde: &[Vec<f64>],
    conservation_cadence: usize,
) -> RoundRecord {
    let n = x.len();
    let m = g_curr[0].len();
    let costs: Vec<f64> = (0..n).map(|i| problem.cost(i, &x[i])).collect();
    let mut constraint_sum = vec![0.0; m];
    for g in g_curr {
        axpy(&mut constraint_sum, 1.0, g);
    }
    let lambda_mean = mean_vector(lambda);
    let y_mean = mean_vector(y);
    let gap = if conservation_cadence > 0 && t % conservation_cadence == 0 {
        let mut y_sum = vec![0.0; m];
        for yi in y {
            axpy(&mut y_sum, 1.0, yi);
        }
        norm_inf(&sub(&y_sum, &constraint_sum))
    } else {
        f64::NAN
    };
    RoundRecord {
        t,
        alpha,
        costs,
        constraint_sum,
        lambda_disagreement: lambda_tilde.iter().map(|v| dist2(v, &lambda_mean)).sum(),
        y_disagreement: y_tilde.iter().map(|v| dist2(v, &y_mean)).sum(),
        pre_lambda_disagreement: lambda.iter().map(|v| dist2(v, &lambda_mean)).sum(),
        pre_y_disagreement: y.iter().map(|v| dist2(v, &y_mean)).sum(),
        max_lambda_norm: lambda.iter().map(|v| norm2(v)).fold(0.0, f64::max),
        max_y_norm: y.iter().map(|v| norm2(v)).fold(0.0, f64::max),
        conservation_gap: gap,
    }
}

fn update_stats(
    stats: &mut RunningStats,
    penalty: &PenaltyFunction,
    n: usize,
    lambda: &[Vec<f64>],
    y: &[Vec<f64>],
    y_tilde: &[Vec<f64>],
) {
    for v in lambda {
        stats.max_lambda = stats.max_lambda.max(norm2(v));
    }
    for v in y {
        stats.max_y = stats.max_y.max(norm2(v));
    }
    for v in y_tilde {
        stats.max_y = stats.max_y.max(norm2(v));
        let scaled: Vec<f64> = v.iter().map(|a| n as f64 * a).collect();
        stats.max_penalty = stats.max_penalty.max(norm2(&penalty.eval(&scaled)));
    }
}

fn mean_vector(vs: &[Vec<f64>]) -> Vec<f64> {
    let n = vs.len() as f64;
    let mut out = vec![0.0; vs[0].len()];
    for v in vs {
        axpy(&mut out, 1.0, v);
    }
    for o in &mut out {
        *o /= n;
    }
    out
}

fn is_finite(v: &[f64]) -> bool {
    v.iter().all(|a| a.is_finite())
}

// --- centralized reference ---

/// Projected saddle-point iteration on the aggregated problem, as if one
/// coordinator saw every cost and the whole constraint:
///
/// ```text
///     x      <- Proj_X( x - alpha ( grad f_t(x) + Jg(x)' dF(g(x)) lambda ) )
///     lambda <- [ lambda + alpha F(g(x)) ]_+
/// ```
///
/// with `f_t = sum_i f_{i,t}`, `g = sum_i g_i`, `X` the product of the
/// per-agent sets. With the identity penalty this is exactly projected
/// gradient descent-ascent on the classical Lagrangian. Emits the same
/// trajectory schema as the distributed run with a single aggregate agent.
pub fn run_centralized(
    problem: &mut dyn OnlineProblem,
    penalty: &PenaltyFunction,
    config: &RunConfig,
) -> Result<Trajectory, EngineError> {
    let n = problem.num_agents();
    let m = problem.constraint_dim();
    if penalty.dim() != m {
        return Err(EngineError::PenaltyDimMismatch { penalty: penalty.dim(), problem: m });
    }
    if config.horizon == 0 {
        return Err(EngineError::ZeroHorizon);
    }
    config.stepsize.validate()?;
    if problem.round() != 0 {
        return Err(EngineError::TrajectoryMismatch(format!(
            "problem already advanced to round {}; reset it first",
            problem.round()
        )));
    }

    let mut x: Vec<Vec<f64>> = (0..n).map(|i| problem.project(i, &problem.initial_point(i))).collect();
    let mut lambda = vec![0.0; m];
    let mut rounds = Vec::with_capacity(config.horizon);
    let mut snapshots = config.record_snapshots.then(Vec::new);
    let mut stats = RunningStats { max_lambda: 0.0, max_y: 0.0, max_penalty: 0.0 };

    for t in 1..=config.horizon {
        problem.advance();
        let alpha = config.stepsize.alpha(t);
        let cost_total: f64 = (0..n).map(|i| problem.cost(i, &x[i])).sum();
        let mut g_total = vec![0.0; m];
        for i in 0..n {
            axpy(&mut g_total, 1.0, &problem.constraint(i, &x[i]));
        }
        let penalty_value = penalty.eval(&g_total);
        let diag = penalty.jacobian_diag(&g_total);
        let weighted: Vec<f64> = diag.iter().zip(&lambda).map(|(d, l)| d * l).collect();

        stats.max_lambda = stats.max_lambda.max(norm2(&lambda));
        stats.max_y = stats.max_y.max(norm2(&g_total));
        stats.max_penalty = stats.max_penalty.max(norm2(&penalty_value));

        let mut x_next = Vec::with_capacity(n);
        let mut direction_all = Vec::new();
        for i in 0..n {
            let jac = problem.constraint_jacobian(i, &x[i]);
            let mut direction = problem.cost_grad(i, &x[i]);
            axpy(&mut direction, 1.0, &jac.tmatvec(&weighted));
            let stepped: Vec<f64> =
                x[i].iter().zip(&direction).map(|(xi, si)| xi - alpha * si).collect();
            x_next.push(problem.project(i, &stepped));
            direction_all.extend(direction);
        }
        let mut lambda_next: Vec<f64> = lambda
            .iter()
            .zip(&penalty_value)
            .map(|(l, f)| (l + alpha * f).max(0.0))
            .collect();
        if let Some(radius) = config.lambda_cap {
            let norm = norm2(&lambda_next);
            if norm > radius {
                let scale = radius / norm;
                for v in &mut lambda_next {
                    *v *= scale;
                }
            }
        }
        if !(x_next.iter().all(|v| is_finite(v)) && is_finite(&lambda_next)) {
            return Err(EngineError::NonFinite { round: t });
        }

        let gap = if config.conservation_check_every > 0 && t % config.conservation_check_every == 0
        {
            0.0
        } else {
            f64::NAN
        };
        rounds.push(RoundRecord {
            t,
            alpha,
            costs: vec![cost_total],
            constraint_sum: g_total.clone(),
            lambda_disagreement: 0.0,
            y_disagreement: 0.0,
            pre_lambda_disagreement: 0.0,
            pre_y_disagreement: 0.0,
            max_lambda_norm: norm2(&lambda),
            max_y_norm: norm2(&g_total),
            conservation_gap: gap,
        });
        if let Some(snaps) = snapshots.as_mut() {
            let flat_x: Vec<f64> = x.iter().flatten().copied().collect();
            let mut g_next_total = vec![0.0; m];
            for i in 0..n {
                axpy(&mut g_next_total, 1.0, &problem.constraint(i, &x_next[i]));
            }
            snaps.push(Snapshot {
                t,
                alpha,
                agents: vec![AgentSnapshot {
                    x: flat_x,
                    lambda: lambda.clone(),
                    y: g_total.clone(),
                    lambda_tilde: lambda.clone(),
                    y_tilde: g_total.clone(),
                    direction: direction_all,
                    eps_lambda: sub(&lambda_next, &lambda),
                    eps_y: sub(&g_next_total, &g_total),
                }],
            });
        }
        x = x_next;
        lambda = lambda_next;
    }

    let mut g_final = vec![0.0; m];
    for i in 0..n {
        axpy(&mut g_final, 1.0, &problem.constraint(i, &x[i]));
    }

    Ok(Trajectory {
        horizon: config.horizon,
        num_agents: 1,
        constraint_dim: m,
        eta: 1.0,
        q: 1,
        stepsize: config.stepsize,
        rounds,
        final_state: SystemState {
            round: config.horizon + 1,
            agents: vec![AgentState {
                x: x.iter().flatten().copied().collect(),
                lambda,
                y: g_final,
            }],
        },
        snapshots,
        max_lambda_norm: stats.max_lambda,
        max_y_norm: stats.max_y,
        max_penalty_norm: stats.max_penalty,
    })
}

// --- iterate audit ---

/// Slack of the two per-round saddle inequalities at one round; both are
/// nonnegative (up to float noise) on any faithful trajectory.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RoundAudit {
    pub t: usize,
    /// Bound slack of the primal inequality: the penalized-Lagrangian gap
    /// `H_t(x_t, mean lambda) - H_t(x_cmp, mean lambda)` against its
    /// stepsize-and-disagreement budget.
    pub primal_slack: f64,
    /// Bound slack of the dual inequality: `H_t(x_t, lambda_cmp) -
    /// H_t(x_t, mean lambda)` against its budget.
    pub dual_slack: f64,
}

impl RoundAudit {
    /// Both inequalities hold within `tol` of exact nonnegativity.
    #[must_use]
    pub fn passes(&self, tol: f64) -> bool {
        self.primal_slack >= -tol && self.dual_slack >= -tol
    }
}

/// Replays a snapshot-enabled trajectory and checks, for every round, the
/// two inequalities that drive the regret analysis: the change in squared
/// distance to a fixed comparator pays for the Lagrangian gap, up to
/// stepsize and disagreement terms with explicit constants.
///
/// The comparator `(x_cmp, lambda_cmp)` must be feasible: each `x_cmp[i]` a
/// fixed point of its projector, `lambda_cmp >= 0`. Constants are taken from
/// the problem's declarations and the trajectory's empirical radii (enlarged
/// to cover `lambda_cmp`), so the slacks are fully determined by recorded
/// data. The problem must replay the same cost stream (reset + advance).
pub fn audit_iterate_inequalities(
    trajectory: &Trajectory,
    problem: &mut dyn OnlineProblem,
    penalty: &PenaltyFunction,
    comparator_x: &[Vec<f64>],
    comparator_lambda: &[f64],
) -> Result<Vec<RoundAudit>, EngineError> {
    let snapshots = trajectory.snapshots.as_ref().ok_or(EngineError::SnapshotsRequired)?;
    let n = trajectory.num_agents;
    if problem.num_agents() != n {
        return Err(EngineError::TrajectoryMismatch(format!(
            "trajectory has {n} agents, problem has {}",
            problem.num_agents()
        )));
    }
    if comparator_x.len() != n {
        return Err(EngineError::TrajectoryMismatch(format!(
            "comparator has {} points for {n} agents",
            comparator_x.len()
        )));
    }
    for (i, xc) in comparator_x.iter().enumerate() {
        if dist2(xc, &problem.project(i, xc)) > 1e-9 {
            return Err(EngineError::ComparatorInfeasible { agent: i });
        }
    }
    if comparator_lambda.iter().any(|&l| l < 0.0) {
        return Err(EngineError::ComparatorDualNegative);
    }

    let constants = problem.constants();
    let nf = n as f64;
    let l_f = constants.l_f;
    let l_g = constants.l_g;
    let c_x = constants.c_x;
    let l_fc = penalty.lipschitz();
    let g_fc = penalty.grad_lipschitz();
    let c_lambda = trajectory.max_lambda_norm.max(norm2(comparator_lambda));
    let c_fc = trajectory.max_penalty_norm;

    problem.reset();
    let mut audits = Vec::with_capacity(snapshots.len());
    for (idx, snap) in snapshots.iter().enumerate() {
        problem.advance();
        let t = snap.t;
        let alpha = snap.alpha;
        let record = &trajectory.rounds[idx];

        // Network-average dual and the aggregate constraint at x_t.
        let lambda_bar = mean_vector(&snap.agents.iter().map(|a| a.lambda.clone()).collect::<Vec<_>>());
        let mut g_sum = vec![0.0; trajectory.constraint_dim];
        let mut g_cmp_sum = vec![0.0; trajectory.constraint_dim];
        let mut cost_run = 0.0;
        let mut cost_cmp = 0.0;
        for (i, agent) in snap.agents.iter().enumerate() {
            axpy(&mut g_sum, 1.0, &problem.constraint(i, &agent.x));
            axpy(&mut g_cmp_sum, 1.0, &problem.constraint(i, &comparator_x[i]));
            cost_run += problem.cost(i, &agent.x);
            cost_cmp += problem.cost(i, &comparator_x[i]);
        }
        let h = |cost: f64, g: &[f64], lam: &[f64]| {
            cost + crate::linalg::dot(lam, &penalty.eval(g)) / nf
        };

        let (next_x, next_lambda): (Vec<&[f64]>, Vec<&[f64]>) =
            if idx + 1 < snapshots.len() {
                let nxt = &snapshots[idx + 1];
                (
                    nxt.agents.iter().map(|a| a.x.as_slice()).collect(),
                    nxt.agents.iter().map(|a| a.lambda.as_slice()).collect(),
                )
            } else {
                (
                    trajectory.final_state.agents.iter().map(|a| a.x.as_slice()).collect(),
                    trajectory.final_state.agents.iter().map(|a| a.lambda.as_slice()).collect(),
                )
            };

        // Primal inequality.
        let lhs_primal =
            h(cost_run, &g_sum, &lambda_bar) - h(cost_cmp, &g_cmp_sum, &lambda_bar);
        let mut dist_now = 0.0;
        let mut dist_next = 0.0;
        for (i, agent) in snap.agents.iter().enumerate() {
            let d0 = dist2(&agent.x, &comparator_x[i]);
            let d1 = dist2(next_x[i], &comparator_x[i]);
            dist_now += d0 * d0;
            dist_next += d1 * d1;
        }
        let grad_bound = l_f + l_g * l_fc * c_lambda / nf;
        let rhs_primal = (dist_now - dist_next) / (2.0 * alpha)
            + 0.5 * alpha * nf * grad_bound * grad_bound
            + 2.0 * c_x * c_lambda * l_g * g_fc * record.y_disagreement
            + 2.0 / nf * c_x * l_g * l_fc * record.lambda_disagreement;

        // Dual inequality.
        let lhs_dual =
            h(cost_run, &g_sum, comparator_lambda) - h(cost_run, &g_sum, &lambda_bar);
        let mut ldist_now = 0.0;
        let mut ldist_next = 0.0;
        for (i, agent) in snap.agents.iter().enumerate() {
            let d0 = dist2(&agent.lambda, comparator_lambda);
            let d1 = dist2(next_lambda[i], comparator_lambda);
            ldist_now += d0 * d0;
            ldist_next += d1 * d1;
        }
        // The projection argument bounds N times the H-gap, so every budget
        // term carries an extra 1/N to land on the same scale as `lhs_dual`.
        let rhs_dual = (ldist_now - ldist_next) / (2.0 * alpha * nf)
            + 0.5 * alpha / (nf * nf) * c_fc * c_fc
            + c_fc / (nf * nf) * record.lambda_disagreement
            + 2.0 * c_lambda * l_fc / nf * record.y_disagreement;

        audits.push(RoundAudit {
            t,
            primal_slack: rhs_primal - lhs_primal,
            dual_slack: rhs_dual - lhs_dual,
        });
    }
    Ok(audits)
}
