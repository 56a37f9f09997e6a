//! Regret computation, disagreement aggregation, the theoretical bound
//! calculator, and offline comparator oracles.
//!
//! The guarantees this crate checks are all of the form `quantity(T) <= c0 +
//! c1 sqrt(T)`: cost regret against a fixed feasible comparator, cumulative
//! constraint violation through the penalty, and the two network
//! disagreement sums. [`BoundConstants`] evaluates the published constants
//! from a handful of problem and penalty radii; the dual and tracker radii
//! are not derivable a priori, so they are taken from run-tracked maxima
//! (optionally enlarged by caller-declared values).
//!
//! Two independent oracles produce the hindsight comparator: an augmented
//! Lagrangian solver with an accelerated projected-gradient inner loop
//! ([`offline_optimum`]), and exhaustive grid search
//! ([`grid_search_optimum`]) for instances small enough to enumerate. Tests
//! play them against each other.

use serde::{Deserialize, Serialize};

use crate::engine::Trajectory;
use crate::linalg::{axpy, dist2, dot, norm2, norm_inf, sub};
use crate::penalty::PenaltyFunction;
use crate::problem::{OnlineProblem, ProblemConstants};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("divergent disagreement constant: contraction base {beta} is not below 1")]
    DivergentContraction { beta: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("comparator point for agent {agent} is not in its feasible set")]
    ComparatorInfeasible { agent: usize },
    #[error("problem is infeasible: no point satisfies the aggregate constraint")]
    Infeasible,
    #[error("grid search would enumerate {combinations} points; use the solver oracle instead")]
    GridTooLarge { combinations: u128 },
}

// --- theoretical bound constants ---

/// Inputs to the bound formulas. Radii (`c_*`) bound norms of quantities the
/// run touches; Lipschitz moduli (`l_*`, `g_penalty`) bound how fast things
/// change. All must be finite and nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Smallest positive consensus weight.
    pub eta: f64,
    /// Number of agents.
    pub n: usize,
    /// Connectivity window length.
    pub q: usize,
    /// Radius of the feasible sets: `sup ||x||`.
    pub c_x: f64,
    /// Dual radius: `sup ||lambda_{i,t}||` (empirical unless declared).
    pub c_dual: f64,
    /// Tracker radius: `sup ||y_{i,t}||, ||yt_{i,t}||` (empirical).
    pub c_tracker: f64,
    /// Constraint value radius: `sup ||g_i(x)||`.
    pub c_constraint: f64,
    /// Cost value radius: `sup |f_{i,t}(x)|`.
    pub c_cost: f64,
    /// Penalty value radius: `sup ||F(N yt_{i,t})||` (empirical).
    pub c_penalty: f64,
    /// Cost subgradient bound.
    pub l_cost: f64,
    /// Constraint Lipschitz bound.
    pub l_constraint: f64,
    /// Penalty Lipschitz bound.
    pub l_penalty: f64,
    /// Penalty gradient Lipschitz bound.
    pub g_penalty: f64,
}

/// The closed-form constants of the sublinearity guarantees.
///
/// `b1 + b2 sqrt(T)` bounds the cumulative dual disagreement and `b3 + b4
/// sqrt(T)` the tracker analogue; `d1 + d2 sqrt(T)` bounds cost regret and
/// `d3 + d4 sqrt(T)` bounds constraint regret (the latter requires a strict
/// penalty). The `k*` intermediates are kept because they are part of the
/// published interface and make recomputation auditable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub inputs: BoundInputs,
    /// Consensus contraction prefactor, `(1 - eta/(2 n^2))^(-2)`.
    pub gamma: f64,
    /// Per-window contraction rate, `(1 - eta/(2 n^2))^(1/q)`.
    pub beta: f64,
    /// Geometric series total, `gamma beta / (1 - beta)`.
    pub a_n: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub k7: f64,
    pub k8: f64,
    pub k9: f64,
    pub k10: f64,
}

/// The contraction triple on its own; shared with graph diagnostics.
pub fn contraction_triple(eta: f64, n: usize, q: usize) -> Result<(f64, f64, f64), MetricsError> {
    if n == 0 || q == 0 {
        return Err(MetricsError::InvalidInput("n and q must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&eta) || !eta.is_finite() {
        return Err(MetricsError::InvalidInput(format!("eta must lie in [0, 1], got {eta}")));
    }
    let base = 1.0 - eta / (2.0 * (n as f64) * (n as f64));
    let gamma = base.powi(-2);
    let beta = base.powf(1.0 / q as f64);
    if beta >= 1.0 {
        return Err(MetricsError::DivergentContraction { beta });
    }
    Ok((gamma, beta, gamma * beta / (1.0 - beta)))
}

impl BoundConstants {
    pub fn new(inputs: BoundInputs) -> Result<Self, MetricsError> {
        for (name, v) in [
            ("c_x", inputs.c_x),
            ("c_dual", inputs.c_dual),
            ("c_tracker", inputs.c_tracker),
            ("c_constraint", inputs.c_constraint),
            ("c_cost", inputs.c_cost),
            ("c_penalty", inputs.c_penalty),
            ("l_cost", inputs.l_cost),
            ("l_constraint", inputs.l_constraint),
            ("l_penalty", inputs.l_penalty),
            ("g_penalty", inputs.g_penalty),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(MetricsError::InvalidInput(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        let (gamma, beta, a_n) = contraction_triple(inputs.eta, inputs.n, inputs.q)?;

        let n = inputs.n as f64;
        let cx = inputs.c_x;
        let cl = inputs.c_dual;
        let cy = inputs.c_tracker;
        let cf = inputs.c_penalty;
        let lf = inputs.l_cost;
        let lg = inputs.l_constraint;
        let lp = inputs.l_penalty;
        let gp = inputs.g_penalty;

        let k1 = (2.0 * cx * lg * lf + cf) * cl / n + (2.0 * cx * cl * lg * gp + 2.0 * cl * lp) * cy;
        let k2 = (lg * lg * lf * lf * cl * cl + cf * cf + 8.0 * cf * cx * lg * lf + 4.0 * cf) / n
            + 8.0 * cx * cl * cl * lg.powi(3) * gp * lp
            + 8.0 * lg * lg * cl * cl * lp * lp
            + 2.0 * lf * lg * lp * cl;
        let k3 = 2.0 * (cx * cx + cl * cl) + lf * lf + 8.0 * lf * lg * (cx * cl * lg * gp + cl * lp);
        let k4 = 4.0 * lg * lg * lp * cl * (cx * cl * lg * gp + cl * lp);
        let k5 = 4.0 * lf * lg * (cx * cl * lg * gp + cl * lp);
        let k6 = lp * cy;
        let k7 = 4.0 * lg * lg * lp * lp * cl;
        let k8 = 4.0 * lf * lg * lp + cl;
        let k9 = 2.0 * lg * lg * lp * lp * cl;
        let k10 = 2.0 * lf * lg * lp;

        let spread = 2.0 * n + a_n * n * n;
        Ok(BoundConstants {
            inputs,
            gamma,
            beta,
            a_n,
            b1: spread * cl,
            b2: 4.0 * cf + 2.0 * cf * a_n * n,
            b3: spread * cy,
            b4: 4.0 * lg * lg * lp * cl
                + (4.0 * lf * lg + 2.0 * lg * lg * lp * cl * a_n) * n
                + 2.0 * lf * lg * a_n * n * n,
            d1: k1 * spread,
            d2: k2 + (k3 + k4 * a_n) * n + k5 * a_n * n * n,
            d3: k6 * spread,
            d4: k7 + (k8 + k9 * a_n) * n + k10 * a_n * n * n,
            k1,
            k2,
            k3,
            k4,
            k5,
            k6,
            k7,
            k8,
            k9,
            k10,
        })
    }

    /// Builds the constants from a finished run: graph parameters and the
    /// empirical dual/tracker/penalty radii come from the trajectory, set
    /// radii and Lipschitz moduli from the problem and penalty declarations.
    /// `extra_dual_radius` enlarges the dual radius to cover a comparator
    /// multiplier (pass 0.0 when comparing against a zero dual).
    pub fn from_run(
        trajectory: &Trajectory,
        constants: &ProblemConstants,
        penalty: &PenaltyFunction,
        extra_dual_radius: f64,
    ) -> Result<Self, MetricsError> {
        BoundConstants::new(BoundInputs {
            eta: trajectory.eta,
            n: trajectory.num_agents,
            q: trajectory.q,
            c_x: constants.c_x,
            c_dual: trajectory.max_lambda_norm.max(extra_dual_radius),
            c_tracker: trajectory.max_y_norm,
            c_constraint: constants.c_g,
            c_cost: constants.c_f,
            c_penalty: trajectory.max_penalty_norm,
            l_cost: constants.l_f,
            l_constraint: constants.l_g,
            l_penalty: penalty.lipschitz(),
            g_penalty: penalty.grad_lipschitz(),
        })
    }

    #[must_use]
    pub fn cost_regret_bound(&self, t: usize) -> f64 {
        self.d1 + self.d2 * (t as f64).sqrt()
    }

    #[must_use]
    pub fn constraint_regret_bound(&self, t: usize) -> f64 {
        self.d3 + self.d4 * (t as f64).sqrt()
    }

    #[must_use]
    pub fn dual_disagreement_bound(&self, t: usize) -> f64 {
        self.b1 + self.b2 * (t as f64).sqrt()
    }

    #[must_use]
    pub fn tracker_disagreement_bound(&self, t: usize) -> f64 {
        self.b3 + self.b4 * (t as f64).sqrt()
    }

    /// Compares the cumulative disagreement sums of a run against their
    /// bounds at every round.
    #[must_use]
    pub fn check_disagreements(&self, series: &DisagreementSeries) -> DisagreementCheck {
        let mut check = DisagreementCheck {
            dual_ok: true,
            tracker_ok: true,
            min_dual_slack: f64::INFINITY,
            min_tracker_slack: f64::INFINITY,
            first_dual_violation: None,
            first_tracker_violation: None,
        };
        for (idx, (cd, ct)) in series
            .cumulative_dual
            .iter()
            .zip(&series.cumulative_tracker)
            .enumerate()
        {
            let t = idx + 1;
            let ds = self.dual_disagreement_bound(t) - cd;
            let ts = self.tracker_disagreement_bound(t) - ct;
            check.min_dual_slack = check.min_dual_slack.min(ds);
            check.min_tracker_slack = check.min_tracker_slack.min(ts);
            if ds < 0.0 && check.first_dual_violation.is_none() {
                check.dual_ok = false;
                check.first_dual_violation = Some(t);
            }
            if ts < 0.0 && check.first_tracker_violation.is_none() {
                check.tracker_ok = false;
                check.first_tracker_violation = Some(t);
            }
        }
        check
    }
}

// --- disagreement aggregation ---

/// Per-round and cumulative network disagreement, read off the trajectory's
/// round records (consensus outputs against the network average).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisagreementSeries {
    pub per_round_dual: Vec<f64>,
    pub per_round_tracker: Vec<f64>,
    pub cumulative_dual: Vec<f64>,
    pub cumulative_tracker: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DisagreementCheck {
    pub dual_ok: bool,
    pub tracker_ok: bool,
    /// Minimum over rounds of `bound(t) - cumulative(t)`; negative means a
    /// violation somewhere.
    pub min_dual_slack: f64,
    pub min_tracker_slack: f64,
    pub first_dual_violation: Option<usize>,
    pub first_tracker_violation: Option<usize>,
}

#[must_use]
pub fn disagreement_series(trajectory: &Trajectory) -> DisagreementSeries {
    let mut out = DisagreementSeries {
        per_round_dual: Vec::with_capacity(trajectory.rounds.len()),
        per_round_tracker: Vec::with_capacity(trajectory.rounds.len()),
        cumulative_dual: Vec::with_capacity(trajectory.rounds.len()),
        cumulative_tracker: Vec::with_capacity(trajectory.rounds.len()),
    };
    let mut cd = 0.0;
    let mut ct = 0.0;
    for r in &trajectory.rounds {
        cd += r.lambda_disagreement;
        ct += r.y_disagreement;
        out.per_round_dual.push(r.lambda_disagreement);
        out.per_round_tracker.push(r.y_disagreement);
        out.cumulative_dual.push(cd);
        out.cumulative_tracker.push(ct);
    }
    out
}

// --- penalized Lagrangian probe ---

/// `H_t(x, lambda) = sum_i f_{i,t}(x_i) + (1/N) lambda' F(sum_l g_l(x_l))`,
/// evaluated at the problem's current round.
pub fn lagrangian_value(
    problem: &dyn OnlineProblem,
    penalty: &PenaltyFunction,
    x: &[Vec<f64>],
    lambda: &[f64],
) -> Result<f64, MetricsError> {
    check_system_dims(problem, penalty, x, lambda)?;
    let n = problem.num_agents();
    let mut cost = 0.0;
    let mut g_sum = vec![0.0; problem.constraint_dim()];
    for i in 0..n {
        cost += problem.cost(i, &x[i]);
        axpy(&mut g_sum, 1.0, &problem.constraint(i, &x[i]));
    }
    Ok(cost + dot(lambda, &penalty.eval(&g_sum)) / n as f64)
}

/// Gradients of `H_t`: per-agent primal blocks and the dual block.
pub fn lagrangian_gradients(
    problem: &dyn OnlineProblem,
    penalty: &PenaltyFunction,
    x: &[Vec<f64>],
    lambda: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<f64>), MetricsError> {
    check_system_dims(problem, penalty, x, lambda)?;
    let n = problem.num_agents();
    let nf = n as f64;
    let mut g_sum = vec![0.0; problem.constraint_dim()];
    for i in 0..n {
        axpy(&mut g_sum, 1.0, &problem.constraint(i, &x[i]));
    }
    let diag = penalty.jacobian_diag(&g_sum);
    let weighted: Vec<f64> = diag.iter().zip(lambda).map(|(d, l)| d * l / nf).collect();
    let mut primal = Vec::with_capacity(n);
    for i in 0..n {
        let mut grad = problem.cost_grad(i, &x[i]);
        axpy(&mut grad, 1.0, &problem.constraint_jacobian(i, &x[i]).tmatvec(&weighted));
        primal.push(grad);
    }
    let dual: Vec<f64> = penalty.eval(&g_sum).iter().map(|v| v / nf).collect();
    Ok((primal, dual))
}

fn check_system_dims(
    problem: &dyn OnlineProblem,
    penalty: &PenaltyFunction,
    x: &[Vec<f64>],
    lambda: &[f64],
) -> Result<(), MetricsError> {
    if x.len() != problem.num_agents() {
        return Err(MetricsError::DimensionMismatch(format!(
            "{} agent points for {} agents",
            x.len(),
            problem.num_agents()
        )));
    }
    for (i, xi) in x.iter().enumerate() {
        if xi.len() != problem.decision_dim(i) {
            return Err(MetricsError::DimensionMismatch(format!(
                "agent {i}: point has dimension {}, expected {}",
                xi.len(),
                problem.decision_dim(i)
            )));
        }
    }
    if lambda.len() != problem.constraint_dim() || penalty.dim() != problem.constraint_dim() {
        return Err(MetricsError::DimensionMismatch(format!(
            "dual has dimension {}, penalty {}, constraints {}",
            lambda.len(),
            penalty.dim(),
            problem.constraint_dim()
        )));
    }
    Ok(())
}

// --- regret ---

/// One row of a regret report; the bound columns are the theoretical
/// right-hand sides evaluated at this round.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegretRow {
    pub t: usize,
    pub cost_regret: f64,
    pub avg_cost_regret: f64,
    pub constraint_regret: f64,
    pub avg_constraint_regret: f64,
    pub cost_bound: f64,
    pub constraint_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegretReport {
    pub rows: Vec<RegretRow>,
    pub comparator: Vec<Vec<f64>>,
    /// Which penalty produced the constraint column. With the identity map,
    /// positive and negative rounds cancel in the cumulative sum; a strict
    /// penalty is the variant the constraint-regret guarantee covers.
    pub penalty: crate::penalty::PenaltyKind,
    pub bounds: BoundConstants,
}

impl RegretReport {
    #[must_use]
    pub fn final_row(&self) -> &RegretRow {
        self.rows.last().expect("reports cover at least one round")
    }
}

/// Cumulative cost regret: run cost minus comparator cost, round by round.
/// Replays the problem's cost stream to evaluate the comparator, so the
/// problem must be the same instance (or an identically seeded clone).
pub fn cost_regret(
    trajectory: &Trajectory,
    problem: &mut dyn OnlineProblem,
    comparator: &[Vec<f64>],
) -> Result<Vec<f64>, MetricsError> {
    check_comparator(problem, comparator)?;
    problem.reset();
    let mut series = Vec::with_capacity(trajectory.rounds.len());
    let mut cumulative = 0.0;
    for record in &trajectory.rounds {
        problem.advance();
        let run_cost: f64 = record.costs.iter().sum();
        let comp_cost: f64 =
            comparator.iter().enumerate().map(|(i, xc)| problem.cost(i, xc)).sum();
        cumulative += run_cost - comp_cost;
        series.push(cumulative);
    }
    Ok(series)
}

/// Cumulative constraint regret: the norm of the running sum of per-round
/// penalty values, `|| sum_{s<=t} F(sum_i g_i(x_{i,s})) ||`.
pub fn constraint_regret(
    trajectory: &Trajectory,
    penalty: &PenaltyFunction,
) -> Result<Vec<f64>, MetricsError> {
    if penalty.dim() != trajectory.constraint_dim {
        return Err(MetricsError::DimensionMismatch(format!(
            "penalty has dimension {}, trajectory constraints {}",
            penalty.dim(),
            trajectory.constraint_dim
        )));
    }
    let mut running = vec![0.0; trajectory.constraint_dim];
    let mut series = Vec::with_capacity(trajectory.rounds.len());
    for record in &trajectory.rounds {
        axpy(&mut running, 1.0, &penalty.eval(&record.constraint_sum));
        series.push(norm2(&running));
    }
    Ok(series)
}

/// Assembles the full per-round report with bound columns. The trajectory,
/// problem, and comparator must belong to the same run; the penalty decides
/// the constraint column (pass the run penalty's strict variant to check the
/// violation guarantee).
pub fn regret_report(
    trajectory: &Trajectory,
    problem: &mut dyn OnlineProblem,
    penalty: &PenaltyFunction,
    comparator: &[Vec<f64>],
    bounds: &BoundConstants,
) -> Result<RegretReport, MetricsError> {
    let cost = cost_regret(trajectory, problem, comparator)?;
    let constraint = constraint_regret(trajectory, penalty)?;
    let rows = cost
        .iter()
        .zip(&constraint)
        .enumerate()
        .map(|(idx, (r, rc))| {
            let t = idx + 1;
            RegretRow {
                t,
                cost_regret: *r,
                avg_cost_regret: r / t as f64,
                constraint_regret: *rc,
                avg_constraint_regret: rc / t as f64,
                cost_bound: bounds.cost_regret_bound(t),
                constraint_bound: bounds.constraint_regret_bound(t),
            }
        })
        .collect();
    Ok(RegretReport {
        rows,
        comparator: comparator.to_vec(),
        penalty: *penalty.kind(),
        bounds: *bounds,
    })
}

fn check_comparator(
    problem: &dyn OnlineProblem,
    comparator: &[Vec<f64>],
) -> Result<(), MetricsError> {
    if comparator.len() != problem.num_agents() {
        return Err(MetricsError::DimensionMismatch(format!(
            "comparator has {} points for {} agents",
            comparator.len(),
            problem.num_agents()
        )));
    }
    for (i, xc) in comparator.iter().enumerate() {
        if xc.len() != problem.decision_dim(i) {
            return Err(MetricsError::DimensionMismatch(format!(
                "comparator for agent {i} has dimension {}, expected {}",
                xc.len(),
                problem.decision_dim(i)
            )));
        }
        if dist2(xc, &problem.project(i, xc)) > 1e-9 {
            return Err(MetricsError::ComparatorInfeasible { agent: i });
        }
    }
    Ok(())
}

// --- offline oracles ---

/// Solver settings for [`offline_optimum`]. Defaults aim at a 1e-8 residual
/// on the problem families in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub kkt_tolerance: f64,
    pub feasibility_tolerance: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            kkt_tolerance: 1e-8,
            feasibility_tolerance: 1e-8,
            max_outer: 80,
            max_inner: 4000,
            initial_penalty: 10.0,
            penalty_growth: 4.0,
        }
    }
}

/// A hindsight comparator with its certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleResult {
    pub x: Vec<Vec<f64>>,
    /// Time-averaged total cost at `x` (the objective both oracles minimize;
    /// multiply by the horizon for the cumulative value).
    pub value: f64,
    /// Multiplier estimate for the aggregate constraint.
    pub dual: Vec<f64>,
    /// Max of stationarity, feasibility, and complementarity residuals.
    pub kkt_residual: f64,
    pub feasible: bool,
    pub converged: bool,
}

/// Best fixed feasible decision in hindsight: minimizes the time-averaged
/// total cost subject to `sum_i g_i(x_i) <= 0`, using an augmented
/// Lagrangian outer loop around an accelerated projected-gradient inner
/// solve with backtracking. The problem must have been advanced through the
/// rounds whose costs define the average.
pub fn offline_optimum(
    problem: &dyn OnlineProblem,
    config: &OracleConfig,
) -> Result<OracleResult, MetricsError> {
    if problem.round() == 0 {
        return Err(MetricsError::InvalidInput(
            "no cost history: advance the problem before asking for the hindsight optimum".into(),
        ));
    }
    let n = problem.num_agents();
    let m = problem.constraint_dim();
    let mut x: Vec<Vec<f64>> = (0..n).map(|i| problem.project(i, &problem.initial_point(i))).collect();
    let mut lambda = vec![0.0; m];
    let mut rho = config.initial_penalty;
    let mut prev_infeasibility = f64::INFINITY;
    let mut kkt = f64::INFINITY;

    for _ in 0..config.max_outer {
        minimize_augmented(problem, &mut x, &lambda, rho, config);
        let c = aggregate_constraint(problem, &x);
        for (l, ci) in lambda.iter_mut().zip(&c) {
            *l = (*l + rho * ci).max(0.0);
        }
        kkt = kkt_residual(problem, &x, &lambda, &c);
        if kkt <= config.kkt_tolerance {
            break;
        }
        let infeasibility = c.iter().fold(0.0f64, |acc, v| acc.max(*v));
        // Grow the penalty only while genuinely infeasible: once `c` sits at
        // float-noise scale, growing further lets `[lambda + rho c]_+` wipe
        // out the multiplier on a hair-negative constraint.
        if infeasibility > config.feasibility_tolerance
            && infeasibility > 0.25 * prev_infeasibility
            && rho < 1e12
        {
            rho *= config.penalty_growth;
        }
        prev_infeasibility = infeasibility;
    }

    let c = aggregate_constraint(problem, &x);
    let feasible = c.iter().all(|&v| v <= config.feasibility_tolerance);
    Ok(OracleResult {
        value: averaged_total_cost(problem, &x),
        x,
        dual: lambda,
        kkt_residual: kkt,
        feasible,
        converged: kkt <= config.kkt_tolerance,
    })
}

fn aggregate_constraint(problem: &dyn OnlineProblem, x: &[Vec<f64>]) -> Vec<f64> {
    let mut c = vec![0.0; problem.constraint_dim()];
    for (i, xi) in x.iter().enumerate() {
        axpy(&mut c, 1.0, &problem.constraint(i, xi));
    }
    c
}

fn averaged_total_cost(problem: &dyn OnlineProblem, x: &[Vec<f64>]) -> f64 {
    x.iter().enumerate().map(|(i, xi)| problem.averaged_cost(i, xi)).sum()
}

/// Augmented objective `phi(x) + (1/(2 rho)) (||[lambda + rho c(x)]_+||^2 -
/// ||lambda||^2)`; convex and smooth in `x` for fixed multipliers.
fn augmented_value(
    problem: &dyn OnlineProblem,
    x: &[Vec<f64>],
    lambda: &[f64],
    rho: f64,
) -> f64 {
    let c = aggregate_constraint(problem, x);
    let shifted: f64 = lambda
        .iter()
        .zip(&c)
        .map(|(l, ci)| (l + rho * ci).max(0.0).powi(2))
        .sum();
    let base: f64 = lambda.iter().map(|l| l * l).sum();
    averaged_total_cost(problem, x) + (shifted - base) / (2.0 * rho)
}

fn augmented_gradient(
    problem: &dyn OnlineProblem,
    x: &[Vec<f64>],
    lambda: &[f64],
    rho: f64,
) -> Vec<Vec<f64>> {
    let c = aggregate_constraint(problem, x);
    let active: Vec<f64> =
        lambda.iter().zip(&c).map(|(l, ci)| (l + rho * ci).max(0.0)).collect();
    x.iter()
        .enumerate()
        .map(|(i, xi)| {
            let mut grad = problem.averaged_cost_grad(i, xi);
            axpy(&mut grad, 1.0, &problem.constraint_jacobian(i, xi).tmatvec(&active));
            grad
        })
        .collect()
}

/// Accelerated projected gradient with backtracking and function-value
/// restarts, in place on `x`.
fn minimize_augmented(
    problem: &dyn OnlineProblem,
    x: &mut Vec<Vec<f64>>,
    lambda: &[f64],
    rho: f64,
    config: &OracleConfig,
) {
    let project =
        |v: &[Vec<f64>]| -> Vec<Vec<f64>> { v.iter().enumerate().map(|(i, vi)| problem.project(i, vi)).collect() };
    let mut z = x.clone();
    let mut momentum = 1.0f64;
    let mut lipschitz = 1.0f64;
    // Stop on the unit-step projected-gradient residual, the same
    // stationarity measure the outer loop scores: at the augmented minimum
    // the multiplier update makes the outer residual equal this one, so a
    // margin below the KKT tolerance here guarantees outer progress.
    let residual_tolerance = (config.kkt_tolerance * 0.1).max(1e-13);

    for _ in 0..config.max_inner {
        let value_z = augmented_value(problem, &z, lambda, rho);
        let grad_z = augmented_gradient(problem, &z, lambda, rho);
        lipschitz *= 0.9;
        let candidate = loop {
            let stepped: Vec<Vec<f64>> = z
                .iter()
                .zip(&grad_z)
                .map(|(zi, gi)| zi.iter().zip(gi).map(|(a, g)| a - g / lipschitz).collect())
                .collect();
            let candidate = project(&stepped);
            // Sufficient-decrease test for the quadratic upper model at z.
            let mut linear = 0.0;
            let mut quad = 0.0;
            for ((ci, zi), gi) in candidate.iter().zip(&z).zip(&grad_z) {
                let d = sub(ci, zi);
                linear += dot(gi, &d);
                quad += dot(&d, &d);
            }
            let model = value_z + linear + 0.5 * lipschitz * quad;
            if augmented_value(problem, &candidate, lambda, rho) <= model + 1e-12 * model.abs().max(1.0)
            {
                break candidate;
            }
            lipschitz *= 2.0;
            if lipschitz > 1e15 {
                break candidate;
            }
        };

        let value_candidate = augmented_value(problem, &candidate, lambda, rho);
        let value_x = augmented_value(problem, x, lambda, rho);
        if value_candidate > value_x + 1e-12 * value_x.abs().max(1.0) {
            if momentum == 1.0 {
                // Even a plain gradient step from `x` fails to descend, so
                // the iterate is as stationary as float arithmetic allows;
                // looping would discard the same candidate forever.
                break;
            }
            // Momentum overshot; restart from the last good point.
            z = x.clone();
            momentum = 1.0;
            continue;
        }
        let no_progress = candidate
            .iter()
            .zip(x.iter())
            .all(|(c, p)| c.iter().zip(p).all(|(a, b)| a == b));
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let blend = (momentum - 1.0) / next_momentum;
        z = candidate
            .iter()
            .zip(x.iter())
            .map(|(c, p)| c.iter().zip(p).map(|(a, b)| a + blend * (a - b)).collect())
            .collect();
        momentum = next_momentum;
        *x = candidate;
        if no_progress {
            break;
        }

        let grad_x = augmented_gradient(problem, x, lambda, rho);
        let mut residual = 0.0f64;
        for (i, xi) in x.iter().enumerate() {
            let stepped: Vec<f64> = xi.iter().zip(&grad_x[i]).map(|(a, g)| a - g).collect();
            let fixed = problem.project(i, &stepped);
            residual = residual.max(norm_inf(&sub(xi, &fixed)));
        }
        if residual <= residual_tolerance {
            break;
        }
    }
}

/// Stationarity, feasibility, and complementarity of a candidate
/// primal-dual pair for the time-averaged problem.
fn kkt_residual(
    problem: &dyn OnlineProblem,
    x: &[Vec<f64>],
    lambda: &[f64],
    constraint: &[f64],
) -> f64 {
    let mut stationarity = 0.0f64;
    for (i, xi) in x.iter().enumerate() {
        let mut grad = problem.averaged_cost_grad(i, xi);
        axpy(&mut grad, 1.0, &problem.constraint_jacobian(i, xi).tmatvec(lambda));
        let stepped: Vec<f64> = xi.iter().zip(&grad).map(|(a, g)| a - g).collect();
        let fixed = problem.project(i, &stepped);
        stationarity = stationarity.max(norm_inf(&sub(xi, &fixed)));
    }
    let infeasibility = constraint.iter().fold(0.0f64, |acc, v| acc.max(*v));
    let complementarity = dot(lambda, constraint).abs();
    stationarity.max(infeasibility).max(complementarity)
}

/// Exhaustive hindsight search on a per-agent grid of the box hull, with
/// grid points snapped to feasibility (points the projector moves are
/// skipped). Exponential in the total dimension: refuses instances beyond
/// ~2e7 combinations.
pub fn grid_search_optimum(
    problem: &dyn OnlineProblem,
    resolution: f64,
) -> Result<OracleResult, MetricsError> {
    if problem.round() == 0 {
        return Err(MetricsError::InvalidInput(
            "no cost history: advance the problem before asking for the hindsight optimum".into(),
        ));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(MetricsError::InvalidInput(format!(
            "grid resolution must be positive, got {resolution}"
        )));
    }
    let n = problem.num_agents();
    let mut agent_points: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
    let mut combinations: u128 = 1;
    for i in 0..n {
        let bounds = problem.box_bounds(i);
        let mut axes: Vec<Vec<f64>> = Vec::with_capacity(bounds.len());
        for (lo, hi) in &bounds {
            let steps = ((hi - lo) / resolution).round() as usize;
            let axis: Vec<f64> =
                (0..=steps).map(|k| (lo + k as f64 * resolution).min(*hi)).collect();
            axes.push(axis);
        }
        let mut points = Vec::new();
        let mut index = vec![0usize; axes.len()];
        'outer: loop {
            let p: Vec<f64> = index.iter().zip(&axes).map(|(k, axis)| axis[*k]).collect();
            if dist2(&p, &problem.project(i, &p)) <= 1e-9 {
                points.push(p);
            }
            for d in 0..axes.len() {
                index[d] += 1;
                if index[d] < axes[d].len() {
                    continue 'outer;
                }
                index[d] = 0;
            }
            break;
        }
        if points.is_empty() {
            return Err(MetricsError::Infeasible);
        }
        combinations = combinations.saturating_mul(points.len() as u128);
        agent_points.push(points);
    }
    if combinations > 20_000_000 {
        return Err(MetricsError::GridTooLarge { combinations });
    }

    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut index = vec![0usize; n];
    'joint: loop {
        let candidate: Vec<Vec<f64>> =
            index.iter().zip(&agent_points).map(|(k, pts)| pts[*k].clone()).collect();
        let c = aggregate_constraint(problem, &candidate);
        if c.iter().all(|&v| v <= 1e-12) {
            let value = averaged_total_cost(problem, &candidate);
            if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
                best = Some((value, candidate));
            }
        }
        for d in 0..n {
            index[d] += 1;
            if index[d] < agent_points[d].len() {
                continue 'joint;
            }
            index[d] = 0;
        }
        break;
    }

    let (value, x) = best.ok_or(MetricsError::Infeasible)?;
    let c = aggregate_constraint(problem, &x);
    let infeasibility = c.iter().fold(0.0f64, |acc, v| acc.max(*v));
    Ok(OracleResult {
        x,
        value,
        dual: vec![0.0; problem.constraint_dim()],
        kkt_residual: infeasibility.max(0.0),
        feasible: true,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_distributed, RoundRecord, RunConfig, StepsizeRule, SystemState};
    use crate::graph::GraphSequence;
    use crate::linalg::Mat;
    use crate::penalty::PenaltyFunction;
    use crate::problem::synthetic::{SyntheticParams, SyntheticProblem};

    fn reference_inputs() -> BoundInputs {
        BoundInputs {
            eta: 0.1,
            n: 10,
            q: 1,
            c_x: 1.0,
            c_dual: 1.0,
            c_tracker: 1.0,
            c_constraint: 1.0,
            c_cost: 1.0,
            c_penalty: 1.0,
            l_cost: 1.0,
            l_constraint: 1.0,
            l_penalty: 1.0,
            g_penalty: 1.0,
        }
    }

    #[test]
    fn contraction_triple_reference_values() {
        let (gamma, beta, a_n) = contraction_triple(0.1, 10, 1).unwrap();
        // Independent evaluation through exp/ln.
        let base: f64 = 1.0 - 0.1 / 200.0;
        assert!((gamma - (-2.0 * base.ln()).exp()).abs() < 1e-12);
        assert_eq!(beta, 0.9995);
        assert!((a_n - 2001.0).abs() < 0.01);
        assert!((a_n - gamma * beta / (1.0 - beta)).abs() < 1e-9);
    }

    #[test]
    fn dual_disagreement_constant_reference_value() {
        let bc = BoundConstants::new(reference_inputs()).unwrap();
        // (2*10 + A_N * 100) * 1 with A_N ~ 2001.
        assert!((bc.b1 - 200_120.0).abs() < 0.1);
    }

    #[test]
    fn zero_radii_zero_all_outputs() {
        let inputs = BoundInputs {
            c_x: 0.0,
            c_dual: 0.0,
            c_tracker: 0.0,
            c_constraint: 0.0,
            c_cost: 0.0,
            c_penalty: 0.0,
            l_cost: 0.0,
            l_constraint: 0.0,
            l_penalty: 0.0,
            g_penalty: 0.0,
            ..reference_inputs()
        };
        let bc = BoundConstants::new(inputs).unwrap();
        for v in [
            bc.k1, bc.k2, bc.k3, bc.k4, bc.k5, bc.k6, bc.k7, bc.k8, bc.k9, bc.k10, bc.b1, bc.b2,
            bc.b3, bc.b4, bc.d1, bc.d2, bc.d3, bc.d4,
        ] {
            assert_eq!(v, 0.0);
        }
        assert!(bc.a_n > 0.0);
    }

    #[test]
    fn degenerate_weight_floor_is_divergent() {
        assert!(matches!(
            contraction_triple(0.0, 10, 1),
            Err(MetricsError::DivergentContraction { .. })
        ));
        assert!(matches!(
            BoundConstants::new(BoundInputs { eta: 0.0, ..reference_inputs() }),
            Err(MetricsError::DivergentContraction { .. })
        ));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(contraction_triple(-0.5, 10, 1).is_err());
        assert!(contraction_triple(1.5, 10, 1).is_err());
        assert!(contraction_triple(0.1, 0, 1).is_err());
        assert!(contraction_triple(0.1, 10, 0).is_err());
        assert!(BoundConstants::new(BoundInputs { c_x: -1.0, ..reference_inputs() }).is_err());
        assert!(BoundConstants::new(BoundInputs { l_cost: f64::NAN, ..reference_inputs() })
            .is_err());
    }

    #[test]
    fn restructured_recomputation_agrees() {
        // Same formulas, different association order; catches transcription
        // slips without duplicating the implementation verbatim.
        let i = BoundInputs {
            eta: 0.37,
            n: 7,
            q: 3,
            c_x: 1.3,
            c_dual: 2.1,
            c_tracker: 0.9,
            c_constraint: 1.7,
            c_cost: 2.2,
            c_penalty: 1.1,
            l_cost: 0.8,
            l_constraint: 1.9,
            l_penalty: 2.5,
            g_penalty: 3.1,
        };
        let bc = BoundConstants::new(i).unwrap();
        let n = i.n as f64;
        let mix = i.c_x * i.c_dual * i.l_constraint * i.g_penalty + i.c_dual * i.l_penalty;
        let k3 = i.l_cost.mul_add(i.l_cost, 2.0 * (i.c_x * i.c_x + i.c_dual * i.c_dual))
            + 8.0 * i.l_cost * i.l_constraint * mix;
        assert!((bc.k3 - k3).abs() <= 1e-12 * k3.abs());
        let k5 = 4.0 * i.l_cost * i.l_constraint * mix;
        assert!((bc.k5 - k5).abs() <= 1e-12 * k5.abs());
        let d2 = (i.n as f64).mul_add(bc.k3 + bc.k4 * bc.a_n, bc.k2) + bc.k5 * bc.a_n * n * n;
        assert!((bc.d2 - d2).abs() <= 1e-12 * d2.abs());
        let d4 = bc.k7 + (bc.k8 + bc.k9 * bc.a_n) * n + bc.k10 * bc.a_n * n * n;
        assert!((bc.d4 - d4).abs() <= 1e-12 * d4.abs());
    }

    #[test]
    fn bounds_grow_as_connectivity_weakens() {
        // Smaller weight floor or longer windows mean slower mixing, so
        // every sublinearity constant grows.
        let base = BoundConstants::new(reference_inputs()).unwrap();
        let weaker_eta =
            BoundConstants::new(BoundInputs { eta: 0.05, ..reference_inputs() }).unwrap();
        let longer_q = BoundConstants::new(BoundInputs { q: 5, ..reference_inputs() }).unwrap();
        for (b, w) in [(&base, &weaker_eta), (&base, &longer_q)] {
            assert!(w.a_n > b.a_n);
            assert!(w.d1 > b.d1 && w.d2 > b.d2 && w.d3 > b.d3 && w.d4 > b.d4);
            assert!(w.b1 > b.b1 && w.b2 > b.b2 && w.b3 > b.b3 && w.b4 > b.b4);
        }
    }

    fn empty_round(t: usize) -> RoundRecord {
        RoundRecord {
            t,
            alpha: 1.0 / (t as f64).sqrt(),
            costs: vec![0.0],
            constraint_sum: vec![0.0],
            lambda_disagreement: 0.0,
            y_disagreement: 0.0,
            pre_lambda_disagreement: 0.0,
            pre_y_disagreement: 0.0,
            max_lambda_norm: 0.0,
            max_y_norm: 0.0,
            conservation_gap: 0.0,
        }
    }

    fn table_trajectory(rounds: Vec<RoundRecord>) -> Trajectory {
        Trajectory {
            horizon: rounds.len(),
            num_agents: 1,
            constraint_dim: rounds[0].constraint_sum.len(),
            eta: 1.0,
            q: 1,
            stepsize: StepsizeRule::InverseSqrt,
            rounds,
            final_state: SystemState { round: 0, agents: Vec::new() },
            snapshots: None,
            max_lambda_norm: 0.0,
            max_y_norm: 0.0,
            max_penalty_norm: 0.0,
        }
    }

    #[test]
    fn disagreement_series_accumulates_round_records() {
        let mut r1 = empty_round(1);
        r1.lambda_disagreement = 2.0;
        r1.y_disagreement = 0.5;
        let mut r2 = empty_round(2);
        r2.lambda_disagreement = 1.0;
        r2.y_disagreement = 0.25;
        let series = disagreement_series(&table_trajectory(vec![r1, r2]));
        assert_eq!(series.cumulative_dual, vec![2.0, 3.0]);
        assert_eq!(series.cumulative_tracker, vec![0.5, 0.75]);
    }

    #[test]
    fn consensus_hand_case_disagreement() {
        // lambda = (0, 2) on a connected pair: post-consensus both are 1, so
        // disagreement collapses from 2 to 0.
        let w = crate::graph::build_weight_matrix(&[vec![false, true], vec![true, false]])
            .unwrap();
        let mixed = crate::engine::consensus_step(&w, &[vec![0.0], vec![2.0]]);
        assert_eq!(mixed, vec![vec![1.0], vec![1.0]]);
        let mean = 1.0;
        let pre: f64 = [0.0f64, 2.0].iter().map(|v| (v - mean).abs()).sum();
        let post: f64 = mixed.iter().map(|v| (v[0] - mean).abs()).sum();
        assert_eq!(pre, 2.0);
        assert_eq!(post, 0.0);
    }

    #[test]
    fn run_disagreements_stay_below_their_bounds() {
        let mut p = SyntheticProblem::new(4, SyntheticParams::default(), 21).unwrap();
        let graph = GraphSequence::ring(4, 1, 21);
        let penalty = PenaltyFunction::smooth_max(1, 0.01).unwrap();
        let config = RunConfig { horizon: 500, ..Default::default() };
        let traj = run_distributed(&mut p, &graph, &penalty, &config).unwrap();
        let bounds = BoundConstants::from_run(&traj, &p.constants(), &penalty, 0.0).unwrap();
        let check = bounds.check_disagreements(&disagreement_series(&traj));
        assert!(check.dual_ok && check.tracker_ok, "{check:?}");
        assert!(check.min_dual_slack >= 0.0 && check.min_tracker_slack >= 0.0);
    }

    /// Scalar agent with `f = x^2`, `g(x) = x`, box `[-1, 1]`: small enough
    /// to check Lagrangian arithmetic by hand.
    struct Affine {
        round: usize,
    }

    impl OnlineProblem for Affine {
        fn num_agents(&self) -> usize {
            1
        }
        fn constraint_dim(&self) -> usize {
            1
        }
        fn decision_dim(&self, _: usize) -> usize {
            1
        }
        fn constants(&self) -> ProblemConstants {
            ProblemConstants { c_x: 1.0, c_f: 4.0, c_g: 2.0, l_f: 4.0, l_g: 1.0 }
        }
        fn initial_point(&self, _: usize) -> Vec<f64> {
            vec![1.0]
        }
        fn advance(&mut self) {
            self.round += 1;
        }
        fn round(&self) -> usize {
            self.round
        }
        fn reset(&mut self) {
            self.round = 0;
        }
        fn cost(&self, _: usize, x: &[f64]) -> f64 {
            x[0] * x[0]
        }
        fn cost_grad(&self, _: usize, x: &[f64]) -> Vec<f64> {
            vec![2.0 * x[0]]
        }
        fn averaged_cost(&self, a: usize, x: &[f64]) -> f64 {
            self.cost(a, x)
        }
        fn averaged_cost_grad(&self, a: usize, x: &[f64]) -> Vec<f64> {
            self.cost_grad(a, x)
        }
        fn constraint(&self, _: usize, x: &[f64]) -> Vec<f64> {
            vec![x[0]]
        }
        fn constraint_jacobian(&self, _: usize, _: &[f64]) -> Mat {
            Mat::from_rows(&[vec![1.0]])
        }
        fn project(&self, _: usize, x: &[f64]) -> Vec<f64> {
            vec![x[0].clamp(-1.0, 1.0)]
        }
        fn box_bounds(&self, _: usize) -> Vec<(f64, f64)> {
            vec![(-1.0, 1.0)]
        }
    }

    #[test]
    fn lagrangian_hand_values() {
        let mut p = Affine { round: 0 };
        p.advance();
        let penalty = PenaltyFunction::identity(1);
        // Zero dual leaves only the cost sum. (The feasible box is [-1, 1];
        // evaluation outside it is still well defined.)
        let v0 = lagrangian_value(&p, &penalty, &[vec![2.0]], &[0.0]).unwrap();
        assert_eq!(v0, 4.0);
        // f(2) + lambda * g(2) = 4 + 3 * 2 = 10.
        let v = lagrangian_value(&p, &penalty, &[vec![2.0]], &[3.0]).unwrap();
        assert_eq!(v, 10.0);
    }

    #[test]
    fn lagrangian_gradients_match_finite_differences() {
        let mut p = SyntheticProblem::new(3, SyntheticParams::default(), 9).unwrap();
        p.advance();
        p.advance();
        let penalty = PenaltyFunction::smooth_max(1, 0.05).unwrap();
        let x = vec![vec![0.31], vec![0.62], vec![0.17]];
        let lambda = vec![0.7];
        let (grad_x, grad_l) = lagrangian_gradients(&p, &penalty, &x, &lambda).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[i][0] += h;
            lo[i][0] -= h;
            let fd = (lagrangian_value(&p, &penalty, &hi, &lambda).unwrap()
                - lagrangian_value(&p, &penalty, &lo, &lambda).unwrap())
                / (2.0 * h);
            assert!((grad_x[i][0] - fd).abs() < 1e-5, "agent {i}: {} vs {fd}", grad_x[i][0]);
        }
        let fd_l = (lagrangian_value(&p, &penalty, &x, &[lambda[0] + h]).unwrap()
            - lagrangian_value(&p, &penalty, &x, &[lambda[0] - h]).unwrap())
            / (2.0 * h);
        assert!((grad_l[0] - fd_l).abs() < 1e-5);
    }

    #[test]
    fn lagrangian_rejects_bad_shapes() {
        let p = Affine { round: 1 };
        let penalty = PenaltyFunction::identity(1);
        assert!(lagrangian_value(&p, &penalty, &[vec![0.0], vec![0.0]], &[0.0]).is_err());
        assert!(lagrangian_value(&p, &penalty, &[vec![0.0, 1.0]], &[0.0]).is_err());
        assert!(lagrangian_value(&p, &penalty, &[vec![0.0]], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn stationary_run_has_zero_regret_against_itself() {
        // Target 0 with slack caps: iterates never leave the comparator.
        let mut p = SyntheticProblem::new(
            2,
            SyntheticParams {
                targets: Some(vec![0.0, 0.0]),
                jitter: 0.0,
                caps: Some(vec![1.0, 1.0]),
                random_init: false,
            },
            0,
        )
        .unwrap();
        let graph = GraphSequence::complete(2, 1, 0);
        let penalty = PenaltyFunction::identity(1);
        let config = RunConfig { horizon: 25, ..Default::default() };
        let traj = run_distributed(&mut p, &graph, &penalty, &config).unwrap();
        let series = cost_regret(&traj, &mut p, &[vec![0.0], vec![0.0]]).unwrap();
        for r in series {
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn one_round_regret_by_hand() {
        // f(x) = x^2, x_1 = 1, comparator 0: R(1) = 1.
        let mut p = Affine { round: 0 };
        let penalty = PenaltyFunction::identity(1);
        let config = RunConfig { horizon: 1, ..Default::default() };
        let traj = crate::engine::run_centralized(&mut p, &penalty, &config).unwrap();
        let series = cost_regret(&traj, &mut p, &[vec![0.0]]).unwrap();
        assert_eq!(series, vec![1.0]);
    }

    #[test]
    fn cost_regret_unrolls_additively() {
        let mut p = SyntheticProblem::new(3, SyntheticParams::default(), 2).unwrap();
        let graph = GraphSequence::ring(3, 1, 2);
        let penalty = PenaltyFunction::identity(1);
        let config = RunConfig { horizon: 40, ..Default::default() };
        let traj = run_distributed(&mut p, &graph, &penalty, &config).unwrap();
        let comparator = vec![vec![0.2], vec![0.3], vec![0.25]];
        let series = cost_regret(&traj, &mut p, &comparator).unwrap();
        p.reset();
        let mut cumulative = 0.0;
        for (idx, record) in traj.rounds.iter().enumerate() {
            p.advance();
            let run: f64 = record.costs.iter().sum();
            let cmp: f64 =
                comparator.iter().enumerate().map(|(i, xc)| p.cost(i, xc)).sum();
            cumulative += run - cmp;
            assert_eq!(series[idx], cumulative);
        }
    }

    #[test]
    fn cost_regret_rejects_infeasible_comparators() {
        let mut p = SyntheticProblem::new(2, SyntheticParams::default(), 2).unwrap();
        let graph = GraphSequence::ring(2, 1, 2);
        let penalty = PenaltyFunction::identity(1);
        let traj = run_distributed(
            &mut p,
            &graph,
            &penalty,
            &RunConfig { horizon: 5, ..Default::default() },
        )
        .unwrap();
        assert!(matches!(
            cost_regret(&traj, &mut p, &[vec![1.5], vec![0.0]]),
            Err(MetricsError::ComparatorInfeasible { agent: 0 })
        ));
        assert!(matches!(
            cost_regret(&traj, &mut p, &[vec![0.5]]),
            Err(MetricsError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn constraint_regret_vanishes_with_feasibility_margin() {
        // Aggregate stays below -mu every round, where the smooth max is
        // exactly zero.
        let penalty = PenaltyFunction::smooth_max(1, 0.001).unwrap();
        let rounds: Vec<RoundRecord> = (1..=20)
            .map(|t| {
                let mut r = empty_round(t);
                r.constraint_sum = vec![-0.5];
                r
            })
            .collect();
        let series = constraint_regret(&table_trajectory(rounds), &penalty).unwrap();
        assert!(series.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constraint_regret_accumulates_identity_violations() {
        let penalty = PenaltyFunction::identity(1);
        let rounds: Vec<RoundRecord> = (1..=10)
            .map(|t| {
                let mut r = empty_round(t);
                r.constraint_sum = vec![0.1];
                r
            })
            .collect();
        let series = constraint_regret(&table_trajectory(rounds), &penalty).unwrap();
        assert!((series[9] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_penalty_lets_violations_cancel() {
        // +1 then -1 sums to zero under the identity map: the reason the
        // violation guarantee asks for a strict penalty.
        let penalty = PenaltyFunction::identity(1);
        let mut r1 = empty_round(1);
        r1.constraint_sum = vec![1.0];
        let mut r2 = empty_round(2);
        r2.constraint_sum = vec![-1.0];
        let series = constraint_regret(&table_trajectory(vec![r1, r2]), &penalty).unwrap();
        assert_eq!(series, vec![1.0, 0.0]);

        let strict = PenaltyFunction::smooth_max_strict(1, 0.001).unwrap();
        let mut s1 = empty_round(1);
        s1.constraint_sum = vec![1.0];
        let mut s2 = empty_round(2);
        s2.constraint_sum = vec![-1.0];
        let strict_series =
            constraint_regret(&table_trajectory(vec![s1, s2]), &strict).unwrap();
        assert!(strict_series[1] >= strict_series[0]);
        assert!(strict_series[0] > 0.9);
    }

    #[test]
    fn regret_report_rows_are_consistent() {
        let mut p = SyntheticProblem::new(3, SyntheticParams::default(), 17).unwrap();
        let graph = GraphSequence::ring(3, 1, 17);
        let penalty = PenaltyFunction::smooth_max(1, 0.001).unwrap();
        let config = RunConfig { horizon: 50, ..Default::default() };
        let traj = run_distributed(&mut p, &graph, &penalty, &config).unwrap();
        let bounds = BoundConstants::from_run(&traj, &p.constants(), &penalty, 0.0).unwrap();
        let comparator = vec![vec![0.3]; 3];
        let report = regret_report(&traj, &mut p, &penalty, &comparator, &bounds).unwrap();
        assert_eq!(report.rows.len(), 50);
        for row in &report.rows {
            assert!((row.avg_cost_regret - row.cost_regret / row.t as f64).abs() < 1e-12);
            assert!(row.constraint_regret >= 0.0);
            assert!((row.cost_bound - bounds.cost_regret_bound(row.t)).abs() < 1e-12);
        }
    }

    /// The documented oracle instance: every round costs `(x - 1)^2` with
    /// `g(x) = x - 0.5` on `[0, 2]`; tightest feasible point is 0.5.
    struct Capped {
        round: usize,
    }

    impl OnlineProblem for Capped {
        fn num_agents(&self) -> usize {
            1
        }
        fn constraint_dim(&self) -> usize {
            1
        }
        fn decision_dim(&self, _: usize) -> usize {
            1
        }
        fn constants(&self) -> ProblemConstants {
            ProblemConstants { c_x: 2.0, c_f: 4.0, c_g: 1.5, l_f: 4.0, l_g: 1.0 }
        }
        fn initial_point(&self, _: usize) -> Vec<f64> {
            vec![2.0]
        }
        fn advance(&mut self) {
            self.round += 1;
        }
        fn round(&self) -> usize {
            self.round
        }
        fn reset(&mut self) {
            self.round = 0;
        }
        fn cost(&self, _: usize, x: &[f64]) -> f64 {
            (x[0] - 1.0) * (x[0] - 1.0)
        }
        fn cost_grad(&self, _: usize, x: &[f64]) -> Vec<f64> {
            vec![2.0 * (x[0] - 1.0)]
        }
        fn averaged_cost(&self, a: usize, x: &[f64]) -> f64 {
            self.cost(a, x)
        }
        fn averaged_cost_grad(&self, a: usize, x: &[f64]) -> Vec<f64> {
            self.cost_grad(a, x)
        }
        fn constraint(&self, _: usize, x: &[f64]) -> Vec<f64> {
            vec![x[0] - 0.5]
        }
        fn constraint_jacobian(&self, _: usize, _: &[f64]) -> Mat {
            Mat::from_rows(&[vec![1.0]])
        }
        fn project(&self, _: usize, x: &[f64]) -> Vec<f64> {
            vec![x[0].clamp(0.0, 2.0)]
        }
        fn box_bounds(&self, _: usize) -> Vec<(f64, f64)> {
            vec![(0.0, 2.0)]
        }
    }

    #[test]
    fn oracle_finds_the_binding_constraint_point() {
        let mut p = Capped { round: 0 };
        p.advance();
        let solved = offline_optimum(&p, &OracleConfig::default()).unwrap();
        assert!(solved.converged, "kkt residual {}", solved.kkt_residual);
        assert!((solved.x[0][0] - 0.5).abs() < 1e-6, "got {}", solved.x[0][0]);
        assert!(solved.feasible);
        let grid = grid_search_optimum(&p, 1e-3).unwrap();
        assert!((grid.x[0][0] - 0.5).abs() < 1e-9);
        assert!((solved.x[0][0] - grid.x[0][0]).abs() <= 1e-3);
    }

    #[test]
    fn oracle_with_slack_constraint_hits_the_unconstrained_minimum() {
        // Synthetic with far caps: g never binds, so the hindsight optimum
        // is the running mean of the targets.
        let mut p = SyntheticProblem::new(
            1,
            SyntheticParams {
                targets: Some(vec![0.4]),
                jitter: 0.2,
                caps: Some(vec![50.0]),
                random_init: false,
            },
            3,
        )
        .unwrap();
        for _ in 0..200 {
            p.advance();
        }
        let expected = {
            // Gradient of the averaged quadratic vanishes at the mean.
            let g0 = p.averaged_cost_grad(0, &[0.0])[0];
            let g1 = p.averaged_cost_grad(0, &[1.0])[0];
            -g0 / (g1 - g0)
        };
        let solved = offline_optimum(&p, &OracleConfig::default()).unwrap();
        assert!((solved.x[0][0] - expected).abs() < 1e-7);
        let grid = grid_search_optimum(&p, 1e-3).unwrap();
        assert!((solved.x[0][0] - grid.x[0][0]).abs() <= 1e-3);
    }

    #[test]
    fn oracle_matches_grid_on_the_two_agent_instance() {
        // Targets (1, 0) with a unit aggregate cap: the per-agent minima
        // land exactly on the constraint boundary.
        let mut p = SyntheticProblem::new(
            2,
            SyntheticParams {
                targets: Some(vec![1.0, 0.0]),
                jitter: 0.0,
                caps: Some(vec![0.5, 0.5]),
                random_init: false,
            },
            0,
        )
        .unwrap();
        p.advance();
        let solved = offline_optimum(&p, &OracleConfig::default()).unwrap();
        assert!((solved.x[0][0] - 1.0).abs() < 1e-6);
        assert!(solved.x[1][0].abs() < 1e-6);
        let grid = grid_search_optimum(&p, 1e-3).unwrap();
        assert!((grid.x[0][0] - 1.0).abs() < 1e-9 && grid.x[1][0].abs() < 1e-9);
        for i in 0..2 {
            assert!((solved.x[i][0] - grid.x[i][0]).abs() <= 1e-3);
        }
    }

    /// Unsatisfiable aggregate: `g(x) = x + 1 > 0` on `[0, 1]`.
    struct Unsatisfiable {
        round: usize,
    }

    impl OnlineProblem for Unsatisfiable {
        fn num_agents(&self) -> usize {
            1
        }
        fn constraint_dim(&self) -> usize {
            1
        }
        fn decision_dim(&self, _: usize) -> usize {
            1
        }
        fn constants(&self) -> ProblemConstants {
            ProblemConstants { c_x: 1.0, c_f: 1.0, c_g: 2.0, l_f: 2.0, l_g: 1.0 }
        }
        fn initial_point(&self, _: usize) -> Vec<f64> {
            vec![0.0]
        }
        fn advance(&mut self) {
            self.round += 1;
        }
        fn round(&self) -> usize {
            self.round
        }
        fn reset(&mut self) {
            self.round = 0;
        }
        fn cost(&self, _: usize, x: &[f64]) -> f64 {
            x[0] * x[0]
        }
        fn cost_grad(&self, _: usize, x: &[f64]) -> Vec<f64> {
            vec![2.0 * x[0]]
        }
        fn averaged_cost(&self, a: usize, x: &[f64]) -> f64 {
            self.cost(a, x)
        }
        fn averaged_cost_grad(&self, a: usize, x: &[f64]) -> Vec<f64> {
            self.cost_grad(a, x)
        }
        fn constraint(&self, _: usize, x: &[f64]) -> Vec<f64> {
            vec![x[0] + 1.0]
        }
        fn constraint_jacobian(&self, _: usize, _: &[f64]) -> Mat {
            Mat::from_rows(&[vec![1.0]])
        }
        fn project(&self, _: usize, x: &[f64]) -> Vec<f64> {
            vec![x[0].clamp(0.0, 1.0)]
        }
        fn box_bounds(&self, _: usize) -> Vec<(f64, f64)> {
            vec![(0.0, 1.0)]
        }
    }

    #[test]
    fn infeasibility_is_surfaced_not_hidden() {
        let mut p = Unsatisfiable { round: 0 };
        p.advance();
        assert!(matches!(grid_search_optimum(&p, 1e-2), Err(MetricsError::Infeasible)));
        let solved = offline_optimum(&p, &OracleConfig::default()).unwrap();
        assert!(!solved.feasible);
    }

    #[test]
    fn oracles_require_cost_history() {
        let p = Capped { round: 0 };
        assert!(offline_optimum(&p, &OracleConfig::default()).is_err());
        assert!(grid_search_optimum(&p, 1e-2).is_err());
    }

    #[test]
    fn grid_refuses_oversized_enumerations() {
        let mut p = SyntheticProblem::new(4, SyntheticParams::default(), 0).unwrap();
        p.advance();
        assert!(matches!(
            grid_search_optimum(&p, 1e-3),
            Err(MetricsError::GridTooLarge { .. })
        ));
    }
}
