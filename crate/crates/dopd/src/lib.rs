//! Distributed online primal-dual optimization over time-varying networks.
//!
//! A network of `N` agents repeatedly commits decisions `x_{i,t}` from compact
//! sets `X_i`, after which the environment reveals per-agent convex losses
//! `f_{i,t}`. The agents must also cooperatively respect a coupled inequality
//! constraint that none of them can evaluate alone:
//!
//! ```text
//!     F( g_1(x_1) + g_2(x_2) + ... + g_N(x_N) ) <= 0
//! ```
//!
//! where each `g_i` is private to agent `i` and `F` is a convex, coordinatewise
//! penalty map. Agents exchange information only with current neighbors in a
//! time-varying communication graph. Each round every agent
//!
//! 1. averages its dual variable and its running constraint tracker over the
//!    current neighborhood,
//! 2. takes a projected gradient step on a local penalized Lagrangian,
//! 3. takes a projected ascent step on the dual, and
//! 4. corrects its tracker by the observed change in its own constraint value,
//!
//! which keeps the network-wide sum of trackers equal to the network-wide sum
//! of constraint values at every round. Under standard convexity and
//! connectivity conditions the scheme attains `O(sqrt(T))` regret against the
//! best fixed feasible decision in hindsight, and `O(sqrt(T))` cumulative
//! constraint violation.
//!
//! # Crate layout
//!
//! * [`graph`]: doubly stochastic weight matrices, time-varying graph
//!   sequences, and the network-model validator.
//! * [`penalty`]: the penalty map `F` (identity, smoothed max, and a strict
//!   variant that vanishes on the nonpositive orthant).
//! * [`problem`]: the [`problem::OnlineProblem`] interface plus two concrete
//!   problem families (a scalar synthetic benchmark and a wireless
//!   minimum-rate routing model).
//! * [`engine`]: the distributed iteration, a centralized reference loop, and
//!   a per-round audit of the saddle-point iterate inequalities.
//! * [`metrics`]: regret accounting, disagreement series, the offline
//!   comparator oracle, and the closed-form bound constants.
//! * [`config`] / [`experiment`]: declarative experiment configs, artifact
//!   output, and the two bundled experiment presets.
//!
//! # Example
//!
//! Run a short experiment on a three-agent synthetic problem and check the
//! conservation identity that the tracker update maintains:
//!
//! ```
//! use dopd::engine::{run_distributed, RunConfig};
//! use dopd::graph::GraphSequence;
//! use dopd::penalty::PenaltyFunction;
//! use dopd::problem::synthetic::{SyntheticParams, SyntheticProblem};
//!
//! let mut problem = SyntheticProblem::new(3, SyntheticParams::default(), 7).unwrap();
//! let graph = GraphSequence::ring(3, 1, 7);
//! let penalty = PenaltyFunction::identity(1);
//! let config = RunConfig { horizon: 50, record_snapshots: true, ..RunConfig::default() };
//!
//! let trajectory = run_distributed(&mut problem, &graph, &penalty, &config).unwrap();
//! assert_eq!(trajectory.rounds.len(), 50);
//! // Sum of trackers equals sum of constraint values, every round.
//! assert!(trajectory.rounds.iter().all(|r| r.conservation_gap < 1e-12));
//! ```

#![forbid(unsafe_code)]

pub mod book;
pub mod config;
pub mod engine;
pub mod experiment;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod penalty;
pub mod problem;
pub mod rng;
