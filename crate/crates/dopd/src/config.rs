//! Declarative experiment configuration.
//!
//! An [`ExperimentConfig`] is a plain TOML document that pins down everything
//! a run depends on: the problem instance, the communication graph, the
//! penalty map, the horizon, the stepsize rule, and one top-level seed that
//! feeds every random substream. Parsing a persisted config and rerunning it
//! reproduces the original run bit for bit on the same platform.
//!
//! ```
//! use dopd::config::{build_experiment, ExperimentConfig};
//!
//! let text = r#"
//! seed = 7
//! horizon = 200
//!
//! [penalty]
//! kind = "smooth_max"
//! mu = 0.001
//!
//! [problem]
//! scenario = "synthetic"
//! n = 4
//! "#;
//! let config: ExperimentConfig = text.parse().unwrap();
//! let experiment = build_experiment(&config).unwrap();
//! assert_eq!(experiment.problem.num_agents(), 4);
//! assert_eq!(experiment.penalty.dim(), 1);
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{RunConfig, StepsizeRule};
use crate::graph::{BaseGraph, GraphError, GraphScenario, GraphSequence};
use crate::metrics::OracleConfig;
use crate::penalty::{PenaltyError, PenaltyFunction, PenaltyKind};
use crate::problem::routing::{RoutingParams, RoutingProblem};
use crate::problem::synthetic::{SyntheticParams, SyntheticProblem};
use crate::problem::{OnlineProblem, ProblemError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph base \"from_positions\" needs a routing problem to derive the layout from")]
    BaseRequiresRouting,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Complete description of one run. Everything is serializable, defaultable
/// fields may be omitted from the file, and the same document always builds
/// the same experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Top-level seed. Graph structure, realized rates, round costs, node
    /// positions, and initial points each draw from their own substream of
    /// this value, so changing one component never perturbs the others.
    pub seed: u64,
    pub horizon: usize,
    /// Default artifact directory; `--out` on the command line wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_stepsize")]
    pub stepsize: StepsizeRule,
    pub penalty: PenaltyKind,
    #[serde(default)]
    pub graph: GraphConfig,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub engine: EngineOptions,
    #[serde(default)]
    pub oracle: OracleConfig,
}

fn default_stepsize() -> StepsizeRule {
    StepsizeRule::InverseSqrt
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Ok(text.parse()?)
    }

    /// The resolved document this config serializes to (what `run` persists
    /// next to its artifacts).
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }
}

impl std::str::FromStr for ExperimentConfig {
    type Err = toml::de::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        toml::from_str(s)
    }
}

/// Communication-graph settings. The number of nodes always comes from the
/// problem, never from here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Connectivity window: the union of any `q` consecutive graphs must be
    /// connected.
    #[serde(default = "default_q")]
    pub q: usize,
    /// Per-round appearance probability for base edges outside the scheduled
    /// spanning structure.
    #[serde(default = "default_extra_edge_prob")]
    pub extra_edge_prob: f64,
    #[serde(default)]
    pub base: GraphBase,
}

fn default_q() -> usize {
    1
}

// Keep in sync with the graph module's scenario default.
fn default_extra_edge_prob() -> f64 {
    0.15
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            q: default_q(),
            extra_edge_prob: default_extra_edge_prob(),
            base: GraphBase::default(),
        }
    }
}

/// Which base topology the generated sequence thins.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphBase {
    #[default]
    Ring,
    Complete,
    /// Derive adjacency from the routing layout: two sources are neighbors
    /// when their direct link has positive mean rate. Routing problems only.
    FromPositions,
}

/// Problem family plus its parameters, flattened into one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ProblemConfig {
    Synthetic {
        n: usize,
        #[serde(flatten)]
        params: SyntheticParams,
    },
    Routing {
        #[serde(flatten)]
        params: RoutingParams,
    },
}

impl ProblemConfig {
    #[must_use]
    pub fn num_agents(&self) -> usize {
        match self {
            ProblemConfig::Synthetic { n, .. } => *n,
            ProblemConfig::Routing { params } => params.n_sources,
        }
    }
}

/// Engine knobs that are not part of the mathematical setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    #[serde(default)]
    pub record_snapshots: bool,
    #[serde(default = "default_conservation_cadence")]
    pub conservation_check_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_cap: Option<f64>,
}

fn default_conservation_cadence() -> usize {
    1
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            record_snapshots: false,
            conservation_check_every: default_conservation_cadence(),
            lambda_cap: None,
        }
    }
}

/// A built experiment, ready to hand to the engine.
pub struct Experiment {
    pub problem: Box<dyn OnlineProblem>,
    pub graph: GraphSequence,
    pub penalty: PenaltyFunction,
    pub run: RunConfig,
    pub oracle: OracleConfig,
}

/// Instantiate every component a config describes.
///
/// The problem is built first so the graph can reuse its agent count (and,
/// for `from_positions`, its layout). The graph sequence itself is validated
/// later by the engine, over the actual horizon.
pub fn build_experiment(config: &ExperimentConfig) -> Result<Experiment, ConfigError> {
    if config.horizon == 0 {
        return Err(ConfigError::ZeroHorizon);
    }

    let (problem, layout_adjacency): (Box<dyn OnlineProblem>, Option<Vec<Vec<bool>>>) =
        match &config.problem {
            ProblemConfig::Synthetic { n, params } => {
                let p = SyntheticProblem::new(*n, params.clone(), config.seed)?;
                (Box::new(p), None)
            }
            ProblemConfig::Routing { params } => {
                let p = RoutingProblem::new(params.clone(), config.seed)?;
                let adj = p.source_adjacency();
                (Box::new(p), Some(adj))
            }
        };

    let base = match config.graph.base {
        GraphBase::Ring => BaseGraph::Ring,
        GraphBase::Complete => BaseGraph::Complete,
        GraphBase::FromPositions => {
            BaseGraph::Adjacency(layout_adjacency.ok_or(ConfigError::BaseRequiresRouting)?)
        }
    };
    let scenario = GraphScenario { base, extra_edge_prob: config.graph.extra_edge_prob };
    let graph =
        GraphSequence::generated(problem.num_agents(), config.graph.q, scenario, config.seed)?;

    let penalty = PenaltyFunction::from_kind(problem.constraint_dim(), &config.penalty)?;

    let run = RunConfig {
        horizon: config.horizon,
        stepsize: config.stepsize,
        record_snapshots: config.engine.record_snapshots,
        conservation_check_every: config.engine.conservation_check_every,
        lambda_cap: config.engine.lambda_cap,
        validate_graph: true,
    };

    Ok(Experiment { problem, graph, penalty, run, oracle: config.oracle })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic_config() -> ExperimentConfig {
        ExperimentConfig {
            seed: 11,
            horizon: 300,
            output: None,
            stepsize: StepsizeRule::InverseSqrt,
            penalty: PenaltyKind::SmoothMax { mu: 0.001 },
            graph: GraphConfig::default(),
            problem: ProblemConfig::Synthetic { n: 5, params: SyntheticParams::default() },
            engine: EngineOptions::default(),
            oracle: OracleConfig::default(),
        }
    }

    #[test]
    fn toml_round_trip_synthetic() {
        let config = synthetic_config();
        let text = config.to_toml().unwrap();
        let back: ExperimentConfig = text.parse().unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn toml_round_trip_routing_with_options() {
        let mut config = synthetic_config();
        config.problem = ProblemConfig::Routing {
            params: RoutingParams {
                n_sources: 4,
                n_aps: 2,
                z_max: Some(3.5),
                positions: Some(vec![
                    [0.1, 0.1],
                    [0.2, 0.1],
                    [0.1, 0.2],
                    [0.2, 0.2],
                    [0.5, 0.5],
                    [0.6, 0.5],
                ]),
                ..RoutingParams::default()
            },
        };
        config.graph.base = GraphBase::FromPositions;
        config.engine.lambda_cap = Some(25.0);
        config.output = Some(PathBuf::from("artifacts/run1"));

        let text = config.to_toml().unwrap();
        let back: ExperimentConfig = text.parse().unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn minimal_document_fills_defaults() {
        let text = r#"
            seed = 3
            horizon = 10

            [penalty]
            kind = "identity"

            [problem]
            scenario = "synthetic"
            n = 2
        "#;
        let config: ExperimentConfig = text.parse().unwrap();
        assert_eq!(config.stepsize, StepsizeRule::InverseSqrt);
        assert_eq!(config.graph, GraphConfig::default());
        assert_eq!(config.engine, EngineOptions::default());
        assert_eq!(config.oracle, OracleConfig::default());
        assert_eq!(config.output, None);
    }

    #[test]
    fn partial_oracle_table_keeps_other_defaults() {
        let text = r#"
            seed = 3
            horizon = 10

            [penalty]
            kind = "identity"

            [problem]
            scenario = "synthetic"
            n = 2

            [oracle]
            max_outer = 5
        "#;
        let config: ExperimentConfig = text.parse().unwrap();
        assert_eq!(config.oracle.max_outer, 5);
        assert_eq!(config.oracle.kkt_tolerance, OracleConfig::default().kkt_tolerance);
    }

    #[test]
    fn unknown_top_level_key_is_rejected() {
        let text = r#"
            seed = 3
            horizon = 10
            horizn_typo = 4

            [penalty]
            kind = "identity"

            [problem]
            scenario = "synthetic"
            n = 2
        "#;
        assert!(text.parse::<ExperimentConfig>().is_err());
    }

    #[test]
    fn build_synthetic_experiment() {
        let config = synthetic_config();
        let experiment = build_experiment(&config).unwrap();
        assert_eq!(experiment.problem.num_agents(), 5);
        assert_eq!(experiment.penalty.dim(), experiment.problem.constraint_dim());
        assert_eq!(experiment.graph.q(), 1);
        assert_eq!(experiment.run.horizon, 300);
        assert!(experiment.run.validate_graph);
    }

    #[test]
    fn from_positions_needs_routing() {
        let mut config = synthetic_config();
        config.graph.base = GraphBase::FromPositions;
        assert!(matches!(build_experiment(&config), Err(ConfigError::BaseRequiresRouting)));
    }

    #[test]
    fn from_positions_builds_layout_graph() {
        // Sources clustered well inside the full-rate radius: the layout
        // adjacency is complete, so the generated sequence is valid.
        let mut config = synthetic_config();
        config.problem = ProblemConfig::Routing {
            params: RoutingParams {
                n_sources: 3,
                n_aps: 1,
                positions: Some(vec![[0.10, 0.10], [0.15, 0.10], [0.10, 0.15], [0.5, 0.5]]),
                ..RoutingParams::default()
            },
        };
        config.graph.base = GraphBase::FromPositions;
        let experiment = build_experiment(&config).unwrap();
        assert_eq!(experiment.graph.n(), 3);
        assert!((experiment.graph.eta() - 1.0 / 3.0).abs() < 1e-15);
        assert!(experiment.graph.validate(50).unwrap().pass());
    }

    #[test]
    fn zero_horizon_is_rejected() {
        let mut config = synthetic_config();
        config.horizon = 0;
        assert!(matches!(build_experiment(&config), Err(ConfigError::ZeroHorizon)));
    }

    #[test]
    fn bad_penalty_width_is_rejected() {
        let mut config = synthetic_config();
        config.penalty = PenaltyKind::SmoothMax { mu: -1.0 };
        assert!(matches!(build_experiment(&config), Err(ConfigError::Penalty(_))));
    }

    fn penalty_strategy() -> impl Strategy<Value = PenaltyKind> {
        prop_oneof![
            Just(PenaltyKind::Identity),
            (1e-4..1.0f64).prop_map(|mu| PenaltyKind::SmoothMax { mu }),
            (1e-4..1.0f64).prop_map(|mu| PenaltyKind::SmoothMaxStrict { mu }),
        ]
    }

    proptest! {
        // TOML text is the storage format of record, so its round trip must
        // be exact, floats included.
        #[test]
        fn prop_toml_round_trip(
            seed in any::<u64>(),
            horizon in 1usize..5000,
            q in 1usize..4,
            extra in 0.0..1.0f64,
            jitter in 0.0..1.0f64,
            n in 1usize..7,
            penalty in penalty_strategy(),
            snapshots in any::<bool>(),
        ) {
            let config = ExperimentConfig {
                seed,
                horizon,
                output: None,
                stepsize: StepsizeRule::ScaledInverseSqrt { scale: jitter + 0.5 },
                penalty,
                graph: GraphConfig { q, extra_edge_prob: extra, base: GraphBase::Complete },
                problem: ProblemConfig::Synthetic {
                    n,
                    params: SyntheticParams { jitter, ..SyntheticParams::default() },
                },
                engine: EngineOptions { record_snapshots: snapshots, ..Default::default() },
                oracle: OracleConfig::default(),
            };
            let text = config.to_toml().unwrap();
            let back: ExperimentConfig = text.parse().unwrap();
            prop_assert_eq!(back, config);
        }
    }
}
