//! Experiment runs with persisted, verifiable artifacts.
//!
//! [`run_experiment`] executes one configured run end to end: distributed
//! iteration, hindsight comparator, bound constants, regret accounting. It
//! writes four files into a fresh directory:
//!
//! * `trajectory.csv`: one row per round (costs, aggregate constraint,
//!   disagreements, norms, conservation gap),
//! * `regret.csv`: cumulative and time-averaged regrets next to their
//!   closed-form bounds,
//! * `summary.json`: final figures, empirical radii, bound slacks, the
//!   comparator, and content digests of the other files,
//! * `config.toml`: the resolved configuration, rerunnable as-is.
//!
//! Everything is staged in a scratch directory and renamed into place at the
//! end, so an aborted run never leaves a partial artifact behind. Reruns of
//! the same config produce byte-identical CSVs; [`verify_artifacts`] checks a
//! directory by recomputing digests and replaying the regret accounting from
//! the stored trajectory.
//!
//! ```
//! use dopd::config::ExperimentConfig;
//! use dopd::experiment::{run_experiment, verify_artifacts};
//!
//! let config: ExperimentConfig = r#"
//! seed = 5
//! horizon = 30
//!
//! [penalty]
//! kind = "smooth_max_strict"
//! mu = 0.01
//!
//! [problem]
//! scenario = "synthetic"
//! n = 2
//! "#.parse().unwrap();
//!
//! let dir = tempfile::tempdir().unwrap();
//! let out = dir.path().join("demo");
//! let artifacts = run_experiment(&config, &out).unwrap();
//! assert!(artifacts.summary.oracle.feasible);
//! assert!(verify_artifacts(&out).unwrap().pass());
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{
    build_experiment, ConfigError, EngineOptions, ExperimentConfig, GraphBase, GraphConfig,
    ProblemConfig,
};
use crate::engine::{
    run_distributed, EngineError, RoundRecord, StepsizeRule, SystemState, Trajectory,
};
use crate::metrics::{
    constraint_regret, disagreement_series, offline_optimum, regret_report, BoundConstants,
    DisagreementCheck, MetricsError, OracleConfig, OracleResult, RegretReport, RegretRow,
};
use crate::penalty::PenaltyKind;
use crate::problem::routing::RoutingParams;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const REGRET_FILE: &str = "regret.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("summary serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("output directory {0} already exists")]
    OutputExists(PathBuf),
    #[error(
        "no feasible hindsight comparator found (kkt residual {kkt_residual:.3e}); \
         regret against an infeasible point is meaningless"
    )]
    ComparatorInfeasible { kkt_residual: f64 },
    #[error("unknown preset {0:?} (known: fig4, fig5)")]
    UnknownPreset(String),
    #[error("malformed artifact: {0}")]
    MalformedArtifact(String),
}

/// Headline figures persisted as `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    /// SHA-256 of the resolved `config.toml` text.
    pub config_digest: String,
    pub horizon: usize,
    pub num_agents: usize,
    pub constraint_dim: usize,
    pub final_cost_regret: f64,
    pub final_avg_cost_regret: f64,
    pub final_constraint_regret: f64,
    pub final_avg_constraint_regret: f64,
    /// Cumulative violation under the strict penalty variant, reported
    /// alongside the run's own penalty when the two differ. The smoothed max
    /// is positive on part of the feasible side, so its cumulative norm is
    /// not by itself a violation certificate; the strict variant's is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_avg_constraint_regret_strict: Option<f64>,
    pub final_cost_bound: f64,
    pub final_constraint_bound: f64,
    /// Minimum over rounds of `bound - regret`; nonnegative means the run
    /// sat below its bound at every recorded round.
    pub min_cost_bound_slack: f64,
    pub min_constraint_bound_slack: f64,
    /// Empirical dual radius (the `C_lambda` the bounds were evaluated at).
    pub max_lambda_norm: f64,
    /// Empirical tracker radius (the `C_y` the bounds were evaluated at).
    pub max_y_norm: f64,
    pub max_penalty_norm: f64,
    /// Largest observed conservation gap; absent when the check was disabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_conservation_gap: Option<f64>,
    pub cumulative_dual_disagreement: f64,
    pub cumulative_tracker_disagreement: f64,
    pub disagreements: DisagreementCheck,
    pub bounds: BoundConstants,
    pub oracle: OracleResult,
    /// Wall-clock seconds; the one field that legitimately differs between
    /// reruns of the same config.
    pub runtime_seconds: f64,
    /// SHA-256 per artifact file, keyed by file name.
    pub digests: BTreeMap<String, String>,
}

/// What [`run_experiment`] hands back in memory, on top of the files.
#[derive(Debug)]
pub struct RunArtifacts {
    pub directory: PathBuf,
    pub summary: RunSummary,
    pub report: RegretReport,
    pub trajectory: Trajectory,
}

/// Run one configured experiment and persist its artifacts to `out_dir`,
/// which must not exist yet.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<RunArtifacts, ExperimentError> {
    if out_dir.exists() {
        return Err(ExperimentError::OutputExists(out_dir.to_path_buf()));
    }
    let started = std::time::Instant::now();

    let mut experiment = build_experiment(config)?;
    let trajectory = run_distributed(
        &mut *experiment.problem,
        &experiment.graph,
        &experiment.penalty,
        &experiment.run,
    )?;

    // The run left the problem at the final round, which is exactly the
    // history the hindsight comparator averages over.
    let oracle = offline_optimum(&*experiment.problem, &experiment.oracle)?;
    if !oracle.feasible {
        return Err(ExperimentError::ComparatorInfeasible { kkt_residual: oracle.kkt_residual });
    }

    let constants = experiment.problem.constants();
    let bounds = BoundConstants::from_run(&trajectory, &constants, &experiment.penalty, 0.0)?;
    let report = regret_report(
        &trajectory,
        &mut *experiment.problem,
        &experiment.penalty,
        &oracle.x,
        &bounds,
    )?;

    let series = disagreement_series(&trajectory);
    let disagreements = bounds.check_disagreements(&series);

    let strict_avg = match experiment.penalty.strict_variant() {
        Some(strict) if strict.kind() != experiment.penalty.kind() => {
            let cumulative = constraint_regret(&trajectory, &strict)?;
            cumulative.last().map(|total| total / trajectory.horizon as f64)
        }
        _ => None,
    };

    let mut max_gap: Option<f64> = None;
    for r in &trajectory.rounds {
        if !r.conservation_gap.is_nan() {
            max_gap = Some(max_gap.map_or(r.conservation_gap, |g| g.max(r.conservation_gap)));
        }
    }
    let mut min_cost_slack = f64::INFINITY;
    let mut min_constraint_slack = f64::INFINITY;
    for row in &report.rows {
        min_cost_slack = min_cost_slack.min(row.cost_bound - row.cost_regret);
        min_constraint_slack = min_constraint_slack.min(row.constraint_bound - row.constraint_regret);
    }

    let config_text = config.to_toml()?;
    let trajectory_csv = render_trajectory_csv(&trajectory)?;
    let regret_csv = render_regret_csv(&report.rows)?;

    let mut digests = BTreeMap::new();
    digests.insert(CONFIG_FILE.to_string(), sha256_hex(config_text.as_bytes()));
    digests.insert(TRAJECTORY_FILE.to_string(), sha256_hex(trajectory_csv.as_bytes()));
    digests.insert(REGRET_FILE.to_string(), sha256_hex(regret_csv.as_bytes()));

    let last = report.final_row();
    let summary = RunSummary {
        config_digest: digests[CONFIG_FILE].clone(),
        horizon: trajectory.horizon,
        num_agents: trajectory.num_agents,
        constraint_dim: trajectory.constraint_dim,
        final_cost_regret: last.cost_regret,
        final_avg_cost_regret: last.avg_cost_regret,
        final_constraint_regret: last.constraint_regret,
        final_avg_constraint_regret: last.avg_constraint_regret,
        final_avg_constraint_regret_strict: strict_avg,
        final_cost_bound: last.cost_bound,
        final_constraint_bound: last.constraint_bound,
        min_cost_bound_slack: min_cost_slack,
        min_constraint_bound_slack: min_constraint_slack,
        max_lambda_norm: trajectory.max_lambda_norm,
        max_y_norm: trajectory.max_y_norm,
        max_penalty_norm: trajectory.max_penalty_norm,
        max_conservation_gap: max_gap,
        cumulative_dual_disagreement: series.cumulative_dual.last().copied().unwrap_or(0.0),
        cumulative_tracker_disagreement: series.cumulative_tracker.last().copied().unwrap_or(0.0),
        disagreements,
        bounds,
        oracle,
        runtime_seconds: started.elapsed().as_secs_f64(),
        digests,
    };
    let summary_json = serde_json::to_string_pretty(&summary)?;

    let stage = stage_dir_for(out_dir)?;
    let staged = (|| -> Result<(), ExperimentError> {
        std::fs::write(stage.join(CONFIG_FILE), &config_text)?;
        std::fs::write(stage.join(TRAJECTORY_FILE), &trajectory_csv)?;
        std::fs::write(stage.join(REGRET_FILE), &regret_csv)?;
        std::fs::write(stage.join(SUMMARY_FILE), &summary_json)?;
        std::fs::rename(&stage, out_dir)?;
        Ok(())
    })();
    if staged.is_err() {
        let _ = std::fs::remove_dir_all(&stage);
    }
    staged?;

    Ok(RunArtifacts { directory: out_dir.to_path_buf(), summary, report, trajectory })
}

fn stage_dir_for(target: &Path) -> Result<PathBuf, ExperimentError> {
    let name = target.file_name().ok_or_else(|| {
        ExperimentError::MalformedArtifact("output path has no final component".into())
    })?;
    let parent = match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent)?;
    let stage =
        parent.join(format!(".{}.stage-{}", name.to_string_lossy(), std::process::id()));
    if stage.exists() {
        std::fs::remove_dir_all(&stage)?;
    }
    std::fs::create_dir(&stage)?;
    Ok(stage)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

// Shortest representation that parses back to the same f64; NaN and the
// infinities round-trip through `parse` too.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

// --- CSV rendering and re-ingestion ---

fn render_trajectory_csv(trajectory: &Trajectory) -> Result<String, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "alpha".to_string()];
    for i in 0..trajectory.num_agents {
        header.push(format!("cost_{i}"));
    }
    for j in 0..trajectory.constraint_dim {
        header.push(format!("gsum_{j}"));
    }
    for tail in [
        "lambda_disagreement",
        "y_disagreement",
        "max_lambda_norm",
        "max_y_norm",
        "conservation_gap",
    ] {
        header.push(tail.to_string());
    }
    w.write_record(&header)?;
    for r in &trajectory.rounds {
        let mut row = vec![r.t.to_string(), fmt_f64(r.alpha)];
        row.extend(r.costs.iter().copied().map(fmt_f64));
        row.extend(r.constraint_sum.iter().copied().map(fmt_f64));
        row.push(fmt_f64(r.lambda_disagreement));
        row.push(fmt_f64(r.y_disagreement));
        row.push(fmt_f64(r.max_lambda_norm));
        row.push(fmt_f64(r.max_y_norm));
        row.push(fmt_f64(r.conservation_gap));
        w.write_record(&row)?;
    }
    finish_csv(w)
}

/// Render regret rows in the artifact `regret.csv` format.
pub fn render_regret_csv(rows: &[RegretRow]) -> Result<String, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "t",
        "cost_regret",
        "avg_cost_regret",
        "constraint_regret",
        "avg_constraint_regret",
        "cost_bound",
        "constraint_bound",
    ])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            fmt_f64(r.cost_regret),
            fmt_f64(r.avg_cost_regret),
            fmt_f64(r.constraint_regret),
            fmt_f64(r.avg_constraint_regret),
            fmt_f64(r.cost_bound),
            fmt_f64(r.constraint_bound),
        ])?;
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, ExperimentError> {
    let bytes = w.into_inner().map_err(|e| ExperimentError::Io(e.into_error()))?;
    String::from_utf8(bytes)
        .map_err(|_| ExperimentError::MalformedArtifact("csv output was not utf-8".into()))
}

fn malformed(path: &Path, detail: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::MalformedArtifact(format!("{}: {detail}", path.display()))
}

fn parse_f64(path: &Path, record: &csv::StringRecord, idx: usize) -> Result<f64, ExperimentError> {
    let raw = record
        .get(idx)
        .ok_or_else(|| malformed(path, format!("missing column {idx}")))?;
    raw.parse::<f64>()
        .map_err(|_| malformed(path, format!("column {idx} is not a float: {raw:?}")))
}

/// Rebuild a [`Trajectory`] from a persisted `trajectory.csv`.
///
/// Agent and constraint counts come from the header. The CSV stores per-round
/// records only, so the reconstruction has no snapshots, an empty final
/// state, and NaN for the quantities the file does not carry (pre-consensus
/// disagreements, the penalty radius); graph metadata defaults to the
/// generated-sequence convention (`eta = 1/N`, `q = 1`). Regret and
/// disagreement recomputation read none of the missing pieces.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory, ExperimentError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers()?.clone();
    let num_agents = header.iter().filter(|h| h.starts_with("cost_")).count();
    let constraint_dim = header.iter().filter(|h| h.starts_with("gsum_")).count();
    if num_agents == 0 || constraint_dim == 0 {
        return Err(malformed(path, "header lacks cost_*/gsum_* columns"));
    }
    let expected = 2 + num_agents + constraint_dim + 5;
    if header.len() != expected {
        return Err(malformed(
            path,
            format!("expected {expected} columns, found {}", header.len()),
        ));
    }

    let mut rounds = Vec::new();
    let mut max_lambda_norm = 0.0f64;
    let mut max_y_norm = 0.0f64;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != expected {
            return Err(malformed(path, format!("row {line} has {} columns", record.len())));
        }
        let t: usize = record
            .get(0)
            .unwrap()
            .parse()
            .map_err(|_| malformed(path, format!("row {line} has a bad round index")))?;
        let alpha = parse_f64(path, &record, 1)?;
        let mut costs = Vec::with_capacity(num_agents);
        for i in 0..num_agents {
            costs.push(parse_f64(path, &record, 2 + i)?);
        }
        let mut constraint_sum = Vec::with_capacity(constraint_dim);
        for j in 0..constraint_dim {
            constraint_sum.push(parse_f64(path, &record, 2 + num_agents + j)?);
        }
        let base = 2 + num_agents + constraint_dim;
        let row = RoundRecord {
            t,
            alpha,
            costs,
            constraint_sum,
            lambda_disagreement: parse_f64(path, &record, base)?,
            y_disagreement: parse_f64(path, &record, base + 1)?,
            pre_lambda_disagreement: f64::NAN,
            pre_y_disagreement: f64::NAN,
            max_lambda_norm: parse_f64(path, &record, base + 2)?,
            max_y_norm: parse_f64(path, &record, base + 3)?,
            conservation_gap: parse_f64(path, &record, base + 4)?,
        };
        max_lambda_norm = max_lambda_norm.max(row.max_lambda_norm);
        max_y_norm = max_y_norm.max(row.max_y_norm);
        rounds.push(row);
    }
    if rounds.is_empty() {
        return Err(malformed(path, "no data rows"));
    }

    Ok(Trajectory {
        horizon: rounds.len(),
        num_agents,
        constraint_dim,
        eta: 1.0 / num_agents as f64,
        q: 1,
        stepsize: StepsizeRule::InverseSqrt,
        final_state: SystemState { round: rounds.len() + 1, agents: Vec::new() },
        rounds,
        snapshots: None,
        max_lambda_norm,
        max_y_norm,
        max_penalty_norm: f64::NAN,
    })
}

/// Rebuild the regret rows from a persisted `regret.csv`.
pub fn read_regret_csv(path: &Path) -> Result<Vec<RegretRow>, ExperimentError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    if reader.headers()?.len() != 7 {
        return Err(malformed(path, "expected 7 columns"));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let t: usize = record
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(path, format!("row {line} has a bad round index")))?;
        rows.push(RegretRow {
            t,
            cost_regret: parse_f64(path, &record, 1)?,
            avg_cost_regret: parse_f64(path, &record, 2)?,
            constraint_regret: parse_f64(path, &record, 3)?,
            avg_constraint_regret: parse_f64(path, &record, 4)?,
            cost_bound: parse_f64(path, &record, 5)?,
            constraint_bound: parse_f64(path, &record, 6)?,
        });
    }
    Ok(rows)
}

// --- artifact verification ---

/// Outcome of [`verify_artifacts`].
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    /// Files whose recomputed SHA-256 disagrees with `summary.json`.
    pub mismatched_files: Vec<String>,
    /// Largest absolute difference between the stored regret table and the
    /// one recomputed from the stored trajectory.
    pub max_regret_diff: f64,
    pub rows_checked: usize,
}

impl VerificationReport {
    #[must_use]
    pub fn pass(&self) -> bool {
        self.mismatched_files.is_empty() && self.max_regret_diff <= 1e-9
    }
}

/// Check a persisted artifact directory: every digest in `summary.json` must
/// match its file, and replaying the regret accounting from `trajectory.csv`
/// (fresh problem instance, stored comparator, stored bound constants) must
/// reproduce `regret.csv` to 1e-9.
pub fn verify_artifacts(dir: &Path) -> Result<VerificationReport, ExperimentError> {
    let config = ExperimentConfig::from_path(&dir.join(CONFIG_FILE))?;
    let summary: RunSummary =
        serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE))?)?;

    let mut mismatched = Vec::new();
    for (name, stored) in &summary.digests {
        let bytes = std::fs::read(dir.join(name))?;
        if sha256_hex(&bytes) != *stored {
            mismatched.push(name.clone());
        }
    }
    if summary.config_digest != summary.digests[CONFIG_FILE] {
        mismatched.push(format!("{CONFIG_FILE} (summary digest fields disagree)"));
    }

    let trajectory = read_trajectory_csv(&dir.join(TRAJECTORY_FILE))?;
    let stored_rows = read_regret_csv(&dir.join(REGRET_FILE))?;

    let mut experiment = build_experiment(&config)?;
    let report = regret_report(
        &trajectory,
        &mut *experiment.problem,
        &experiment.penalty,
        &summary.oracle.x,
        &summary.bounds,
    )?;

    if report.rows.len() != stored_rows.len() {
        return Err(malformed(
            &dir.join(REGRET_FILE),
            format!("{} stored rows vs {} recomputed", stored_rows.len(), report.rows.len()),
        ));
    }
    let mut max_diff = 0.0f64;
    for (stored, fresh) in stored_rows.iter().zip(&report.rows) {
        if stored.t != fresh.t {
            return Err(malformed(&dir.join(REGRET_FILE), "round indices disagree"));
        }
        for (a, b) in [
            (stored.cost_regret, fresh.cost_regret),
            (stored.avg_cost_regret, fresh.avg_cost_regret),
            (stored.constraint_regret, fresh.constraint_regret),
            (stored.avg_constraint_regret, fresh.avg_constraint_regret),
            (stored.cost_bound, fresh.cost_bound),
            (stored.constraint_bound, fresh.constraint_bound),
        ] {
            max_diff = max_diff.max((a - b).abs());
        }
    }
    let last = report.final_row();
    max_diff = max_diff.max((summary.final_cost_regret - last.cost_regret).abs());
    max_diff = max_diff.max((summary.final_avg_cost_regret - last.avg_cost_regret).abs());
    max_diff = max_diff.max((summary.final_constraint_regret - last.constraint_regret).abs());
    max_diff =
        max_diff.max((summary.final_avg_constraint_regret - last.avg_constraint_regret).abs());

    Ok(VerificationReport {
        mismatched_files: mismatched,
        max_regret_diff: max_diff,
        rows_checked: stored_rows.len(),
    })
}

// --- presets ---

/// The two bundled experiment families: a node-count sweep and a
/// connectivity-window sweep over the routing problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    /// Routing with `N` in {10, 15, 20}, two access points, window 1.
    Fig4,
    /// Routing with `N = 10` and window `Q` in {1, 5, 10}.
    Fig5,
}

impl PresetName {
    #[must_use]
    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Fig4 => "fig4",
            PresetName::Fig5 => "fig5",
        }
    }
}

impl std::fmt::Display for PresetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PresetName {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig4" => Ok(PresetName::Fig4),
            "fig5" => Ok(PresetName::Fig5),
            other => Err(ExperimentError::UnknownPreset(other.to_string())),
        }
    }
}

/// One expanded preset member: a label for file naming plus a full config.
#[derive(Debug, Clone)]
pub struct PresetMember {
    pub label: String,
    pub config: ExperimentConfig,
}

/// Expand a preset into its member configs. All members share the one base
/// seed, so everything not deliberately varied (positions, rate noise, cost
/// stream) is identical across them and the sweep variable is the only
/// difference.
#[must_use]
pub fn preset_members(name: PresetName, horizon: usize, seed: u64) -> Vec<PresetMember> {
    let member = |label: String, n_sources: usize, q: usize| {
        let config = ExperimentConfig {
            seed,
            horizon,
            output: None,
            stepsize: StepsizeRule::InverseSqrt,
            penalty: PenaltyKind::SmoothMax { mu: 0.001 },
            graph: GraphConfig { q, extra_edge_prob: 0.15, base: GraphBase::FromPositions },
            problem: ProblemConfig::Routing {
                params: RoutingParams { n_sources, n_aps: 2, ..RoutingParams::default() },
            },
            engine: EngineOptions::default(),
            oracle: OracleConfig::default(),
        };
        PresetMember { label, config }
    };
    match name {
        PresetName::Fig4 => {
            [10, 15, 20].iter().map(|&n| member(format!("n{n}"), n, 1)).collect()
        }
        PresetName::Fig5 => {
            [1, 5, 10].iter().map(|&q| member(format!("q{q}"), 10, q)).collect()
        }
    }
}

/// Per-member headline figures stored in `preset_summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PresetMemberSummary {
    pub label: String,
    pub final_avg_cost_regret: f64,
    pub final_avg_constraint_regret: f64,
    pub config_digest: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PresetSummaryFile {
    preset: String,
    horizon: usize,
    seed: u64,
    members: Vec<PresetMemberSummary>,
}

/// What [`run_preset`] returns in memory.
pub struct PresetOutcome {
    pub name: PresetName,
    pub directory: PathBuf,
    pub members: Vec<PresetMemberSummary>,
    pub runs: Vec<RunArtifacts>,
}

/// Run every member of a preset into `out_root/<label>` and write a combined
/// comparison table aligned on the round index, plus a small JSON index. The
/// whole bundle is staged and renamed into place like a single run.
pub fn run_preset(
    name: PresetName,
    horizon: usize,
    seed: u64,
    out_root: &Path,
) -> Result<PresetOutcome, ExperimentError> {
    if out_root.exists() {
        return Err(ExperimentError::OutputExists(out_root.to_path_buf()));
    }
    let stage = stage_dir_for(out_root)?;
    let staged = (|| -> Result<Vec<RunArtifacts>, ExperimentError> {
        let mut runs = Vec::new();
        for member in preset_members(name, horizon, seed) {
            runs.push(run_experiment(&member.config, &stage.join(&member.label))?);
        }
        Ok(runs)
    })();
    let runs = match staged {
        Ok(runs) => runs,
        Err(e) => {
            let _ = std::fs::remove_dir_all(&stage);
            return Err(e);
        }
    };

    let labels: Vec<String> =
        preset_members(name, horizon, seed).into_iter().map(|m| m.label).collect();
    let members: Vec<PresetMemberSummary> = labels
        .iter()
        .zip(&runs)
        .map(|(label, run)| PresetMemberSummary {
            label: label.clone(),
            final_avg_cost_regret: run.summary.final_avg_cost_regret,
            final_avg_constraint_regret: run.summary.final_avg_constraint_regret,
            config_digest: run.summary.config_digest.clone(),
        })
        .collect();

    let finish = (|| -> Result<(), ExperimentError> {
        let combined = render_combined_csv(&labels, &runs)?;
        std::fs::write(stage.join("combined.csv"), combined)?;
        let index = PresetSummaryFile {
            preset: name.as_str().to_string(),
            horizon,
            seed,
            members: members.clone(),
        };
        std::fs::write(stage.join("preset_summary.json"), serde_json::to_string_pretty(&index)?)?;
        std::fs::rename(&stage, out_root)?;
        Ok(())
    })();
    if finish.is_err() {
        let _ = std::fs::remove_dir_all(&stage);
    }
    finish?;

    Ok(PresetOutcome { name, directory: out_root.to_path_buf(), members, runs })
}

fn render_combined_csv(labels: &[String], runs: &[RunArtifacts]) -> Result<String, ExperimentError> {
    let rows = runs[0].report.rows.len();
    for run in runs {
        if run.report.rows.len() != rows {
            return Err(ExperimentError::MalformedArtifact(
                "preset members disagree on horizon".into(),
            ));
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    for label in labels {
        header.push(format!("avg_cost_regret_{label}"));
    }
    for label in labels {
        header.push(format!("avg_constraint_regret_{label}"));
    }
    w.write_record(&header)?;
    for idx in 0..rows {
        let mut row = vec![runs[0].report.rows[idx].t.to_string()];
        for run in runs {
            row.push(fmt_f64(run.report.rows[idx].avg_cost_regret));
        }
        for run in runs {
            row.push(fmt_f64(run.report.rows[idx].avg_constraint_regret));
        }
        w.write_record(&row)?;
    }
    finish_csv(w)
}

/// First round after which `value` stays at or below `threshold` through the
/// end of the table; `None` when even the final value exceeds it. Scanning
/// for the last crossing (instead of the first dip) ignores lucky early
/// rounds that a later excursion takes back.
#[must_use]
pub fn time_to_threshold<F>(rows: &[RegretRow], threshold: f64, value: F) -> Option<usize>
where
    F: Fn(&RegretRow) -> f64,
{
    let mut answer = None;
    for row in rows.iter().rev() {
        if value(row) > threshold {
            break;
        }
        answer = Some(row.t);
    }
    answer
}
