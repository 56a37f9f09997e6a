//! Command-line front end for the distributed online primal-dual crate.
//!
//! Five subcommands: `run` executes one configured experiment, `preset`
//! expands and runs a bundled sweep, `check-graph` validates a graph sequence
//! file against the network model, `bounds` evaluates the closed-form bound
//! constants from declared radii, and `regret` recomputes a regret report
//! from a finished artifact directory against a chosen comparator.
//!
//! Exit codes: 0 on success, 2 when an input is rejected before any
//! computation starts (bad flags, malformed files, failed validation), 3 when
//! a run aborts after validation passed.

#![forbid(unsafe_code)]

use std::path::{Component, Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use dopd::config::{build_experiment, ExperimentConfig};
use dopd::experiment::{
    preset_members, read_trajectory_csv, render_regret_csv, run_experiment, run_preset,
    PresetName, RunSummary, CONFIG_FILE, SUMMARY_FILE, TRAJECTORY_FILE,
};
use dopd::graph::GraphSequence;
use dopd::metrics::{offline_optimum, regret_report, BoundConstants, BoundInputs};

#[derive(Parser)]
#[command(name = "dopd", version, about = "Distributed online primal-dual experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a config file.
    Run {
        /// TOML experiment description; see the config schema in the guide.
        #[arg(long)]
        config: PathBuf,
        /// Artifact directory (must not exist). Falls back to the config's
        /// `output` field, then to `<config stem>.run`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a bundled preset sweep and write a combined comparison table.
    Preset {
        /// Which sweep: `fig4` varies the node count, `fig5` the window.
        name: PresetArg,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
        /// Base seed shared by all members, so only the swept parameter
        /// differs between them.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Bundle directory (must not exist); defaults to
        /// `<name>-T<horizon>-s<seed>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a graph sequence file: positive self-weights, double
    /// stochasticity, and joint connectivity over every declared window.
    CheckGraph {
        /// Graph JSON: explicit matrices, or a generated scenario plus seed.
        file: PathBuf,
        /// Rounds to check.
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
    },
    /// Evaluate the closed-form regret and disagreement bound constants.
    Bounds {
        /// Smallest positive consensus weight.
        #[arg(long)]
        eta: f64,
        /// Number of agents.
        #[arg(long)]
        n: usize,
        /// Connectivity window length.
        #[arg(long)]
        q: usize,
        /// JSON file declaring the ten radii and Lipschitz moduli.
        #[arg(long)]
        constants_file: PathBuf,
    },
    /// Recompute the regret report of a finished run.
    Regret {
        /// Artifact directory from `run` (or its trajectory.csv).
        artifact: PathBuf,
        /// Hindsight comparator: re-solve the offline problem, or read a
        /// fixed decision from a file.
        #[arg(long, value_enum, default_value_t = ComparatorArg::Oracle)]
        comparator: ComparatorArg,
        /// JSON decision for `--comparator file`: either a bare array of
        /// per-agent points or any object with an `x` field of that shape.
        #[arg(long)]
        comparator_file: Option<PathBuf>,
        /// Where to write the recomputed CSV; stdout carries only the JSON
        /// summary. Must lie outside the artifact directory, whose digests
        /// have to keep verifying.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Fig4,
    Fig5,
}

impl From<PresetArg> for PresetName {
    fn from(arg: PresetArg) -> Self {
        match arg {
            PresetArg::Fig4 => PresetName::Fig4,
            PresetArg::Fig5 => PresetName::Fig5,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ComparatorArg {
    Oracle,
    File,
}

/// A failed command, split by when it failed: rejected inputs exit 2,
/// aborted computation exits 3.
enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn aborted(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Preset { name, horizon, seed, out } => {
            cmd_preset(name.into(), horizon, seed, out)
        }
        Command::CheckGraph { file, horizon } => cmd_check_graph(&file, horizon),
        Command::Bounds { eta, n, q, constants_file } => {
            cmd_bounds(eta, n, q, &constants_file)
        }
        Command::Regret { artifact, comparator, comparator_file, out } => {
            cmd_regret(&artifact, comparator, comparator_file.as_deref(), out)
        }
    }
}

// --- run ---

fn cmd_run(config_path: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let config = ExperimentConfig::from_path(config_path)
        .map_err(|e| invalid(format!("{}: {e}", config_path.display())))?;
    // Instantiating everything up front rejects bad configs before the
    // output directory question even comes up.
    build_experiment(&config).map_err(invalid)?;

    let out = out.or_else(|| config.output.clone()).unwrap_or_else(|| {
        let stem = config_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "experiment".into());
        PathBuf::from(format!("{stem}.run"))
    });
    if out.exists() {
        return Err(invalid(format!(
            "output directory {} already exists; pick --out or remove it",
            out.display()
        )));
    }

    let artifacts = run_experiment(&config, &out).map_err(aborted)?;
    let summary = &artifacts.summary;
    print_json(&serde_json::json!({
        "directory": artifacts.directory,
        "horizon": summary.horizon,
        "num_agents": summary.num_agents,
        "final_avg_cost_regret": summary.final_avg_cost_regret,
        "final_avg_constraint_regret": summary.final_avg_constraint_regret,
        "final_avg_constraint_regret_strict": summary.final_avg_constraint_regret_strict,
        "min_cost_bound_slack": summary.min_cost_bound_slack,
        "min_constraint_bound_slack": summary.min_constraint_bound_slack,
        "max_conservation_gap": summary.max_conservation_gap,
        "oracle_kkt_residual": summary.oracle.kkt_residual,
    }))
}

// --- preset ---

fn cmd_preset(
    name: PresetName,
    horizon: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    // Expansion is infallible for known names; clap already rejected unknown
    // ones. Building each member catches parameter combinations that cannot
    // instantiate before any run starts.
    for member in preset_members(name, horizon, seed) {
        build_experiment(&member.config)
            .map_err(|e| invalid(format!("preset member {}: {e}", member.label)))?;
    }
    let out = out.unwrap_or_else(|| PathBuf::from(format!("{name}-T{horizon}-s{seed}")));
    if out.exists() {
        return Err(invalid(format!(
            "output directory {} already exists; pick --out or remove it",
            out.display()
        )));
    }

    let outcome = run_preset(name, horizon, seed, &out).map_err(aborted)?;
    let members: Vec<serde_json::Value> = outcome
        .members
        .iter()
        .map(|m| {
            serde_json::json!({
                "label": m.label,
                "final_avg_cost_regret": m.final_avg_cost_regret,
                "final_avg_constraint_regret": m.final_avg_constraint_regret,
            })
        })
        .collect();
    print_json(&serde_json::json!({
        "directory": outcome.directory,
        "preset": name.as_str(),
        "horizon": horizon,
        "seed": seed,
        "members": members,
    }))
}

// --- check-graph ---

fn cmd_check_graph(file: &Path, horizon: usize) -> Result<(), Failure> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| invalid(format!("{}: {e}", file.display())))?;
    let sequence = GraphSequence::from_json(&text)
        .map_err(|e| invalid(format!("{}: {e}", file.display())))?;
    let report = sequence.validate(horizon).map_err(invalid)?;
    let pass = report.pass();
    print_json(&serde_json::json!({ "pass": pass, "horizon": horizon, "report": report }))?;
    if pass {
        Ok(())
    } else {
        Err(invalid("graph sequence fails validation; see the report on stdout"))
    }
}

// --- bounds ---

/// The radii and moduli half of the bound inputs; the graph half comes from
/// the command line. All ten fields are required so evaluations stay
/// auditable.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DeclaredConstants {
    c_x: f64,
    c_dual: f64,
    c_tracker: f64,
    c_constraint: f64,
    c_cost: f64,
    c_penalty: f64,
    l_cost: f64,
    l_constraint: f64,
    l_penalty: f64,
    g_penalty: f64,
}

fn cmd_bounds(eta: f64, n: usize, q: usize, constants_file: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(constants_file)
        .map_err(|e| invalid(format!("{}: {e}", constants_file.display())))?;
    let decl: DeclaredConstants = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("{}: {e}", constants_file.display())))?;
    let constants = BoundConstants::new(BoundInputs {
        eta,
        n,
        q,
        c_x: decl.c_x,
        c_dual: decl.c_dual,
        c_tracker: decl.c_tracker,
        c_constraint: decl.c_constraint,
        c_cost: decl.c_cost,
        c_penalty: decl.c_penalty,
        l_cost: decl.l_cost,
        l_constraint: decl.l_constraint,
        l_penalty: decl.l_penalty,
        g_penalty: decl.g_penalty,
    })
    .map_err(invalid)?;
    print_json(&serde_json::to_value(constants).map_err(aborted)?)
}

// --- regret ---

fn cmd_regret(
    artifact: &Path,
    comparator: ComparatorArg,
    comparator_file: Option<&Path>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    // Accept the trajectory file itself as a convenience alias for its
    // directory.
    let artifact = if artifact.is_file() {
        artifact.parent().unwrap_or(Path::new(".")).to_path_buf()
    } else {
        artifact.to_path_buf()
    };

    let config = ExperimentConfig::from_path(&artifact.join(CONFIG_FILE))
        .map_err(|e| invalid(format!("{}: {e}", artifact.join(CONFIG_FILE).display())))?;
    let summary_path = artifact.join(SUMMARY_FILE);
    let summary_text = std::fs::read_to_string(&summary_path)
        .map_err(|e| invalid(format!("{}: {e}", summary_path.display())))?;
    let summary: RunSummary = serde_json::from_str(&summary_text)
        .map_err(|e| invalid(format!("{}: {e}", summary_path.display())))?;
    let trajectory = read_trajectory_csv(&artifact.join(TRAJECTORY_FILE)).map_err(invalid)?;

    let mut experiment = build_experiment(&config).map_err(invalid)?;
    if trajectory.num_agents != experiment.problem.num_agents()
        || trajectory.horizon != config.horizon
    {
        return Err(invalid(format!(
            "{}: trajectory does not match the stored config \
             ({} agents over {} rounds vs {} agents over {} rounds)",
            artifact.display(),
            trajectory.num_agents,
            trajectory.horizon,
            experiment.problem.num_agents(),
            config.horizon,
        )));
    }

    if let Some(path) = &out {
        if path.exists() {
            return Err(invalid(format!("output {} already exists", path.display())));
        }
        if lexically_inside(&artifact, path) {
            return Err(invalid(format!(
                "refusing to write {} inside the artifact directory; \
                 its recorded digests must keep verifying",
                path.display()
            )));
        }
    }

    let declared = match (comparator, comparator_file) {
        (ComparatorArg::File, Some(path)) => Some(read_comparator(path)?),
        (ComparatorArg::File, None) => {
            return Err(invalid("--comparator file needs --comparator-file <path>"));
        }
        (ComparatorArg::Oracle, Some(_)) => {
            return Err(invalid("--comparator-file only applies with --comparator file"));
        }
        (ComparatorArg::Oracle, None) => None,
    };
    // The coupled constraint is time-invariant, so a declared comparator can
    // be vetted before any replay happens.
    if let Some(point) = &declared {
        if point.len() != experiment.problem.num_agents() {
            return Err(invalid(format!(
                "comparator has {} points for {} agents",
                point.len(),
                experiment.problem.num_agents()
            )));
        }
        let mut total = vec![0.0; experiment.problem.constraint_dim()];
        for (i, xi) in point.iter().enumerate() {
            if xi.len() != experiment.problem.decision_dim(i) {
                return Err(invalid(format!(
                    "comparator for agent {i} has dimension {}, expected {}",
                    xi.len(),
                    experiment.problem.decision_dim(i)
                )));
            }
            for (acc, v) in total.iter_mut().zip(experiment.problem.constraint(i, xi)) {
                *acc += v;
            }
        }
        let worst = total.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        if worst > experiment.oracle.feasibility_tolerance {
            return Err(invalid(format!(
                "comparator violates the coupled constraint by {worst:.3e}; \
                 regret against an infeasible point is meaningless"
            )));
        }
    }

    // Replay the revealed rounds; the oracle averages over exactly this
    // history, and the report's cost replay resets and re-advances itself.
    for _ in 0..trajectory.horizon {
        experiment.problem.advance();
    }
    let (point, oracle) = match declared {
        Some(point) => (point, None),
        None => {
            let oracle =
                offline_optimum(&*experiment.problem, &experiment.oracle).map_err(aborted)?;
            if !oracle.feasible {
                return Err(aborted(format!(
                    "no feasible hindsight comparator found (kkt residual {:.3e})",
                    oracle.kkt_residual
                )));
            }
            (oracle.x.clone(), Some(oracle))
        }
    };

    let report = regret_report(
        &trajectory,
        &mut *experiment.problem,
        &experiment.penalty,
        &point,
        &summary.bounds,
    )
    .map_err(aborted)?;

    if let Some(path) = &out {
        let csv = render_regret_csv(&report.rows).map_err(aborted)?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(aborted)?;
        }
        std::fs::write(path, csv).map_err(aborted)?;
    }

    let last = report.final_row();
    print_json(&serde_json::json!({
        "artifact": artifact,
        "comparator": match comparator {
            ComparatorArg::Oracle => "oracle",
            ComparatorArg::File => "file",
        },
        "final": last,
        "oracle": oracle.map(|o| {
            serde_json::json!({
                "value": o.value,
                "kkt_residual": o.kkt_residual,
                "feasible": o.feasible,
                "converged": o.converged,
            })
        }),
        "csv": out,
    }))
}

/// Parse a comparator file: a bare array of per-agent points, or any object
/// carrying an `x` field of that shape (a stored oracle result, for one).
fn read_comparator(path: &Path) -> Result<Vec<Vec<f64>>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let source = match &value {
        serde_json::Value::Array(_) => &value,
        serde_json::Value::Object(map) => map.get("x").ok_or_else(|| {
            invalid(format!("{}: object comparator needs an \"x\" field", path.display()))
        })?,
        _ => {
            return Err(invalid(format!(
                "{}: comparator must be an array of per-agent points",
                path.display()
            )));
        }
    };
    serde_json::from_value(source.clone())
        .map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Lexical containment check against the current directory; no filesystem
/// access, so it also covers paths that do not exist yet.
fn lexically_inside(base: &Path, candidate: &Path) -> bool {
    let cwd = std::env::current_dir().unwrap_or_else(|_| PathBuf::from("."));
    normalize(&cwd.join(candidate)).starts_with(normalize(&cwd.join(base)))
}

fn normalize(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for part in path.components() {
        match part {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

fn print_json(value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(aborted)?;
    println!("{text}");
    Ok(())
}
