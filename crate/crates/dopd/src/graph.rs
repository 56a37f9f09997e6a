//! Time-varying communication graphs and their mixing matrices.
//!
//! Agents exchange state through a sequence of weight matrices `W_t`. The
//! analysis of the distributed iteration needs three conditions on that
//! sequence, checked here by [`GraphSequence::validate`]:
//!
//! * **nondegeneracy**: every nonzero entry of every `W_t` is at least some
//!   `eta > 0`, and every diagonal entry is positive, so no agent ever fully
//!   discounts itself or a neighbor it listens to;
//! * **double stochasticity**: rows and columns each sum to one, so consensus
//!   preserves network-wide sums;
//! * **joint connectivity**: the union of the edge sets over every window of
//!   `q` consecutive rounds is strongly connected, so information from any
//!   agent reaches every other agent at least once per window.
//!
//! Under these conditions, disagreement across the network contracts
//! geometrically: with
//!
//! ```text
//!     gamma = (1 - eta / (2 N^2))^(-2),    beta = (1 - eta / (2 N^2))^(1/q)
//! ```
//!
//! the deviation of any agent's mixed state from the network average after
//! `t` rounds is bounded by `gamma * beta^t` times the initial spread. These
//! two factors, from [`contraction_factors`], feed every closed-form bound in
//! [`crate::metrics`].
//!
//! Sequences come either as an explicit list of matrices (cycled past the end
//! of the list) or from a seeded generator that thins a connected base graph:
//! a fixed spanning structure is split round-robin across each window of `q`
//! rounds, which makes every window jointly connected by construction, and
//! the remaining base edges appear independently at random for variety.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{indexed_seed, rng_from, substream_seed};

/// Absolute tolerance for the stochasticity checks.
pub const STOCHASTICITY_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("adjacency must be square: row {row} has length {len}, expected {n}")]
    RaggedAdjacency { row: usize, len: usize, n: usize },
    #[error("adjacency must be symmetric: entries ({i},{j}) and ({j},{i}) disagree")]
    AsymmetricAdjacency { i: usize, j: usize },
    #[error("adjacency must have an empty diagonal: self-loop at node {0}")]
    SelfLoop(usize),
    #[error("weight matrix must be square: row {row} has length {len}, expected {n}")]
    RaggedMatrix { row: usize, len: usize, n: usize },
    #[error("matrix list is empty")]
    EmptyMatrixList,
    #[error("matrix at position {index} is {got}x{got}, expected {expected}x{expected}")]
    MixedMatrixSizes { index: usize, got: usize, expected: usize },
    #[error("eta must lie in (0, 1], got {0}")]
    InvalidEta(f64),
    #[error("connectivity window must be at least 1")]
    ZeroWindow,
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("horizon {horizon} is shorter than the connectivity window {q}")]
    HorizonShorterThanWindow { horizon: usize, q: usize },
    #[error("base graph is disconnected; no thinning can make windows jointly connected")]
    BaseDisconnected,
    #[error("edge probability must lie in [0, 1], got {0}")]
    InvalidEdgeProbability(f64),
    #[error("graph file must provide exactly one of `matrices` or `seed` + `scenario`")]
    AmbiguousSource,
    #[error("graph file is malformed: {0}")]
    Malformed(String),
}

// --- weight matrices ---

/// A single consensus weight matrix, row-major.
///
/// Row `i` holds the weights agent `i` applies to each neighbor's state:
/// mixing maps per-agent vectors `v_j` to `sum_j W[i][j] * v_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct WeightMatrix {
    n: usize,
    w: Vec<f64>,
}

impl WeightMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, GraphError> {
        let n = rows.len();
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(GraphError::RaggedMatrix { row: i, len: row.len(), n });
            }
        }
        Ok(WeightMatrix { n, w: rows.into_iter().flatten().collect() })
    }

    #[must_use]
    pub fn identity(n: usize) -> Self {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        WeightMatrix { n, w }
    }

    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    #[must_use]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    #[must_use]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    /// Off-diagonal support: pairs `(i, j)` with `W[i][j] > 0`, `i != j`.
    #[must_use]
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.at(i, j) > 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Mixes per-agent vectors: `out[i] = sum_j W[i][j] * states[j]`.
    ///
    /// All `states[j]` must share one length. Summation order is fixed
    /// (ascending `j`), so results are bitwise reproducible.
    #[must_use]
    pub fn mix(&self, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
        assert_eq!(states.len(), self.n, "state count must match node count");
        let dim = states.first().map_or(0, Vec::len);
        let mut out = vec![vec![0.0; dim]; self.n];
        for i in 0..self.n {
            let row = self.row(i);
            let out_i = &mut out[i];
            for (j, state) in states.iter().enumerate() {
                let wij = row[j];
                if wij != 0.0 {
                    debug_assert_eq!(state.len(), dim);
                    for (o, s) in out_i.iter_mut().zip(state) {
                        *o += wij * s;
                    }
                }
            }
        }
        out
    }
}

impl TryFrom<Vec<Vec<f64>>> for WeightMatrix {
    type Error = GraphError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        WeightMatrix::from_rows(rows)
    }
}

impl From<WeightMatrix> for Vec<Vec<f64>> {
    fn from(m: WeightMatrix) -> Self {
        (0..m.n).map(|i| m.row(i).to_vec()).collect()
    }
}

/// Builds the equal-neighbor weight matrix of a symmetric adjacency:
/// `W[i][j] = 1/n` on every realized edge and `W[i][i] = 1 - deg(i)/n`.
///
/// Symmetry of the adjacency makes the result doubly stochastic, and every
/// nonzero entry is at least `1/n`, so sequences built this way satisfy the
/// nondegeneracy condition with `eta = 1/n`.
pub fn build_weight_matrix(adjacency: &[Vec<bool>]) -> Result<WeightMatrix, GraphError> {
    let n = adjacency.len();
    if n == 0 {
        return Err(GraphError::EmptyGraph);
    }
    for (i, row) in adjacency.iter().enumerate() {
        if row.len() != n {
            return Err(GraphError::RaggedAdjacency { row: i, len: row.len(), n });
        }
        if row[i] {
            return Err(GraphError::SelfLoop(i));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if adjacency[i][j] != adjacency[j][i] {
                return Err(GraphError::AsymmetricAdjacency { i, j });
            }
        }
    }
    let share = 1.0 / n as f64;
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i != j && adjacency[i][j] {
                w[i * n + j] = share;
                off += share;
            }
        }
        w[i * n + i] = 1.0 - off;
    }
    Ok(WeightMatrix { n, w })
}

// --- sequences ---

/// Base graph a generated sequence thins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseGraph {
    /// Cycle over all nodes (each node linked to its two neighbors).
    Ring,
    /// Every pair of nodes linked.
    Complete,
    /// Explicit symmetric adjacency.
    Adjacency(Vec<Vec<bool>>),
}

impl BaseGraph {
    fn adjacency(&self, n: usize) -> Result<Vec<Vec<bool>>, GraphError> {
        match self {
            BaseGraph::Ring => {
                let mut adj = vec![vec![false; n]; n];
                if n > 1 {
                    for i in 0..n {
                        let j = (i + 1) % n;
                        adj[i][j] = true;
                        adj[j][i] = true;
                    }
                }
                Ok(adj)
            }
            BaseGraph::Complete => {
                let mut adj = vec![vec![true; n]; n];
                for (i, row) in adj.iter_mut().enumerate() {
                    row[i] = false;
                }
                Ok(adj)
            }
            BaseGraph::Adjacency(adj) => {
                if adj.len() != n {
                    return Err(GraphError::Malformed(format!(
                        "scenario adjacency is {}x{}, expected {n}x{n}",
                        adj.len(),
                        adj.first().map_or(0, Vec::len),
                    )));
                }
                Ok(adj.clone())
            }
        }
    }
}

/// Parameters of the seeded sequence generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphScenario {
    pub base: BaseGraph,
    /// Probability that a base edge outside the scheduled spanning structure
    /// appears at any given round.
    #[serde(default = "default_extra_edge_prob")]
    pub extra_edge_prob: f64,
}

fn default_extra_edge_prob() -> f64 {
    0.15
}

impl Default for GraphScenario {
    fn default() -> Self {
        GraphScenario { base: BaseGraph::Ring, extra_edge_prob: default_extra_edge_prob() }
    }
}

#[derive(Debug, Clone)]
enum Source {
    /// Explicit list, cycled past its end.
    Explicit(Vec<WeightMatrix>),
    /// Seeded thinning of a base graph.
    Generated {
        seed: u64,
        scenario: GraphScenario,
        /// Spanning-structure edges in scheduling order; bucket `k` of the
        /// round-robin is `tree[k], tree[k + q], ...`.
        tree: Vec<(usize, usize)>,
        /// Base edges not in the spanning structure, lexicographic order.
        extra: Vec<(usize, usize)>,
        edge_stream: u64,
    },
}

/// A sequence of weight matrices `W_1, W_2, ...`, one per round.
#[derive(Debug, Clone)]
pub struct GraphSequence {
    n: usize,
    eta: f64,
    q: usize,
    source: Source,
}

impl GraphSequence {
    /// Wraps an explicit matrix list; the list is cycled past its end. `eta`
    /// is the declared entry floor, `q` the declared connectivity window.
    pub fn explicit(
        eta: f64,
        q: usize,
        matrices: Vec<WeightMatrix>,
    ) -> Result<Self, GraphError> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(GraphError::InvalidEta(eta));
        }
        if q == 0 {
            return Err(GraphError::ZeroWindow);
        }
        let n = match matrices.first() {
            None => return Err(GraphError::EmptyMatrixList),
            Some(m) => m.n(),
        };
        for (index, m) in matrices.iter().enumerate() {
            if m.n() != n {
                return Err(GraphError::MixedMatrixSizes { index, got: m.n(), expected: n });
            }
        }
        Ok(GraphSequence { n, eta, q, source: Source::Explicit(matrices) })
    }

    /// Seeds a generated sequence over `n` nodes targeting window `q`.
    ///
    /// A spanning structure of the (connected) base graph is fixed once from
    /// the seed and dealt round-robin over each window of `q` rounds, so every
    /// window's union contains the whole structure; remaining base edges
    /// appear independently with `scenario.extra_edge_prob`. Entry floor is
    /// `eta = 1/n` by construction.
    pub fn generated(
        n: usize,
        q: usize,
        scenario: GraphScenario,
        seed: u64,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::EmptyGraph);
        }
        if q == 0 {
            return Err(GraphError::ZeroWindow);
        }
        if !(0.0..=1.0).contains(&scenario.extra_edge_prob) {
            return Err(GraphError::InvalidEdgeProbability(scenario.extra_edge_prob));
        }
        let adjacency = scenario.base.adjacency(n)?;
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(GraphError::RaggedAdjacency { row: i, len: row.len(), n });
            }
            if row[i] {
                return Err(GraphError::SelfLoop(i));
            }
            for j in 0..n {
                if adjacency[i][j] != adjacency[j][i] {
                    return Err(GraphError::AsymmetricAdjacency { i, j });
                }
            }
        }

        let mut edges: Vec<(usize, usize)> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if adjacency[i][j] {
                    edges.push((i, j));
                }
            }
        }
        let mut shuffled = edges.clone();
        shuffled.shuffle(&mut rng_from(substream_seed(seed, "graph-structure")));

        // Randomized Kruskal: the first edge joining two components enters the
        // spanning structure.
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut tree = Vec::new();
        let mut in_tree = vec![false; edges.len().max(1)];
        for &(i, j) in &shuffled {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
                tree.push((i, j));
                let pos = edges.iter().position(|&e| e == (i, j)).expect("edge exists");
                in_tree[pos] = true;
            }
        }
        let root = find(&mut parent, 0);
        if (0..n).any(|v| find(&mut parent, v) != root) {
            return Err(GraphError::BaseDisconnected);
        }
        let extra: Vec<(usize, usize)> = edges
            .iter()
            .enumerate()
            .filter(|&(k, _)| !in_tree[k])
            .map(|(_, &e)| e)
            .collect();

        Ok(GraphSequence {
            n,
            eta: 1.0 / n as f64,
            q,
            source: Source::Generated {
                seed,
                scenario,
                tree,
                extra,
                edge_stream: substream_seed(seed, "graph-edges"),
            },
        })
    }

    /// Generated sequence over a ring base with default extra-edge rate.
    pub fn ring(n: usize, q: usize, seed: u64) -> Self {
        GraphSequence::generated(n, q, GraphScenario { base: BaseGraph::Ring, ..Default::default() }, seed)
            .expect("ring base is connected")
    }

    /// Generated sequence over a complete base with default extra-edge rate.
    pub fn complete(n: usize, q: usize, seed: u64) -> Self {
        GraphSequence::generated(
            n,
            q,
            GraphScenario { base: BaseGraph::Complete, ..Default::default() },
            seed,
        )
        .expect("complete base is connected")
    }

    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    #[must_use]
    pub fn eta(&self) -> f64 {
        self.eta
    }

    #[must_use]
    pub fn q(&self) -> usize {
        self.q
    }

    /// The weight matrix of round `t` (1-based).
    #[must_use]
    pub fn matrix_at(&self, t: usize) -> WeightMatrix {
        assert!(t >= 1, "rounds are 1-based");
        match &self.source {
            Source::Explicit(list) => list[(t - 1) % list.len()].clone(),
            Source::Generated { scenario, tree, extra, edge_stream, .. } => {
                let mut adj = vec![vec![false; self.n]; self.n];
                let bucket = (t - 1) % self.q;
                for (k, &(i, j)) in tree.iter().enumerate() {
                    if k % self.q == bucket {
                        adj[i][j] = true;
                        adj[j][i] = true;
                    }
                }
                if scenario.extra_edge_prob > 0.0 && !extra.is_empty() {
                    let mut rng = rng_from(indexed_seed(*edge_stream, t as u64));
                    for &(i, j) in extra {
                        if rng.random::<f64>() < scenario.extra_edge_prob {
                            adj[i][j] = true;
                            adj[j][i] = true;
                        }
                    }
                }
                build_weight_matrix(&adj).expect("thinned adjacency is symmetric")
            }
        }
    }

    /// Contraction factors `(gamma, beta)` for this sequence's `(eta, n, q)`.
    pub fn contraction_factors(&self) -> Result<(f64, f64), GraphError> {
        contraction_factors(self.eta, self.n, self.q)
    }

    /// Checks the three network-model conditions over rounds `1..=horizon`.
    pub fn validate(&self, horizon: usize) -> Result<ValidationReport, GraphError> {
        if horizon < self.q {
            return Err(GraphError::HorizonShorterThanWindow { horizon, q: self.q });
        }
        let mut report = ValidationReport::new(self.eta, self.q);
        let mut window: VecDeque<Vec<(usize, usize)>> = VecDeque::with_capacity(self.q);
        let mut counts = vec![0u32; self.n * self.n];
        for t in 1..=horizon {
            let w = self.matrix_at(t);
            debug_assert_eq!(w.n(), self.n);
            self.check_matrix(&w, t, &mut report);
            let edges = w.edges();
            for &(i, j) in &edges {
                counts[i * self.n + j] += 1;
            }
            window.push_back(edges);
            if window.len() > self.q {
                for (i, j) in window.pop_front().expect("window nonempty") {
                    counts[i * self.n + j] -= 1;
                }
            }
            if window.len() == self.q {
                let start = t + 1 - self.q;
                if !union_strongly_connected(self.n, &counts) {
                    report.joint_connectivity.record_violation(
                        start,
                        format!("union over rounds {start}..={t} is not strongly connected"),
                    );
                }
            }
        }
        Ok(report)
    }

    fn check_matrix(&self, w: &WeightMatrix, t: usize, report: &mut ValidationReport) {
        let n = w.n();
        for i in 0..n {
            if w.at(i, i) <= 0.0 {
                report
                    .nondegeneracy
                    .record_violation(t, format!("diagonal entry ({i},{i}) is not positive"));
            }
            for j in 0..n {
                let v = w.at(i, j);
                if v > 0.0 && v < self.eta - STOCHASTICITY_TOL {
                    report.nondegeneracy.record_violation(
                        t,
                        format!("entry ({i},{j}) = {v} is below the floor {}", self.eta),
                    );
                }
                if v < -STOCHASTICITY_TOL {
                    report
                        .double_stochasticity
                        .record_violation(t, format!("entry ({i},{j}) = {v} is negative"));
                }
            }
        }
        for i in 0..n {
            let row_sum: f64 = (0..n).map(|j| w.at(i, j)).sum();
            if (row_sum - 1.0).abs() > STOCHASTICITY_TOL {
                report
                    .double_stochasticity
                    .record_violation(t, format!("row {i} sums to {row_sum}"));
            }
            let col_sum: f64 = (0..n).map(|j| w.at(j, i)).sum();
            if (col_sum - 1.0).abs() > STOCHASTICITY_TOL {
                report
                    .double_stochasticity
                    .record_violation(t, format!("column {i} sums to {col_sum}"));
            }
        }
    }
}

/// Strong connectivity of the union digraph encoded by positive counts.
fn union_strongly_connected(n: usize, counts: &[u32]) -> bool {
    if n <= 1 {
        return true;
    }
    let forward = |i: usize| (0..n).filter(move |&j| counts[i * n + j] > 0);
    let backward = |i: usize| (0..n).filter(move |&j| counts[j * n + i] > 0);
    reaches_all(n, forward) && reaches_all(n, backward)
}

fn reaches_all<I, F>(n: usize, neighbors: F) -> bool
where
    I: Iterator<Item = usize>,
    F: Fn(usize) -> I,
{
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for u in neighbors(v) {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                stack.push(u);
            }
        }
    }
    count == n
}

// --- validation report ---

/// Outcome of one checked condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClauseReport {
    pub pass: bool,
    /// Round (or window start) of the first violation.
    pub first_violation: Option<usize>,
    pub detail: Option<String>,
}

impl ClauseReport {
    fn clean() -> Self {
        ClauseReport { pass: true, first_violation: None, detail: None }
    }

    fn record_violation(&mut self, index: usize, detail: String) {
        if self.pass {
            self.pass = false;
            self.first_violation = Some(index);
            self.detail = Some(detail);
        }
    }
}

/// Per-condition verdicts from [`GraphSequence::validate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub eta: f64,
    pub q: usize,
    pub nondegeneracy: ClauseReport,
    pub double_stochasticity: ClauseReport,
    pub joint_connectivity: ClauseReport,
}

impl ValidationReport {
    fn new(eta: f64, q: usize) -> Self {
        ValidationReport {
            eta,
            q,
            nondegeneracy: ClauseReport::clean(),
            double_stochasticity: ClauseReport::clean(),
            joint_connectivity: ClauseReport::clean(),
        }
    }

    #[must_use]
    pub fn pass(&self) -> bool {
        self.nondegeneracy.pass && self.double_stochasticity.pass && self.joint_connectivity.pass
    }
}

// --- contraction factors ---

/// Disagreement contraction factors of a valid sequence:
///
/// ```text
///     gamma = (1 - eta / (2 n^2))^(-2),    beta = (1 - eta / (2 n^2))^(1/q)
/// ```
///
/// Consensus error after `t` rounds decays like `gamma * beta^t`.
pub fn contraction_factors(eta: f64, n: usize, q: usize) -> Result<(f64, f64), GraphError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(GraphError::InvalidEta(eta));
    }
    if n == 0 {
        return Err(GraphError::EmptyGraph);
    }
    if q == 0 {
        return Err(GraphError::ZeroWindow);
    }
    let base = 1.0 - eta / (2.0 * (n as f64) * (n as f64));
    let gamma = base.powi(-2);
    let beta = base.powf(1.0 / q as f64);
    Ok((gamma, beta))
}

// --- file format ---

/// On-disk schema: `matrices` for explicit lists, or `seed` + `scenario` for
/// generated sequences.
#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    eta: f64,
    q: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrices: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenario: Option<GraphScenario>,
}

impl GraphSequence {
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| GraphError::Malformed(e.to_string()))?;
        match (file.matrices, file.seed, file.scenario) {
            (Some(rows), None, None) => {
                let matrices = rows
                    .into_iter()
                    .map(WeightMatrix::from_rows)
                    .collect::<Result<Vec<_>, _>>()?;
                let seq = GraphSequence::explicit(file.eta, file.q, matrices)?;
                if seq.n != file.n {
                    return Err(GraphError::Malformed(format!(
                        "declared n = {} but matrices are {}x{}",
                        file.n, seq.n, seq.n
                    )));
                }
                Ok(seq)
            }
            (None, Some(seed), Some(scenario)) => {
                let seq = GraphSequence::generated(file.n, file.q, scenario, seed)?;
                if (seq.eta - file.eta).abs() > STOCHASTICITY_TOL {
                    return Err(GraphError::Malformed(format!(
                        "declared eta = {} but generated sequences use eta = 1/n = {}",
                        file.eta, seq.eta
                    )));
                }
                Ok(seq)
            }
            _ => Err(GraphError::AmbiguousSource),
        }
    }

    pub fn to_json(&self) -> String {
        let file = match &self.source {
            Source::Explicit(list) => GraphFile {
                n: self.n,
                eta: self.eta,
                q: self.q,
                matrices: Some(list.iter().map(|m| m.clone().into()).collect()),
                seed: None,
                scenario: None,
            },
            Source::Generated { seed, scenario, .. } => GraphFile {
                n: self.n,
                eta: self.eta,
                q: self.q,
                matrices: None,
                seed: Some(*seed),
                scenario: Some(scenario.clone()),
            },
        };
        serde_json::to_string_pretty(&file).expect("graph file serializes")
    }
}
