//! Minimum-rate routing over a wireless network.
//!
//! `n` source nodes and `k` access points sit in the unit box. The
//! achievable rate of a link decays with distance through a smooth cubic
//! step: `1` up close, `0` beyond the cutoff, and the unique cubic with zero
//! slope at both seams in between. Each source `i` chooses an allocation
//! `T_i` on the probability simplex over all `n + k` possible next hops,
//! splitting its traffic, and the network must deliver an aggregate rate of
//! at least `r_min` *per source*.
//!
//! No source knows the rates exactly: each round it observes a noisy
//! realization and works with the running empirical mean. The aggregate-rate
//! expression couples all allocations, so each agent carries an auxiliary
//! variable `z_i` estimating its own flow contribution, with the squared
//! tracking error as the online cost:
//!
//! ```text
//!     x_i = (T_i, z_i),    f_{i,t}(x_i) = 1/2 || z_i - M_{i,t} T_i ||^2,
//!     g_i(x_i) = -z_i + (r_min / n) 1,
//! ```
//!
//! where `M_{i,t}` is the flow matrix of agent `i` under the round-`t`
//! empirical mean rates: row `i` holds the outgoing rates to every node, and
//! row `j != i` (sources only) holds `-r_ij` in column `j`, the share of
//! `j`'s capacity consumed by relaying for `i`. Summing `g_i` recovers the
//! constraint `sum_i z_i >= r_min 1`: every source keeps at least the floor
//! rate once the trackers match the true flows.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Mat};
use crate::problem::projection::{project_box, project_simplex};
use crate::problem::{OnlineProblem, ProblemConstants, ProblemError};
use crate::rng::{indexed_seed, rng_from, substream_seed};
use rand::Rng;

// --- rate curve ---

/// Distance-to-rate map: `1` for `d <= lower`, `0` for `d >= upper`, and in
/// between the unique cubic joining the two plateaus with zero slope at both
/// seams (so the curve is C^1 and strictly decreasing on the ramp).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub lower: f64,
    pub upper: f64,
}

impl RateCurve {
    pub fn new(lower: f64, upper: f64) -> Result<Self, ProblemError> {
        if !(0.0 <= lower && lower < upper) {
            return Err(ProblemError::BadRateWindow { lower, upper });
        }
        Ok(RateCurve { lower, upper })
    }

    #[must_use]
    pub fn eval(&self, d: f64) -> f64 {
        let (l, u) = (self.lower, self.upper);
        if d <= l {
            return 1.0;
        }
        if d >= u {
            return 0.0;
        }
        let denom = (l - u) * (l - u) * (l - u);
        let a = -2.0 / denom;
        let b = 3.0 * (l + u) / denom;
        let c = -6.0 * l * u / denom;
        let d0 = (3.0 * l * u * u - u * u * u) / denom;
        ((a * d + b) * d + c) * d + d0
    }
}

// --- flow matrices ---

/// Flow matrix of agent `agent` given its rate row over all `n + k` nodes
/// (`rates[j]` is the rate of link `agent -> j`; `rates[agent]` must be 0).
///
/// The result has `n_sources` rows and `rates.len()` columns: row `agent` is
/// the full rate row, and row `j != agent` (sources only) carries
/// `-rates[j]` in column `j`. Column `j` of the product `M T` is then the
/// net rate source `j` gains (own outgoing traffic) or loses (capacity spent
/// relaying for `agent`).
#[must_use]
pub fn flow_matrix(agent: usize, rates: &[f64], n_sources: usize) -> Mat {
    assert!(agent < n_sources, "only sources route traffic");
    assert!(rates.len() >= n_sources);
    debug_assert_eq!(rates[agent], 0.0, "no self-link");
    let mut m = Mat::zeros(n_sources, rates.len());
    for (j, &r) in rates.iter().enumerate() {
        m.set(agent, j, r);
    }
    for j in 0..n_sources {
        if j != agent {
            m.set(j, j, -rates[j]);
        }
    }
    m
}

/// Tracking cost `1/2 ||z - M t||^2` with its gradients `(-M' r, r)` where
/// `r = z - M t` is the residual.
#[must_use]
pub fn flow_fit_cost(m: &Mat, t_alloc: &[f64], z: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let flow = m.matvec(t_alloc);
    let residual: Vec<f64> = z.iter().zip(&flow).map(|(a, b)| a - b).collect();
    let value = 0.5 * dot(&residual, &residual);
    let mut grad_t = m.tmatvec(&residual);
    for g in &mut grad_t {
        *g = -*g;
    }
    (value, grad_t, residual)
}

/// In-place running mean: `mean_t = ((t-1) mean_{t-1} + sample) / t`,
/// computed in the numerically stabler incremental form.
pub fn update_running_mean(mean: &mut [f64], sample: &[f64], t: usize) {
    assert!(t >= 1);
    debug_assert_eq!(mean.len(), sample.len());
    let inv = 1.0 / t as f64;
    for (m, &s) in mean.iter_mut().zip(sample) {
        *m += (s - *m) * inv;
    }
}

// --- the problem ---

/// Parameters of the routing family. `None` fields take documented defaults
/// at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingParams {
    pub n_sources: usize,
    pub n_aps: usize,
    /// Rate-curve knee: full rate up to this distance. Default `0.5`.
    #[serde(default = "default_lower")]
    pub lower: f64,
    /// Rate-curve cutoff: zero rate beyond this distance. Default `0.8`.
    #[serde(default = "default_upper")]
    pub upper: f64,
    /// Uniform noise amplitude on realized rates (clamped to `[0, 1]`).
    /// Default `0.1`.
    #[serde(default = "default_noise")]
    pub noise_amplitude: f64,
    /// Aggregate per-source rate floor. Default `0.001`.
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    /// Box radius for the auxiliary variables; default `n_sources + n_aps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_max: Option<f64>,
    /// Node positions in the unit box, sources first; default draws them
    /// uniformly from the seed's "positions" substream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    /// Draw starting points uniformly from the feasible boxes instead of the
    /// uniform allocation with zeroed trackers.
    #[serde(default)]
    pub random_init: bool,
}

fn default_lower() -> f64 {
    0.5
}
fn default_upper() -> f64 {
    0.8
}
fn default_noise() -> f64 {
    0.1
}
fn default_r_min() -> f64 {
    0.001
}

impl Default for RoutingParams {
    fn default() -> Self {
        RoutingParams {
            n_sources: 10,
            n_aps: 2,
            lower: default_lower(),
            upper: default_upper(),
            noise_amplitude: default_noise(),
            r_min: default_r_min(),
            z_max: None,
            positions: None,
            random_init: false,
        }
    }
}

/// See the [module docs](self).
#[derive(Debug, Clone)]
pub struct RoutingProblem {
    n: usize,
    k: usize,
    noise: f64,
    r_min: f64,
    z_max: f64,
    positions: Vec<[f64; 2]>,
    /// True link rates `n x (n + k)`, row-major; zero diagonal, zero where
    /// the curve cuts off.
    mean_rates: Vec<f64>,
    rates_stream: u64,
    init_stream: Option<u64>,
    constants: ProblemConstants,
    round: usize,
    /// Running mean of realized rates, same layout as `mean_rates`.
    empirical: Vec<f64>,
    /// Flow matrices of the current round's empirical means, one per agent.
    flows: Vec<Mat>,
    /// `sum_t M_{i,t}` and `sum_t M_{i,t}' M_{i,t}`, for the averaged cost.
    sum_flows: Vec<Mat>,
    sum_grams: Vec<Mat>,
}

impl RoutingProblem {
    pub fn new(params: RoutingParams, seed: u64) -> Result<Self, ProblemError> {
        let (n, k) = (params.n_sources, params.n_aps);
        if n == 0 || k == 0 {
            return Err(ProblemError::DegenerateTopology);
        }
        let curve = RateCurve::new(params.lower, params.upper)?;
        if params.noise_amplitude < 0.0 {
            return Err(ProblemError::NegativeNoise(params.noise_amplitude));
        }
        if params.r_min <= 0.0 {
            return Err(ProblemError::NonPositiveRateFloor(params.r_min));
        }
        let z_max = params.z_max.unwrap_or((n + k) as f64);
        if z_max <= 0.0 {
            return Err(ProblemError::NonPositiveBox(z_max));
        }
        let total = n + k;
        let positions = match params.positions {
            Some(p) => {
                if p.len() != total {
                    return Err(ProblemError::BadPositionCount { got: p.len(), expected: total });
                }
                p
            }
            None => {
                let mut rng = rng_from(substream_seed(seed, "positions"));
                (0..total).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect()
            }
        };
        let mut mean_rates = vec![0.0; n * total];
        for i in 0..n {
            for j in 0..total {
                if i != j {
                    let dx = positions[i][0] - positions[j][0];
                    let dy = positions[i][1] - positions[j][1];
                    mean_rates[i * total + j] = curve.eval((dx * dx + dy * dy).sqrt());
                }
            }
        }

        // Suprema over X_i = simplex x box and rates in [0, 1]:
        //   ||T|| <= 1, ||z|| <= sqrt(n) z_max,
        //   ||M||_2 <= ||M||_F <= sqrt((n + k) + (n - 1)),
        //   ||z - M T|| <= sqrt(n) z_max + ||M||.
        let m_norm = ((total + n - 1) as f64).sqrt();
        let resid_max = (n as f64).sqrt() * z_max + m_norm;
        let constants = ProblemConstants {
            c_x: (1.0 + n as f64 * z_max * z_max).sqrt(),
            c_f: 0.5 * resid_max * resid_max,
            c_g: (n as f64).sqrt() * (z_max + params.r_min / n as f64),
            l_f: (m_norm * m_norm + 1.0).sqrt() * resid_max,
            l_g: 1.0,
        };

        let mut problem = RoutingProblem {
            n,
            k,
            noise: params.noise_amplitude,
            r_min: params.r_min,
            z_max,
            positions,
            mean_rates,
            rates_stream: substream_seed(seed, "rates"),
            init_stream: params.random_init.then(|| substream_seed(seed, "init")),
            constants,
            round: 0,
            empirical: vec![0.0; n * total],
            flows: Vec::new(),
            sum_flows: vec![Mat::zeros(n, total); n],
            sum_grams: vec![Mat::zeros(total, total); n],
        };
        problem.flows = (0..n).map(|i| problem.flow_of_empirical(i)).collect();
        Ok(problem)
    }

    #[must_use]
    pub fn n_sources(&self) -> usize {
        self.n
    }

    #[must_use]
    pub fn n_aps(&self) -> usize {
        self.k
    }

    #[must_use]
    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    #[must_use]
    pub fn rate_floor(&self) -> f64 {
        self.r_min
    }

    /// True (noise-free) rate of link `i -> j`.
    #[must_use]
    pub fn mean_rate(&self, i: usize, j: usize) -> f64 {
        self.mean_rates[i * (self.n + self.k) + j]
    }

    /// Running empirical mean rate of link `i -> j`.
    #[must_use]
    pub fn empirical_rate(&self, i: usize, j: usize) -> f64 {
        self.empirical[i * (self.n + self.k) + j]
    }

    /// Flow matrix of agent `i` under the current empirical means.
    #[must_use]
    pub fn current_flow(&self, i: usize) -> &Mat {
        &self.flows[i]
    }

    /// Source-to-source adjacency of links with positive true rate; the
    /// natural base graph for the communication network.
    #[must_use]
    pub fn source_adjacency(&self) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; self.n]; self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.mean_rate(i, j) > 0.0 {
                    adj[i][j] = true;
                }
            }
        }
        adj
    }

    fn flow_of_empirical(&self, agent: usize) -> Mat {
        let total = self.n + self.k;
        flow_matrix(agent, &self.empirical[agent * total..(agent + 1) * total], self.n)
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        let total = self.n + self.k;
        debug_assert_eq!(x.len(), total + self.n);
        (&x[..total], &x[total..])
    }
}

impl OnlineProblem for RoutingProblem {
    fn num_agents(&self) -> usize {
        self.n
    }

    fn constraint_dim(&self) -> usize {
        self.n
    }

    fn decision_dim(&self, _agent: usize) -> usize {
        self.n + self.k + self.n
    }

    fn constants(&self) -> ProblemConstants {
        self.constants
    }

    fn initial_point(&self, agent: usize) -> Vec<f64> {
        let total = self.n + self.k;
        match self.init_stream {
            None => {
                let mut x = vec![1.0 / total as f64; total];
                x.extend(std::iter::repeat_n(0.0, self.n));
                x
            }
            Some(stream) => {
                let mut rng = rng_from(indexed_seed(stream, agent as u64));
                let mut x: Vec<f64> = (0..total).map(|_| rng.random_range(0.0..1.0)).collect();
                x.extend((0..self.n).map(|_| rng.random_range(-self.z_max..self.z_max)));
                self.project(agent, &x)
            }
        }
    }

    fn advance(&mut self) {
        self.round += 1;
        let total = self.n + self.k;
        let mut rng = rng_from(indexed_seed(self.rates_stream, self.round as u64));
        let mut realized = vec![0.0; total];
        for i in 0..self.n {
            for j in 0..total {
                let mean = self.mean_rates[i * total + j];
                realized[j] = if mean > 0.0 {
                    let u: f64 = rng.random_range(-1.0..1.0);
                    (mean + self.noise * u).clamp(0.0, 1.0)
                } else {
                    0.0
                };
            }
            update_running_mean(
                &mut self.empirical[i * total..(i + 1) * total],
                &realized,
                self.round,
            );
        }
        for i in 0..self.n {
            let m = self.flow_of_empirical(i);
            self.sum_flows[i].add_assign(&m);
            // M'M = outer(full row i) + squared single entries on the
            // diagonal for the relay rows; exploiting that beats a dense
            // Gram product by a factor of n.
            let row = self.empirical[i * total..(i + 1) * total].to_vec();
            let gram = &mut self.sum_grams[i];
            for a in 0..total {
                if row[a] != 0.0 {
                    for b in 0..total {
                        let add = row[a] * row[b];
                        if add != 0.0 {
                            gram.set(a, b, gram.at(a, b) + add);
                        }
                    }
                }
            }
            for j in 0..self.n {
                if j != i {
                    gram.set(j, j, gram.at(j, j) + row[j] * row[j]);
                }
            }
            self.flows[i] = m;
        }
    }

    fn round(&self) -> usize {
        self.round
    }

    fn reset(&mut self) {
        self.round = 0;
        let total = self.n + self.k;
        self.empirical.iter_mut().for_each(|r| *r = 0.0);
        self.flows = (0..self.n).map(|i| self.flow_of_empirical(i)).collect();
        self.sum_flows = vec![Mat::zeros(self.n, total); self.n];
        self.sum_grams = vec![Mat::zeros(total, total); self.n];
    }

    fn cost(&self, agent: usize, x: &[f64]) -> f64 {
        assert!(self.round > 0, "no round revealed yet");
        let (t_alloc, z) = self.split(x);
        let (value, _, _) = flow_fit_cost(&self.flows[agent], t_alloc, z);
        value
    }

    fn cost_grad(&self, agent: usize, x: &[f64]) -> Vec<f64> {
        assert!(self.round > 0, "no round revealed yet");
        let (t_alloc, z) = self.split(x);
        let (_, grad_t, residual) = flow_fit_cost(&self.flows[agent], t_alloc, z);
        let mut grad = grad_t;
        grad.extend(residual);
        grad
    }

    fn averaged_cost(&self, agent: usize, x: &[f64]) -> f64 {
        assert!(self.round > 0, "no round revealed yet");
        let r = self.round as f64;
        let (t_alloc, z) = self.split(x);
        let s1t = self.sum_flows[agent].matvec(t_alloc);
        let s2t = self.sum_grams[agent].matvec(t_alloc);
        0.5 * dot(z, z) - dot(z, &s1t) / r + 0.5 * dot(t_alloc, &s2t) / r
    }

    fn averaged_cost_grad(&self, agent: usize, x: &[f64]) -> Vec<f64> {
        assert!(self.round > 0, "no round revealed yet");
        let r = self.round as f64;
        let (t_alloc, z) = self.split(x);
        let s1t = self.sum_flows[agent].matvec(t_alloc);
        let s2t = self.sum_grams[agent].matvec(t_alloc);
        let s1tz = self.sum_flows[agent].tmatvec(z);
        let mut grad: Vec<f64> =
            s2t.iter().zip(&s1tz).map(|(a, b)| (a - b) / r).collect();
        grad.extend(z.iter().zip(&s1t).map(|(zi, f)| zi - f / r));
        grad
    }

    fn constraint(&self, _agent: usize, x: &[f64]) -> Vec<f64> {
        let (_, z) = self.split(x);
        let floor_share = self.r_min / self.n as f64;
        z.iter().map(|&zi| -zi + floor_share).collect()
    }

    fn constraint_jacobian(&self, _agent: usize, _x: &[f64]) -> Mat {
        let total = self.n + self.k;
        let mut jac = Mat::zeros(self.n, total + self.n);
        for j in 0..self.n {
            jac.set(j, total + j, -1.0);
        }
        jac
    }

    fn project(&self, _agent: usize, x: &[f64]) -> Vec<f64> {
        let (t_alloc, z) = self.split(x);
        let mut out = project_simplex(t_alloc);
        out.extend(project_box(z, self.z_max));
        out
    }

    fn box_bounds(&self, _agent: usize) -> Vec<(f64, f64)> {
        let total = self.n + self.k;
        let mut bounds = vec![(0.0, 1.0); total];
        bounds.extend(std::iter::repeat_n((-self.z_max, self.z_max), self.n));
        bounds
    }
}
