//! Scalar synthetic benchmark.
//!
//! Each agent tracks a drifting target on the unit interval: `X_i = [0, 1]`,
//! `f_{i,t}(x) = (x - a_{i,t})^2`, with the target `a_{i,t}` jittering
//! uniformly around a per-agent base value (clamped to `[0, 1]`). The coupled
//! constraint caps the network total: `g_i(x) = x - c_i`, so the aggregate
//! condition `sum_i g_i <= 0` reads `sum_i x_i <= sum_i c_i`. With caps below
//! the targets the constraint binds at the optimum and the dual variables do
//! real work, which is what makes this family a useful small testbed.

use serde::{Deserialize, Serialize};

use crate::linalg::Mat;
use crate::problem::{OnlineProblem, ProblemConstants, ProblemError};
use crate::rng::{indexed_seed, rng_from, substream_seed};
use rand::Rng;

/// Parameters of the synthetic family. `None` fields take documented
/// defaults at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    /// Per-agent base targets; default spreads them evenly over `(0, 1)`
    /// (agent `i` of `n` gets `(i + 1) / (n + 1)`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<f64>>,
    /// Uniform jitter amplitude applied to the base target each round
    /// (post-jitter targets are clamped to `[0, 1]`). Default `0.25`.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    /// Per-agent constraint caps `c_i`; default `0.35` everywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<Vec<f64>>,
    /// Draw the starting point uniformly from `[0, 1]` instead of starting
    /// at `0`.
    #[serde(default)]
    pub random_init: bool,
}

fn default_jitter() -> f64 {
    0.25
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams { targets: None, jitter: default_jitter(), caps: None, random_init: false }
    }
}

/// See the [module docs](self).
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    n: usize,
    base_targets: Vec<f64>,
    caps: Vec<f64>,
    jitter: f64,
    cost_stream: u64,
    init_stream: Option<u64>,
    constants: ProblemConstants,
    round: usize,
    targets: Vec<f64>,
    sum_targets: Vec<f64>,
    sum_squared_targets: Vec<f64>,
}

impl SyntheticProblem {
    pub fn new(n: usize, params: SyntheticParams, seed: u64) -> Result<Self, ProblemError> {
        if n == 0 {
            return Err(ProblemError::NoAgents);
        }
        if params.jitter < 0.0 {
            return Err(ProblemError::NegativeJitter(params.jitter));
        }
        let base_targets = match params.targets {
            Some(t) => {
                if t.len() != n {
                    return Err(ProblemError::BadLength {
                        what: "targets",
                        got: t.len(),
                        expected: n,
                    });
                }
                t
            }
            None => (0..n).map(|i| (i + 1) as f64 / (n + 1) as f64).collect(),
        };
        let caps = match params.caps {
            Some(c) => {
                if c.len() != n {
                    return Err(ProblemError::BadLength {
                        what: "caps",
                        got: c.len(),
                        expected: n,
                    });
                }
                c
            }
            None => vec![0.35; n],
        };
        // Targets live in [0,1] after clamping, so on X_i = [0,1]:
        // |f| <= 1, |f'| = 2|x - a| <= 2, |g| <= max(|c|, |1 - c|).
        let c_g = caps.iter().map(|c| c.abs().max((1.0 - c).abs())).fold(0.0, f64::max);
        let constants = ProblemConstants { c_x: 1.0, c_f: 1.0, c_g, l_f: 2.0, l_g: 1.0 };
        Ok(SyntheticProblem {
            n,
            base_targets,
            caps,
            jitter: params.jitter,
            cost_stream: substream_seed(seed, "costs"),
            init_stream: params.random_init.then(|| substream_seed(seed, "init")),
            constants,
            round: 0,
            targets: vec![0.0; n],
            sum_targets: vec![0.0; n],
            sum_squared_targets: vec![0.0; n],
        })
    }

    /// The active target `a_{i,t}` of the current round.
    #[must_use]
    pub fn target(&self, agent: usize) -> f64 {
        assert!(self.round > 0, "no round revealed yet");
        self.targets[agent]
    }

    #[must_use]
    pub fn cap(&self, agent: usize) -> f64 {
        self.caps[agent]
    }
}

impl OnlineProblem for SyntheticProblem {
    fn num_agents(&self) -> usize {
        self.n
    }

    fn constraint_dim(&self) -> usize {
        1
    }

    fn decision_dim(&self, _agent: usize) -> usize {
        1
    }

    fn constants(&self) -> ProblemConstants {
        self.constants
    }

    fn initial_point(&self, agent: usize) -> Vec<f64> {
        match self.init_stream {
            None => vec![0.0],
            Some(stream) => {
                let mut rng = rng_from(indexed_seed(stream, agent as u64));
                vec![rng.random_range(0.0..1.0)]
            }
        }
    }

    fn advance(&mut self) {
        self.round += 1;
        let mut rng = rng_from(indexed_seed(self.cost_stream, self.round as u64));
        for i in 0..self.n {
            let u: f64 = rng.random_range(-1.0..1.0);
            let a = (self.base_targets[i] + self.jitter * u).clamp(0.0, 1.0);
            self.targets[i] = a;
            self.sum_targets[i] += a;
            self.sum_squared_targets[i] += a * a;
        }
    }

    fn round(&self) -> usize {
        self.round
    }

    fn reset(&mut self) {
        self.round = 0;
        self.targets.iter_mut().for_each(|t| *t = 0.0);
        self.sum_targets.iter_mut().for_each(|t| *t = 0.0);
        self.sum_squared_targets.iter_mut().for_each(|t| *t = 0.0);
    }

    fn cost(&self, agent: usize, x: &[f64]) -> f64 {
        assert!(self.round > 0, "no round revealed yet");
        let d = x[0] - self.targets[agent];
        d * d
    }

    fn cost_grad(&self, agent: usize, x: &[f64]) -> Vec<f64> {
        assert!(self.round > 0, "no round revealed yet");
        vec![2.0 * (x[0] - self.targets[agent])]
    }

    fn averaged_cost(&self, agent: usize, x: &[f64]) -> f64 {
        assert!(self.round > 0, "no round revealed yet");
        let r = self.round as f64;
        x[0] * x[0] - 2.0 * x[0] * self.sum_targets[agent] / r
            + self.sum_squared_targets[agent] / r
    }

    fn averaged_cost_grad(&self, agent: usize, x: &[f64]) -> Vec<f64> {
        assert!(self.round > 0, "no round revealed yet");
        let r = self.round as f64;
        vec![2.0 * x[0] - 2.0 * self.sum_targets[agent] / r]
    }

    fn constraint(&self, agent: usize, x: &[f64]) -> Vec<f64> {
        vec![x[0] - self.caps[agent]]
    }

    fn constraint_jacobian(&self, _agent: usize, _x: &[f64]) -> Mat {
        Mat::from_rows(&[vec![1.0]])
    }

    fn project(&self, _agent: usize, x: &[f64]) -> Vec<f64> {
        vec![x[0].clamp(0.0, 1.0)]
    }

    fn box_bounds(&self, _agent: usize) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_instance(n: usize, target: f64, cap: f64) -> SyntheticProblem {
        SyntheticProblem::new(
            n,
            SyntheticParams {
                targets: Some(vec![target; n]),
                jitter: 0.0,
                caps: Some(vec![cap; n]),
                random_init: false,
            },
            0,
        )
        .unwrap()
    }

    #[test]
    fn constant_target_instance_evaluates_by_hand() {
        let mut p = constant_instance(1, 1.0, 0.25);
        p.advance();
        assert_eq!(p.cost(0, &[0.5]), 0.25);
        assert_eq!(p.cost_grad(0, &[0.5]), vec![-1.0]);
        assert_eq!(p.constraint(0, &[0.5]), vec![0.25]);
        assert_eq!(p.project(0, &[1.7]), vec![1.0]);
        assert_eq!(p.project(0, &[-0.2]), vec![0.0]);
    }

    #[test]
    fn averaged_cost_equals_replayed_per_round_mean() {
        let mut p = SyntheticProblem::new(3, SyntheticParams::default(), 42).unwrap();
        let probe = [0.37];
        let mut manual = vec![0.0; 3];
        for _ in 0..25 {
            p.advance();
            for (i, m) in manual.iter_mut().enumerate() {
                *m += p.cost(i, &probe);
            }
        }
        for (i, m) in manual.iter().enumerate() {
            let avg = p.averaged_cost(i, &probe);
            assert!((avg - m / 25.0).abs() < 1e-12, "agent {i}");
            let g = p.averaged_cost_grad(i, &probe)[0];
            let h = 1e-6;
            let fd = (p.averaged_cost(i, &[probe[0] + h]) - p.averaged_cost(i, &[probe[0] - h]))
                / (2.0 * h);
            assert!((g - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn targets_stay_in_unit_interval() {
        let mut p = SyntheticProblem::new(
            4,
            SyntheticParams { jitter: 0.9, ..Default::default() },
            7,
        )
        .unwrap();
        for _ in 0..200 {
            p.advance();
            for i in 0..4 {
                let a = p.target(i);
                assert!((0.0..=1.0).contains(&a));
            }
        }
    }

    #[test]
    fn reset_replays_the_same_stream() {
        let mut p = SyntheticProblem::new(2, SyntheticParams::default(), 5).unwrap();
        let mut first = Vec::new();
        for _ in 0..10 {
            p.advance();
            first.push((p.target(0), p.target(1)));
        }
        p.reset();
        assert_eq!(p.round(), 0);
        for k in 0..10 {
            p.advance();
            assert_eq!((p.target(0), p.target(1)), first[k]);
        }
    }

    #[test]
    fn two_instances_with_same_seed_agree() {
        let mut a = SyntheticProblem::new(3, SyntheticParams::default(), 9).unwrap();
        let mut b = SyntheticProblem::new(3, SyntheticParams::default(), 9).unwrap();
        for _ in 0..20 {
            a.advance();
            b.advance();
            for i in 0..3 {
                assert_eq!(a.target(i), b.target(i));
            }
        }
    }

    #[test]
    fn declared_constants_dominate_sampled_values() {
        let mut p = SyntheticProblem::new(3, SyntheticParams::default(), 11).unwrap();
        let c = p.constants();
        for _ in 0..100 {
            p.advance();
            for i in 0..3 {
                for x in [0.0, 0.25, 0.5, 0.75, 1.0] {
                    assert!(p.cost(i, &[x]).abs() <= c.c_f + 1e-12);
                    assert!(p.cost_grad(i, &[x])[0].abs() <= c.l_f + 1e-12);
                    assert!(p.constraint(i, &[x])[0].abs() <= c.c_g + 1e-12);
                }
            }
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(matches!(
            SyntheticProblem::new(0, SyntheticParams::default(), 0),
            Err(ProblemError::NoAgents)
        ));
        assert!(matches!(
            SyntheticProblem::new(
                2,
                SyntheticParams { targets: Some(vec![0.5]), ..Default::default() },
                0
            ),
            Err(ProblemError::BadLength { what: "targets", .. })
        ));
        assert!(matches!(
            SyntheticProblem::new(
                1,
                SyntheticParams { jitter: -0.1, ..Default::default() },
                0
            ),
            Err(ProblemError::NegativeJitter(_))
        ));
    }

    #[test]
    fn random_init_is_deterministic_and_feasible() {
        let p = SyntheticProblem::new(
            3,
            SyntheticParams { random_init: true, ..Default::default() },
            21,
        )
        .unwrap();
        let q = SyntheticProblem::new(
            3,
            SyntheticParams { random_init: true, ..Default::default() },
            21,
        )
        .unwrap();
        for i in 0..3 {
            let x = p.initial_point(i);
            assert_eq!(x, q.initial_point(i));
            assert!((0.0..=1.0).contains(&x[0]));
        }
    }
}
