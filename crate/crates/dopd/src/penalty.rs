//! Penalty maps applied to the aggregate constraint.
//!
//! The coupled constraint is expressed as `F(sum_i g_i(x_i)) <= 0` for a
//! convex, continuously differentiable, coordinatewise map `F`. The iteration
//! and its guarantees need two constants, carried on the map as data:
//!
//! * `lipschitz` (`L_F`): `||F(a) - F(b)|| <= L_F ||a - b||`,
//! * `grad_lipschitz` (`G_F`): `||dF(a) - dF(b)|| <= G_F ||a - b||`.
//!
//! Three maps are provided. The identity keeps the raw constraint. The
//! smoothed max replaces `max(x, 0)` coordinatewise with the quadratic blend
//!
//! ```text
//!     [x]+ ~ 0                     for x < -mu
//!           (x + mu)^2 / (4 mu)    for -mu <= x <= mu
//!           x                      for x > mu
//! ```
//!
//! which is convex, C^1, within `mu/4` of `max(x, 0)` everywhere, and has
//! derivative in `[0, 1]`. It is slightly positive on `(-mu, 0)`, so it is
//! not a strict penalty; the strict variant shifts the blend right by `mu`,
//! making it vanish exactly on `x <= 0` and stay positive for `x > 0`, which
//! is the sign condition the cumulative-violation bound relies on.

use serde::{Deserialize, Serialize};

use crate::linalg::Mat;

#[derive(Debug, thiserror::Error)]
pub enum PenaltyError {
    #[error("smoothing width must be positive, got {0}")]
    NonPositiveMu(f64),
    #[error("penalty dimension must be at least 1")]
    ZeroDimension,
}

/// Coordinatewise smoothed max `[x]+` with width `mu`.
///
/// Exact on both flanks (`0` below `-mu`, `x` above `mu`) and quadratic in
/// between; continuous with continuous derivative at the seams.
#[must_use]
pub fn smooth_max_eval(x: f64, mu: f64) -> f64 {
    debug_assert!(mu > 0.0);
    if x < -mu {
        0.0
    } else if x > mu {
        x
    } else {
        let s = x + mu;
        s * s / (4.0 * mu)
    }
}

/// Derivative of [`smooth_max_eval`]: `0` below `-mu`, `1` above `mu`,
/// linear ramp `(x + mu) / (2 mu)` in between.
#[must_use]
pub fn smooth_max_grad(x: f64, mu: f64) -> f64 {
    debug_assert!(mu > 0.0);
    if x < -mu {
        0.0
    } else if x > mu {
        1.0
    } else {
        (x + mu) / (2.0 * mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyKind {
    Identity,
    SmoothMax { mu: f64 },
    /// Smoothed max shifted right by `mu`: zero on `x <= 0`, positive for
    /// `x > 0`.
    SmoothMaxStrict { mu: f64 },
}

/// A coordinatewise penalty map together with its declared constants.
///
/// Constants are data, not recomputed: anything constructing a custom map
/// must declare bounds that genuinely dominate its slopes, since every
/// closed-form bound downstream takes them at face value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyFunction {
    m: usize,
    kind: PenaltyKind,
    lipschitz: f64,
    grad_lipschitz: f64,
    is_penalty: bool,
    preserves_nonpositivity: bool,
}

impl PenaltyFunction {
    /// `F(x) = x`. Lipschitz ratio exactly 1, gradient constant.
    pub fn identity(m: usize) -> Self {
        assert!(m >= 1, "penalty dimension must be at least 1");
        PenaltyFunction {
            m,
            kind: PenaltyKind::Identity,
            lipschitz: 1.0,
            grad_lipschitz: 0.0,
            is_penalty: false,
            preserves_nonpositivity: true,
        }
    }

    /// Coordinatewise smoothed max with width `mu`.
    ///
    /// Declared constants are `L_F = sqrt(m)` and `G_F = sqrt(m) / mu`; the
    /// coordinatewise slopes are at most `1` and `1 / (2 mu)`, so both
    /// dominate. Positive on `(-mu, 0)`, hence not a strict penalty, and it
    /// does not preserve nonpositivity there either.
    pub fn smooth_max(m: usize, mu: f64) -> Result<Self, PenaltyError> {
        if m == 0 {
            return Err(PenaltyError::ZeroDimension);
        }
        if mu <= 0.0 {
            return Err(PenaltyError::NonPositiveMu(mu));
        }
        let root_m = (m as f64).sqrt();
        Ok(PenaltyFunction {
            m,
            kind: PenaltyKind::SmoothMax { mu },
            lipschitz: root_m,
            grad_lipschitz: root_m / mu,
            is_penalty: false,
            preserves_nonpositivity: false,
        })
    }

    /// Strict variant: the smoothed max shifted right by `mu`, so each
    /// coordinate is zero exactly on `x <= 0` and positive for `x > 0`.
    pub fn smooth_max_strict(m: usize, mu: f64) -> Result<Self, PenaltyError> {
        let mut f = PenaltyFunction::smooth_max(m, mu)?;
        f.kind = PenaltyKind::SmoothMaxStrict { mu };
        f.is_penalty = true;
        f.preserves_nonpositivity = true;
        Ok(f)
    }

    /// Build from a serialized [`PenaltyKind`] plus the constraint dimension,
    /// which the tag alone does not carry.
    pub fn from_kind(m: usize, kind: &PenaltyKind) -> Result<Self, PenaltyError> {
        match *kind {
            PenaltyKind::Identity => {
                if m == 0 {
                    return Err(PenaltyError::ZeroDimension);
                }
                Ok(PenaltyFunction::identity(m))
            }
            PenaltyKind::SmoothMax { mu } => PenaltyFunction::smooth_max(m, mu),
            PenaltyKind::SmoothMaxStrict { mu } => PenaltyFunction::smooth_max_strict(m, mu),
        }
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.m
    }

    #[must_use]
    pub fn kind(&self) -> &PenaltyKind {
        &self.kind
    }

    /// Declared `L_F`.
    #[must_use]
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Declared `G_F`.
    #[must_use]
    pub fn grad_lipschitz(&self) -> f64 {
        self.grad_lipschitz
    }

    /// Whether each coordinate satisfies `[F(x)]_k > 0` iff `x_k > 0`
    /// (the sign condition behind the cumulative-violation bound).
    #[must_use]
    pub fn is_penalty(&self) -> bool {
        self.is_penalty
    }

    /// Whether `F(x) <= 0` holds coordinatewise whenever `x <= 0`.
    #[must_use]
    pub fn preserves_nonpositivity(&self) -> bool {
        self.preserves_nonpositivity
    }

    /// The strict-penalty map to use when checking cumulative-violation
    /// bounds, if one is derivable from this map.
    #[must_use]
    pub fn strict_variant(&self) -> Option<PenaltyFunction> {
        match self.kind {
            PenaltyKind::Identity => None,
            PenaltyKind::SmoothMax { mu } | PenaltyKind::SmoothMaxStrict { mu } => {
                Some(PenaltyFunction::smooth_max_strict(self.m, mu).expect("mu validated"))
            }
        }
    }

    fn coord(&self, x: f64) -> f64 {
        match self.kind {
            PenaltyKind::Identity => x,
            PenaltyKind::SmoothMax { mu } => smooth_max_eval(x, mu),
            PenaltyKind::SmoothMaxStrict { mu } => smooth_max_eval(x - mu, mu),
        }
    }

    fn coord_grad(&self, x: f64) -> f64 {
        match self.kind {
            PenaltyKind::Identity => 1.0,
            PenaltyKind::SmoothMax { mu } => smooth_max_grad(x, mu),
            PenaltyKind::SmoothMaxStrict { mu } => smooth_max_grad(x - mu, mu),
        }
    }

    /// `F(x)`.
    #[must_use]
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.m, "penalty dimension mismatch");
        x.iter().map(|&v| self.coord(v)).collect()
    }

    /// Diagonal of the Jacobian `dF(x)`; coordinatewise maps have no
    /// off-diagonal terms.
    #[must_use]
    pub fn jacobian_diag(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.m, "penalty dimension mismatch");
        x.iter().map(|&v| self.coord_grad(v)).collect()
    }

    /// Full Jacobian as a dense matrix, for callers that want the matrix
    /// form; prefer [`PenaltyFunction::jacobian_diag`] in inner loops.
    #[must_use]
    pub fn jacobian(&self, x: &[f64]) -> Mat {
        let diag = self.jacobian_diag(x);
        let mut out = Mat::zeros(self.m, self.m);
        for (k, d) in diag.iter().enumerate() {
            out.set(k, k, *d);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist2, norm2, sub};
    use crate::rng::rng_from;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn smooth_max_hand_values() {
        assert_eq!(smooth_max_eval(0.0, 1.0), 0.25);
        assert_eq!(smooth_max_eval(-2.0, 1.0), 0.0);
        assert_eq!(smooth_max_eval(5.0, 1.0), 5.0);
    }

    #[test]
    fn smooth_max_is_continuous_at_the_seams() {
        for mu in [1.0, 0.5, 0.001] {
            let inside = smooth_max_eval(mu, mu);
            assert!((inside - mu).abs() < 1e-15, "upper seam, mu = {mu}");
            assert!(smooth_max_eval(-mu, mu).abs() < 1e-15, "lower seam, mu = {mu}");
            assert!((smooth_max_grad(mu, mu) - 1.0).abs() < 1e-15);
            assert!(smooth_max_grad(-mu, mu).abs() < 1e-15);
        }
    }

    #[test]
    fn smooth_max_grad_hand_values() {
        assert_eq!(smooth_max_grad(0.0, 1.0), 0.5);
        assert_eq!(smooth_max_grad(2.0, 1.0), 1.0);
    }

    #[test]
    fn smooth_max_grad_matches_finite_differences() {
        let mu = 0.5;
        let h = 1e-6;
        for &x in &[0.3, -0.2, 0.45, -0.49, 1.2, -1.2] {
            let fd = (smooth_max_eval(x + h, mu) - smooth_max_eval(x - h, mu)) / (2.0 * h);
            assert!(
                (fd - smooth_max_grad(x, mu)).abs() < 1e-6,
                "x = {x}: fd = {fd}, grad = {}",
                smooth_max_grad(x, mu)
            );
        }
    }

    #[test]
    fn identity_map_is_exact() {
        let f = PenaltyFunction::identity(3);
        let x = [1.0, -2.0, 0.5];
        assert_eq!(f.eval(&x), x.to_vec());
        assert_eq!(f.jacobian_diag(&x), vec![1.0, 1.0, 1.0]);
        assert_eq!(f.lipschitz(), 1.0);
        assert_eq!(f.grad_lipschitz(), 0.0);
        assert!(f.preserves_nonpositivity());
        assert!(!f.is_penalty());

        // Lipschitz ratio is exactly 1 for arbitrary pairs.
        let a = [0.3, -1.0, 2.0];
        let b = [1.3, 0.0, -2.0];
        let num = dist2(&f.eval(&a), &f.eval(&b));
        let den = dist2(&a, &b);
        assert_eq!(num, den);
    }

    #[test]
    fn declared_constants() {
        let f = PenaltyFunction::smooth_max(1, 1.0).unwrap();
        assert_eq!(f.lipschitz(), 1.0);
        assert_eq!(f.grad_lipschitz(), 1.0);

        let f = PenaltyFunction::smooth_max(4, 0.001).unwrap();
        assert_eq!(f.lipschitz(), 2.0);
        assert!((f.grad_lipschitz() - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn vector_evaluation_at_the_seams() {
        let f = PenaltyFunction::smooth_max(2, 1.0).unwrap();
        assert_eq!(f.eval(&[-1.0, 1.0]), vec![0.0, 1.0]);
        assert_eq!(f.jacobian_diag(&[-1.0, 1.0]), vec![0.0, 1.0]);
        let jac = f.jacobian(&[-1.0, 1.0]);
        assert_eq!(jac.at(0, 0), 0.0);
        assert_eq!(jac.at(1, 1), 1.0);
        assert_eq!(jac.at(0, 1), 0.0);
    }

    #[test]
    fn non_positive_mu_is_rejected() {
        assert!(matches!(
            PenaltyFunction::smooth_max(1, 0.0),
            Err(PenaltyError::NonPositiveMu(_))
        ));
        assert!(matches!(
            PenaltyFunction::smooth_max(1, -0.5),
            Err(PenaltyError::NonPositiveMu(_))
        ));
    }

    #[test]
    fn strict_variant_vanishes_on_nonpositive_inputs() {
        let f = PenaltyFunction::smooth_max_strict(1, 0.01).unwrap();
        assert!(f.is_penalty());
        assert!(f.preserves_nonpositivity());
        for &x in &[-5.0, -0.01, -1e-9, 0.0] {
            assert_eq!(f.eval(&[x])[0], 0.0, "x = {x}");
        }
        for &x in &[1e-9, 0.005, 0.02, 3.0] {
            assert!(f.eval(&[x])[0] > 0.0, "x = {x}");
        }
    }

    #[test]
    fn strict_variant_of_each_kind() {
        let sm = PenaltyFunction::smooth_max(2, 0.1).unwrap();
        let strict = sm.strict_variant().unwrap();
        assert!(matches!(strict.kind(), PenaltyKind::SmoothMaxStrict { mu } if *mu == 0.1));
        assert!(PenaltyFunction::identity(2).strict_variant().is_none());
    }

    #[test]
    fn gap_to_plain_max_peaks_at_zero() {
        let mu = 0.02;
        assert!((smooth_max_eval(0.0, mu) - mu / 4.0).abs() < 1e-18);
    }

    #[test]
    fn lipschitz_bound_holds_on_random_vector_pairs() {
        let f = PenaltyFunction::smooth_max(3, 0.05).unwrap();
        let mut rng = rng_from(314);
        for _ in 0..1000 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = dist2(&f.eval(&a), &f.eval(&b));
            assert!(lhs <= f.lipschitz() * dist2(&a, &b) + 1e-12);
            let jl = norm2(&sub(&f.jacobian_diag(&a), &f.jacobian_diag(&b)));
            assert!(jl <= f.grad_lipschitz() * dist2(&a, &b) + 1e-12);
        }
    }

    #[test]
    fn serde_round_trip() {
        for f in [
            PenaltyFunction::identity(2),
            PenaltyFunction::smooth_max(3, 0.001).unwrap(),
            PenaltyFunction::smooth_max_strict(1, 0.5).unwrap(),
        ] {
            let text = serde_json::to_string(&f).unwrap();
            let back: PenaltyFunction = serde_json::from_str(&text).unwrap();
            assert_eq!(back, f);
        }
    }

    proptest! {
        #[test]
        fn smooth_max_stays_within_a_quarter_mu_of_plain_max(
            x in -10.0f64..10.0,
            mu in 1e-4f64..2.0,
        ) {
            let gap = (smooth_max_eval(x, mu) - x.max(0.0)).abs();
            prop_assert!(gap <= mu / 4.0 + 1e-15);
        }

        #[test]
        fn smooth_max_is_convex_by_midpoint_sampling(
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
            mu in 1e-3f64..1.0,
        ) {
            let mid = smooth_max_eval(0.5 * (a + b), mu);
            let chord = 0.5 * (smooth_max_eval(a, mu) + smooth_max_eval(b, mu));
            prop_assert!(mid <= chord + 1e-12);
        }

        #[test]
        fn smooth_max_grad_is_a_nondecreasing_ramp_in_unit_range(
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
            mu in 1e-3f64..1.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (glo, ghi) = (smooth_max_grad(lo, mu), smooth_max_grad(hi, mu));
            prop_assert!((0.0..=1.0).contains(&glo));
            prop_assert!((0.0..=1.0).contains(&ghi));
            prop_assert!(glo <= ghi + 1e-15);
        }

        #[test]
        fn smooth_max_is_nonnegative_and_dominates_x(
            x in -10.0f64..10.0,
            mu in 1e-4f64..2.0,
        ) {
            let v = smooth_max_eval(x, mu);
            prop_assert!(v >= 0.0);
            prop_assert!(v >= x - 1e-15);
        }
    }
}
