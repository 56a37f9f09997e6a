//! Euclidean projections onto the feasible sets used by the bundled
//! problems.

/// Projects onto the probability simplex `{ x >= 0, sum x = 1 }`.
///
/// Sort-based: with coordinates in descending order, the largest `k` such
/// that `v_k - (sum of top k - 1) / k > 0` determines the support; the
/// threshold is the mean excess over that support.
#[must_use]
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite coordinates"));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    let mut support = 0;
    for (k, &value) in sorted.iter().enumerate() {
        cumulative += value;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if value - candidate > 0.0 {
            tau = candidate;
            support = k + 1;
        }
    }
    debug_assert!(support > 0, "simplex projection support is never empty");
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Projects onto the centered box `[-radius, radius]^n`.
#[must_use]
pub fn project_box(v: &[f64], radius: f64) -> Vec<f64> {
    debug_assert!(radius >= 0.0);
    v.iter().map(|&x| x.clamp(-radius, radius)).collect()
}

/// Projects onto the interval box given by `(lo, hi)` pairs.
#[must_use]
pub fn project_intervals(v: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    debug_assert_eq!(v.len(), bounds.len());
    v.iter().zip(bounds).map(|(&x, &(lo, hi))| x.clamp(lo, hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dist2;
    use crate::rng::rng_from;
    use rand::Rng;

    /// Exact simplex projection by enumerating KKT support sets; exponential
    /// in the dimension, used only as an oracle.
    fn simplex_projection_by_support_enumeration(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        for mask in 1u32..(1 << n) {
            let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let sum: f64 = support.iter().map(|&i| v[i]).sum();
            let tau = (sum - 1.0) / support.len() as f64;
            let candidate: Vec<f64> =
                (0..n).map(|i| if mask & (1 << i) != 0 { v[i] - tau } else { 0.0 }).collect();
            let interior_ok = support.iter().all(|&i| candidate[i] > -1e-15);
            let exterior_ok =
                (0..n).all(|i| mask & (1 << i) != 0 || v[i] - tau <= 1e-15);
            if interior_ok && exterior_ok {
                return candidate;
            }
        }
        unreachable!("some support set always satisfies the optimality conditions");
    }

    #[test]
    fn points_already_on_the_simplex_are_fixed() {
        let p = project_simplex(&[0.5, 0.5, 0.0]);
        assert!(dist2(&p, &[0.5, 0.5, 0.0]) < 1e-15);
    }

    #[test]
    fn symmetric_point_projects_to_uniform() {
        let p = project_simplex(&[1.0, 1.0, 1.0]);
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dominant_coordinate_saturates() {
        let p = project_simplex(&[2.0, 0.0, 0.0]);
        assert!(dist2(&p, &[1.0, 0.0, 0.0]) < 1e-15);
    }

    #[test]
    fn matches_support_enumeration_oracle() {
        let mut rng = rng_from(2024);
        for dim in 2..=4 {
            for _ in 0..200 {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
                let fast = project_simplex(&v);
                let oracle = simplex_projection_by_support_enumeration(&v);
                assert!(
                    dist2(&fast, &oracle) < 1e-10,
                    "v = {v:?}: fast = {fast:?}, oracle = {oracle:?}"
                );
            }
        }
    }

    #[test]
    fn simplex_projection_is_idempotent_and_feasible() {
        let mut rng = rng_from(99);
        for _ in 0..500 {
            let v: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = project_simplex(&v);
            let total: f64 = p.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&x| x >= 0.0));
            let pp = project_simplex(&p);
            assert!(dist2(&p, &pp) < 1e-12);
        }
    }

    #[test]
    fn projections_are_nonexpansive() {
        let mut rng = rng_from(123);
        for _ in 0..500 {
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert!(
                dist2(&project_simplex(&a), &project_simplex(&b)) <= dist2(&a, &b) + 1e-12
            );
            assert!(
                dist2(&project_box(&a, 1.5), &project_box(&b, 1.5)) <= dist2(&a, &b) + 1e-12
            );
        }
    }

    #[test]
    fn box_projection_clamps() {
        assert_eq!(project_box(&[2.0, -3.0, 0.25], 1.0), vec![1.0, -1.0, 0.25]);
        assert_eq!(project_intervals(&[2.0, -3.0], &[(0.0, 1.0), (-0.5, 0.5)]), vec![1.0, -0.5]);
    }
}
