//! Continuous piecewise-linear fits with a single junction.

use nalgebra::{Matrix3, Vector3};

/// Result of an exhaustive one-junction fit.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionFit {
    /// Index of the junction point.
    pub junction: usize,
    /// Weighted squared error at the chosen junction.
    pub cost: f64,
    /// Cost of every candidate, indexed like the input (`NaN` for non-candidates).
    pub costs: Vec<f64>,
    /// Cost of the best single straight line, for degeneracy checks.
    pub line_cost: f64,
}

fn weighted_cost(y: &[f64], weights: &[f64], model: impl Fn(usize) -> f64) -> f64 {
    y.iter()
        .zip(weights)
        .enumerate()
        .map(|(j, (&yj, &w))| w * (yj - model(j)).powi(2))
        .sum()
}

fn line_fit_cost(y: &[f64], weights: &[f64]) -> f64 {
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (j, (&yj, &w)) in y.iter().zip(weights).enumerate() {
        let x = j as f64;
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
        t0 += w * yj;
        t1 += w * x * yj;
    }
    let det = s0 * s2 - s1 * s1;
    if det.abs() <= f64::EPSILON * s0 * s2 {
        return f64::INFINITY;
    }
    let b = (s0 * t1 - s1 * t0) / det;
    let a = (t0 - b * s1) / s0;
    weighted_cost(y, weights, |j| a + b * j as f64)
}

/// Cost of the best continuous two-segment fit with the junction at `c`:
/// `r(j) = a + b1 * min(j - c, 0) + b2 * max(j - c, 0)`.
pub fn junction_cost(y: &[f64], weights: &[f64], c: usize) -> f64 {
    let basis = |j: usize| {
        let d = j as f64 - c as f64;
        Vector3::new(1.0, d.min(0.0), d.max(0.0))
    };
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (j, (&yj, &w)) in y.iter().zip(weights).enumerate() {
        if w == 0.0 {
            continue;
        }
        let phi = basis(j);
        normal += w * phi * phi.transpose();
        rhs += w * yj * phi;
    }
    let Some(coef) = normal.lu().solve(&rhs) else {
        return f64::INFINITY;
    };
    if !coef.iter().all(|v| v.is_finite()) {
        return f64::INFINITY;
    }
    weighted_cost(y, weights, |j| basis(j).dot(&coef))
}

/// Exhaustive search over interior junction candidates `1..n-1`.
/// Ties resolve to the lowest index. Returns `None` for fewer than 3 points.
pub fn fit_one_junction(y: &[f64], weights: &[f64]) -> Option<JunctionFit> {
    let n = y.len();
    if n < 3 || weights.len() != n {
        return None;
    }
    let mut costs = vec![f64::NAN; n];
    let mut best: Option<(usize, f64)> = None;
    for c in 1..n - 1 {
        let cost = junction_cost(y, weights, c);
        costs[c] = cost;
        if best.is_none_or(|(_, b)| cost < b) {
            best = Some((c, cost));
        }
    }
    let (junction, cost) = best?;
    Some(JunctionFit {
        junction,
        cost,
        costs,
        line_cost: line_fit_cost(y, weights),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_kink_is_found() {
        let y: Vec<f64> = (0..40)
            .map(|j| {
                if j <= 12 {
                    5.0 * j as f64
                } else {
                    60.0 + 0.5 * (j - 12) as f64
                }
            })
            .collect();
        let w = vec![1.0; y.len()];
        let fit = fit_one_junction(&y, &w).unwrap();
        assert_eq!(fit.junction, 12);
        assert!(fit.cost < 1e-18);
        assert!(fit.line_cost > 1.0);
    }

    #[test]
    fn chosen_cost_is_minimal() {
        let y: Vec<f64> = (0..30).map(|j| ((j as f64) * 0.7).sin() + j as f64).collect();
        let w: Vec<f64> = y.iter().map(|v| 1.0 / (v * v + 1.0)).collect();
        let fit = fit_one_junction(&y, &w).unwrap();
        for c in 1..29 {
            assert!(fit.cost <= junction_cost(&y, &w, c));
        }
    }
}
