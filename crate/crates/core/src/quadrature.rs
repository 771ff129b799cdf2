//! Quadrature rules on the reference simplex.
//!
//! Points are barycentric coordinates; weights sum to one, so a rule
//! returns the *mean* of the integrand and callers multiply by volume.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureOrder {
    /// Single barycenter point, exact for affine integrands.
    #[default]
    Barycenter,
    /// n+1 interior points, exact for quadratics.
    Degree2,
    /// Grundmann-Möller rule of odd degree `2s + 1`.
    GrundmannMoller(u32),
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(order: QuadratureOrder, dim: usize) -> Self {
        match order {
            QuadratureOrder::Barycenter => Self::barycenter(dim),
            QuadratureOrder::Degree2 => Self::degree2(dim),
            QuadratureOrder::GrundmannMoller(s) => Self::grundmann_moller(dim, s as usize),
        }
    }

    pub fn barycenter(dim: usize) -> Self {
        Self {
            points: vec![vec![1.0 / (dim + 1) as f64; dim + 1]],
            weights: vec![1.0],
        }
    }

    pub fn degree2(dim: usize) -> Self {
        let n = dim as f64;
        let root = (n + 2.0).sqrt();
        let a = (n + 2.0 - root) / ((n + 2.0) * (n + 1.0));
        let b = (n + 2.0 + n * root) / ((n + 2.0) * (n + 1.0));
        let points = (0..=dim)
            .map(|k| (0..=dim).map(|i| if i == k { b } else { a }).collect())
            .collect();
        Self {
            points,
            weights: vec![1.0 / (dim + 1) as f64; dim + 1],
        }
    }

    /// Grundmann-Möller rule of degree `2s + 1` on the `dim`-simplex.
    pub fn grundmann_moller(dim: usize, s: usize) -> Self {
        let n = dim;
        let d = 2 * s + 1;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for i in 0..=s {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let denom = (d + n - 2 * i) as f64;
            // w_i = (-1)^i 2^{-2s} (d + n - 2i)^d / (i! (d + n - i)!) * n!
            let mut w = sign * 2f64.powi(-(2 * s as i32)) * denom.powi(d as i32);
            w /= factorial(i) * factorial(d + n - i);
            w *= factorial(n);
            for beta in compositions(s - i, n + 1) {
                let point = beta
                    .iter()
                    .map(|&b| (2 * b + 1) as f64 / denom)
                    .collect::<Vec<_>>();
                points.push(point);
                weights.push(w);
            }
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, v| acc * v as f64)
}

/// All ways to write `total` as an ordered sum of `parts` nonnegative integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // mean of x^a y^b over the unit right triangle: 2 a! b! / (a+b+2)!
    fn monomial_mean(a: u32, b: u32) -> f64 {
        2.0 * factorial(a as usize) * factorial(b as usize) / factorial((a + b + 2) as usize)
    }

    fn apply(rule: &QuadratureRule, a: u32, b: u32) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
            .sum()
    }

    #[test]
    fn weights_sum_to_one() {
        for dim in 1..=4 {
            for order in [
                QuadratureOrder::Barycenter,
                QuadratureOrder::Degree2,
                QuadratureOrder::GrundmannMoller(2),
            ] {
                let rule = QuadratureRule::new(order, dim);
                let total: f64 = rule.weights.iter().sum();
                assert!((total - 1.0).abs() < 1e-12, "{order:?} dim {dim}");
                for p in &rule.points {
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn degree2_is_exact_for_quadratics() {
        let rule = QuadratureRule::degree2(2);
        for (a, b) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
            assert!((apply(&rule, a, b) - monomial_mean(a, b)).abs() < 1e-14);
        }
    }

    #[test]
    fn grundmann_moller_exact_to_its_degree() {
        for s in 0..4u32 {
            let rule = QuadratureRule::grundmann_moller(2, s as usize);
            for a in 0..=(2 * s + 1) {
                for b in 0..=(2 * s + 1 - a) {
                    let err = (apply(&rule, a, b) - monomial_mean(a, b)).abs();
                    assert!(err < 1e-13, "s={s} a={a} b={b} err={err}");
                }
            }
        }
    }
}
