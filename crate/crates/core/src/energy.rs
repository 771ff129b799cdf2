//! Dirichlet energy of PL maps: exact per-simplex energies and the
//! Monte Carlo ε-ball approximation of the energy density.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::PLMap;
use crate::riemannian::{spd_inverse, Polyhedron, SurfacePoint};
use crate::target::{real_jacobian, to_complex, ChartedTarget, HolomorphicMap};

/// Normalization of energy densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `e(φ) = |dφ|²`.
    #[default]
    GradientSquared,
    /// The ε-ball limit `c_m |dφ|²`, with `c_m = ω_m / (m + 2)`.
    KsRaw,
}

/// Volume of the unit ball in `R^m`.
pub fn unit_ball_volume(m: usize) -> f64 {
    // ω_m = π^{m/2} / Γ(m/2 + 1), with the Gamma value from the recursion
    let half = m as f64 / 2.0;
    let gamma = if m.is_multiple_of(2) {
        (1..=m / 2).fold(1.0, |a, k| a * k as f64)
    } else {
        let mut g = PI.sqrt() / 2.0;
        let mut x = 1.5;
        while x < half + 1.0 - 1e-9 {
            g *= x;
            x += 1.0;
        }
        g
    };
    PI.powf(half) / gamma
}

/// `c_m = ω_m / (m + 2)`; `c_2 = π/4`.
pub fn ks_constant(m: usize) -> f64 {
    unit_ball_volume(m) / (m as f64 + 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub normalization: Normalization,
    /// Factor applied to `|dφ|²` (1 or `c_m`).
    pub constant: f64,
    /// Volume-averaged energy density per simplex.
    pub per_simplex_density: Vec<f64>,
    /// Energy of each simplex.
    pub per_simplex: Vec<f64>,
    pub total: f64,
}

/// Density `tr(h(φ) · D g⁻¹ Dᵀ)` from a frame differential.
pub fn energy_density(d: &DMatrix<f64>, g_inv: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    (h * d * g_inv * d.transpose()).trace()
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

fn check_map(poly: &Polyhedron, map: &PLMap, target: &dyn ChartedTarget) -> Result<()> {
    if map.values().len() != poly.complex().vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: poly.complex().vertex_count(),
            got: map.values().len(),
            context: "map vertex values",
        });
    }
    if map.target_dim() != target.real_dim() {
        return Err(Error::DimensionMismatch {
            expected: target.real_dim(),
            got: map.target_dim(),
            context: "map target dimension",
        });
    }
    Ok(())
}

/// Dirichlet energy `∫ e(φ) dμ_g` of a PL map, integrated with the
/// polyhedron's quadrature rule.
pub fn dirichlet_energy(
    poly: &Polyhedron,
    map: &PLMap,
    target: &dyn ChartedTarget,
    normalization: Normalization,
) -> Result<EnergyReport> {
    check_map(poly, map, target)?;
    let complex = poly.complex();
    let reference = 1.0 / factorial(poly.dim());
    let per: Vec<(f64, f64)> = (0..complex.top_count())
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let d = map.reference_differential(complex, t);
            let (mut energy, mut volume) = (0.0, 0.0);
            for (b, w) in poly.quadrature_points(t) {
                let (inv, det) = spd_inverse(&poly.metric_at(t, &b))?;
                let image = map.value_at(complex, t, &b);
                let h = target.metric(&image)?;
                let dv = w * det.sqrt() * reference;
                energy += dv * energy_density(&d, &inv, &h);
                volume += dv;
            }
            Ok((energy, volume))
        })
        .collect::<Result<_>>()?;
    let constant = match normalization {
        Normalization::GradientSquared => 1.0,
        Normalization::KsRaw => ks_constant(poly.dim()),
    };
    let per_simplex: Vec<f64> = per.iter().map(|(e, _)| constant * e).collect();
    let per_simplex_density = per.iter().map(|(e, v)| constant * e / v).collect();
    let total = per_simplex.iter().sum();
    Ok(EnergyReport {
        normalization,
        constant,
        per_simplex_density,
        per_simplex,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    /// `∫_{B(x,ε)} d²(φ(x), φ(y)) / ε^{m+2} dμ(y)`.
    pub value: f64,
    pub std_error: f64,
    /// Distance from `x` to the simplex boundary in the metric `g`.
    pub room: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of the ε-ball energy density at `x`. The ball must
/// stay inside the simplex containing `x`; distances use the target metric
/// frozen at `φ(x)`.
pub fn approx_energy_density(
    poly: &Polyhedron,
    map: &PLMap,
    target: &dyn ChartedTarget,
    x: &SurfacePoint,
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<DensityEstimate> {
    check_map(poly, map, target)?;
    poly.validate_point(x)?;
    if !(epsilon > 0.0) {
        return Err(Error::NonpositiveEpsilon(epsilon));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let m = poly.dim();
    let t = x.simplex;
    let g = poly.metric_at(t, &x.barycentric);
    let (g_inv, _) = spd_inverse(&g)?;
    let mut room = f64::INFINITY;
    for i in 0..=m {
        let dl = if i == 0 {
            DVector::from_element(m, -1.0)
        } else {
            let mut e = DVector::zeros(m);
            e[i - 1] = 1.0;
            e
        };
        let norm = dl.dot(&(&g_inv * &dl)).sqrt();
        room = room.min(x.barycentric[i].max(0.0) / norm);
    }
    if epsilon > room {
        return Err(Error::BallLeavesSimplex { epsilon, room });
    }
    let l_inv_t = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("metric".into()))?
        .l()
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::NotSpd("metric".into()))?;
    let complex = poly.complex();
    let center = map.value_at(complex, t, &x.barycentric);
    let h = target.metric(&center)?;
    let d = map.reference_differential(complex, t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = unit_ball_volume(m);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let dir: DVector<f64> = DVector::from_fn(m, |_, _| rng.sample(StandardNormal));
        let radius = rng.random::<f64>().powf(1.0 / m as f64);
        let w = dir.normalize() * radius;
        let offset = &l_inv_t * w * epsilon;
        // the map is affine on the simplex, so φ(y) − φ(x) = D · offset
        let diff = &d * offset;
        let d2 = diff.dot(&(&h * &diff));
        let sample = omega * d2 / (epsilon * epsilon);
        sum += sample;
        sum_sq += sample * sample;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(DensityEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        room,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeBound {
    /// `E(ψ ∘ φ)`.
    pub composite: f64,
    /// `E(φ)`.
    pub energy: f64,
    /// Largest operator norm of `dψ` over the sampled images.
    pub lipschitz: f64,
    pub holds: bool,
}

/// Checks `E(ψ ∘ φ) ≤ Lip(ψ)² E(φ)` into flat targets, with `dψ` sampled at
/// the images of the quadrature points.
pub fn composite_energy_bound_check(poly: &Polyhedron, map: &PLMap, psi: &dyn HolomorphicMap) -> Result<CompositeBound> {
    if map.target_dim() != 2 * psi.source_dim() {
        return Err(Error::DimensionMismatch {
            expected: 2 * psi.source_dim(),
            got: map.target_dim(),
            context: "map target dimension",
        });
    }
    let complex = poly.complex();
    let reference = 1.0 / factorial(poly.dim());
    let (mut composite, mut energy, mut lipschitz) = (0.0, 0.0, 0.0f64);
    for t in 0..complex.top_count() {
        let d = map.reference_differential(complex, t);
        for (b, w) in poly.quadrature_points(t) {
            let (inv, det) = spd_inverse(&poly.metric_at(t, &b))?;
            let image = map.value_at(complex, t, &b);
            let jac = real_jacobian(&psi.jacobian(&to_complex(&image))?);
            let norm = jac.clone().svd(false, false).singular_values.max();
            lipschitz = lipschitz.max(norm);
            let dv = w * det.sqrt() * reference;
            let cd = &jac * &d;
            composite += dv * (&cd * &inv * cd.transpose()).trace();
            energy += dv * (&d * &inv * d.transpose()).trace();
        }
    }
    let bound = lipschitz * lipschitz * energy;
    Ok(CompositeBound {
        composite,
        energy,
        lipschitz,
        holds: composite <= bound * (1.0 + 1e-12) + 1e-14,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshes::unit_right_triangle;
    use crate::target::FlatC;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((ks_constant(2) - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn identity_energy() {
        let c = unit_right_triangle();
        let poly = Polyhedron::induced(c.clone()).unwrap();
        let map = PLMap::from_fn(&c, |p| p.to_vec()).unwrap();
        let r = dirichlet_energy(&poly, &map, &FlatC::new(1), Normalization::GradientSquared).unwrap();
        assert!((r.total - 1.0).abs() < 1e-14);
        assert!((r.per_simplex_density[0] - 2.0).abs() < 1e-14);
        let k = dirichlet_energy(&poly, &map, &FlatC::new(1), Normalization::KsRaw).unwrap();
        assert!((k.total - PI / 4.0).abs() < 1e-14);
    }

    #[test]
    fn monte_carlo_density() {
        let c = unit_right_triangle();
        let poly = Polyhedron::induced(c.clone()).unwrap();
        let map = PLMap::from_fn(&c, |p| vec![p[0], 2.0 * p[1]]).unwrap();
        let x = SurfacePoint::new(0, vec![1.0 / 3.0; 3]);
        let est = approx_energy_density(&poly, &map, &FlatC::new(1), &x, 0.1, 20000, 42).unwrap();
        // c_2 |dφ|² = π/4 · 5
        let exact = PI / 4.0 * 5.0;
        assert!((est.value - exact).abs() < 4.0 * est.std_error + 1e-3, "{est:?}");
        assert!(matches!(
            approx_energy_density(&poly, &map, &FlatC::new(1), &x, 0.5, 10, 42),
            Err(Error::BallLeavesSimplex { .. })
        ));
        assert!(matches!(
            approx_energy_density(&poly, &map, &FlatC::new(1), &x, 0.0, 10, 42),
            Err(Error::NonpositiveEpsilon(_))
        ));
    }
}
