//! Helpers shared by the oracle and acceptance targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use polyharm_core::harmonic::{assemble_stiffness, solve_harmonic_function};
use polyharm_core::meshes::square_grid;
use polyharm_core::riemannian::Polyhedron;

/// Cyclic Jacobi eigenvalue iteration for symmetric matrices.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let mut r = DMatrix::identity(n, n);
                r[(p, p)] = c;
                r[(q, q)] = c;
                r[(p, q)] = s;
                r[(q, p)] = -s;
                m = r.transpose() * m * r;
            }
        }
    }
    (0..n).map(|i| m[(i, i)]).collect()
}

/// A uniform grid reproduces x² − y² exactly, so the grid is perturbed.
pub const SADDLE_DISTORTION: f64 = 0.05;

pub fn saddle_sup_error(n: usize) -> f64 {
    let poly = Polyhedron::induced(square_grid(n, SADDLE_DISTORTION)).unwrap();
    let system = assemble_stiffness(&poly).unwrap();
    let exact = |p: &[f64]| p[0] * p[0] - p[1] * p[1];
    let c = poly.complex();
    let boundary: BTreeMap<usize, f64> = (0..c.vertex_count())
        .filter(|&v| system.boundary_flags()[v])
        .map(|v| (v, exact(c.coords(v))))
        .collect();
    let u = solve_harmonic_function(&system, &boundary).unwrap();
    (0..c.vertex_count()).map(|v| (u[v] - exact(c.coords(v))).abs()).fold(0.0, f64::max)
}

