use std::collections::BTreeMap;

use polyharm_core::energy::{dirichlet_energy, Normalization};
use polyharm_core::harmonic::*;
use polyharm_core::maps::PLMap;
use polyharm_core::meshes::{bowtie, rect_grid, square_grid, two_triangles, unit_right_triangle};
use polyharm_core::riemannian::Polyhedron;
use polyharm_core::target::{FlatC, FubiniStudyCp1};
use polyharm_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn system(n: usize, distortion: f64) -> StiffnessSystem {
    assemble_stiffness(&Polyhedron::induced(square_grid(n, distortion)).unwrap()).unwrap()
}

fn scalar_boundary(s: &StiffnessSystem, f: impl Fn(&[f64]) -> f64) -> BTreeMap<usize, f64> {
    let c = s.polyhedron().complex();
    (0..c.vertex_count()).filter(|&v| s.boundary_flags()[v]).map(|v| (v, f(c.coords(v)))).collect()
}

fn map_boundary(s: &StiffnessSystem, f: impl Fn(&[f64]) -> Vec<f64>) -> BoundaryData {
    let c = s.polyhedron().complex();
    (0..c.vertex_count()).filter(|&v| s.boundary_flags()[v]).map(|v| (v, f(c.coords(v)))).collect()
}

#[test]
fn right_triangle_cotangent_weights() {
    let s = assemble_stiffness(&Polyhedron::induced(unit_right_triangle()).unwrap()).unwrap();
    let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    let d = s.dense();
    for i in 0..3 {
        for j in 0..3 {
            assert!((d[(i, j)] - expected[i][j]).abs() < 1e-15);
        }
    }
}

#[test]
fn conformal_scaling_and_row_sums() {
    let poly = Polyhedron::induced(two_triangles()).unwrap();
    let a = assemble_stiffness(&poly).unwrap().dense();
    let b = assemble_stiffness(&poly.scaled(9.0)).unwrap().dense();
    assert!((&a - &b).amax() < 1e-14);
    for i in 0..a.nrows() {
        assert!(a.row(i).sum().abs() < 1e-14);
        for j in 0..a.ncols() {
            assert_eq!(a[(i, j)], a[(j, i)]);
        }
    }
}

#[test]
fn constant_and_affine_data_are_reproduced() {
    let s = system(8, 0.1);
    let c = s.polyhedron().complex();
    let u = solve_harmonic_function(&s, &scalar_boundary(&s, |_| 2.5)).unwrap();
    assert!(u.iter().all(|x| (x - 2.5).abs() < 1e-12));
    let u = solve_harmonic_function(&s, &scalar_boundary(&s, |p| p[0] + 2.0 * p[1])).unwrap();
    for v in 0..c.vertex_count() {
        let p = c.coords(v);
        assert!((u[v] - p[0] - 2.0 * p[1]).abs() < 1e-12);
    }
    let map = PLMap::from_fn(c, |p| vec![p[0] + 2.0 * p[1], 3.0 * p[0] - p[1]]).unwrap();
    let r = weak_harmonic_residual(&s, &FlatC::new(1), &map).unwrap();
    assert!(r.inf_norm <= 1e-12);
}

#[test]
fn flat_solve_is_per_component_linear_solve() {
    let s = system(6, 0.1);
    let g = |p: &[f64]| vec![p[0] * p[0] - p[1], (3.0 * p[1]).sin()];
    let sol = solve_harmonic_map(&s, &FlatC::new(1), &map_boundary(&s, g), &SolverOptions::default()).unwrap();
    for k in 0..2 {
        let u = solve_harmonic_function(&s, &scalar_boundary(&s, |p| g(p)[k])).unwrap();
        let got = sol.map.component(k);
        assert!(u.iter().zip(&got).all(|(a, b)| (a - b).abs() < 1e-12));
    }
    assert!(sol.iterations <= 1);
}

#[test]
fn constant_boundary_into_cp1_is_constant() {
    let s = system(6, 0.0);
    let sol = solve_harmonic_map(&s, &FubiniStudyCp1, &map_boundary(&s, |_| vec![0.4, -0.2]), &SolverOptions::default()).unwrap();
    assert!(sol.map.values().iter().all(|v| (v[0] - 0.4).abs() < 1e-12 && (v[1] + 0.2).abs() < 1e-12));
    let r = weak_harmonic_residual(&s, &FubiniStudyCp1, &sol.map).unwrap();
    assert!(r.inf_norm < 1e-12);
}

#[test]
fn solution_minimizes_energy() {
    let s = system(6, 0.1);
    let g = |p: &[f64]| vec![p[0] * p[1], p[0] - p[1] * p[1]];
    let sol = solve_harmonic_map(&s, &FlatC::new(1), &map_boundary(&s, g), &SolverOptions::default()).unwrap();
    let poly = s.polyhedron();
    let e0 = dirichlet_energy(poly, &sol.map, &FlatC::new(1), Normalization::GradientSquared).unwrap().total;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let interior = s.interior_vertices();
    for _ in 0..100 {
        let mut m = sol.map.clone();
        for &v in &interior {
            let x = m.value(v).to_vec();
            m.set_value(v, x.iter().map(|a| a + rng.random_range(-0.05..0.05)).collect());
        }
        let e = dirichlet_energy(poly, &m, &FlatC::new(1), Normalization::GradientSquared).unwrap().total;
        assert!(e >= e0 - 1e-12, "{e} < {e0}");
    }
}

#[test]
fn residual_grows_linearly_under_perturbation() {
    let s = system(6, 0.1);
    let sol = solve_harmonic_map(&s, &FlatC::new(1), &map_boundary(&s, |p| vec![p[0], p[1] * p[1]]), &SolverOptions::default()).unwrap();
    let v = s.interior_vertices()[3];
    let norms: Vec<f64> = [1e-3, 2e-3, 4e-3]
        .iter()
        .map(|&d| {
            let mut m = sol.map.clone();
            let x = m.value(v).to_vec();
            m.set_value(v, vec![x[0] + d, x[1]]);
            weak_harmonic_residual(&s, &FlatC::new(1), &m).unwrap().inf_norm
        })
        .collect();
    assert!((norms[1] / norms[0] - 2.0).abs() < 1e-6);
    assert!((norms[2] / norms[1] - 2.0).abs() < 1e-6);
}

#[test]
fn maximum_principle_on_acute_mesh() {
    let s = assemble_stiffness(&Polyhedron::induced(rect_grid(8, 8, (0.0, 1.0), (0.0, 1.0))).unwrap()).unwrap();
    let u = solve_harmonic_function(&s, &scalar_boundary(&s, |p| (4.0 * p[0]).sin() * p[1])).unwrap();
    let r = maximum_principle_report(&s, &u);
    assert!(r.nonnegative_weights);
    assert!(r.holds);
    assert!(r.interior_max <= r.boundary_max && r.interior_min >= r.boundary_min);
}

#[test]
fn solver_errors() {
    let s = system(4, 0.0);
    let mut b = scalar_boundary(&s, |_| 1.0);
    let first = *b.keys().next().unwrap();
    b.remove(&first);
    assert!(matches!(solve_harmonic_function(&s, &b), Err(Error::MissingBoundaryValues(v)) if v == first));
    let closed = polyharm_core::meshes::flat_torus(4, 4, 1.0, 1.0);
    let t = assemble_stiffness(&Polyhedron::induced(closed.complex).unwrap()).unwrap();
    assert!(matches!(
        solve_harmonic_map(&t, &FlatC::new(1), &BoundaryData::new(), &SolverOptions::default()),
        Err(Error::SingularSystem(_))
    ));
    assert!(matches!(assemble_stiffness(&Polyhedron::induced(bowtie()).unwrap()), Err(Error::NotAdmissible(_))));
}
