use std::sync::Arc;

use nalgebra::DMatrix;
use polyharm_core::meshes::{square_grid, two_triangles, unit_right_triangle};
use polyharm_core::quadrature::QuadratureOrder;
use polyharm_core::riemannian::{ellipticity_constant, Polyhedron, SurfacePoint};
use polyharm_core::simplicial::build_complex;
use polyharm_core::Error;
use proptest::prelude::*;

fn diag(a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
}

#[test]
fn ellipticity_examples() {
    assert_eq!(ellipticity_constant(&DMatrix::identity(3, 3)).unwrap(), 1.0);
    assert_eq!(ellipticity_constant(&diag(4.0, 0.25)).unwrap(), 2.0);
    assert!(matches!(ellipticity_constant(&diag(1.0, -1.0)), Err(Error::NotSpd(_))));
}

#[test]
fn volumes() {
    let id = Polyhedron::induced(unit_right_triangle()).unwrap();
    assert_eq!(id.simplex_volume(0).unwrap(), 0.5);
    let four = Polyhedron::constant(unit_right_triangle(), vec![diag(4.0, 4.0)]).unwrap();
    assert_eq!(four.simplex_volume(0).unwrap(), 2.0);
    let smooth = Polyhedron::smooth(
        unit_right_triangle(),
        Arc::new(|_, _, p: &[f64]| DMatrix::identity(2, 2) * (1.0 + p[0] * p[0])),
        QuadratureOrder::Degree2,
    );
    // ∫_T (1 + x²) = 1/2 + 1/12
    assert!((smooth.total_volume().unwrap() - 7.0 / 12.0).abs() < 1e-14);
}

#[test]
fn gradient_pairings() {
    let id = Polyhedron::induced(unit_right_triangle()).unwrap();
    assert_eq!(id.gradient_inner(0, &[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
    let g = Polyhedron::constant(unit_right_triangle(), vec![diag(4.0, 0.25)]).unwrap();
    assert_eq!(g.gradient_inner(0, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    assert_eq!(g.gradient_inner(0, &[1.0, 1.0], &[1.0, 1.0]).unwrap(), 4.25);
}

#[test]
fn square_diagonal_distance() {
    let poly = Polyhedron::induced(two_triangles()).unwrap();
    let c = poly.complex();
    let (x, y) = (SurfacePoint::at_vertex(c, 0).unwrap(), SurfacePoint::at_vertex(c, 3).unwrap());
    let d = poly.intrinsic_distance(&x, &y, 4).unwrap();
    assert!((d.upper_bound - 2f64.sqrt()).abs() < 2e-2);
    assert_eq!(poly.intrinsic_distance(&x, &x, 2).unwrap().upper_bound, 0.0);
}

#[test]
fn bent_pair_matches_unfolding() {
    // the second triangle is folded up along {1, 2}; unfolded, vertex 3 sits at (1, 1)
    let h = 0.5f64.sqrt();
    let c = build_complex(
        vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.5, 0.5, h]],
        vec![vec![0, 1, 2], vec![1, 2, 3]],
    )
    .unwrap();
    let poly = Polyhedron::induced(c).unwrap();
    let x = SurfacePoint::new(0, vec![0.6, 0.2, 0.2]);
    let y = SurfacePoint::new(1, vec![0.2, 0.2, 0.6]);
    // unfolded: x = (0.2, 0.2), y = 0.2·(1,0) + 0.2·(0,1) + 0.6·(1,1)
    let unfolded = ((0.8f64 - 0.2).powi(2) * 2.0).sqrt();
    let d = poly.intrinsic_distance(&x, &y, 4).unwrap().upper_bound;
    assert!(d >= unfolded - 1e-12 && d - unfolded < 2e-2, "{d} vs {unfolded}");
}

#[test]
fn distance_is_monotone_in_level() {
    let poly = Polyhedron::induced(square_grid(4, 0.1)).unwrap();
    let c = poly.complex();
    let x = SurfacePoint::at_vertex(c, 0).unwrap();
    let y = SurfacePoint::at_vertex(c, c.vertex_count() - 1).unwrap();
    let ds: Vec<f64> = (0..=4).map(|l| poly.intrinsic_distance(&x, &y, l).unwrap().upper_bound).collect();
    for w in ds.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{ds:?}");
    }
    assert!((ds[4] - 2f64.sqrt()).abs() < 2e-2, "{ds:?}");
}

#[test]
fn off_complex_points_rejected() {
    let poly = Polyhedron::induced(two_triangles()).unwrap();
    let good = SurfacePoint::at_vertex(poly.complex(), 0).unwrap();
    for bad in [SurfacePoint::new(5, vec![1.0, 0.0, 0.0]), SurfacePoint::new(0, vec![0.5, 0.6, -0.1])] {
        assert!(matches!(poly.intrinsic_distance(&good, &bad, 1), Err(Error::PointOffComplex(_))));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn scaling_the_metric(c in 0.2f64..5.0, a in 0usize..25, b in 0usize..25) {
        let poly = Polyhedron::induced(square_grid(4, 0.1)).unwrap();
        let scaled = poly.scaled(c * c);
        let cx = poly.complex();
        let (x, y) = (SurfacePoint::at_vertex(cx, a).unwrap(), SurfacePoint::at_vertex(cx, b).unwrap());
        let d = poly.intrinsic_distance(&x, &y, 1).unwrap().upper_bound;
        let ds = scaled.intrinsic_distance(&x, &y, 1).unwrap().upper_bound;
        prop_assert!((ds - c * d).abs() <= 1e-12 * ds.max(1.0));
        let v = poly.total_volume().unwrap();
        prop_assert!((scaled.total_volume().unwrap() - c * c * v).abs() <= 1e-12 * v * c * c);
    }

    #[test]
    fn symmetry_and_triangle_inequality(a in 0usize..25, b in 0usize..25, m in 0usize..25) {
        let poly = Polyhedron::induced(square_grid(4, 0.1)).unwrap();
        let c = poly.complex();
        let p = |v| SurfacePoint::at_vertex(c, v).unwrap();
        let d = |u: usize, v: usize| poly.intrinsic_distance(&p(u), &p(v), 1).unwrap().upper_bound;
        prop_assert!((d(a, b) - d(b, a)).abs() < 1e-12);
        prop_assert!(d(a, b) <= d(a, m) + d(m, b) + 1e-12);
    }

    #[test]
    fn random_spd_metrics_are_elliptic(a in 0.1f64..10.0, b in 0.1f64..10.0, t in 0.0f64..6.3) {
        let r = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let g = &r * diag(a, b) * r.transpose();
        let g = (&g + g.transpose()) * 0.5;
        let lam = ellipticity_constant(&g).unwrap();
        let expected = a.max(b).sqrt().max(1.0 / a.min(b).sqrt());
        prop_assert!((lam - expected).abs() < 1e-12 * expected);
    }
}
