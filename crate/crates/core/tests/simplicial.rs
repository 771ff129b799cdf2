use polyharm_core::meshes::{book, bowtie, cone, flat_torus, rect_grid, two_triangles, unit_cube, unit_right_triangle};
use polyharm_core::simplicial::{build_complex, Simplex};
use polyharm_core::Error;
use proptest::prelude::*;

#[test]
fn single_triangle_counts() {
    let c = unit_right_triangle();
    assert_eq!(c.dim(), 2);
    assert_eq!(c.faces(1).len(), 3);
    assert_eq!(c.vertex_count(), 3);
    assert_eq!(c.boundary_faces().len(), 3);
}

#[test]
fn glued_triangles_counts() {
    let c = two_triangles();
    let interior: Vec<_> = c.faces(1).iter().filter(|e| !c.is_boundary_face(e).unwrap()).collect();
    assert_eq!(interior, vec![&Simplex::new(vec![1, 2]).unwrap()]);
    assert_eq!(c.boundary_faces().len(), 4);
}

#[test]
fn construction_errors() {
    let v = vec![vec![0.0, 0.0]; 5];
    assert!(matches!(
        build_complex(v.clone(), vec![vec![0, 1, 2], vec![3, 4]]),
        Err(Error::MixedDimension { .. })
    ));
    assert!(matches!(
        build_complex(v.clone(), vec![vec![0, 1, 2], vec![2, 1, 0], vec![2, 3, 4]]),
        Err(Error::DuplicateSimplex(_))
    ));
    assert!(matches!(
        build_complex(v.clone(), vec![vec![0, 1, 7]]),
        Err(Error::DanglingVertexRef { vertex: 7, .. })
    ));
    assert!(matches!(
        build_complex(v[..4].to_vec(), vec![vec![0, 1], vec![2, 3]]),
        Err(Error::Disconnected { .. })
    ));
    assert!(matches!(build_complex(vec![], vec![]), Err(Error::EmptyInput(_))));
}

#[test]
fn stars() {
    let c = two_triangles();
    let top = Simplex::new(vec![0, 1, 2]).unwrap();
    assert_eq!(c.star(&top).unwrap(), vec![top.clone()]);
    let edge = Simplex::new(vec![1, 2]).unwrap();
    assert_eq!(c.star(&edge).unwrap().len(), 3);
    let fan = cone(5);
    let star = fan.star(&Simplex::vertex(0)).unwrap();
    assert_eq!(star.iter().filter(|s| s.dim() == 2).count(), 5);
    assert_eq!(star.iter().filter(|s| s.dim() == 1).count(), 5);
    assert_eq!(star.iter().filter(|s| s.dim() == 0).count(), 1);
    assert!(matches!(c.star(&Simplex::new(vec![0, 3]).unwrap()), Err(Error::UnknownSimplex(_))));
}

#[test]
fn links() {
    let grid = rect_grid(2, 2, (0.0, 1.0), (0.0, 1.0));
    let link = grid.link(4).unwrap();
    assert_eq!(link.complex.dim(), 1);
    assert!(link.complex.is_connected());
    assert!(link.complex.boundary_faces().is_empty());
    let tri = unit_right_triangle().link(0).unwrap();
    assert_eq!(tri.complex.top_count(), 1);
    let hex = cone(6).link(0).unwrap();
    assert_eq!(hex.vertex_ids.len(), 6);
    assert_eq!(hex.complex.top_count(), 6);
    assert!(matches!(unit_right_triangle().link(9), Err(Error::UnknownVertex(9))));
}

#[test]
fn admissibility_examples() {
    let r = bowtie().check_admissible();
    assert!(r.homogeneous && !r.chainable);
    assert_eq!(r.witnesses.len(), 1);
    assert_eq!(r.witnesses[0].simplex, Simplex::vertex(2));
    assert!(book(3).check_admissible().admissible());
    let torus = flat_torus(4, 4, 1.0, 1.0);
    assert!(torus.complex.check_admissible().admissible());
    assert!(torus.complex.boundary_faces().is_empty());
    assert!(unit_cube().check_admissible().admissible());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn grids_are_admissible(nx in 1usize..6, ny in 1usize..6) {
        let c = rect_grid(nx, ny, (0.0, 1.0), (0.0, 2.0));
        let r = c.check_admissible();
        prop_assert!(r.homogeneous && r.chainable);
        for v in c.interior_vertices() {
            prop_assert!(c.link(v).unwrap().complex.is_connected());
        }
    }

    #[test]
    fn stars_are_monotone(nx in 1usize..4, ny in 1usize..4, pick in 0usize..1000) {
        let c = rect_grid(nx, ny, (0.0, 1.0), (0.0, 1.0));
        let edges = c.faces(1);
        let e = &edges[pick % edges.len()];
        let star_e = c.star(e).unwrap();
        for &v in e.vertices() {
            let star_v = c.star(&Simplex::vertex(v)).unwrap();
            for s in &star_e {
                prop_assert!(star_v.contains(s));
            }
        }
    }

    #[test]
    fn tori_are_admissible(nx in 3usize..7, ny in 3usize..7) {
        let t = flat_torus(nx, ny, 1.0, 1.0);
        prop_assert!(t.complex.check_admissible().admissible());
        prop_assert_eq!(t.complex.top_count(), 2 * nx * ny);
    }
}
