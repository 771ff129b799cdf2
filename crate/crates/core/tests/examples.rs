use polyharm_core::examples::*;
use polyharm_core::maps::{AnalyticMap, LinearMap};
use polyharm_core::meshes::{flat_torus, rect_grid};
use polyharm_core::morphism::{factorization_suite, phm_check, Tolerances};
use polyharm_core::riemannian::Polyhedron;
use polyharm_core::target::{standard_family, FlatC};
use polyharm_core::Error;
use nalgebra::DMatrix;

fn standard() -> EtaMap {
    build_eta(EtaSpec::standard()).unwrap()
}

#[test]
fn standard_eta_passes_suite() {
    let eta = standard();
    let pts = annulus_points(4, 100, 42);
    let r = eta_phwc_suite(&eta, &pts, &eta.holomorphic_vars()).unwrap();
    assert!(r.passes, "{r:?}");
    assert!(r.gradient_fd_error < 1e-6);
    assert!(r.cr_holomorphic_vars < 1e-6);
    assert!(r.cr_full > 0.1 && r.anti_cr_full > 0.1);
    assert!(!r.holomorphic && !r.antiholomorphic);
}

#[test]
fn holomorphic_instance_is_flagged() {
    let eta = build_eta(EtaSpec::holomorphic()).unwrap();
    assert!(eta.is_holomorphic());
    let r = eta_phwc_suite(&eta, &annulus_points(4, 20, 42), &eta.holomorphic_vars()).unwrap();
    assert!(r.passes && r.holomorphic && !r.antiholomorphic);
}

#[test]
fn cyclic_instances_pass() {
    for (k, s, r) in [(2, 3, 2), (3, 2, 3)] {
        let eta = build_eta(EtaSpec::cyclic(k, s, r).unwrap()).unwrap();
        let rep = eta_phwc_suite(&eta, &annulus_points(k + s, 20, 42), &eta.holomorphic_vars()).unwrap();
        assert!(rep.passes, "{k} {s} {r}: {rep:?}");
    }
}

#[test]
fn conjugated_pq_conjugates_in_v() {
    let mut spec = EtaSpec::standard();
    let c = num_complex::Complex64::new(0.3, 1.2);
    spec.components[0].p = polyharm_core::target::Polynomial::new(
        2,
        vec![(c, vec![1, 0]), (num_complex::Complex64::new(-0.5, 0.25), vec![0, 1])],
    )
    .unwrap();
    let eta = build_eta(spec.clone()).unwrap();
    let conj = build_eta(spec.conjugate_pq()).unwrap();
    for p in annulus_points(4, 10, 7) {
        // flip the sign of Im v
        let mut q = p.clone();
        q[6] = -q[6];
        q[7] = -q[7];
        let a = eta.complex_value(&p).unwrap()[0];
        let b = conj.complex_value(&q).unwrap()[0];
        let ab = a / (num_complex::Complex64::new(p[0], p[4]) / num_complex::Complex64::new(p[1], p[5]));
        let bb = b / (num_complex::Complex64::new(p[0], p[4]) / num_complex::Complex64::new(p[1], p[5]));
        assert!((ab - bb.conj()).norm() < 1e-12);
    }
}

#[test]
fn sum_of_two_etas() {
    let (a, b) = (standard(), standard());
    let sum = sum_map(&a, &b).unwrap();
    assert_eq!(sum.domain_dim(), 16);
    let pts = annulus_points(8, 100, 42);
    let vars: Vec<usize> = vec![0, 1, 4, 5];
    let r = eta_phwc_suite(&sum, &pts, &vars).unwrap();
    assert!(r.passes, "{r:?}");
    for p in pts.iter().take(10) {
        let (ra, rb) = sum.block_residuals(p).unwrap();
        let total = polyharm_core::morphism::phwc_of_gram(&{
            let j = sum.jacobian(p).unwrap();
            &j * j.transpose()
        });
        assert!(total <= ra + rb + 1e-10);
    }
}

#[test]
fn sum_with_zero_reduces() {
    let a = standard();
    let z = ZeroMap { domain: 8, target: 2 };
    let sum = sum_map(&a, &z).unwrap();
    for p in annulus_points(8, 5, 3) {
        let first: Vec<f64> = p[..4].iter().chain(&p[8..12]).copied().collect();
        assert_eq!(sum.value(&p).unwrap(), a.value(&first).unwrap());
    }
}

#[test]
fn sum_localizes_planted_violation() {
    let a = standard();
    let mut m = DMatrix::zeros(2, 8);
    m[(0, 0)] = 1.0;
    m[(1, 4)] = 2.0;
    let planted = LinearMap { matrix: m };
    let sum = sum_map(&a, &planted).unwrap();
    let pts = annulus_points(8, 10, 42);
    let r = eta_phwc_suite(&sum, &pts, &[]).unwrap();
    assert!(!r.passes);
    for p in &pts {
        let (ra, rb) = sum.block_residuals(p).unwrap();
        assert!(ra < 1e-12 && rb > 1.0);
    }
    assert!(matches!(sum_map(&a, &ZeroMap { domain: 8, target: 4 }), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn torus_factorization_agrees() {
    let cover = build_covering(CoveringSpec::TorusCover, 4).unwrap();
    let tol = Tolerances::default();
    let family = standard_family(1);
    let base = flat_torus(4, 4, 1.0, 1.0);
    let phm = constant_map(&cover.base, &[0.3, -0.2]).unwrap();
    let rep = factorization_suite(&cover, &phm, &FlatC::new(1), &family, &tol).unwrap();
    assert!(rep.passes && rep.base.verdict && rep.total.verdict, "{rep:?}");
    let saw = torus_sawtooth(&base).unwrap();
    let rep = factorization_suite(&cover, &saw, &FlatC::new(1), &family, &tol).unwrap();
    assert!(rep.passes && !rep.base.verdict && !rep.total.verdict);
    assert!((rep.base.phwc.max - 3.0).abs() < 1e-12);
}

#[test]
fn fold_is_phwc_but_not_harmonic() {
    let c = rect_grid(4, 4, (-1.0, 1.0), (-1.0, 1.0));
    let map = fold_map(&c).unwrap();
    let poly = Polyhedron::induced(c).unwrap();
    let rep = phm_check(&poly, &map, &FlatC::new(1), &[], &Tolerances::default()).unwrap();
    assert!(rep.phwc.verdict);
    assert!(!rep.harmonic.verdict);
    assert!(!rep.verdict);
}

#[test]
fn square_levels_refine() {
    let levels = square_levels(4, 3, 0.1, |p| p.to_vec()).unwrap();
    let counts: Vec<usize> = levels.iter().map(|(p, _)| p.complex().top_count()).collect();
    assert_eq!(counts, vec![32, 128, 512]);
}
