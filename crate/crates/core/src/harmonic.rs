//! Stiffness assembly over the hat basis, discrete harmonic functions and
//! the fixed-point solver for harmonic maps into charted targets.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::PLMap;
use crate::riemannian::{spd_inverse, Polyhedron};
use crate::target::ChartedTarget;

/// Dirichlet data: vertex id to chart value.
pub type BoundaryData = BTreeMap<usize, Vec<f64>>;

#[derive(Debug, Clone)]
struct QuadPoint {
    bary: Vec<f64>,
    /// Quadrature weight times the volume element.
    dv: f64,
    g_inv: DMatrix<f64>,
}

/// Assembled stiffness matrix `S_pq = ∫⟨∇λ_p, ∇λ_q⟩ dμ_g` together with the
/// element data needed for Christoffel loads.
#[derive(Debug, Clone)]
pub struct StiffnessSystem {
    poly: Polyhedron,
    matrix: CsrMatrix<f64>,
    boundary: Vec<bool>,
    mass: Vec<f64>,
    elements: Vec<Vec<QuadPoint>>,
}

fn hat_gradient(m: usize, p: usize) -> DVector<f64> {
    if p == 0 {
        DVector::from_element(m, -1.0)
    } else {
        let mut e = DVector::zeros(m);
        e[p - 1] = 1.0;
        e
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// Assembles the stiffness system; the complex must be admissible.
pub fn assemble_stiffness(poly: &Polyhedron) -> Result<StiffnessSystem> {
    let complex = poly.complex();
    let report = complex.check_admissible();
    if !report.admissible() {
        let detail = report
            .witnesses
            .first()
            .map(|w| format!("star of {} splits into {} components", w.simplex, w.components.len()))
            .unwrap_or_else(|| "not dimensionally homogeneous".into());
        return Err(Error::NotAdmissible(detail));
    }
    let m = poly.dim();
    let reference = 1.0 / factorial(m);
    let elements: Vec<(Vec<QuadPoint>, DMatrix<f64>)> = (0..complex.top_count())
        .into_par_iter()
        .map(|t| -> Result<(Vec<QuadPoint>, DMatrix<f64>)> {
            let mut points = Vec::new();
            let mut local = DMatrix::zeros(m + 1, m + 1);
            for (bary, w) in poly.quadrature_points(t) {
                let (g_inv, det) = spd_inverse(&poly.metric_at(t, &bary))?;
                let dv = w * det.sqrt() * reference;
                for p in 0..=m {
                    let gp = &g_inv * hat_gradient(m, p);
                    for q in 0..=m {
                        local[(p, q)] += dv * hat_gradient(m, q).dot(&gp);
                    }
                }
                points.push(QuadPoint { bary, dv, g_inv });
            }
            Ok((points, local))
        })
        .collect::<Result<_>>()?;

    let nv = complex.vertex_count();
    let mut coo = CooMatrix::new(nv, nv);
    let mut mass = vec![0.0; nv];
    for (t, (points, local)) in elements.iter().enumerate() {
        let verts = complex.top(t).vertices();
        let vol: f64 = points.iter().map(|q| q.dv).sum();
        for (a, &p) in verts.iter().enumerate() {
            mass[p] += vol / (m + 1) as f64;
            for (b, &q) in verts.iter().enumerate() {
                coo.push(p, q, local[(a, b)]);
            }
        }
    }
    Ok(StiffnessSystem {
        poly: poly.clone(),
        matrix: CsrMatrix::from(&coo),
        boundary: complex.boundary_vertex_flags(),
        mass,
        elements: elements.into_iter().map(|(p, _)| p).collect(),
    })
}

impl StiffnessSystem {
    pub fn polyhedron(&self) -> &Polyhedron {
        &self.poly
    }

    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.matrix
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.matrix.nrows(), self.matrix.ncols());
        for (i, j, v) in self.matrix.triplet_iter() {
            d[(i, j)] += *v;
        }
        d
    }

    pub fn vertex_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.boundary.len()).filter(|&v| !self.boundary[v]).collect()
    }

    /// Lumped mass `∫λ_p dμ_g` of each vertex.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix
            .row_iter()
            .map(|row| row.col_indices().iter().zip(row.values()).map(|(&j, v)| v * u[j]).sum())
            .collect()
    }

    /// Discrete energy `uᵀ S u` of a scalar function.
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.apply(u).iter().zip(u).map(|(a, b)| a * b).sum()
    }

    /// Christoffel load `∫ λ_p Γ^k_{αβ}(φ) ⟨∇φ^α, ∇φ^β⟩ dμ_g` for every
    /// vertex `p` and chart component `k`.
    pub fn christoffel_load(&self, target: &dyn ChartedTarget, map: &PLMap) -> Result<Vec<Vec<f64>>> {
        let complex = self.poly.complex();
        let d = map.target_dim();
        let contributions: Vec<Vec<Vec<f64>>> = (0..complex.top_count())
            .into_par_iter()
            .map(|t| -> Result<Vec<Vec<f64>>> {
                let verts = complex.top(t).vertices();
                let mut local = vec![vec![0.0; d]; verts.len()];
                let diff = map.reference_differential(complex, t);
                for q in &self.elements[t] {
                    let image = map.value_at(complex, t, &q.bary);
                    let gamma = target
                        .christoffel(&image)
                        .map_err(|_| Error::ImageLeftChart(verts[0]))?;
                    if gamma.max_abs() == 0.0 {
                        continue;
                    }
                    let pairing = &diff * &q.g_inv * diff.transpose();
                    let c = gamma.contract(&pairing);
                    for (a, row) in local.iter_mut().enumerate() {
                        for k in 0..d {
                            row[k] += q.dv * q.bary[a] * c[k];
                        }
                    }
                }
                Ok(local)
            })
            .collect::<Result<_>>()?;
        let mut load = vec![vec![0.0; d]; complex.vertex_count()];
        for (t, local) in contributions.into_iter().enumerate() {
            for (&p, row) in complex.top(t).vertices().iter().zip(local) {
                for k in 0..d {
                    load[p][k] += row[k];
                }
            }
        }
        Ok(load)
    }

    fn free_index(&self) -> (Vec<usize>, Vec<Option<usize>>) {
        let free = self.interior_vertices();
        let mut pos = vec![None; self.vertex_count()];
        for (i, &v) in free.iter().enumerate() {
            pos[v] = Some(i);
        }
        (free, pos)
    }

    fn factor_interior(&self, pos: &[Option<usize>], nfree: usize) -> Result<CscCholesky<f64>> {
        let mut coo = CooMatrix::new(nfree, nfree);
        for (i, j, v) in self.matrix.triplet_iter() {
            if let (Some(a), Some(b)) = (pos[i], pos[j]) {
                coo.push(a, b, *v);
            }
        }
        CscCholesky::factor(&CscMatrix::from(&coo)).map_err(|e| Error::SingularSystem(format!("{e:?}")))
    }

    /// Right-hand side `f_I − S_IB u_B` for one component.
    fn reduced_rhs(&self, free: &[usize], pos: &[Option<usize>], u: &[f64], f: &[f64]) -> DVector<f64> {
        let mut rhs = DVector::from_iterator(free.len(), free.iter().map(|&v| f[v]));
        for (i, j, v) in self.matrix.triplet_iter() {
            if let (Some(a), None) = (pos[i], pos[j]) {
                rhs[a] -= v * u[j];
            }
        }
        rhs
    }
}

fn check_boundary(system: &StiffnessSystem, boundary: &BoundaryData, dim: usize) -> Result<()> {
    for (&v, val) in boundary {
        if v >= system.vertex_count() {
            return Err(Error::UnknownVertex(v));
        }
        if !system.boundary[v] {
            return Err(Error::InvalidParameter(format!("vertex {v} is not a boundary vertex")));
        }
        if val.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: val.len(),
                context: "boundary value length",
            });
        }
    }
    if let Some(v) = (0..system.vertex_count()).find(|&v| system.boundary[v] && !boundary.contains_key(&v)) {
        return Err(Error::MissingBoundaryValues(v));
    }
    Ok(())
}

/// Solves `S_II u_I = f_I − S_IB u_B` for each component column.
fn solve_linear(system: &StiffnessSystem, columns: &mut [Vec<f64>], loads: &[Vec<f64>]) -> Result<()> {
    let (free, pos) = system.free_index();
    if free.is_empty() {
        return Ok(());
    }
    if free.len() == system.vertex_count() {
        return Err(Error::SingularSystem(
            "no boundary vertices; use the mean-zero solve".into(),
        ));
    }
    let chol = system.factor_interior(&pos, free.len())?;
    for (u, f) in columns.iter_mut().zip(loads) {
        let rhs = system.reduced_rhs(&free, &pos, u, f);
        let x = chol.solve(&rhs);
        for (i, &v) in free.iter().enumerate() {
            u[v] = x[(i, 0)];
        }
    }
    Ok(())
}

/// Harmonic extension of scalar boundary data.
pub fn solve_harmonic_function(system: &StiffnessSystem, boundary: &BTreeMap<usize, f64>) -> Result<Vec<f64>> {
    let data: BoundaryData = boundary.iter().map(|(&v, &x)| (v, vec![x])).collect();
    check_boundary(system, &data, 1)?;
    let mut u = vec![0.0; system.vertex_count()];
    for (&v, &x) in boundary {
        u[v] = x;
    }
    let zero = vec![0.0; system.vertex_count()];
    let mut cols = vec![u];
    solve_linear(system, &mut cols, &[zero])?;
    Ok(cols.pop().expect("one column"))
}

/// Solves `S u = f` on a closed complex in the gauge `Σ m_p u_p = 0`; `f`
/// must integrate to zero.
pub fn solve_mean_zero(system: &StiffnessSystem, f: &[f64]) -> Result<Vec<f64>> {
    let nv = system.vertex_count();
    if f.len() != nv {
        return Err(Error::DimensionMismatch {
            expected: nv,
            got: f.len(),
            context: "load length",
        });
    }
    let total: f64 = f.iter().sum();
    let scale = f.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if total.abs() > 1e-10 * scale * nv as f64 {
        return Err(Error::InvalidParameter(format!("load has nonzero total {total:e}")));
    }
    // pin vertex 0, then shift to the mean-zero gauge
    let mut pos = vec![None; nv];
    let free: Vec<usize> = (1..nv).collect();
    for (i, &v) in free.iter().enumerate() {
        pos[v] = Some(i);
    }
    let mut u = vec![0.0; nv];
    if !free.is_empty() {
        let chol = system.factor_interior(&pos, free.len())?;
        let rhs = system.reduced_rhs(&free, &pos, &u, f);
        let x = chol.solve(&rhs);
        for (i, &v) in free.iter().enumerate() {
            u[v] = x[(i, 0)];
        }
    }
    let mass = system.lumped_mass();
    let mean = u.iter().zip(mass).map(|(a, m)| a * m).sum::<f64>() / mass.iter().sum::<f64>();
    Ok(u.into_iter().map(|x| x - mean).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-8,
            damping: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicMapSolution {
    pub map: PLMap,
    pub iterations: usize,
    /// Residual ∞-norm before each iteration and at the end.
    pub history: Vec<f64>,
}

/// Per-vertex weak-harmonic residual `S φ^k − load_k` on interior vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicResidual {
    /// Residual row per vertex; boundary rows are zero.
    pub per_vertex: Vec<Vec<f64>>,
    /// `max_{p,k} |r_k(p)|` over interior vertices.
    pub inf_norm: f64,
    /// `max_{p,k} |r_k(p)| / m_p`: the residual as a density.
    pub normalized_inf_norm: f64,
    /// `Σ_p m_p max_k |r_k(p)| / m_p`, the μ_g-weighted 1-norm of the density.
    pub weighted_l1: f64,
}

fn columns(map: &PLMap) -> Vec<Vec<f64>> {
    (0..map.target_dim()).map(|k| map.component(k)).collect()
}

fn check_chart(target: &dyn ChartedTarget, map: &PLMap) -> Result<()> {
    if map.target_dim() != target.real_dim() {
        return Err(Error::DimensionMismatch {
            expected: target.real_dim(),
            got: map.target_dim(),
            context: "map target dimension",
        });
    }
    if let Some(v) = map.values().iter().position(|x| !target.in_chart(x)) {
        return Err(Error::ImageLeftChart(v));
    }
    Ok(())
}

pub fn weak_harmonic_residual(
    system: &StiffnessSystem,
    target: &dyn ChartedTarget,
    map: &PLMap,
) -> Result<HarmonicResidual> {
    if map.values().len() != system.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: system.vertex_count(),
            got: map.values().len(),
            context: "map vertex values",
        });
    }
    check_chart(target, map)?;
    let load = system.christoffel_load(target, map)?;
    let nv = system.vertex_count();
    let d = map.target_dim();
    let mut per_vertex = vec![vec![0.0; d]; nv];
    for (k, col) in columns(map).iter().enumerate() {
        let su = system.apply(col);
        for v in 0..nv {
            if !system.boundary[v] {
                per_vertex[v][k] = su[v] - load[v][k];
            }
        }
    }
    let (mut inf_norm, mut normalized_inf_norm, mut weighted_l1) = (0.0f64, 0.0f64, 0.0);
    for (v, row) in per_vertex.iter().enumerate() {
        let r = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        inf_norm = inf_norm.max(r);
        if r > 0.0 {
            normalized_inf_norm = normalized_inf_norm.max(r / system.mass[v]);
        }
        weighted_l1 += r;
    }
    Ok(HarmonicResidual {
        per_vertex,
        inf_norm,
        normalized_inf_norm,
        weighted_l1,
    })
}

/// Damped fixed-point iteration `u ← (1−d)u + d·S_II⁻¹(load(u) − S_IB u_B)`
/// started from the flat harmonic extension. A step that increases the
/// residual is retried with halved damping.
pub fn solve_harmonic_map(
    system: &StiffnessSystem,
    target: &dyn ChartedTarget,
    boundary: &BoundaryData,
    opts: &SolverOptions,
) -> Result<HarmonicMapSolution> {
    if !(opts.tol > 0.0) || !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidParameter("tol must be positive and damping in (0, 1]".into()));
    }
    let d = target.real_dim();
    check_boundary(system, boundary, d)?;
    for (&v, val) in boundary {
        if !target.in_chart(val) {
            return Err(Error::ImageLeftChart(v));
        }
    }
    let nv = system.vertex_count();
    let (free, pos) = system.free_index();
    let mut cols = vec![vec![0.0; nv]; d];
    for (&v, val) in boundary {
        for k in 0..d {
            cols[k][v] = val[k];
        }
    }
    let to_map = |cols: &[Vec<f64>]| PLMap::from_components(cols);
    if free.is_empty() {
        let map = to_map(&cols)?;
        let r = weak_harmonic_residual(system, target, &map)?.inf_norm;
        return Ok(HarmonicMapSolution {
            map,
            iterations: 0,
            history: vec![r],
        });
    }
    if free.len() == nv {
        return Err(Error::SingularSystem("no boundary vertices".into()));
    }
    let chol = system.factor_interior(&pos, free.len())?;
    let fixed_point = |cols: &[Vec<f64>], load: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..d)
            .map(|k| {
                let f: Vec<f64> = load.iter().map(|row| row[k]).collect();
                let rhs = system.reduced_rhs(&free, &pos, &cols[k], &f);
                let x = chol.solve(&rhs);
                let mut out = cols[k].clone();
                for (i, &v) in free.iter().enumerate() {
                    out[v] = x[(i, 0)];
                }
                out
            })
            .collect()
    };
    let zero = vec![vec![0.0; d]; nv];
    cols = fixed_point(&cols, &zero);

    let residual_of = |cols: &[Vec<f64>]| -> Result<(PLMap, f64)> {
        let map = to_map(cols)?;
        let r = weak_harmonic_residual(system, target, &map)?.inf_norm;
        Ok((map, r))
    };
    let (mut map, mut r) = residual_of(&cols)?;
    let mut history = vec![r];
    for it in 0..opts.max_iter {
        if r <= opts.tol {
            return Ok(HarmonicMapSolution {
                map,
                iterations: it,
                history,
            });
        }
        let load = system.christoffel_load(target, &map)?;
        let full = fixed_point(&cols, &load);
        let mut damping = opts.damping;
        let mut accepted = None;
        for attempt in 0..6 {
            let trial: Vec<Vec<f64>> = cols
                .iter()
                .zip(&full)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + damping * (y - x)).collect())
                .collect();
            match residual_of(&trial) {
                Ok((m, tr)) if tr < r || attempt == 5 => {
                    accepted = Some((trial, m, tr));
                    break;
                }
                Ok(_) | Err(Error::ImageLeftChart(_)) if attempt < 5 => damping *= 0.5,
                Ok(_) => unreachable!("last attempt always accepts"),
                Err(e) => return Err(e),
            }
        }
        let (c, m, tr) = accepted.expect("step accepted");
        cols = c;
        map = m;
        r = tr;
        history.push(r);
    }
    if r <= opts.tol {
        return Ok(HarmonicMapSolution {
            map,
            iterations: opts.max_iter,
            history,
        });
    }
    Err(Error::NonConvergence { history })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    /// Every off-diagonal stiffness entry is nonpositive.
    pub nonnegative_weights: bool,
    pub boundary_min: f64,
    pub boundary_max: f64,
    pub interior_min: f64,
    pub interior_max: f64,
    pub holds: bool,
}

/// Compares the range of a scalar function on interior and boundary vertices.
pub fn maximum_principle_report(system: &StiffnessSystem, u: &[f64]) -> MaxPrincipleReport {
    let nonnegative_weights = system
        .matrix
        .triplet_iter()
        .all(|(i, j, v)| i == j || *v <= 1e-14);
    let (mut bmin, mut bmax, mut imin, mut imax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (v, &x) in u.iter().enumerate() {
        if system.boundary[v] {
            bmin = bmin.min(x);
            bmax = bmax.max(x);
        } else {
            imin = imin.min(x);
            imax = imax.max(x);
        }
    }
    let slack = 1e-12 * bmax.abs().max(bmin.abs()).max(1.0);
    MaxPrincipleReport {
        nonnegative_weights,
        boundary_min: bmin,
        boundary_max: bmax,
        interior_min: imin,
        interior_max: imax,
        holds: imin >= bmin - slack && imax <= bmax + slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshes::{bowtie, square_grid, two_triangles, unit_right_triangle};
    use crate::target::{FlatC, FubiniStudyCp1};

    #[test]
    fn single_triangle_stiffness() {
        let poly = Polyhedron::induced(unit_right_triangle()).unwrap();
        let s = assemble_stiffness(&poly).unwrap().dense();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5]);
        assert!((s - expected).amax() < 1e-15);
    }

    #[test]
    fn conformal_invariance_in_two_dimensions() {
        let poly = Polyhedron::induced(two_triangles()).unwrap();
        let a = assemble_stiffness(&poly).unwrap().dense();
        let b = assemble_stiffness(&poly.scaled(9.0)).unwrap().dense();
        assert!((a.clone() - b).amax() < 1e-14);
        for r in 0..4 {
            assert!(a.row(r).sum().abs() < 1e-15);
        }
    }

    #[test]
    fn refuses_inadmissible() {
        let poly = Polyhedron::induced(bowtie()).unwrap();
        assert!(matches!(assemble_stiffness(&poly), Err(Error::NotAdmissible(_))));
    }

    #[test]
    fn affine_data_is_reproduced() {
        let c = square_grid(6, 0.0);
        let poly = Polyhedron::induced(c.clone()).unwrap();
        let sys = assemble_stiffness(&poly).unwrap();
        let bd: BTreeMap<usize, f64> = (0..c.vertex_count())
            .filter(|&v| sys.boundary_flags()[v])
            .map(|v| (v, c.coords(v)[0] + 2.0 * c.coords(v)[1]))
            .collect();
        let u = solve_harmonic_function(&sys, &bd).unwrap();
        for v in 0..c.vertex_count() {
            assert!((u[v] - c.coords(v)[0] - 2.0 * c.coords(v)[1]).abs() < 1e-13);
        }
        let mut missing = bd.clone();
        missing.remove(&0);
        assert!(matches!(solve_harmonic_function(&sys, &missing), Err(Error::MissingBoundaryValues(0))));
    }

    #[test]
    fn constant_data_into_cp1() {
        let c = square_grid(4, 0.0);
        let sys = assemble_stiffness(&Polyhedron::induced(c.clone()).unwrap()).unwrap();
        let bd: BoundaryData = (0..c.vertex_count())
            .filter(|&v| sys.boundary_flags()[v])
            .map(|v| (v, vec![0.3, -0.2]))
            .collect();
        let sol = solve_harmonic_map(&sys, &FubiniStudyCp1, &bd, &SolverOptions::default()).unwrap();
        for v in sol.map.values() {
            assert!((v[0] - 0.3).abs() < 1e-14 && (v[1] + 0.2).abs() < 1e-14);
        }
        assert!(sol.history.last().unwrap().abs() < 1e-14);
    }

    #[test]
    fn flat_target_matches_scalar_solve() {
        let c = square_grid(5, 0.1);
        let sys = assemble_stiffness(&Polyhedron::induced(c.clone()).unwrap()).unwrap();
        let f = |p: &[f64]| vec![p[0] * p[0] - p[1] * p[1], 2.0 * p[0] * p[1]];
        let bd: BoundaryData = (0..c.vertex_count())
            .filter(|&v| sys.boundary_flags()[v])
            .map(|v| (v, f(c.coords(v))))
            .collect();
        let sol = solve_harmonic_map(&sys, &FlatC::new(1), &bd, &SolverOptions::default()).unwrap();
        let scalar: BTreeMap<usize, f64> = bd.iter().map(|(&v, x)| (v, x[0])).collect();
        let u = solve_harmonic_function(&sys, &scalar).unwrap();
        for v in 0..c.vertex_count() {
            assert!((sol.map.value(v)[0] - u[v]).abs() < 1e-13);
        }
        assert_eq!(sol.iterations, 0);
    }
}
