//! Piecewise Riemannian metrics on a complex: ellipticity, volumes,
//! gradient pairings and the subdivision-graph distance.
//!
//! Every top simplex Δ = [v0, ..., vn] (vertex ids ascending) carries the
//! affine frame ξ ↦ v0 + Σ ξ_i (v_i − v0); metrics, differentials and
//! gradient pairings are all expressed in that frame.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{QuadratureOrder, QuadratureRule};
use crate::simplicial::SimplicialComplex;

/// Tolerance on entries for face-restriction agreement.
pub const FACE_TOLERANCE: f64 = 1e-12;

/// Metric evaluator for the smooth mode: `(simplex, barycentric, position)`.
pub type MetricFn = Arc<dyn Fn(usize, &[f64], &[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
enum MetricData {
    Constant(Vec<DMatrix<f64>>),
    Smooth(MetricFn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    Constant,
    Smooth,
}

/// A complex together with a per-simplex metric.
#[derive(Clone)]
pub struct Polyhedron {
    complex: Arc<SimplicialComplex>,
    data: MetricData,
    rule: QuadratureRule,
    order: QuadratureOrder,
}

impl std::fmt::Debug for Polyhedron {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Polyhedron")
            .field("dim", &self.complex.dim())
            .field("simplices", &self.complex.top_count())
            .field("mode", &self.mode())
            .finish()
    }
}

/// Gram matrix of the frame edge vectors of a top simplex.
pub fn embedding_gram(complex: &SimplicialComplex, simplex: usize) -> DMatrix<f64> {
    let edges = frame_edges(complex, simplex);
    edges.transpose() * edges
}

/// Columns are `v_i − v_0` in embedding coordinates.
pub fn frame_edges(complex: &SimplicialComplex, simplex: usize) -> DMatrix<f64> {
    let s = complex.top(simplex).vertices();
    let p0 = complex.coords(s[0]);
    let amb = p0.len();
    DMatrix::from_fn(amb, s.len() - 1, |r, c| complex.coords(s[c + 1])[r] - p0[r])
}

fn check_symmetric(g: &DMatrix<f64>) -> Result<()> {
    if !g.is_square() {
        return Err(Error::NotSpd(format!("{}x{} is not square", g.nrows(), g.ncols())));
    }
    let scale = g.amax().max(1.0);
    for i in 0..g.nrows() {
        for j in 0..i {
            if (g[(i, j)] - g[(j, i)]).abs() > 1e-12 * scale || !g[(i, j)].is_finite() {
                return Err(Error::NotSpd(format!("asymmetric entry ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// Extreme eigenvalues of an SPD matrix.
pub fn spd_eigen_range(g: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_symmetric(g)?;
    let eig = SymmetricEigen::new(g.clone()).eigenvalues;
    let min = eig.min();
    let max = eig.max();
    if !(min > 0.0) {
        return Err(Error::NotSpd(format!("smallest eigenvalue {min:e}")));
    }
    Ok((min, max))
}

/// Smallest Λ with Λ^{-2}|ξ|² ≤ g(ξ, ξ) ≤ Λ²|ξ|².
pub fn ellipticity_constant(g: &DMatrix<f64>) -> Result<f64> {
    let (min, max) = spd_eigen_range(g)?;
    Ok(max.sqrt().max(1.0 / min.sqrt()))
}

/// Inverse and determinant of an SPD matrix via Cholesky.
pub fn spd_inverse(g: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    check_symmetric(g)?;
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?;
    let det = chol.l_dirty().diagonal().iter().map(|d| d * d).product();
    Ok((chol.inverse(), det))
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

impl Polyhedron {
    /// Metric induced from the embedding (Gram matrices of edge vectors).
    pub fn induced(complex: SimplicialComplex) -> Result<Self> {
        let metrics = (0..complex.top_count())
            .map(|t| embedding_gram(&complex, t))
            .collect();
        Self::constant(complex, metrics)
    }

    pub fn constant(complex: SimplicialComplex, metrics: Vec<DMatrix<f64>>) -> Result<Self> {
        if metrics.len() != complex.top_count() {
            return Err(Error::DimensionMismatch {
                expected: complex.top_count(),
                got: metrics.len(),
                context: "metric count",
            });
        }
        let n = complex.dim();
        for (t, g) in metrics.iter().enumerate() {
            if g.nrows() != n || g.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: g.nrows(),
                    context: "metric size",
                });
            }
            spd_eigen_range(g).map_err(|e| Error::NotSpd(format!("simplex {t}: {e}")))?;
        }
        Ok(Self {
            rule: QuadratureRule::barycenter(n),
            order: QuadratureOrder::Barycenter,
            complex: Arc::new(complex),
            data: MetricData::Constant(metrics),
        })
    }

    /// Simplexwise-smooth metric evaluated by quadrature.
    pub fn smooth(complex: SimplicialComplex, metric: MetricFn, order: QuadratureOrder) -> Self {
        let n = complex.dim();
        Self {
            rule: QuadratureRule::new(order, n),
            order,
            complex: Arc::new(complex),
            data: MetricData::Smooth(metric),
        }
    }

    /// Same complex, metric multiplied by `factor` (i.e. lengths by sqrt(factor)).
    pub fn scaled(&self, factor: f64) -> Self {
        let data = match &self.data {
            MetricData::Constant(ms) => MetricData::Constant(ms.iter().map(|g| g * factor).collect()),
            MetricData::Smooth(f) => {
                let f = f.clone();
                MetricData::Smooth(Arc::new(move |s, b, p| f(s, b, p) * factor))
            }
        };
        Self {
            complex: self.complex.clone(),
            data,
            rule: self.rule.clone(),
            order: self.order,
        }
    }

    /// Override the quadrature order (smooth mode; constant metrics are exact
    /// at the barycenter but accept any rule).
    pub fn with_quadrature(mut self, order: QuadratureOrder) -> Self {
        self.rule = QuadratureRule::new(order, self.complex.dim());
        self.order = order;
        self
    }

    pub fn complex(&self) -> &SimplicialComplex {
        &self.complex
    }

    pub fn shared_complex(&self) -> Arc<SimplicialComplex> {
        self.complex.clone()
    }

    pub fn dim(&self) -> usize {
        self.complex.dim()
    }

    pub fn mode(&self) -> MetricMode {
        match self.data {
            MetricData::Constant(_) => MetricMode::Constant,
            MetricData::Smooth(_) => MetricMode::Smooth,
        }
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn quadrature_order(&self) -> QuadratureOrder {
        self.order
    }

    /// Embedding position of a barycentric point.
    pub fn position(&self, simplex: usize, bary: &[f64]) -> Vec<f64> {
        let s = self.complex.top(simplex).vertices();
        let amb = self.complex.ambient_dim();
        let mut p = vec![0.0; amb];
        for (w, &v) in bary.iter().zip(s) {
            for (pi, ci) in p.iter_mut().zip(self.complex.coords(v)) {
                *pi += w * ci;
            }
        }
        p
    }

    pub fn barycenter(&self, _simplex: usize) -> Vec<f64> {
        vec![1.0 / (self.dim() + 1) as f64; self.dim() + 1]
    }

    /// Metric of a simplex at a barycentric point.
    pub fn metric_at(&self, simplex: usize, bary: &[f64]) -> DMatrix<f64> {
        match &self.data {
            MetricData::Constant(ms) => ms[simplex].clone(),
            MetricData::Smooth(f) => f(simplex, bary, &self.position(simplex, bary)),
        }
    }

    /// Constant metric, or the barycenter value in smooth mode.
    pub fn metric(&self, simplex: usize) -> DMatrix<f64> {
        self.metric_at(simplex, &self.barycenter(simplex))
    }

    /// Quadrature nodes of a simplex as `(barycentric, weight)`; weights sum to 1.
    pub fn quadrature_points(&self, simplex: usize) -> Vec<(Vec<f64>, f64)> {
        match self.data {
            MetricData::Constant(_) if self.order == QuadratureOrder::Barycenter => {
                vec![(self.barycenter(simplex), 1.0)]
            }
            _ => self
                .rule
                .points
                .iter()
                .cloned()
                .zip(self.rule.weights.iter().copied())
                .collect(),
        }
    }

    pub fn ellipticity(&self, simplex: usize) -> Result<f64> {
        match &self.data {
            MetricData::Constant(ms) => ellipticity_constant(&ms[simplex]),
            MetricData::Smooth(_) => {
                let mut worst: f64 = 0.0;
                for (b, _) in self.quadrature_points(simplex) {
                    worst = worst.max(ellipticity_constant(&self.metric_at(simplex, &b))?);
                }
                Ok(worst)
            }
        }
    }

    /// Global ellipticity bound Λ = sup Λ_Δ.
    pub fn global_ellipticity(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for t in 0..self.complex.top_count() {
            worst = worst.max(self.ellipticity(t)?);
        }
        Ok(worst)
    }

    /// Volume of a top simplex: mean of sqrt(det g) times 1/n!.
    pub fn simplex_volume(&self, simplex: usize) -> Result<f64> {
        let reference = 1.0 / factorial(self.dim());
        let mut acc = 0.0;
        for (b, w) in self.quadrature_points(simplex) {
            let (_, det) = spd_inverse(&self.metric_at(simplex, &b))?;
            acc += w * det.sqrt();
        }
        Ok(acc * reference)
    }

    pub fn total_volume(&self) -> Result<f64> {
        (0..self.complex.top_count()).map(|t| self.simplex_volume(t)).sum()
    }

    /// ⟨∇u, ∇v⟩ = duᵀ g⁻¹ dv for frame differentials, at the barycenter.
    pub fn gradient_inner(&self, simplex: usize, du: &[f64], dv: &[f64]) -> Result<f64> {
        let (inv, _) = spd_inverse(&self.metric(simplex))?;
        gradient_inner_with(&inv, du, dv)
    }

    /// Restricted face metrics agree across every shared codimension-one face.
    pub fn is_face_continuous(&self) -> Result<bool> {
        let c = &self.complex;
        if c.dim() == 0 {
            return Ok(true);
        }
        for face in c.faces(c.dim() - 1) {
            let tops = c.cofaces(face)?;
            let reference = self.face_metric(tops[0], face.vertices());
            for &t in &tops[1..] {
                let other = self.face_metric(t, face.vertices());
                if (reference.clone() - other).amax() > FACE_TOLERANCE {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Metric restricted to a face of `simplex`, in the face's own frame,
    /// evaluated at the face barycenter.
    fn face_metric(&self, simplex: usize, face: &[usize]) -> DMatrix<f64> {
        let verts = self.complex.top(simplex).vertices();
        let local: Vec<usize> = face
            .iter()
            .map(|v| verts.iter().position(|w| w == v).expect("face vertex"))
            .collect();
        let mut bary = vec![0.0; verts.len()];
        for &i in &local {
            bary[i] = 1.0 / local.len() as f64;
        }
        let g = self.metric_at(simplex, &bary);
        let frame = |i: usize| -> DVector<f64> {
            let mut x = DVector::zeros(self.dim());
            if i > 0 {
                x[i - 1] = 1.0;
            }
            x
        };
        let origin = frame(local[0]);
        let k = local.len() - 1;
        DMatrix::from_fn(k, k, |a, b| {
            let ea = frame(local[a + 1]) - &origin;
            let eb = frame(local[b + 1]) - &origin;
            (ea.transpose() * &g * eb)[(0, 0)]
        })
    }

    /// Squared metric length of the edge between local vertices `i`, `j`.
    pub fn edge_length_sq(&self, simplex: usize, i: usize, j: usize) -> f64 {
        let n = self.dim();
        let mut d = DVector::zeros(n);
        if i > 0 {
            d[i - 1] += 1.0;
        }
        if j > 0 {
            d[j - 1] -= 1.0;
        }
        let mut bary = vec![0.0; n + 1];
        bary[i] = 0.5;
        bary[j] += 0.5;
        let g = self.metric_at(simplex, &bary);
        d.dot(&(g * &d))
    }

    /// Upper bound for the intrinsic distance between two points, from
    /// shortest paths on the `2^level` lattice subdivision where every pair of
    /// lattice nodes in a common top simplex is joined by a straight segment.
    pub fn intrinsic_distance(
        &self,
        x: &SurfacePoint,
        y: &SurfacePoint,
        refinement_level: u32,
    ) -> Result<DistanceEstimate> {
        self.validate_point(x)?;
        self.validate_point(y)?;
        let resolution = 1usize << refinement_level;
        let n = self.dim();
        let lattice = compositions(resolution, n + 1);

        let mut graph: UnGraph<(), f64> = UnGraph::new_undirected();
        let mut ids: HashMap<Vec<(usize, usize)>, NodeIndex> = HashMap::new();
        let src = graph.add_node(());
        let dst = graph.add_node(());

        for t in 0..self.complex.top_count() {
            let verts = self.complex.top(t).vertices();
            let mut local: Vec<(Vec<f64>, NodeIndex)> = lattice
                .iter()
                .map(|k| {
                    let key: Vec<(usize, usize)> = verts
                        .iter()
                        .zip(k)
                        .filter(|(_, &ki)| ki > 0)
                        .map(|(&v, &ki)| (v, ki))
                        .collect();
                    let id = *ids.entry(key).or_insert_with(|| graph.add_node(()));
                    let bary = k.iter().map(|&ki| ki as f64 / resolution as f64).collect();
                    (bary, id)
                })
                .collect();
            if x.simplex == t {
                local.push((x.barycentric.clone(), src));
            }
            if y.simplex == t {
                local.push((y.barycentric.clone(), dst));
            }
            let constant = match &self.data {
                MetricData::Constant(ms) => Some(&ms[t]),
                MetricData::Smooth(_) => None,
            };
            for i in 0..local.len() {
                for j in (i + 1)..local.len() {
                    let (bi, ni) = &local[i];
                    let (bj, nj) = &local[j];
                    if ni == nj {
                        continue;
                    }
                    let d = DVector::from_iterator(n, (1..=n).map(|k| bj[k] - bi[k]));
                    let len = match constant {
                        Some(g) => (d.transpose() * g * &d)[(0, 0)].max(0.0).sqrt(),
                        None => {
                            let mid: Vec<f64> = bi.iter().zip(bj).map(|(a, b)| 0.5 * (a + b)).collect();
                            let g = self.metric_at(t, &mid);
                            (d.transpose() * g * &d)[(0, 0)].max(0.0).sqrt()
                        }
                    };
                    graph.add_edge(*ni, *nj, len);
                }
            }
        }
        let dist = petgraph::algo::dijkstra(&graph, src, Some(dst), |e| *e.weight());
        let upper_bound: f64 = *dist
            .get(&dst)
            .ok_or_else(|| Error::PointOffComplex("points are not connected".into()))?;
        Ok(DistanceEstimate {
            upper_bound,
            graph_size: graph.node_count(),
            edge_count: graph.edge_count(),
        })
    }

    pub fn validate_point(&self, p: &SurfacePoint) -> Result<()> {
        if p.simplex >= self.complex.top_count() {
            return Err(Error::PointOffComplex(format!("no simplex {}", p.simplex)));
        }
        if p.barycentric.len() != self.dim() + 1 {
            return Err(Error::PointOffComplex(format!(
                "expected {} barycentric coordinates, got {}",
                self.dim() + 1,
                p.barycentric.len()
            )));
        }
        let sum: f64 = p.barycentric.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || p.barycentric.iter().any(|b| *b < -1e-12 || !b.is_finite()) {
            return Err(Error::PointOffComplex(format!("{:?}", p.barycentric)));
        }
        Ok(())
    }
}

pub fn gradient_inner_with(inverse_metric: &DMatrix<f64>, du: &[f64], dv: &[f64]) -> Result<f64> {
    let n = inverse_metric.nrows();
    if du.len() != n || dv.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: du.len().max(dv.len()),
            context: "differential length",
        });
    }
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += du[i] * inverse_metric[(i, j)] * dv[j];
        }
    }
    Ok(acc)
}

/// A point on the complex, addressed by a top simplex and barycentric
/// coordinates in the simplex's sorted vertex order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub simplex: usize,
    pub barycentric: Vec<f64>,
}

impl SurfacePoint {
    pub fn new(simplex: usize, barycentric: Vec<f64>) -> Self {
        Self { simplex, barycentric }
    }

    /// A vertex addressed through one of its top simplices.
    pub fn at_vertex(complex: &SimplicialComplex, v: usize) -> Result<Self> {
        if v >= complex.vertex_count() {
            return Err(Error::UnknownVertex(v));
        }
        let t = complex.vertex_tops(v)[0];
        let verts = complex.top(t).vertices();
        let barycentric = verts.iter().map(|&w| if w == v { 1.0 } else { 0.0 }).collect();
        Ok(Self { simplex: t, barycentric })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub upper_bound: f64,
    pub graph_size: usize,
    pub edge_count: usize,
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for rest in compositions(total - first, parts - 1) {
            let mut v = Vec::with_capacity(parts);
            v.push(first);
            v.extend(rest);
            out.push(v);
        }
    }
    out
}
