//! Piecewise-linear maps on a complex and analytic maps between charts.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riemannian::{embedding_gram, frame_edges};
use crate::simplicial::SimplicialComplex;
use crate::target::{real_jacobian, to_complex, HolomorphicMap};

/// Default relative step for finite-difference Jacobians.
pub const FD_STEP: f64 = 1e-5;

/// A map into `R^{2n}` (a chart of `C^n`) given by its vertex values and
/// extended affinely over each simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLMap {
    target_dim: usize,
    values: Vec<Vec<f64>>,
}

impl PLMap {
    pub fn new(complex: &SimplicialComplex, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != complex.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: complex.vertex_count(),
                got: values.len(),
                context: "map vertex values",
            });
        }
        let target_dim = values.first().map_or(0, Vec::len);
        if target_dim == 0 {
            return Err(Error::EmptyInput("map values"));
        }
        for (v, val) in values.iter().enumerate() {
            if val.len() != target_dim {
                return Err(Error::DimensionMismatch {
                    expected: target_dim,
                    got: val.len(),
                    context: "map value length",
                });
            }
            if val.iter().any(|x| !x.is_finite()) {
                return Err(Error::ImageLeftChart(v));
            }
        }
        Ok(Self { target_dim, values })
    }

    /// Interpolates `f` at the vertex positions.
    pub fn from_fn(complex: &SimplicialComplex, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let values = complex.all_coords().iter().map(|p| f(p)).collect();
        Self::new(complex, values)
    }

    /// Interpolates a holomorphic function of the embedding coordinates
    /// `(x_1, ..., x_n, y_1, ..., y_n)`.
    pub fn from_holomorphic(complex: &SimplicialComplex, f: &dyn HolomorphicMap) -> Result<Self> {
        let mut values = Vec::with_capacity(complex.vertex_count());
        for p in complex.all_coords() {
            let z = to_complex(p);
            let w = f.value(&z)?;
            values.push(w.iter().map(|c| c.re).chain(w.iter().map(|c| c.im)).collect());
        }
        Self::new(complex, values)
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn complex_target_dim(&self) -> usize {
        self.target_dim / 2
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, v: usize) -> &[f64] {
        &self.values[v]
    }

    pub fn set_value(&mut self, v: usize, value: Vec<f64>) {
        assert_eq!(value.len(), self.target_dim);
        self.values[v] = value;
    }

    /// Values of one real component.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[k]).collect()
    }

    /// Builds a map from per-component vertex vectors.
    pub fn from_components(components: &[Vec<f64>]) -> Result<Self> {
        let nv = components.first().map_or(0, Vec::len);
        if components.is_empty() || nv == 0 {
            return Err(Error::EmptyInput("map components"));
        }
        let values = (0..nv).map(|v| components.iter().map(|c| c[v]).collect()).collect();
        Ok(Self {
            target_dim: components.len(),
            values,
        })
    }

    /// `ψ ∘ φ` evaluated at the vertices.
    pub fn postcompose(&self, f: &dyn HolomorphicMap) -> Result<Self> {
        let mut values = Vec::with_capacity(self.values.len());
        for (v, val) in self.values.iter().enumerate() {
            let w = f.value(&to_complex(val)).map_err(|_| Error::ImageLeftChart(v))?;
            values.push(w.iter().map(|c| c.re).chain(w.iter().map(|c| c.im)).collect());
        }
        Ok(Self {
            target_dim: 2 * f.target_dim(),
            values,
        })
    }

    pub fn value_at(&self, complex: &SimplicialComplex, simplex: usize, bary: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.target_dim];
        for (&v, &b) in complex.top(simplex).vertices().iter().zip(bary) {
            for (o, x) in out.iter_mut().zip(&self.values[v]) {
                *o += b * x;
            }
        }
        out
    }

    /// `target_dim × n` differential in the simplex's affine frame.
    pub fn reference_differential(&self, complex: &SimplicialComplex, simplex: usize) -> DMatrix<f64> {
        let s = complex.top(simplex).vertices();
        let base = &self.values[s[0]];
        DMatrix::from_fn(self.target_dim, s.len() - 1, |r, c| self.values[s[c + 1]][r] - base[r])
    }

    /// Differential in embedding coordinates, acting on the tangent plane of
    /// the simplex (`target_dim × ambient_dim`).
    pub fn differential(&self, complex: &SimplicialComplex, simplex: usize) -> Result<DMatrix<f64>> {
        let gram = embedding_gram(complex, simplex);
        let scale = gram.amax();
        let inv = gram
            .clone()
            .cholesky()
            .filter(|c| c.l_dirty().diagonal().iter().all(|d| d * d > 1e-24 * scale.max(1.0)))
            .ok_or(Error::DegenerateSimplex(simplex))?
            .inverse();
        Ok(self.reference_differential(complex, simplex) * inv * frame_edges(complex, simplex).transpose())
    }
}

/// A smooth map between real charts.
pub trait AnalyticMap {
    fn domain_dim(&self) -> usize;
    fn target_dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// `target_dim × domain_dim` Jacobian; central differences by default.
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        fd_jacobian(&|p: &[f64]| self.value(p), self.target_dim(), x, FD_STEP)
    }
}

/// Central-difference Jacobian with relative step `step·max(1, |x_i|)`.
pub fn fd_jacobian(
    f: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    rows: usize,
    x: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    let mut j = DMatrix::zeros(rows, x.len());
    let mut p = x.to_vec();
    for c in 0..x.len() {
        let h = step * x[c].abs().max(1.0);
        p[c] = x[c] + h;
        let plus = f(&p)?;
        p[c] = x[c] - h;
        let minus = f(&p)?;
        p[c] = x[c];
        if plus.len() != rows || minus.len() != rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                got: plus.len(),
                context: "map value length",
            });
        }
        for r in 0..rows {
            j[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    Ok(j)
}

/// A real-linear map `x ↦ A x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub matrix: DMatrix<f64>,
}

impl AnalyticMap for LinearMap {
    fn domain_dim(&self) -> usize {
        self.matrix.ncols()
    }
    fn target_dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.ncols(),
                got: x.len(),
                context: "linear map argument",
            });
        }
        Ok((&self.matrix * nalgebra::DVector::from_column_slice(x)).iter().copied().collect())
    }
    fn jacobian(&self, _x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.matrix.clone())
    }
}

/// Adapts a holomorphic map to real chart coordinates.
pub struct RealView<'a>(pub &'a dyn HolomorphicMap);

impl AnalyticMap for RealView<'_> {
    fn domain_dim(&self) -> usize {
        2 * self.0.source_dim()
    }
    fn target_dim(&self) -> usize {
        2 * self.0.target_dim()
    }
    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = self.0.value(&to_complex(x))?;
        Ok(w.iter().map(|c| c.re).chain(w.iter().map(|c| c.im)).collect())
    }
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(real_jacobian(&self.0.jacobian(&to_complex(x))?))
    }
}

/// Gradient rows of `ψ ∘ φ` from the rows of `φ` at a point whose image is
/// `image`: `d(ψ∘φ) = dψ(φ(x)) · dφ`.
pub fn compose_gradients(psi: &dyn HolomorphicMap, rows: &DMatrix<f64>, image: &[f64]) -> Result<DMatrix<f64>> {
    if rows.nrows() != 2 * psi.source_dim() || image.len() != rows.nrows() {
        return Err(Error::DimensionMismatch {
            expected: 2 * psi.source_dim(),
            got: rows.nrows(),
            context: "gradient rows",
        });
    }
    let z: Vec<Complex64> = to_complex(image);
    let j = psi.jacobian(&z)?;
    if j.iter().any(|c| !c.is_finite()) {
        return Err(Error::PoleAtPoint(format!("{z:?}")));
    }
    Ok(real_jacobian(&j) * rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshes::{two_triangles, unit_right_triangle};
    use crate::simplicial::build_complex;
    use crate::target::{ComponentMap, HolomorphicFunction, Polynomial};

    #[test]
    fn differential_of_identity() {
        let c = unit_right_triangle();
        let m = PLMap::from_fn(&c, |p| p.to_vec()).unwrap();
        let d = m.differential(&c, 0).unwrap();
        assert!((d - DMatrix::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn differential_in_three_space() {
        // triangle in the plane z = x, map = (x, y)
        let c = build_complex(
            vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let m = PLMap::from_fn(&c, |p| vec![p[0], p[1]]).unwrap();
        let d = m.differential(&c, 0).unwrap();
        // tangent gradient of x on that plane is (1/2, 0, 1/2)
        let expected = DMatrix::from_row_slice(2, 3, &[0.5, 0.0, 0.5, 0.0, 1.0, 0.0]);
        assert!((d - expected).amax() < 1e-14);
    }

    #[test]
    fn degenerate_simplex_is_reported() {
        let c = build_complex(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let m = PLMap::from_fn(&c, |p| p.to_vec()).unwrap();
        assert!(matches!(m.differential(&c, 0), Err(Error::DegenerateSimplex(0))));
    }

    #[test]
    fn value_length_checked() {
        let c = two_triangles();
        assert!(PLMap::new(&c, vec![vec![0.0, 0.0]; 3]).is_err());
        assert!(PLMap::new(&c, vec![vec![0.0, 0.0], vec![1.0], vec![0.0, 0.0], vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn compose_with_square() {
        let sq = ComponentMap::polynomial(
            Polynomial::new(1, vec![(Complex64::new(1.0, 0.0), vec![2])]).unwrap(),
        );
        let rows = DMatrix::identity(2, 2);
        // d(z²) at z = 1 + i is 2 + 2i
        let out = compose_gradients(&sq, &rows, &[1.0, 1.0]).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, -2.0, 2.0, 2.0]);
        assert!((out - expected).amax() < 1e-15);
    }

    #[test]
    fn real_view_matches_fd() {
        let f = ComponentMap::new(vec![
            HolomorphicFunction::Product { n: 2, a: 0, b: 1 },
            HolomorphicFunction::PairSum { n: 2, k: 0, l: 1 },
        ])
        .unwrap();
        let view = RealView(&f);
        let x = [0.3, -0.2, 0.7, 0.1];
        let exact = view.jacobian(&x).unwrap();
        let fd = fd_jacobian(&|p: &[f64]| view.value(p), 4, &x, FD_STEP).unwrap();
        assert!((exact - fd).amax() < 1e-9);
    }
}
