//! Example maps and quotients: η maps built from homogeneous polynomials,
//! sums of such maps, torus coverings and a reflection fold.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::maps::{fd_jacobian, AnalyticMap, PLMap, FD_STEP};
use crate::meshes::{flat_torus, grid_index, rect_grid, square_grid, FlatTorus};
use crate::morphism::{commutator_form_residual, phwc_of_gram, phwc_residual, samples_from_analytic, Covering, CoveringKind};
use crate::riemannian::Polyhedron;
use crate::simplicial::build_complex;
use crate::target::{FlatC, Polynomial};

/// Step of the finite-difference Laplacian.
pub const LAPLACIAN_STEP: f64 = 2e-4;

/// One component `F(u) P(v̄) / (G(u) Q(v̄))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaComponent {
    pub f: Polynomial,
    pub g: Polynomial,
    pub p: Polynomial,
    pub q: Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSpec {
    pub k: usize,
    pub s: usize,
    pub components: Vec<EtaComponent>,
}

impl EtaSpec {
    /// `η(u, v) = (u1 / u2)(v̄1 / v̄2)`.
    pub fn standard() -> Self {
        let one = |n, a| Polynomial::variable(n, a);
        Self {
            k: 2,
            s: 2,
            components: vec![EtaComponent {
                f: one(2, 0),
                g: one(2, 1),
                p: one(2, 0),
                q: one(2, 1),
            }],
        }
    }

    /// The standard instance generalized to `C^k × C^s → C^r`: component `i`
    /// is `(u_{a}/u_{b})(v̄_{c}/v̄_{d})` with indices cycling through the
    /// variables (`k, s ≥ 2`).
    pub fn cyclic(k: usize, s: usize, r: usize) -> Result<Self> {
        if k < 2 || s < 2 || r == 0 {
            return Err(Error::InvalidParameter("need k >= 2, s >= 2 and r >= 1".into()));
        }
        let components = (0..r)
            .map(|i| EtaComponent {
                f: Polynomial::variable(k, i % k),
                g: Polynomial::variable(k, (i + 1) % k),
                p: Polynomial::variable(s, i % s),
                q: Polynomial::variable(s, (i + 1) % s),
            })
            .collect();
        Ok(Self { k, s, components })
    }

    /// Holomorphic instance `u1 / u2` (constant `P = Q = 1`).
    pub fn holomorphic() -> Self {
        let c1 = Polynomial::constant(2, Complex64::new(1.0, 0.0));
        Self {
            k: 2,
            s: 2,
            components: vec![EtaComponent {
                f: Polynomial::variable(2, 0),
                g: Polynomial::variable(2, 1),
                p: c1.clone(),
                q: c1,
            }],
        }
    }

    /// Same spec with the coefficients of `P` and `Q` conjugated.
    pub fn conjugate_pq(&self) -> Self {
        let conj = |p: &Polynomial| Polynomial {
            nvars: p.nvars,
            terms: p
                .terms
                .iter()
                .map(|t| crate::target::Monomial {
                    coeff: t.coeff.conj(),
                    powers: t.powers.clone(),
                })
                .collect(),
        };
        Self {
            k: self.k,
            s: self.s,
            components: self
                .components
                .iter()
                .map(|c| EtaComponent {
                    f: c.f.clone(),
                    g: c.g.clone(),
                    p: conj(&c.p),
                    q: conj(&c.q),
                })
                .collect(),
        }
    }
}

/// `(A, ∂A/∂u, B, ∂B/∂w)` for one component.
type QuotientParts = (Complex64, Vec<Complex64>, Complex64, Vec<Complex64>);

/// `η: C^k × C^s → C^r`, holomorphic in `u` and anti-holomorphic in `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaMap {
    spec: EtaSpec,
    guard: f64,
}

pub fn build_eta(spec: EtaSpec) -> Result<EtaMap> {
    if spec.components.is_empty() {
        return Err(Error::EmptyInput("eta components"));
    }
    for (i, c) in spec.components.iter().enumerate() {
        for (poly, n) in [(&c.f, spec.k), (&c.g, spec.k), (&c.p, spec.s), (&c.q, spec.s)] {
            if poly.nvars != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: poly.nvars,
                    context: "eta polynomial variables",
                });
            }
        }
        if c.g.is_zero() || c.q.is_zero() {
            return Err(Error::ZeroDenominatorPolynomial(i));
        }
        for poly in [&c.f, &c.g, &c.p, &c.q] {
            if !poly.is_homogeneous() {
                return Err(Error::Invalid(format!("component {i} has a non-homogeneous polynomial")));
            }
        }
        if !c.f.is_zero() && c.f.degree() != c.g.degree() {
            return Err(Error::DegreeMismatch {
                component: i,
                left: c.f.degree(),
                right: c.g.degree(),
            });
        }
        if !c.p.is_zero() && c.p.degree() != c.q.degree() {
            return Err(Error::DegreeMismatch {
                component: i,
                left: c.p.degree(),
                right: c.q.degree(),
            });
        }
    }
    Ok(EtaMap { spec, guard: 1e-12 })
}

impl EtaMap {
    pub fn spec(&self) -> &EtaSpec {
        &self.spec
    }

    /// Complex variables in which the map is holomorphic (the `u` block).
    pub fn holomorphic_vars(&self) -> Vec<usize> {
        (0..self.spec.k).collect()
    }

    pub fn antiholomorphic_vars(&self) -> Vec<usize> {
        (self.spec.k..self.spec.k + self.spec.s).collect()
    }

    /// Every `P/Q` is constant, so the map is holomorphic.
    pub fn is_holomorphic(&self) -> bool {
        self.spec.components.iter().all(|c| c.p.degree() == 0 && c.q.degree() == 0)
    }

    fn split(&self, x: &[f64]) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let nn = self.spec.k + self.spec.s;
        if x.len() != 2 * nn {
            return Err(Error::DimensionMismatch {
                expected: 2 * nn,
                got: x.len(),
                context: "eta argument",
            });
        }
        let w: Vec<Complex64> = (0..nn).map(|a| Complex64::new(x[a], x[nn + a])).collect();
        let u = w[..self.spec.k].to_vec();
        let vbar = w[self.spec.k..].iter().map(|c| c.conj()).collect();
        Ok((u, vbar))
    }

    /// Complex values and, per component, `(A, ∂A/∂u, B, ∂B/∂w)` with
    /// `A = F/G` at `u` and `B = P/Q` at `w = v̄`.
    fn parts(&self, x: &[f64]) -> Result<Vec<QuotientParts>> {
        let (u, vbar) = self.split(x)?;
        let quotient = |num: &Polynomial, den: &Polynomial, z: &[Complex64]| -> Result<(Complex64, Vec<Complex64>)> {
            let d = den.eval(z);
            if d.norm() < self.guard {
                return Err(Error::PoleAtPoint(format!("{x:?}")));
            }
            let nv = num.eval(z);
            let gn = num.gradient(z);
            let gd = den.gradient(z);
            let grad = gn.iter().zip(&gd).map(|(a, b)| (a * d - nv * b) / (d * d)).collect();
            Ok((nv / d, grad))
        };
        self.spec
            .components
            .iter()
            .map(|c| {
                let (a, da) = quotient(&c.f, &c.g, &u)?;
                let (b, db) = quotient(&c.p, &c.q, &vbar)?;
                Ok((a, da, b, db))
            })
            .collect()
    }

    pub fn complex_value(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        Ok(self.parts(x)?.into_iter().map(|(a, _, b, _)| a * b).collect())
    }
}

impl AnalyticMap for EtaMap {
    fn domain_dim(&self) -> usize {
        2 * (self.spec.k + self.spec.s)
    }
    fn target_dim(&self) -> usize {
        2 * self.spec.components.len()
    }
    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = self.complex_value(x)?;
        Ok(w.iter().map(|c| c.re).chain(w.iter().map(|c| c.im)).collect())
    }
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (k, s) = (self.spec.k, self.spec.s);
        let nn = k + s;
        let r = self.spec.components.len();
        let i = Complex64::new(0.0, 1.0);
        let mut j = DMatrix::zeros(2 * r, 2 * nn);
        for (row, (a, da, b, db)) in self.parts(x)?.into_iter().enumerate() {
            let mut put = |col: usize, d: Complex64| {
                j[(row, col)] = d.re;
                j[(r + row, col)] = d.im;
            };
            for c in 0..k {
                // holomorphic: ∂x = A_c B, ∂y = i A_c B
                put(c, da[c] * b);
                put(nn + c, i * da[c] * b);
            }
            for c in 0..s {
                // anti-holomorphic through w = v̄: ∂x = A B_c, ∂y = −i A B_c
                put(k + c, a * db[c]);
                put(nn + k + c, -i * a * db[c]);
            }
        }
        Ok(j)
    }
}

/// Zero map with the given real dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroMap {
    pub domain: usize,
    pub target: usize,
}

impl AnalyticMap for ZeroMap {
    fn domain_dim(&self) -> usize {
        self.domain
    }
    fn target_dim(&self) -> usize {
        self.target
    }
    fn value(&self, _x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.target])
    }
    fn jacobian(&self, _x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(self.target, self.domain))
    }
}

/// `(w, w̃) ↦ η₁(w) + η₂(w̃)` on `C^{N₁} × C^{N₂}`, with real coordinates
/// `(x(w), x(w̃), y(w), y(w̃))`.
pub struct SumMap<'a> {
    first: &'a dyn AnalyticMap,
    second: &'a dyn AnalyticMap,
}

pub fn sum_map<'a>(first: &'a dyn AnalyticMap, second: &'a dyn AnalyticMap) -> Result<SumMap<'a>> {
    if first.target_dim() != second.target_dim() {
        return Err(Error::DimensionMismatch {
            expected: first.target_dim(),
            got: second.target_dim(),
            context: "summand target dimension",
        });
    }
    if !first.domain_dim().is_multiple_of(2) || !second.domain_dim().is_multiple_of(2) {
        return Err(Error::DimensionMismatch {
            expected: first.domain_dim() + first.domain_dim() % 2,
            got: first.domain_dim(),
            context: "summand domains must be complex",
        });
    }
    Ok(SumMap { first, second })
}

impl SumMap<'_> {
    fn halves(&self) -> (usize, usize) {
        (self.first.domain_dim() / 2, self.second.domain_dim() / 2)
    }

    /// Real column indices of the two blocks in the full domain.
    pub fn block_columns(&self) -> (Vec<usize>, Vec<usize>) {
        let (n1, n2) = self.halves();
        let n = n1 + n2;
        let a = (0..n1).chain(n..n + n1).collect();
        let b = (n1..n).chain(n + n1..2 * n).collect();
        (a, b)
    }

    fn restrict(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.block_columns();
        (a.iter().map(|&c| x[c]).collect(), b.iter().map(|&c| x[c]).collect())
    }

    /// PHWC residual of each block's own gradient columns at `x`.
    pub fn block_residuals(&self, x: &[f64]) -> Result<(f64, f64)> {
        let j = self.jacobian(x)?;
        let (a, b) = self.block_columns();
        let part = |cols: &[usize]| {
            let sub = j.select_columns(cols);
            phwc_of_gram(&(&sub * sub.transpose()))
        };
        Ok((part(&a), part(&b)))
    }
}

impl AnalyticMap for SumMap<'_> {
    fn domain_dim(&self) -> usize {
        self.first.domain_dim() + self.second.domain_dim()
    }
    fn target_dim(&self) -> usize {
        self.first.target_dim()
    }
    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.domain_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.domain_dim(),
                got: x.len(),
                context: "sum map argument",
            });
        }
        let (p, q) = self.restrict(x);
        let a = self.first.value(&p)?;
        let b = self.second.value(&q)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect())
    }
    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (p, q) = self.restrict(x);
        let ja = self.first.jacobian(&p)?;
        let jb = self.second.jacobian(&q)?;
        let (ca, cb) = self.block_columns();
        let mut j = DMatrix::zeros(self.target_dim(), self.domain_dim());
        for (src, &dst) in ca.iter().enumerate() {
            j.set_column(dst, &ja.column(src));
        }
        for (src, &dst) in cb.iter().enumerate() {
            j.set_column(dst, &jb.column(src));
        }
        Ok(j)
    }
}

/// Seeded sample points with every complex coordinate uniform in the
/// annulus `0.5 ≤ |w| ≤ 1`, in real `(x.., y..)` ordering.
pub fn annulus_points(complex_dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let w: Vec<(f64, f64)> = (0..complex_dim)
                .map(|_| {
                    let r = (rng.random_range(0.25..1.0f64)).sqrt();
                    let t = rng.random_range(0.0..2.0 * PI);
                    (r * t.cos(), r * t.sin())
                })
                .collect();
            w.iter().map(|p| p.0).chain(w.iter().map(|p| p.1)).collect()
        })
        .collect()
}

/// Cauchy-Riemann residual (or its anti-holomorphic version) read off a
/// real Jacobian, restricted to the complex variables `vars`.
pub fn jacobian_cr_residual(j: &DMatrix<f64>, vars: &[usize], anti: bool) -> f64 {
    let r = j.nrows() / 2;
    let n = j.ncols() / 2;
    let mut worst: f64 = 0.0;
    for i in 0..r {
        for &a in vars {
            let (fx1, fy1) = (j[(i, a)], j[(i, n + a)]);
            let (fx2, fy2) = (j[(r + i, a)], j[(r + i, n + a)]);
            let v = if anti {
                (fx1 + fy2).abs() + (fy1 - fx2).abs()
            } else {
                (fx1 - fy2).abs() + (fy1 + fx2).abs()
            };
            worst = worst.max(v);
        }
    }
    worst
}

/// Largest `|Δ f^j|` over components by second central differences.
pub fn fd_laplacian(map: &dyn AnalyticMap, x: &[f64], h: f64) -> Result<f64> {
    let f0 = map.value(x)?;
    let mut lap = vec![0.0; f0.len()];
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let plus = map.value(&p)?;
        p[i] = x[i] - h;
        let minus = map.value(&p)?;
        p[i] = x[i];
        for c in 0..f0.len() {
            lap[c] += (plus[c] - 2.0 * f0[c] + minus[c]) / (h * h);
        }
    }
    Ok(lap.iter().fold(0.0, |m, v| m.max(v.abs())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSuiteReport {
    pub samples: usize,
    /// Largest closed-form vs finite-difference Jacobian discrepancy,
    /// relative to `max(1, |J|)`.
    pub gradient_fd_error: f64,
    pub phwc_max: f64,
    pub commutator_max: f64,
    pub laplacian_max: f64,
    /// CR residual in the declared holomorphic variables.
    pub cr_holomorphic_vars: f64,
    /// CR and anti-CR residuals over all variables.
    pub cr_full: f64,
    pub anti_cr_full: f64,
    pub holomorphic: bool,
    pub antiholomorphic: bool,
    pub passes: bool,
}

/// Gradient, PHWC, commutator and harmonicity checks of an analytic map at
/// the given points, plus its holomorphy classification.
pub fn eta_phwc_suite(map: &dyn AnalyticMap, points: &[Vec<f64>], holomorphic_vars: &[usize]) -> Result<EtaSuiteReport> {
    if points.is_empty() {
        return Err(Error::EmptyInput("sample points"));
    }
    let n = map.domain_dim() / 2;
    let all: Vec<usize> = (0..n).collect();
    let mut fd_err: f64 = 0.0;
    let (mut lap, mut cr_u, mut cr_min, mut anti_min) = (0.0f64, 0.0f64, f64::INFINITY, f64::INFINITY);
    let (mut cr_max, mut anti_max) = (0.0f64, 0.0f64);
    for p in points {
        let exact = map.jacobian(p)?;
        let fd = fd_jacobian(&|x: &[f64]| map.value(x), map.target_dim(), p, FD_STEP)?;
        fd_err = fd_err.max((&exact - &fd).amax() / exact.amax().max(1.0));
        lap = lap.max(fd_laplacian(map, p, LAPLACIAN_STEP)?);
        cr_u = cr_u.max(jacobian_cr_residual(&fd, holomorphic_vars, false));
        let cr = jacobian_cr_residual(&fd, &all, false);
        let anti = jacobian_cr_residual(&fd, &all, true);
        cr_min = cr_min.min(cr);
        anti_min = anti_min.min(anti);
        cr_max = cr_max.max(cr);
        anti_max = anti_max.max(anti);
    }
    let samples = samples_from_analytic(map, points)?;
    let phwc = phwc_residual(&samples, 1e-8)?;
    let comm = commutator_form_residual(&samples, &FlatC::new(map.target_dim() / 2), 1e-8)?;
    let passes = fd_err < 1e-6 && phwc.normalized_max < 1e-8 && comm.normalized_max < 1e-8 && lap < 1e-4;
    Ok(EtaSuiteReport {
        samples: points.len(),
        gradient_fd_error: fd_err,
        phwc_max: phwc.normalized_max,
        commutator_max: comm.normalized_max,
        laplacian_max: lap,
        cr_holomorphic_vars: cr_u,
        cr_full: cr_max,
        anti_cr_full: anti_max,
        holomorphic: cr_max < 1e-6,
        antiholomorphic: anti_max < 1e-6,
        passes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveringSpec {
    TorusCover,
    ReflectionFold,
}

impl std::str::FromStr for CoveringSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus_cover" | "torus-cover" => Ok(Self::TorusCover),
            "reflection_fold" | "reflection-fold" => Ok(Self::ReflectionFold),
            other => Err(Error::UnknownSpec(other.to_string())),
        }
    }
}

/// Builds the quotient `π: total → base`. For the torus the base is the
/// `n × n` flat torus and the total space its `2n × n` double cover; for the
/// fold the total space is `[−1,1]×[0,1]` folded onto `[0,1]×[0,1]`.
pub fn build_covering(spec: CoveringSpec, n: usize) -> Result<Covering> {
    match spec {
        CoveringSpec::TorusCover => {
            if n < 3 {
                return Err(Error::InvalidParameter("torus cover needs n >= 3".into()));
            }
            let base = flat_torus(n, n, 1.0, 1.0);
            let total = flat_torus(2 * n, n, 2.0, 1.0);
            let projection = (0..total.complex.vertex_count())
                .map(|v| base.index(v % (2 * n), v / (2 * n)))
                .collect();
            Covering::new(total.polyhedron, base.polyhedron, projection, CoveringKind::Free)
        }
        CoveringSpec::ReflectionFold => {
            if n == 0 {
                return Err(Error::InvalidParameter("fold needs n >= 1".into()));
            }
            let base = rect_grid(n, n, (0.0, 1.0), (0.0, 1.0));
            let w = 2 * n;
            let idx = |i: usize, j: usize| j * (w + 1) + i;
            let mut verts = Vec::new();
            for j in 0..=n {
                for i in 0..=w {
                    verts.push(vec![-1.0 + i as f64 / n as f64, j as f64 / n as f64]);
                }
            }
            let mut tris = Vec::new();
            for j in 0..n {
                for i in 0..w {
                    if i >= n {
                        tris.push(vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                        tris.push(vec![idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
                    } else {
                        tris.push(vec![idx(i + 1, j), idx(i, j), idx(i, j + 1)]);
                        tris.push(vec![idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)]);
                    }
                }
            }
            let total = build_complex(verts, tris)?;
            let projection = (0..total.vertex_count())
                .map(|v| grid_index(n, (v % (w + 1)).abs_diff(n), v / (w + 1)))
                .collect();
            Covering::new(
                Polyhedron::induced(total)?,
                Polyhedron::induced(base)?,
                projection,
                CoveringKind::Reflection,
            )
        }
    }
}

/// Constant map on a polyhedron.
pub fn constant_map(poly: &Polyhedron, value: &[f64]) -> Result<PLMap> {
    PLMap::new(poly.complex(), vec![value.to_vec(); poly.complex().vertex_count()])
}

/// `(hx·(i mod 2), 2hy·(j mod 2))` on an even flat torus grid: slopes `±1`
/// in x and `±2` in y on every triangle, so the PHWC residual is 3.
pub fn torus_sawtooth(torus: &FlatTorus) -> Result<PLMap> {
    if !torus.nx.is_multiple_of(2) || !torus.ny.is_multiple_of(2) {
        return Err(Error::InvalidParameter("sawtooth needs an even grid".into()));
    }
    let hx = torus.lx / torus.nx as f64;
    let hy = torus.ly / torus.ny as f64;
    let values = (0..torus.complex.vertex_count())
        .map(|v| {
            let (i, j) = (v % torus.nx, v / torus.nx);
            vec![hx * (i % 2) as f64, 2.0 * hy * (j % 2) as f64]
        })
        .collect();
    PLMap::new(&torus.complex, values)
}

/// The fold `x + iy ↦ x + i|y|`: conformal above the x-axis and
/// anti-conformal below, so PHWC on grids aligned with the axis, but not
/// harmonic across the fold.
pub fn fold_map(complex: &crate::simplicial::SimplicialComplex) -> Result<PLMap> {
    if complex.ambient_dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: complex.ambient_dim(),
            context: "fold map needs planar coordinates",
        });
    }
    PLMap::from_fn(complex, |p| vec![p[0], p[1].abs()])
}

/// Refinements of the unit square with `base·2^l` cells per side
/// (`l < count`), each with a map interpolated from `f`.
pub fn square_levels(
    base: usize,
    count: usize,
    distortion: f64,
    f: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Vec<(Polyhedron, PLMap)>> {
    (0..count)
        .map(|l| {
            let c = square_grid(base << l, distortion);
            let map = PLMap::from_fn(&c, &f)?;
            Ok((Polyhedron::induced(c)?, map))
        })
        .collect()
}
