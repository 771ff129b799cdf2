//! Charted Hermitian targets, holomorphic test functions and the numerical
//! Cauchy-Riemann / Kähler symmetry checks.
//!
//! Real chart coordinates are ordered `(x_1, ..., x_n, y_1, ..., y_n)` with
//! `z_A = x_A + i y_A`; the complex structure is `J ∂x_A = ∂y_A`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riemannian::spd_inverse;

/// Default finite-difference step for first derivatives.
pub const CR_STEP: f64 = 1e-5;
/// Default finite-difference step for mixed second derivatives.
pub const SECOND_STEP: f64 = 1e-4;

/// Christoffel symbols `Γ^k_{αβ}` of a real chart of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, a: usize, b: usize) -> f64 {
        self.data[(k * self.dim + a) * self.dim + b]
    }

    pub fn set(&mut self, k: usize, a: usize, b: usize, v: f64) {
        let d = self.dim;
        self.data[(k * d + a) * d + b] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|Γ^k_{αβ} − Γ^k_{βα}|`.
    pub fn asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for k in 0..d {
            for a in 0..d {
                for b in 0..d {
                    worst = worst.max((self.get(k, a, b) - self.get(k, b, a)).abs());
                }
            }
        }
        worst
    }

    /// `Σ_{αβ} Γ^k_{αβ} m_{αβ}` for every `k`.
    pub fn contract(&self, m: &DMatrix<f64>) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|k| {
                let mut acc = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        acc += self.get(k, a, b) * m[(a, b)];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn max_difference(&self, other: &Christoffel) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// A Hermitian manifold in a single holomorphic chart.
pub trait ChartedTarget: Send + Sync {
    /// Complex dimension `n`; the real chart has `2n` coordinates.
    fn complex_dim(&self) -> usize;
    fn name(&self) -> String;
    /// Metric matrix `h_{αβ}(z)` in real chart coordinates.
    fn metric(&self, z: &[f64]) -> Result<DMatrix<f64>>;
    fn christoffel(&self, z: &[f64]) -> Result<Christoffel>;
    fn is_hermitian(&self) -> bool {
        true
    }
    fn is_kahler(&self) -> bool;
    fn in_chart(&self, z: &[f64]) -> bool {
        z.len() == 2 * self.complex_dim() && z.iter().all(|v| v.is_finite())
    }

    fn real_dim(&self) -> usize {
        2 * self.complex_dim()
    }

    fn inverse_metric(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let h = self.metric(z)?;
        spd_inverse(&h)
            .map(|(inv, _)| inv)
            .map_err(|_| Error::TargetMetricSingular(format!("{z:?}")))
    }
}

fn check_point(target: &dyn ChartedTarget, z: &[f64]) -> Result<()> {
    if z.len() != target.real_dim() {
        return Err(Error::DimensionMismatch {
            expected: target.real_dim(),
            got: z.len(),
            context: "chart point",
        });
    }
    if !target.in_chart(z) {
        return Err(Error::ChartBoundary(format!("{z:?}")));
    }
    Ok(())
}

/// Flat `C^n` with the Euclidean metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlatC {
    pub n: usize,
}

impl FlatC {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl ChartedTarget for FlatC {
    fn complex_dim(&self) -> usize {
        self.n
    }
    fn name(&self) -> String {
        format!("flat:{}", self.n)
    }
    fn metric(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        check_point(self, z)?;
        Ok(DMatrix::identity(2 * self.n, 2 * self.n))
    }
    fn christoffel(&self, z: &[f64]) -> Result<Christoffel> {
        check_point(self, z)?;
        Ok(Christoffel::zeros(2 * self.n))
    }
    fn is_kahler(&self) -> bool {
        true
    }
}

/// Round metric `4|dz|²/(1+|z|²)²` on the affine chart of CP¹ (the
/// Fubini-Study metric up to a constant factor).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FubiniStudyCp1;

impl FubiniStudyCp1 {
    fn conformal_factor(z: &[f64]) -> f64 {
        let r2 = z[0] * z[0] + z[1] * z[1];
        4.0 / ((1.0 + r2) * (1.0 + r2))
    }
}

impl ChartedTarget for FubiniStudyCp1 {
    fn complex_dim(&self) -> usize {
        1
    }
    fn name(&self) -> String {
        "cp1".into()
    }
    fn metric(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        check_point(self, z)?;
        Ok(DMatrix::identity(2, 2) * Self::conformal_factor(z))
    }
    fn christoffel(&self, z: &[f64]) -> Result<Christoffel> {
        check_point(self, z)?;
        // h = e^{2u} δ with u = ln 2 − ln(1 + |z|²)
        let r2 = z[0] * z[0] + z[1] * z[1];
        let du = [-2.0 * z[0] / (1.0 + r2), -2.0 * z[1] / (1.0 + r2)];
        let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let mut g = Christoffel::zeros(2);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    g.set(
                        k,
                        i,
                        j,
                        delta(i, k) * du[j] + delta(j, k) * du[i] - delta(i, j) * du[k],
                    );
                }
            }
        }
        Ok(g)
    }
    fn is_kahler(&self) -> bool {
        true
    }
}

/// A constant Hermitian metric on `C^n` built from a positive definite
/// Hermitian matrix `H`: `h = [[Re H, Im H], [−Im H, Re H]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantHermitian {
    n: usize,
    h: DMatrix<f64>,
}

impl ConstantHermitian {
    pub fn from_real(h: DMatrix<f64>) -> Result<Self> {
        if !h.nrows().is_multiple_of(2) || !h.is_square() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows() + h.nrows() % 2,
                got: h.nrows(),
                context: "hermitian metric size",
            });
        }
        spd_inverse(&h)?;
        let n = h.nrows() / 2;
        let t = Self { n, h };
        let res = hermitian_residual(&t, &vec![0.0; 2 * n])?;
        if res > 1e-10 * t.h.amax().max(1.0) {
            return Err(Error::Invalid(format!("metric is not J-invariant (residual {res:e})")));
        }
        Ok(t)
    }

    pub fn from_complex(h: &DMatrix<Complex64>) -> Result<Self> {
        let n = h.nrows();
        let real = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let (rb, cb) = (r / n, c / n);
            let e = h[(r % n, c % n)];
            match (rb, cb) {
                (0, 0) | (1, 1) => e.re,
                (0, 1) => e.im,
                _ => -e.im,
            }
        });
        Self::from_real(real)
    }
}

impl ChartedTarget for ConstantHermitian {
    fn complex_dim(&self) -> usize {
        self.n
    }
    fn name(&self) -> String {
        format!("hermitian:{}", self.n)
    }
    fn metric(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        check_point(self, z)?;
        Ok(self.h.clone())
    }
    fn christoffel(&self, z: &[f64]) -> Result<Christoffel> {
        check_point(self, z)?;
        Ok(Christoffel::zeros(2 * self.n))
    }
    fn is_kahler(&self) -> bool {
        true
    }
}

pub type TargetMetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// User-supplied Hermitian metric; Christoffel symbols come from finite
/// differences and the Kähler flag is only ever established pointwise.
#[derive(Clone)]
pub struct CustomTarget {
    n: usize,
    name: String,
    metric: TargetMetricFn,
    kahler: bool,
}

impl CustomTarget {
    pub fn new(n: usize, name: impl Into<String>, metric: TargetMetricFn) -> Self {
        Self {
            n,
            name: name.into(),
            metric,
            kahler: false,
        }
    }

    /// Mark as Kähler if `dω` vanishes (to 1e-6) at every given point.
    pub fn certify_kahler(mut self, points: &[Vec<f64>]) -> Result<Self> {
        for p in points {
            let r = kahler_form_closedness(&self, p, SECOND_STEP)?;
            if r > 1e-6 {
                return Err(Error::NotKahler(format!("dω = {r:e} at {p:?}")));
            }
        }
        self.kahler = !points.is_empty();
        Ok(self)
    }
}

impl ChartedTarget for CustomTarget {
    fn complex_dim(&self) -> usize {
        self.n
    }
    fn name(&self) -> String {
        self.name.clone()
    }
    fn metric(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        check_point(self, z)?;
        Ok((self.metric)(z))
    }
    fn christoffel(&self, z: &[f64]) -> Result<Christoffel> {
        check_point(self, z)?;
        fd_christoffel(&|p: &[f64]| (self.metric)(p), z, CR_STEP)
    }
    fn is_kahler(&self) -> bool {
        self.kahler
    }
}

/// Target selected by name: `flat:n` or `cp1`.
pub fn target_from_name(spec: &str) -> Result<Box<dyn ChartedTarget>> {
    let spec = spec.trim();
    if spec == "cp1" {
        return Ok(Box::new(FubiniStudyCp1));
    }
    if let Some(n) = spec.strip_prefix("flat:") {
        let n: usize = n
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad target dimension in {spec:?}")))?;
        if n == 0 {
            return Err(Error::InvalidParameter("flat target needs n >= 1".into()));
        }
        return Ok(Box::new(FlatC::new(n)));
    }
    Err(Error::InvalidParameter(format!("unknown target {spec:?}")))
}

/// Matrix of `J` on real chart coordinates.
pub fn complex_structure(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        j[(n + a, a)] = 1.0;
        j[(a, n + a)] = -1.0;
    }
    j
}

/// `max |h(JU, JV) − h(U, V)|` over coordinate vectors.
pub fn hermitian_residual(target: &dyn ChartedTarget, z: &[f64]) -> Result<f64> {
    let h = target.metric(z)?;
    let j = complex_structure(target.complex_dim());
    Ok((j.transpose() * &h * &j - h).amax())
}

/// Levi-Civita symbols from central differences of a metric evaluator.
pub fn fd_christoffel(
    metric: &dyn Fn(&[f64]) -> DMatrix<f64>,
    z: &[f64],
    step: f64,
) -> Result<Christoffel> {
    let d = z.len();
    let h0 = metric(z);
    let (inv, _) = spd_inverse(&h0).map_err(|_| Error::TargetMetricSingular(format!("{z:?}")))?;
    let mut dh = Vec::with_capacity(d);
    for l in 0..d {
        let hstep = step * z[l].abs().max(1.0);
        let mut p = z.to_vec();
        p[l] += hstep;
        let plus = metric(&p);
        p[l] -= 2.0 * hstep;
        let minus = metric(&p);
        dh.push((plus - minus) / (2.0 * hstep));
    }
    let mut g = Christoffel::zeros(d);
    for k in 0..d {
        for a in 0..d {
            for b in 0..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += inv[(k, l)] * (dh[a][(b, l)] + dh[b][(a, l)] - dh[l][(a, b)]);
                }
                g.set(k, a, b, 0.5 * acc);
            }
        }
    }
    Ok(g)
}

/// `max |∂_k h_ij − Γ^l_{ki} h_lj − Γ^l_{kj} h_il|` with `∂h` by central differences.
pub fn metric_compatibility_residual(target: &dyn ChartedTarget, z: &[f64], step: f64) -> Result<f64> {
    let d = target.real_dim();
    let h = target.metric(z)?;
    let gamma = target.christoffel(z)?;
    let mut worst: f64 = 0.0;
    for k in 0..d {
        let hs = step * z[k].abs().max(1.0);
        let mut p = z.to_vec();
        p[k] += hs;
        let plus = target.metric(&p)?;
        p[k] -= 2.0 * hs;
        let minus = target.metric(&p)?;
        let dh = (plus - minus) / (2.0 * hs);
        for i in 0..d {
            for j in 0..d {
                let mut rhs = 0.0;
                for l in 0..d {
                    rhs += gamma.get(l, k, i) * h[(l, j)] + gamma.get(l, k, j) * h[(i, l)];
                }
                worst = worst.max((dh[(i, j)] - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Largest component of `dω` for the fundamental form `ω(U, V) = h(JU, V)`.
pub fn kahler_form_closedness(target: &dyn ChartedTarget, z: &[f64], step: f64) -> Result<f64> {
    let d = target.real_dim();
    let j = complex_structure(target.complex_dim());
    let omega = |p: &[f64]| -> Result<DMatrix<f64>> { Ok(j.transpose() * target.metric(p)?) };
    let mut domega = Vec::with_capacity(d);
    for a in 0..d {
        let hs = step * z[a].abs().max(1.0);
        let mut p = z.to_vec();
        p[a] += hs;
        let plus = omega(&p)?;
        p[a] -= 2.0 * hs;
        let minus = omega(&p)?;
        domega.push((plus - minus) / (2.0 * hs));
    }
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in (a + 1)..d {
            for c in (b + 1)..d {
                let v = domega[a][(b, c)] + domega[b][(c, a)] + domega[c][(a, b)];
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

/// Complex-valued function of several complex variables (not necessarily
/// holomorphic); the input to the numerical checks.
pub trait ComplexFunction {
    fn nvars(&self) -> usize;
    fn value(&self, z: &[Complex64]) -> Result<Complex64>;
}

/// Wraps an arbitrary closure as a [`ComplexFunction`].
pub struct ClosureFunction<F> {
    nvars: usize,
    f: F,
}

impl<F: Fn(&[Complex64]) -> Complex64> ClosureFunction<F> {
    pub fn new(nvars: usize, f: F) -> Self {
        Self { nvars, f }
    }
}

impl<F: Fn(&[Complex64]) -> Complex64> ComplexFunction for ClosureFunction<F> {
    fn nvars(&self) -> usize {
        self.nvars
    }
    fn value(&self, z: &[Complex64]) -> Result<Complex64> {
        let v = (self.f)(z);
        if !v.is_finite() {
            return Err(Error::PoleAtPoint(format!("{z:?}")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: Complex64,
    pub powers: Vec<u32>,
}

/// Polynomial in `nvars` complex variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub nvars: usize,
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(nvars: usize, terms: Vec<(Complex64, Vec<u32>)>) -> Result<Self> {
        let mut out = Vec::with_capacity(terms.len());
        for (coeff, powers) in terms {
            if powers.len() != nvars {
                return Err(Error::DimensionMismatch {
                    expected: nvars,
                    got: powers.len(),
                    context: "monomial exponents",
                });
            }
            if !coeff.is_finite() {
                return Err(Error::Invalid("non-finite polynomial coefficient".into()));
            }
            out.push(Monomial { coeff, powers });
        }
        Ok(Self { nvars, terms: out })
    }

    pub fn constant(nvars: usize, c: Complex64) -> Self {
        Self {
            nvars,
            terms: vec![Monomial {
                coeff: c,
                powers: vec![0; nvars],
            }],
        }
    }

    /// The coordinate `z_a`.
    pub fn variable(nvars: usize, a: usize) -> Self {
        let mut powers = vec![0; nvars];
        powers[a] = 1;
        Self {
            nvars,
            terms: vec![Monomial {
                coeff: Complex64::new(1.0, 0.0),
                powers,
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff == Complex64::new(0.0, 0.0))
    }

    fn live_terms(&self) -> impl Iterator<Item = &Monomial> {
        self.terms.iter().filter(|t| t.coeff != Complex64::new(0.0, 0.0))
    }

    /// Total degree (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.live_terms()
            .map(|t| t.powers.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.live_terms().map(|t| t.powers.iter().sum::<u32>());
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.live_terms()
            .map(|t| {
                t.powers
                    .iter()
                    .zip(z)
                    .fold(t.coeff, |acc, (&p, zi)| acc * zi.powu(p))
            })
            .sum()
    }

    pub fn gradient(&self, z: &[Complex64]) -> Vec<Complex64> {
        let mut g = vec![Complex64::new(0.0, 0.0); self.nvars];
        for t in self.live_terms() {
            for (a, ga) in g.iter_mut().enumerate() {
                let pa = t.powers[a];
                if pa == 0 {
                    continue;
                }
                let mut term = t.coeff * pa as f64;
                for (b, (&pb, zb)) in t.powers.iter().zip(z).enumerate() {
                    let e = if b == a { pb - 1 } else { pb };
                    term *= zb.powu(e);
                }
                *ga += term;
            }
        }
        g
    }
}

/// Holomorphic test functions on a chart of `C^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HolomorphicFunction {
    Coordinate { n: usize, a: usize },
    PairSum { n: usize, k: usize, l: usize },
    Product { n: usize, a: usize, b: usize },
    /// `i z_a z_b`
    IProduct { n: usize, a: usize, b: usize },
    Polynomial(Polynomial),
    /// `num / den`, refused where `|den| < guard`.
    Rational {
        num: Polynomial,
        den: Polynomial,
        guard: f64,
    },
}

impl HolomorphicFunction {
    pub fn tag(&self) -> String {
        match self {
            Self::Coordinate { a, .. } => format!("z{}", a + 1),
            Self::PairSum { k, l, .. } => format!("z{}+z{}", k + 1, l + 1),
            Self::Product { a, b, .. } => format!("z{}*z{}", a + 1, b + 1),
            Self::IProduct { a, b, .. } => format!("i*z{}*z{}", a + 1, b + 1),
            Self::Polynomial(p) => format!("poly(deg {})", p.degree()),
            Self::Rational { num, den, .. } => format!("rational({}/{})", num.degree(), den.degree()),
        }
    }

    /// Complex gradient `(∂f/∂z_1, ..., ∂f/∂z_n)`.
    pub fn derivative(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.nvars();
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let mut g = vec![zero; n];
        match self {
            Self::Coordinate { a, .. } => g[*a] = one,
            Self::PairSum { k, l, .. } => {
                g[*k] += one;
                g[*l] += one;
            }
            Self::Product { a, b, .. } => {
                g[*a] += z[*b];
                g[*b] += z[*a];
            }
            Self::IProduct { a, b, .. } => {
                let i = Complex64::new(0.0, 1.0);
                g[*a] += i * z[*b];
                g[*b] += i * z[*a];
            }
            Self::Polynomial(p) => g = p.gradient(z),
            Self::Rational { num, den, guard } => {
                let d = den.eval(z);
                if d.norm() < *guard || !d.is_finite() {
                    return Err(Error::PoleAtPoint(format!("{z:?}")));
                }
                let nv = num.eval(z);
                let gn = num.gradient(z);
                let gd = den.gradient(z);
                for a in 0..n {
                    g[a] = (gn[a] * d - nv * gd[a]) / (d * d);
                }
            }
        }
        if g.iter().any(|c| !c.is_finite()) {
            return Err(Error::PoleAtPoint(format!("{z:?}")));
        }
        Ok(g)
    }
}

impl ComplexFunction for HolomorphicFunction {
    fn nvars(&self) -> usize {
        match self {
            Self::Coordinate { n, .. }
            | Self::PairSum { n, .. }
            | Self::Product { n, .. }
            | Self::IProduct { n, .. } => *n,
            Self::Polynomial(p) => p.nvars,
            Self::Rational { num, .. } => num.nvars,
        }
    }

    fn value(&self, z: &[Complex64]) -> Result<Complex64> {
        let v = match self {
            Self::Coordinate { a, .. } => z[*a],
            Self::PairSum { k, l, .. } => z[*k] + z[*l],
            Self::Product { a, b, .. } => z[*a] * z[*b],
            Self::IProduct { a, b, .. } => Complex64::new(0.0, 1.0) * z[*a] * z[*b],
            Self::Polynomial(p) => p.eval(z),
            Self::Rational { num, den, guard } => {
                let d = den.eval(z);
                if d.norm() < *guard {
                    return Err(Error::PoleAtPoint(format!("{z:?}")));
                }
                num.eval(z) / d
            }
        };
        if !v.is_finite() {
            return Err(Error::PoleAtPoint(format!("{z:?}")));
        }
        Ok(v)
    }
}

/// Coordinates, pair sums, products and `i`-products on `C^n`: the family
/// whose PHWC pullbacks recover every PHWC identity of a map.
pub fn standard_family(n: usize) -> Vec<HolomorphicFunction> {
    let mut out = Vec::new();
    for a in 0..n {
        out.push(HolomorphicFunction::Coordinate { n, a });
    }
    for k in 0..n {
        for l in (k + 1)..n {
            out.push(HolomorphicFunction::PairSum { n, k, l });
        }
    }
    for a in 0..n {
        for b in a..n {
            out.push(HolomorphicFunction::Product { n, a, b });
        }
    }
    for a in 0..n {
        for b in a..n {
            out.push(HolomorphicFunction::IProduct { n, a, b });
        }
    }
    out
}

/// Holomorphic map `C^n → C^p` given by values and complex Jacobians.
pub trait HolomorphicMap {
    fn source_dim(&self) -> usize;
    fn target_dim(&self) -> usize;
    fn value(&self, z: &[Complex64]) -> Result<Vec<Complex64>>;
    /// `p × n` complex Jacobian.
    fn jacobian(&self, z: &[Complex64]) -> Result<DMatrix<Complex64>>;
}

/// A map whose components are [`HolomorphicFunction`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMap {
    n: usize,
    components: Vec<HolomorphicFunction>,
}

impl ComponentMap {
    pub fn new(components: Vec<HolomorphicFunction>) -> Result<Self> {
        let n = components
            .first()
            .ok_or(Error::EmptyInput("map components"))?
            .nvars();
        if let Some(c) = components.iter().find(|c| c.nvars() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.nvars(),
                context: "component variable count",
            });
        }
        Ok(Self { n, components })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            components: (0..n).map(|a| HolomorphicFunction::Coordinate { n, a }).collect(),
        }
    }

    /// Single polynomial `C^n → C`.
    pub fn polynomial(p: Polynomial) -> Self {
        Self {
            n: p.nvars,
            components: vec![HolomorphicFunction::Polynomial(p)],
        }
    }

    pub fn components(&self) -> &[HolomorphicFunction] {
        &self.components
    }
}

impl HolomorphicMap for ComponentMap {
    fn source_dim(&self) -> usize {
        self.n
    }
    fn target_dim(&self) -> usize {
        self.components.len()
    }
    fn value(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        self.components.iter().map(|c| c.value(z)).collect()
    }
    fn jacobian(&self, z: &[Complex64]) -> Result<DMatrix<Complex64>> {
        let mut j = DMatrix::zeros(self.components.len(), self.n);
        for (r, c) in self.components.iter().enumerate() {
            for (col, d) in c.derivative(z)?.into_iter().enumerate() {
                j[(r, col)] = d;
            }
        }
        Ok(j)
    }
}

/// `outer ∘ inner`.
pub struct Composition<'a> {
    pub outer: &'a dyn HolomorphicMap,
    pub inner: &'a dyn HolomorphicMap,
}

impl HolomorphicMap for Composition<'_> {
    fn source_dim(&self) -> usize {
        self.inner.source_dim()
    }
    fn target_dim(&self) -> usize {
        self.outer.target_dim()
    }
    fn value(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        self.outer.value(&self.inner.value(z)?)
    }
    fn jacobian(&self, z: &[Complex64]) -> Result<DMatrix<Complex64>> {
        let w = self.inner.value(z)?;
        Ok(self.outer.jacobian(&w)? * self.inner.jacobian(z)?)
    }
}

/// A value-only map `C^n → C^p`; its Jacobian is the complex derivative along
/// the real axes, so it is only meaningful when the map is holomorphic.
pub struct ClosureMap<F> {
    n: usize,
    p: usize,
    f: F,
}

impl<F: Fn(&[Complex64]) -> Vec<Complex64>> ClosureMap<F> {
    pub fn new(n: usize, p: usize, f: F) -> Self {
        Self { n, p, f }
    }
}

impl<F: Fn(&[Complex64]) -> Vec<Complex64>> HolomorphicMap for ClosureMap<F> {
    fn source_dim(&self) -> usize {
        self.n
    }
    fn target_dim(&self) -> usize {
        self.p
    }
    fn value(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        let v = (self.f)(z);
        if v.len() != self.p || v.iter().any(|c| !c.is_finite()) {
            return Err(Error::PoleAtPoint(format!("{z:?}")));
        }
        Ok(v)
    }
    fn jacobian(&self, z: &[Complex64]) -> Result<DMatrix<Complex64>> {
        let mut j = DMatrix::zeros(self.p, self.n);
        for a in 0..self.n {
            let h = CR_STEP * z[a].norm().max(1.0);
            let mut zp = z.to_vec();
            zp[a] += h;
            let plus = self.value(&zp)?;
            zp[a] -= 2.0 * h;
            let minus = self.value(&zp)?;
            for r in 0..self.p {
                j[(r, a)] = (plus[r] - minus[r]) / (2.0 * h);
            }
        }
        Ok(j)
    }
}

/// Component `r` of a map as a scalar function.
pub struct MapComponent<'a> {
    pub map: &'a dyn HolomorphicMap,
    pub index: usize,
}

impl ComplexFunction for MapComponent<'_> {
    fn nvars(&self) -> usize {
        self.map.source_dim()
    }
    fn value(&self, z: &[Complex64]) -> Result<Complex64> {
        Ok(self.map.value(z)?[self.index])
    }
}

/// Real `2p × 2n` Jacobian of a complex-linear map in `(x.., y..)` ordering.
pub fn real_jacobian(j: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (p, n) = j.shape();
    DMatrix::from_fn(2 * p, 2 * n, |r, c| {
        let e = j[(r % p, c % n)];
        match (r / p, c / n) {
            (0, 0) | (1, 1) => e.re,
            (0, 1) => -e.im,
            _ => e.im,
        }
    })
}

pub fn to_complex(z: &[f64]) -> Vec<Complex64> {
    let n = z.len() / 2;
    (0..n).map(|a| Complex64::new(z[a], z[n + a])).collect()
}

pub fn to_real(z: &[Complex64]) -> Vec<f64> {
    z.iter().map(|c| c.re).chain(z.iter().map(|c| c.im)).collect()
}

/// Partial derivatives of `(Re f, Im f)` along `x_a` and `y_a` by central
/// differences: returns `[[∂x f¹, ∂y f¹], [∂x f², ∂y f²]]`.
fn partials(f: &dyn ComplexFunction, z: &[Complex64], a: usize, step: f64) -> Result<[[f64; 2]; 2]> {
    let h = step * z[a].norm().max(1.0);
    let mut out = [[0.0; 2]; 2];
    for (col, dir) in [Complex64::new(h, 0.0), Complex64::new(0.0, h)].into_iter().enumerate() {
        let mut zp = z.to_vec();
        zp[a] += dir;
        let plus = f.value(&zp)?;
        zp[a] -= 2.0 * dir;
        let minus = f.value(&zp)?;
        let d = (plus - minus) / (2.0 * h);
        out[0][col] = d.re;
        out[1][col] = d.im;
    }
    Ok(out)
}

fn check_vars(f: &dyn ComplexFunction, point: &[Complex64]) -> Result<()> {
    if point.len() != f.nvars() {
        return Err(Error::DimensionMismatch {
            expected: f.nvars(),
            got: point.len(),
            context: "function arguments",
        });
    }
    f.value(point).map(|_| ())
}

/// `max_A |∂x_A f¹ − ∂y_A f²| + |∂y_A f¹ + ∂x_A f²|` over all variables.
pub fn cauchy_riemann_residual(f: &dyn ComplexFunction, point: &[Complex64], step: f64) -> Result<f64> {
    let vars: Vec<usize> = (0..f.nvars()).collect();
    cauchy_riemann_residual_over(f, point, step, &vars, false)
}

/// Cauchy-Riemann residual restricted to `vars`; with `anti` the conjugate
/// equations (anti-holomorphy) are tested instead.
pub fn cauchy_riemann_residual_over(
    f: &dyn ComplexFunction,
    point: &[Complex64],
    step: f64,
    vars: &[usize],
    anti: bool,
) -> Result<f64> {
    check_vars(f, point)?;
    let mut worst: f64 = 0.0;
    for &a in vars {
        let [[fx1, fy1], [fx2, fy2]] = partials(f, point, a, step)?;
        let r = if anti {
            (fx1 + fy2).abs() + (fy1 - fx2).abs()
        } else {
            (fx1 - fy2).abs() + (fy1 + fx2).abs()
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

/// `max_{j,A,B} |∂²f^j/∂x_A∂y_B − ∂²f^j/∂x_B∂y_A|` by mixed central differences.
pub fn kahler_symmetry_residual(f: &dyn ComplexFunction, point: &[Complex64], step: f64) -> Result<f64> {
    check_vars(f, point)?;
    let n = f.nvars();
    let mixed = |a: usize, b: usize| -> Result<Complex64> {
        let hx = step * point[a].norm().max(1.0);
        let hy = step * point[b].norm().max(1.0);
        let eval = |sx: f64, sy: f64| -> Result<Complex64> {
            let mut z = point.to_vec();
            z[a] += Complex64::new(sx * hx, 0.0);
            z[b] += Complex64::new(0.0, sy * hy);
            f.value(&z)
        };
        Ok((eval(1.0, 1.0)? - eval(1.0, -1.0)? - eval(-1.0, 1.0)? + eval(-1.0, -1.0)?) / (4.0 * hx * hy))
    };
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in (a + 1)..n {
            let d = mixed(a, b)? - mixed(b, a)?;
            worst = worst.max(d.re.abs()).max(d.im.abs());
        }
    }
    Ok(worst)
}

/// Largest Cauchy-Riemann residual over the components of a map.
pub fn map_cauchy_riemann_residual(map: &dyn HolomorphicMap, point: &[Complex64], step: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for index in 0..map.target_dim() {
        let comp = MapComponent { map, index };
        worst = worst.max(cauchy_riemann_residual(&comp, point, step)?);
    }
    Ok(worst)
}

/// Christoffel symbols of a target at a chart point.
pub fn christoffel(target: &dyn ChartedTarget, z: &[f64]) -> Result<Christoffel> {
    target.christoffel(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cr_examples() {
        let sq = HolomorphicFunction::Polynomial(
            Polynomial::new(1, vec![(c(1.0, 0.0), vec![2])]).unwrap(),
        );
        assert!(cauchy_riemann_residual(&sq, &[c(1.0, 1.0)], CR_STEP).unwrap() < 1e-8);

        let conj = ClosureFunction::new(1, |z: &[Complex64]| z[0].conj());
        let r = cauchy_riemann_residual(&conj, &[c(0.3, -0.7)], CR_STEP).unwrap();
        assert!((r - 2.0).abs() < 1e-8, "{r}");
        let anti = cauchy_riemann_residual_over(&conj, &[c(0.3, -0.7)], CR_STEP, &[0], true).unwrap();
        assert!(anti < 1e-8);
    }

    #[test]
    fn kahler_symmetry_examples() {
        let prod = HolomorphicFunction::Product { n: 2, a: 0, b: 1 };
        assert!(kahler_symmetry_residual(&prod, &[c(0.4, 0.1), c(-0.3, 0.9)], SECOND_STEP).unwrap() < 1e-6);
        let cube = HolomorphicFunction::Polynomial(Polynomial::new(1, vec![(c(1.0, 0.0), vec![3])]).unwrap());
        assert!(kahler_symmetry_residual(&cube, &[c(0.5, 0.5)], SECOND_STEP).unwrap() < 1e-6);
        // x1 * y2 has ∂²/∂x1∂y2 = 1 but ∂²/∂x2∂y1 = 0
        let bad = ClosureFunction::new(2, |z: &[Complex64]| c(z[0].re * z[1].im, 0.0));
        assert!(kahler_symmetry_residual(&bad, &[c(0.2, 0.3), c(0.1, -0.4)], SECOND_STEP).unwrap() >= 0.5);
    }

    #[test]
    fn christoffel_examples() {
        assert_eq!(FlatC::new(2).christoffel(&[1.0, 2.0, 3.0, 4.0]).unwrap().max_abs(), 0.0);
        assert_eq!(FubiniStudyCp1.christoffel(&[0.0, 0.0]).unwrap().max_abs(), 0.0);
        let z = [1.0, 0.0];
        let exact = FubiniStudyCp1.christoffel(&z).unwrap();
        let fd = fd_christoffel(&|p: &[f64]| FubiniStudyCp1.metric(p).unwrap(), &z, 1e-5).unwrap();
        assert!(exact.max_difference(&fd) < 1e-6);
        assert!(exact.asymmetry() == 0.0);
    }

    #[test]
    fn built_in_targets_are_hermitian_and_compatible() {
        for z in [[0.0, 0.0], [0.3, -1.2], [2.0, 0.5]] {
            assert!(hermitian_residual(&FubiniStudyCp1, &z).unwrap() < 1e-10);
            assert!(metric_compatibility_residual(&FubiniStudyCp1, &z, 1e-5).unwrap() < 1e-6);
            assert!(kahler_form_closedness(&FubiniStudyCp1, &z, 1e-4).unwrap() < 1e-6);
        }
    }

    #[test]
    fn target_names() {
        assert_eq!(target_from_name("flat:3").unwrap().complex_dim(), 3);
        assert_eq!(target_from_name("cp1").unwrap().name(), "cp1");
        assert!(target_from_name("flat:x").is_err());
        assert!(target_from_name("sphere").is_err());
    }

    #[test]
    fn hermitian_from_complex_matrix() {
        let h = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.3), c(0.5, -0.3), c(1.0, 0.0)]);
        let t = ConstantHermitian::from_complex(&h).unwrap();
        assert!(hermitian_residual(&t, &[0.0; 4]).unwrap() < 1e-14);
        let not_j = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        assert!(ConstantHermitian::from_real(not_j).is_err());
    }

    #[test]
    fn rational_guard() {
        let f = HolomorphicFunction::Rational {
            num: Polynomial::constant(1, c(1.0, 0.0)),
            den: Polynomial::variable(1, 0),
            guard: 1e-3,
        };
        assert!(matches!(f.value(&[c(0.0, 0.0)]), Err(Error::PoleAtPoint(_))));
        let d = f.derivative(&[c(2.0, 0.0)]).unwrap();
        assert!((d[0] - c(-0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn standard_family_sizes() {
        assert_eq!(standard_family(1).len(), 3);
        // 2 coords + 1 pair sum + 3 products + 3 i-products
        assert_eq!(standard_family(2).len(), 9);
    }

    #[test]
    fn real_jacobian_of_multiplication() {
        // multiplication by 2i: x -> -2y, y -> 2x
        let j = DMatrix::from_element(1, 1, c(0.0, 2.0));
        let r = real_jacobian(&j);
        assert_eq!(r, DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]));
    }
}
