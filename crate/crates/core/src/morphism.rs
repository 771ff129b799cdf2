//! Pointwise HWC / PHWC checks on gradient samples, the PHM check on PL
//! maps, and the property suites built on them.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{assemble_stiffness, weak_harmonic_residual, StiffnessSystem};
use crate::maps::{AnalyticMap, PLMap};
use crate::riemannian::{spd_inverse, Polyhedron};
use crate::target::{
    complex_structure, map_cauchy_riemann_residual, real_jacobian, to_complex, ChartedTarget,
    ConstantHermitian, FlatC, HolomorphicFunction, HolomorphicMap, CR_STEP,
};

/// Verdict tolerances: conformality, harmonicity and geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub tol_c: f64,
    pub tol_h: f64,
    pub tol_geom: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_c: 1e-8,
            tol_h: 1e-8,
            tol_geom: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if self.tol_c > 0.0 && self.tol_h > 0.0 && self.tol_geom > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("tolerances must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleLocation {
    Simplex { index: usize, barycentric: Vec<f64> },
    Point(Vec<f64>),
}

/// Differential rows `dφ^α` of a map into a chart of `C^n` at one point,
/// with the domain metric there and the image point.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub location: SampleLocation,
    pub rows: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    pub image: Vec<f64>,
    /// Measure carried by the sample (simplex volume, or 1 for points).
    pub weight: f64,
}

impl GradientSample {
    pub fn new(location: SampleLocation, rows: DMatrix<f64>, metric: DMatrix<f64>, image: Vec<f64>) -> Result<Self> {
        if !rows.nrows().is_multiple_of(2) || rows.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: rows.nrows() + 1,
                got: rows.nrows(),
                context: "gradient rows must come in (x, y) pairs",
            });
        }
        if rows.ncols() != metric.nrows() {
            return Err(Error::DimensionMismatch {
                expected: metric.nrows(),
                got: rows.ncols(),
                context: "gradient row length",
            });
        }
        if image.len() != rows.nrows() {
            return Err(Error::DimensionMismatch {
                expected: rows.nrows(),
                got: image.len(),
                context: "image point",
            });
        }
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("non-finite gradient rows".into()));
        }
        spd_inverse(&metric)?;
        Ok(Self {
            location,
            rows,
            metric,
            image,
            weight: 1.0,
        })
    }

    /// Sample with the Euclidean domain metric.
    pub fn flat(rows: DMatrix<f64>, image: Vec<f64>) -> Result<Self> {
        let m = rows.ncols();
        Self::new(SampleLocation::Point(vec![]), rows, DMatrix::identity(m, m), image)
    }

    pub fn complex_dim(&self) -> usize {
        self.rows.nrows() / 2
    }

    /// Gram matrix `⟨∇φ^α, ∇φ^β⟩ = dφ g⁻¹ dφᵀ`.
    pub fn gram(&self) -> Result<DMatrix<f64>> {
        let (inv, _) = spd_inverse(&self.metric)?;
        Ok(&self.rows * inv * self.rows.transpose())
    }

    /// Same location and metric, new rows and image.
    pub fn with_rows(&self, rows: DMatrix<f64>, image: Vec<f64>) -> Self {
        Self {
            location: self.location.clone(),
            rows,
            metric: self.metric.clone(),
            image,
            weight: self.weight,
        }
    }
}

/// One sample per top simplex, at the barycenter.
pub fn samples_from_plmap(poly: &Polyhedron, map: &PLMap) -> Result<Vec<GradientSample>> {
    let complex = poly.complex();
    if map.values().len() != complex.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: complex.vertex_count(),
            got: map.values().len(),
            context: "map vertex values",
        });
    }
    (0..complex.top_count())
        .map(|t| {
            let b = poly.barycenter(t);
            let mut s = GradientSample::new(
                SampleLocation::Simplex {
                    index: t,
                    barycentric: b.clone(),
                },
                map.reference_differential(complex, t),
                poly.metric_at(t, &b),
                map.value_at(complex, t, &b),
            )?;
            s.weight = poly.simplex_volume(t)?;
            Ok(s)
        })
        .collect()
}

/// Samples of an analytic map at points of a flat domain.
pub fn samples_from_analytic(map: &dyn AnalyticMap, points: &[Vec<f64>]) -> Result<Vec<GradientSample>> {
    points
        .iter()
        .map(|p| {
            let m = map.domain_dim();
            GradientSample::new(
                SampleLocation::Point(p.clone()),
                map.jacobian(p)?,
                DMatrix::identity(m, m),
                map.value(p)?,
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Phwc,
    Hwc,
    Commutator,
    Family,
    Harmonic,
}

/// Per-sample residuals with norms and a verdict at a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub kind: CheckKind,
    pub per_sample: Vec<f64>,
    /// HWC dilation per sample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dilation: Option<Vec<f64>>,
    pub max: f64,
    pub weighted_l1: f64,
    /// `max(1, ‖dφ‖²_∞)` (or `max(1, ‖dφ‖_∞)` for harmonicity).
    pub scale: f64,
    pub normalized_max: f64,
    pub tolerance: f64,
    pub verdict: bool,
}

impl ResidualReport {
    fn build(
        kind: CheckKind,
        per_sample: Vec<f64>,
        weights: &[f64],
        scale: f64,
        tolerance: f64,
        dilation: Option<Vec<f64>>,
    ) -> Self {
        let max = per_sample.iter().fold(0.0f64, |m, r| m.max(*r));
        let weighted_l1 = per_sample.iter().zip(weights).map(|(r, w)| r * w).sum();
        let normalized_max = max / scale;
        Self {
            kind,
            per_sample,
            dilation,
            max,
            weighted_l1,
            scale,
            normalized_max,
            tolerance,
            verdict: normalized_max <= tolerance,
        }
    }
}

fn nonempty(samples: &[GradientSample]) -> Result<usize> {
    let n = samples.first().ok_or(Error::EmptyInput("gradient samples"))?.complex_dim();
    if let Some(s) = samples.iter().find(|s| s.complex_dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: s.rows.nrows(),
            context: "gradient rows",
        });
    }
    Ok(n)
}

fn grams(samples: &[GradientSample]) -> Result<Vec<DMatrix<f64>>> {
    samples.iter().map(GradientSample::gram).collect()
}

/// `max(1, max_s max_α ⟨∇φ^α, ∇φ^α⟩)`.
fn gram_scale(grams: &[DMatrix<f64>]) -> f64 {
    grams
        .iter()
        .flat_map(|g| g.diagonal().iter().copied().collect::<Vec<_>>())
        .fold(1.0, f64::max)
}

fn weights(samples: &[GradientSample]) -> Vec<f64> {
    samples.iter().map(|s| s.weight).collect()
}

/// PHWC residual of a Gram matrix in `(x.., y..)` ordering.
pub fn phwc_of_gram(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows() / 2;
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let first = g[(b, a)] - g[(n + b, n + a)];
            let second = g[(n + b, a)] + g[(b, n + a)];
            worst = worst.max(first.abs() + second.abs());
        }
    }
    worst
}

pub fn phwc_residual(samples: &[GradientSample], tol: f64) -> Result<ResidualReport> {
    nonempty(samples)?;
    let gs = grams(samples)?;
    let per = gs.iter().map(phwc_of_gram).collect();
    Ok(ResidualReport::build(CheckKind::Phwc, per, &weights(samples), gram_scale(&gs), tol, None))
}

fn check_target(samples: &[GradientSample], target: &dyn ChartedTarget) -> Result<()> {
    let n = nonempty(samples)?;
    if n != target.complex_dim() {
        return Err(Error::DimensionMismatch {
            expected: target.complex_dim(),
            got: n,
            context: "target complex dimension",
        });
    }
    Ok(())
}

/// Residual of `⟨∇φ^α, ∇φ^β⟩ = λ h^{αβ}(φ)` with λ the trace ratio.
pub fn hwc_residual(samples: &[GradientSample], target: &dyn ChartedTarget, tol: f64) -> Result<ResidualReport> {
    check_target(samples, target)?;
    let gs = grams(samples)?;
    let mut per = Vec::with_capacity(samples.len());
    let mut dil = Vec::with_capacity(samples.len());
    for (s, g) in samples.iter().zip(&gs) {
        let hinv = target.inverse_metric(&s.image)?;
        let lambda = g.trace() / hinv.trace();
        per.push((g - &hinv * lambda).amax());
        dil.push(lambda);
    }
    Ok(ResidualReport::build(
        CheckKind::Hwc,
        per,
        &weights(samples),
        gram_scale(&gs),
        tol,
        Some(dil),
    ))
}

/// `‖[dφ ∘ dφ*, J]‖_max` with `dφ* = g⁻¹ dφᵀ h(φ)`.
pub fn commutator_form_residual(
    samples: &[GradientSample],
    target: &dyn ChartedTarget,
    tol: f64,
) -> Result<ResidualReport> {
    check_target(samples, target)?;
    let gs = grams(samples)?;
    let j = complex_structure(target.complex_dim());
    let mut per = Vec::with_capacity(samples.len());
    for (s, g) in samples.iter().zip(&gs) {
        let h = target.metric(&s.image)?;
        let a = g * h;
        per.push((&a * &j - &j * &a).amax());
    }
    Ok(ResidualReport::build(
        CheckKind::Commutator,
        per,
        &weights(samples),
        gram_scale(&gs),
        tol,
        None,
    ))
}

/// Gradient rows of `f ∘ φ` for a scalar holomorphic function.
pub fn compose_function(f: &HolomorphicFunction, sample: &GradientSample) -> Result<DMatrix<f64>> {
    use crate::target::ComplexFunction;
    if f.nvars() != sample.complex_dim() {
        return Err(Error::DimensionMismatch {
            expected: sample.complex_dim(),
            got: f.nvars(),
            context: "function variables",
        });
    }
    let d = f.derivative(&to_complex(&sample.image))?;
    let j = DMatrix::from_row_slice(1, d.len(), &d);
    Ok(real_jacobian(&j) * &sample.rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    /// Per sample, the largest residual over the family.
    pub report: ResidualReport,
    /// Largest residual of each family member.
    pub per_function: Vec<(String, f64)>,
}

/// PHWC residual of `f ∘ φ` for every `f` in the family.
pub fn phwc_via_functions(
    samples: &[GradientSample],
    family: &[HolomorphicFunction],
    tol: f64,
) -> Result<FamilyReport> {
    nonempty(samples)?;
    if family.is_empty() {
        return Err(Error::EmptyInput("function family"));
    }
    let mut per = vec![0.0f64; samples.len()];
    let mut per_function = Vec::with_capacity(family.len());
    let mut scale: f64 = 1.0;
    for f in family {
        let mut worst: f64 = 0.0;
        for (i, s) in samples.iter().enumerate() {
            let composed = s.with_rows(compose_function(f, s)?, vec![0.0; 2]);
            let g = composed.gram()?;
            scale = scale.max(g[(0, 0)]).max(g[(1, 1)]);
            let r = phwc_of_gram(&g);
            per[i] = per[i].max(r);
            worst = worst.max(r);
        }
        per_function.push((f.tag(), worst));
    }
    Ok(FamilyReport {
        report: ResidualReport::build(CheckKind::Family, per, &weights(samples), scale, tol, None),
        per_function,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostcomposeReport {
    pub residual_in: Vec<f64>,
    pub residual_out: Vec<f64>,
    /// `4n‖dψ‖²` per sample: the factor bounding the output residual.
    pub bound_factor: Vec<f64>,
    pub holds: bool,
}

/// Checks that `ψ ∘ φ` keeps PHWC: zero residuals stay zero, and nonzero
/// ones grow at most by the local factor `4n‖dψ‖²`. `ψ` must pass a
/// Cauchy-Riemann pre-check at every image point.
pub fn postcompose_preserves_phwc(samples: &[GradientSample], psi: &dyn HolomorphicMap) -> Result<PostcomposeReport> {
    let n = nonempty(samples)?;
    if n != psi.source_dim() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: psi.source_dim(),
            context: "holomorphic map source dimension",
        });
    }
    let (mut rin, mut rout, mut factors) = (Vec::new(), Vec::new(), Vec::new());
    let mut holds = true;
    for s in samples {
        let z = to_complex(&s.image);
        let cr = map_cauchy_riemann_residual(psi, &z, CR_STEP)?;
        let size = psi.value(&z)?.iter().fold(1.0f64, |m, c| m.max(c.norm()));
        if cr > 1e-6 * size {
            return Err(Error::NotHolomorphic(cr));
        }
        let jr = real_jacobian(&psi.jacobian(&z)?);
        let out_rows = &jr * &s.rows;
        let w = psi.value(&z)?;
        let image: Vec<f64> = w.iter().map(|c| c.re).chain(w.iter().map(|c| c.im)).collect();
        let g_in = s.gram()?;
        let g_out = s.with_rows(out_rows, image).gram()?;
        let a = phwc_of_gram(&g_in);
        let b = phwc_of_gram(&g_out);
        let op = jr.clone().svd(false, false).singular_values.max();
        let k = 4.0 * n as f64 * op * op;
        let scale_in = g_in.diagonal().iter().fold(1.0f64, |m, x| m.max(*x));
        let scale_out = g_out.diagonal().iter().fold(1.0f64, |m, x| m.max(*x));
        let ok = if a <= 1e-12 * scale_in {
            b <= 1e-9 * scale_out
        } else {
            b <= k * a + 1e-9 * scale_out
        };
        holds &= ok;
        rin.push(a);
        rout.push(b);
        factors.push(k);
    }
    Ok(PostcomposeReport {
        residual_in: rin,
        residual_out: rout,
        bound_factor: factors,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhmReport {
    pub harmonic: ResidualReport,
    pub phwc: ResidualReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyReport>,
    pub verdict: bool,
}

fn harmonic_report(
    system: &StiffnessSystem,
    target: &dyn ChartedTarget,
    map: &PLMap,
    samples: &[GradientSample],
    tol: f64,
) -> Result<ResidualReport> {
    let res = weak_harmonic_residual(system, target, map)?;
    let per: Vec<f64> = res
        .per_vertex
        .iter()
        .map(|row| row.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .collect();
    let grad = samples
        .iter()
        .map(|s| s.gram().map(|g| g.diagonal().max().sqrt()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(1.0, f64::max);
    // raw residuals are already integrated against hat functions, so their
    // plain sum is the μ_g-weighted 1-norm of the residual density
    let ones = vec![1.0; per.len()];
    Ok(ResidualReport::build(
        CheckKind::Harmonic,
        per,
        &ones,
        grad,
        tol,
        None,
    ))
}

/// Harmonic and PHWC verdicts for a PL map; the family report is included
/// when a family is given.
pub fn phm_check(
    poly: &Polyhedron,
    map: &PLMap,
    target: &dyn ChartedTarget,
    family: &[HolomorphicFunction],
    tol: &Tolerances,
) -> Result<PhmReport> {
    tol.validate()?;
    let system = assemble_stiffness(poly)?;
    phm_check_with(&system, map, target, family, tol)
}

/// [`phm_check`] on an already assembled system.
pub fn phm_check_with(
    system: &StiffnessSystem,
    map: &PLMap,
    target: &dyn ChartedTarget,
    family: &[HolomorphicFunction],
    tol: &Tolerances,
) -> Result<PhmReport> {
    if !target.is_kahler() {
        return Err(Error::NotKahler(target.name()));
    }
    let samples = samples_from_plmap(system.polyhedron(), map)?;
    check_target(&samples, target)?;
    let harmonic = harmonic_report(system, target, map, &samples, tol.tol_h)?;
    let phwc = phwc_residual(&samples, tol.tol_c)?;
    let family = if family.is_empty() {
        None
    } else {
        Some(phwc_via_functions(&samples, family, tol.tol_c)?)
    };
    let verdict = harmonic.verdict && phwc.verdict;
    Ok(PhmReport {
        harmonic,
        phwc,
        family,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackRow {
    pub function: String,
    pub level: usize,
    pub mesh_size: f64,
    /// Largest interior residual density of `f ∘ φ`.
    pub residual: f64,
    /// Empirical order against the previous level.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackTable {
    pub rows: Vec<PullbackRow>,
    /// PHWC verdict of the input map at each level.
    pub input_phwc: Vec<bool>,
    /// Per function: residuals vanish or decrease with order ≥ 1.
    pub converges: Vec<(String, bool)>,
    pub verdict: bool,
}

impl PullbackTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("function,level,mesh_size,residual,order\n");
        for r in &self.rows {
            let order = r.order.map(|o| o.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", r.function, r.level, r.mesh_size, r.residual, order));
        }
        out
    }
}

/// Residual densities below this count as exact zeros.
pub const EXACT_FLOOR: f64 = 1e-10;

fn mesh_size(poly: &Polyhedron) -> f64 {
    let c = poly.complex();
    let mut h: f64 = 0.0;
    for t in 0..c.top_count() {
        let n = c.dim();
        for i in 0..=n {
            for j in (i + 1)..=n {
                h = h.max(poly.edge_length_sq(t, i, j).sqrt());
            }
        }
    }
    h
}

/// Weak-harmonic residuals of the vertex-sampled pullbacks `f ∘ φ` over a
/// sequence of refinements `(polyhedron, map)` ordered coarse to fine.
pub fn pullback_harmonicity_suite(
    levels: &[(Polyhedron, PLMap)],
    family: &[HolomorphicFunction],
    tol: &Tolerances,
) -> Result<PullbackTable> {
    use crate::target::ComplexFunction;
    if levels.is_empty() {
        return Err(Error::EmptyInput("refinement levels"));
    }
    if family.is_empty() {
        return Err(Error::EmptyInput("function family"));
    }
    let flat = FlatC::new(1);
    let mut rows = Vec::new();
    let mut input_phwc = Vec::new();
    let mut per_level: Vec<(f64, Vec<f64>)> = Vec::new();
    for (poly, map) in levels {
        let system = assemble_stiffness(poly)?;
        let samples = samples_from_plmap(poly, map)?;
        input_phwc.push(phwc_residual(&samples, tol.tol_c)?.verdict);
        let h = mesh_size(poly);
        let mut residuals = Vec::with_capacity(family.len());
        for f in family {
            let mut values = Vec::with_capacity(map.values().len());
            for v in map.values() {
                let w = f.value(&to_complex(v))?;
                values.push(vec![w.re, w.im]);
            }
            let pulled = PLMap::new(poly.complex(), values)?;
            let r = weak_harmonic_residual(&system, &flat, &pulled)?.normalized_inf_norm;
            residuals.push(r);
        }
        per_level.push((h, residuals));
    }
    let mut converges = Vec::with_capacity(family.len());
    for (i, f) in family.iter().enumerate() {
        let mut ok = true;
        for (level, (h, res)) in per_level.iter().enumerate() {
            let order = if level == 0 {
                None
            } else {
                let (hc, rc) = (&per_level[level - 1].0, per_level[level - 1].1[i]);
                if rc <= EXACT_FLOOR && res[i] <= EXACT_FLOOR {
                    None
                } else {
                    Some((rc / res[i]).ln() / (hc / h).ln())
                }
            };
            if level > 0 && !(res[i] <= EXACT_FLOOR || order.is_some_and(|o| o >= 1.0)) {
                ok = false;
            }
            rows.push(PullbackRow {
                function: f.tag(),
                level,
                mesh_size: *h,
                residual: res[i],
                order,
            });
        }
        converges.push((f.tag(), ok));
    }
    let all_phwc = input_phwc.iter().all(|b| *b);
    let verdict = all_phwc && converges.iter().all(|(_, ok)| *ok);
    Ok(PullbackTable {
        rows,
        input_phwc,
        converges,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoveringKind {
    /// Free quotient by a finite group acting by isometries.
    Free,
    /// Quotient by a reflection; has fixed points.
    Reflection,
}

/// A simplicial projection `π: total → base` with matched top simplices.
#[derive(Debug, Clone)]
pub struct Covering {
    pub total: Polyhedron,
    pub base: Polyhedron,
    /// Base vertex of each total vertex.
    pub projection: Vec<usize>,
    /// Base top simplex of each total top simplex.
    pub simplex_map: Vec<usize>,
    /// A preimage of each base vertex.
    pub section: Vec<usize>,
    pub kind: CoveringKind,
    /// Total vertices fixed by the deck action.
    pub fixed_vertices: Vec<usize>,
    pub warnings: Vec<String>,
}

impl Covering {
    pub fn new(total: Polyhedron, base: Polyhedron, projection: Vec<usize>, kind: CoveringKind) -> Result<Self> {
        let (tc, bc) = (total.complex(), base.complex());
        if projection.len() != tc.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: tc.vertex_count(),
                got: projection.len(),
                context: "projection table",
            });
        }
        if let Some(&v) = projection.iter().find(|&&v| v >= bc.vertex_count()) {
            return Err(Error::UnknownVertex(v));
        }
        let mut simplex_map = Vec::with_capacity(tc.top_count());
        for s in tc.top_simplices() {
            let mut img: Vec<usize> = s.vertices().iter().map(|&v| projection[v]).collect();
            img.sort_unstable();
            let t = bc
                .top_simplices()
                .binary_search_by(|b| b.vertices().cmp(&img[..]))
                .map_err(|_| Error::NotACovering(format!("{s} maps to {img:?}, not a base simplex")))?;
            simplex_map.push(t);
        }
        let mut section = vec![usize::MAX; bc.vertex_count()];
        for (v, &b) in projection.iter().enumerate() {
            if section[b] == usize::MAX {
                section[b] = v;
            }
        }
        if let Some(b) = section.iter().position(|&v| v == usize::MAX) {
            return Err(Error::NotACovering(format!("base vertex {b} has no preimage")));
        }
        let mut warnings = Vec::new();
        let mut fixed_vertices = Vec::new();
        if kind == CoveringKind::Reflection {
            let mut count = vec![0usize; bc.vertex_count()];
            for &b in &projection {
                count[b] += 1;
            }
            fixed_vertices = (0..tc.vertex_count()).filter(|&v| count[projection[v]] == 1).collect();
            warnings.push(format!(
                "reflection quotient with {} fixed vertices: not a covering, data only",
                fixed_vertices.len()
            ));
        }
        Ok(Self {
            total,
            base,
            projection,
            simplex_map,
            section,
            kind,
            fixed_vertices,
            warnings,
        })
    }

    /// Number of total simplices over each base simplex.
    pub fn sheet_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.base.complex().top_count()];
        for &t in &self.simplex_map {
            c[t] += 1;
        }
        c
    }

    /// Errors unless π is a free covering of constant degree whose sheets
    /// are isometric to the base.
    pub fn verify(&self, tol: f64) -> Result<()> {
        if self.kind != CoveringKind::Free || !self.fixed_vertices.is_empty() {
            return Err(Error::NotACovering("quotient has fixed points".into()));
        }
        let counts = self.sheet_counts();
        let degree = counts[0];
        if degree == 0 || counts.iter().any(|&c| c != degree) {
            return Err(Error::NotACovering("sheet counts differ between base simplices".into()));
        }
        let (tc, bc) = (self.total.complex(), self.base.complex());
        for (t, &b) in self.simplex_map.iter().enumerate() {
            let tv = tc.top(t).vertices();
            let bv = bc.top(b).vertices();
            let local: Vec<usize> = tv
                .iter()
                .map(|&v| bv.iter().position(|&w| w == self.projection[v]).expect("matched vertex"))
                .collect();
            for i in 0..tv.len() {
                for j in (i + 1)..tv.len() {
                    let a = self.total.edge_length_sq(t, i, j);
                    let c = self.base.edge_length_sq(b, local[i], local[j]);
                    if (a - c).abs() > tol * a.max(c).max(1.0) {
                        return Err(Error::NotACovering(format!(
                            "sheet metric differs on total simplex {t}: {a} vs {c}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `φ ∘ π`, pulled back vertex-wise.
    pub fn pull_back(&self, map: &PLMap) -> Result<PLMap> {
        let values = self.projection.iter().map(|&b| map.value(b).to_vec()).collect();
        PLMap::new(self.total.complex(), values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub base: PhmReport,
    pub total: PhmReport,
    /// Largest difference of per-simplex PHWC residuals over matched simplices.
    pub phwc_difference: f64,
    /// Largest difference of per-vertex harmonic residuals over matched vertices.
    pub harmonic_difference: f64,
    pub verdicts_agree: bool,
    pub passes: bool,
}

/// PHM reports for `φ` on the base and `φ ∘ π` on the total space, compared
/// simplex by simplex and vertex by vertex.
pub fn factorization_suite(
    cover: &Covering,
    map: &PLMap,
    target: &dyn ChartedTarget,
    family: &[HolomorphicFunction],
    tol: &Tolerances,
) -> Result<FactorizationReport> {
    cover.verify(tol.tol_geom.max(1e-12))?;
    let pulled = cover.pull_back(map)?;
    let base = phm_check(&cover.base, map, target, family, tol)?;
    let total = phm_check(&cover.total, &pulled, target, family, tol)?;
    let phwc_difference = cover
        .simplex_map
        .iter()
        .enumerate()
        .map(|(t, &b)| (total.phwc.per_sample[t] - base.phwc.per_sample[b]).abs())
        .fold(0.0, f64::max);
    let harmonic_difference = cover
        .projection
        .iter()
        .enumerate()
        .map(|(v, &b)| (total.harmonic.per_sample[v] - base.harmonic.per_sample[b]).abs())
        .fold(0.0, f64::max);
    let verdicts_agree = base.verdict == total.verdict
        && base.phwc.verdict == total.phwc.verdict
        && base.harmonic.verdict == total.harmonic.verdict;
    let passes = verdicts_agree && phwc_difference <= 1e-10 && harmonic_difference <= 1e-10;
    Ok(FactorizationReport {
        base,
        total,
        phwc_difference,
        harmonic_difference,
        verdicts_agree,
        passes,
    })
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// `k × m` matrix with orthonormal rows (`k ≤ m`).
fn orthonormal_rows(rng: &mut ChaCha8Rng, k: usize, m: usize) -> DMatrix<f64> {
    gaussian_matrix(rng, m, k).qr().q().transpose()
}

/// Random SPD matrix with eigenvalues in `[0.25, 4]`.
pub fn random_spd(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let q = gaussian_matrix(rng, m, m).qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(m, |_, _| {
        2f64.powf(rng.random_range(-2.0..2.0))
    }));
    let s = &q * d * q.transpose();
    (&s + s.transpose()) * 0.5
}

/// Random positive definite Hermitian target metric on `C^n`.
pub fn random_hermitian_target(rng: &mut ChaCha8Rng, n: usize) -> ConstantHermitian {
    let a = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let h = &a * a.adjoint() + DMatrix::identity(n, n).map(|x: Complex64| x * 0.5);
    let h = (&h + h.adjoint()).map(|x| x * 0.5);
    ConstantHermitian::from_complex(&h).expect("positive definite hermitian")
}

/// Rows `R` with `R g⁻¹ Rᵀ = λ h⁻¹` exactly: `R = √λ L⁻ᵀ Q Mᵀ` for
/// `h = L Lᵀ`, `g = M Mᵀ` and `Q` with orthonormal rows.
fn hwc_rows(rng: &mut ChaCha8Rng, h: &DMatrix<f64>, g: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let l_inv_t = h.clone().cholesky().expect("spd").l().try_inverse().expect("invertible").transpose();
    let m = g.clone().cholesky().expect("spd").l();
    let q = orthonormal_rows(rng, h.nrows(), g.nrows());
    l_inv_t * q * m.transpose() * lambda.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwcSuiteReport {
    pub samples: usize,
    /// Largest PHWC residual over constructed HWC samples.
    pub hwc_to_phwc_max: f64,
    /// Largest HWC residual over constructed PHWC samples in complex dimension one.
    pub phwc_to_hwc_max_n1: f64,
    /// HWC and PHWC residuals of the `(w1, 2 w2)` witness.
    pub witness_hwc: f64,
    pub witness_phwc: f64,
    pub witness_dilation: f64,
    pub passes: bool,
}

/// HWC ⇒ PHWC on `count` constructed samples in complex dimension `n`, the
/// converse for `n = 1`, and the PHWC-but-not-HWC witness for `n = 2`.
pub fn hwc_implies_phwc_suite(count: usize, n: usize, seed: u64) -> Result<HwcSuiteReport> {
    if count == 0 || n == 0 {
        return Err(Error::InvalidParameter("need at least one sample and n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = 2 * n + 1;
    let mut hwc_to_phwc_max: f64 = 0.0;
    for i in 0..count {
        let target = random_hermitian_target(&mut rng, n);
        let image = vec![0.0; 2 * n];
        let h = target.metric(&image)?;
        let g = random_spd(&mut rng, m);
        let lambda = if i % 10 == 0 { 0.0 } else { rng.random_range(0.0..3.0) };
        let rows = hwc_rows(&mut rng, &h, &g, lambda);
        let s = GradientSample::new(SampleLocation::Point(vec![]), rows, g, image)?;
        let hwc = hwc_residual(std::slice::from_ref(&s), &target, 1e-10)?;
        if !hwc.verdict {
            return Err(Error::Invalid(format!("constructed sample is not HWC ({:e})", hwc.max)));
        }
        let phwc = phwc_residual(&[s], 1e-10)?;
        hwc_to_phwc_max = hwc_to_phwc_max.max(phwc.normalized_max);
    }

    let mut phwc_to_hwc_max_n1: f64 = 0.0;
    for _ in 0..count {
        // |∇u| = |∇v| and ⟨∇u, ∇v⟩ = 0 in the metric g
        let g = random_spd(&mut rng, 3);
        let lambda = rng.random_range(0.0..3.0);
        let rows = hwc_rows(&mut rng, &DMatrix::identity(2, 2), &g, lambda);
        let s = GradientSample::new(SampleLocation::Point(vec![]), rows, g, vec![0.3, -0.4])?;
        if !phwc_residual(std::slice::from_ref(&s), 1e-10)?.verdict {
            return Err(Error::Invalid("constructed sample is not PHWC".into()));
        }
        let rho = rng.random_range(0.5..2.0);
        let target = ConstantHermitian::from_real(DMatrix::identity(2, 2) * rho)?;
        phwc_to_hwc_max_n1 = phwc_to_hwc_max_n1.max(hwc_residual(&[s], &target, 1e-10)?.normalized_max);
    }

    let witness = GradientSample::flat(
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 1.0, 2.0])),
        vec![0.0; 4],
    )?;
    let wh = hwc_residual(std::slice::from_ref(&witness), &FlatC::new(2), 1e-10)?;
    let wp = phwc_residual(&[witness], 1e-10)?;
    let witness_dilation = wh.dilation.as_ref().map_or(0.0, |d| d[0]);
    let passes = hwc_to_phwc_max < 1e-10 && phwc_to_hwc_max_n1 < 1e-10 && wh.max > 0.1 && wp.max < 1e-12;
    Ok(HwcSuiteReport {
        samples: count,
        hwc_to_phwc_max,
        phwc_to_hwc_max_n1,
        witness_hwc: wh.max,
        witness_phwc: wp.max,
        witness_dilation,
        passes,
    })
}

/// Random sample whose Gram matrix commutes with `J` (`phwc = true`) or a
/// generic one, in complex dimension `n` over a domain of dimension `m`.
pub fn random_sample(rng: &mut ChaCha8Rng, n: usize, m: usize, phwc: bool) -> GradientSample {
    let g = random_spd(rng, m);
    let rows = if phwc {
        let k = (m / 2).max(1);
        let c = DMatrix::from_fn(n, k, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let mm = g.clone().cholesky().expect("spd").l();
        let q = orthonormal_rows(rng, 2 * k, m);
        real_jacobian(&c) * q * mm.transpose()
    } else {
        gaussian_matrix(rng, 2 * n, m)
    };
    let image = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    GradientSample::new(SampleLocation::Point(vec![]), rows, g, image).expect("valid random sample")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub samples: usize,
    /// Samples on which the commutator and PHWC verdicts differ.
    pub commutator_disagreements: usize,
    /// Samples on which the family and PHWC verdicts differ.
    pub family_disagreements: usize,
    /// Family residual of the planted off-diagonal violation with only
    /// coordinate functions, and with the full family.
    pub planted_coordinates_only: f64,
    pub planted_full_family: f64,
    pub passes: bool,
}

/// PHWC ⇔ commutator ⇔ family agreement on random samples over random
/// Hermitian targets, plus the planted violation that coordinates miss.
pub fn phwc_equivalence_suite(count: usize, n: usize, seed: u64) -> Result<EquivalenceReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let family = crate::target::standard_family(n);
    let (mut comm_bad, mut fam_bad) = (0, 0);
    for i in 0..count {
        let s = random_sample(&mut rng, n, 2 * n + 1, i % 2 == 0);
        let target = random_hermitian_target(&mut rng, n);
        let p = phwc_residual(std::slice::from_ref(&s), 1e-9)?;
        let c = commutator_form_residual(std::slice::from_ref(&s), &target, 1e-9)?;
        let f = phwc_via_functions(std::slice::from_ref(&s), &family, 1e-9)?;
        comm_bad += usize::from(p.verdict != c.verdict);
        fam_bad += usize::from(p.verdict != f.report.verdict);
    }
    let planted = planted_off_diagonal_sample();
    let coords: Vec<HolomorphicFunction> = (0..2).map(|a| HolomorphicFunction::Coordinate { n: 2, a }).collect();
    let only = phwc_via_functions(std::slice::from_ref(&planted), &coords, 1e-9)?.report.max;
    let full = phwc_via_functions(&[planted], &crate::target::standard_family(2), 1e-9)?.report.max;
    Ok(EquivalenceReport {
        samples: count,
        commutator_disagreements: comm_bad,
        family_disagreements: fam_bad,
        planted_coordinates_only: only,
        planted_full_family: full,
        passes: comm_bad == 0 && fam_bad == 0 && only < 1e-12 && full > 0.1,
    })
}

/// `φ = (x + iy, x − iy)` on the plane: each coordinate is PHWC, the map is not.
pub fn planted_off_diagonal_sample() -> GradientSample {
    let rows = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
    GradientSample::flat(rows, vec![0.0; 4]).expect("valid sample")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rows: &[f64], m: usize) -> GradientSample {
        let r = DMatrix::from_row_slice(rows.len() / m, m, rows);
        let n = r.nrows();
        GradientSample::flat(r, vec![0.0; n]).unwrap()
    }

    #[test]
    fn phwc_examples() {
        let id = sample(&[1.0, 0.0, 0.0, 1.0], 2);
        assert_eq!(phwc_residual(&[id], 1e-8).unwrap().max, 0.0);
        let stretched = sample(&[1.0, 0.0, 0.0, 2.0], 2);
        assert_eq!(phwc_residual(&[stretched], 1e-8).unwrap().max, 3.0);
        let conj = sample(&[1.0, 0.0, 0.0, -1.0], 2);
        assert_eq!(phwc_residual(&[conj], 1e-8).unwrap().max, 0.0);
    }

    #[test]
    fn hwc_examples() {
        // c z with c = 1 + 2i
        let cz = sample(&[1.0, -2.0, 2.0, 1.0], 2);
        let r = hwc_residual(&[cz], &FlatC::new(1), 1e-10).unwrap();
        assert!((r.dilation.unwrap()[0] - 5.0).abs() < 1e-14 && r.max < 1e-14);
        let proj = sample(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], 3);
        let r = hwc_residual(&[proj], &FlatC::new(1), 1e-10).unwrap();
        assert!((r.dilation.unwrap()[0] - 1.0).abs() < 1e-14 && r.max < 1e-14);
        let degenerate = sample(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0], 2);
        let r = hwc_residual(&[degenerate], &FlatC::new(2), 1e-10).unwrap();
        assert!((r.dilation.unwrap()[0] - 0.5).abs() < 1e-14 && (r.max - 0.5).abs() < 1e-14);
    }

    #[test]
    fn commutator_matches() {
        let s = sample(&[1.0, 0.0, 0.0, 2.0], 2);
        assert!(commutator_form_residual(std::slice::from_ref(&s), &FlatC::new(1), 1e-9).unwrap().max > 1.0);
        let id = sample(&[1.0, 0.0, 0.0, 1.0], 2);
        assert_eq!(commutator_form_residual(&[id], &FlatC::new(1), 1e-9).unwrap().max, 0.0);
    }

    #[test]
    fn family_examples() {
        let s = sample(&[1.0, 0.0, 0.0, 2.0], 2);
        let z = [HolomorphicFunction::Coordinate { n: 1, a: 0 }];
        assert_eq!(phwc_via_functions(&[s], &z, 1e-9).unwrap().report.max, 3.0);
        let planted = planted_off_diagonal_sample();
        assert_eq!(phwc_residual(std::slice::from_ref(&planted), 1e-9).unwrap().max, 2.0);
        let full = phwc_via_functions(&[planted], &crate::target::standard_family(2), 1e-9).unwrap();
        assert_eq!(full.report.max, 4.0);
    }

    #[test]
    fn suites_pass() {
        let r = hwc_implies_phwc_suite(50, 3, 42).unwrap();
        assert!(r.passes, "{r:?}");
        assert!((r.witness_dilation - 2.5).abs() < 1e-14 && (r.witness_hwc - 1.5).abs() < 1e-14);
        let e = phwc_equivalence_suite(50, 2, 42).unwrap();
        assert!(e.passes, "{e:?}");
    }
}
