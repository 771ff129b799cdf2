//! Python bindings: meshes, polyhedra, PL maps, and the energy, solver and
//! conformality checks. Reports are returned as plain dictionaries.

use std::collections::BTreeMap;

use polyharm_core::energy::{approx_energy_density, dirichlet_energy, Normalization};
use polyharm_core::examples::{
    annulus_points, build_covering, build_eta, constant_map, eta_phwc_suite, sum_map, torus_sawtooth, CoveringSpec,
    EtaSpec,
};
use polyharm_core::harmonic::{assemble_stiffness, solve_harmonic_map, weak_harmonic_residual, SolverOptions};
use polyharm_core::io::{read_mesh, to_json, write_json, MeshFile};
use polyharm_core::maps::PLMap;
use polyharm_core::meshes;
use polyharm_core::morphism::{
    factorization_suite, hwc_implies_phwc_suite, hwc_residual, phm_check, phwc_equivalence_suite, phwc_residual,
    samples_from_plmap, Tolerances,
};
use polyharm_core::riemannian::{ellipticity_constant, Polyhedron as CorePolyhedron, SurfacePoint};
use polyharm_core::simplicial::{build_complex, SimplicialComplex};
use polyharm_core::target::{standard_family, target_from_name, FlatC};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(polyharm, PolyharmError, PyValueError);

fn err(e: polyharm_core::Error) -> PyErr {
    PolyharmError::new_err(e.to_string())
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for polyharm_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = to_json(value).py()?;
    py.import("json")?.call_method1("loads", (text,))
}

fn square_matrix(rows: &[Vec<f64>]) -> PyResult<nalgebra::DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn point(complex: &SimplicialComplex, spec: PointSpec) -> PyResult<SurfacePoint> {
    match spec {
        PointSpec::Vertex(v) => SurfacePoint::at_vertex(complex, v).py(),
        PointSpec::Barycentric(t, b) => Ok(SurfacePoint::new(t, b)),
    }
}

/// A point given either as a vertex id or as `(simplex, barycentric)`.
#[derive(FromPyObject)]
enum PointSpec {
    Vertex(usize),
    Barycentric(usize, Vec<f64>),
}

/// Simplicial complex with embedding coordinates.
#[pyclass(frozen, from_py_object, module = "polyharm")]
#[derive(Clone)]
struct Mesh {
    inner: SimplicialComplex,
}

#[pymethods]
impl Mesh {
    #[new]
    fn new(vertices: Vec<Vec<f64>>, simplices: Vec<Vec<usize>>) -> PyResult<Self> {
        Ok(Self {
            inner: build_complex(vertices, simplices).py()?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: read_mesh(&path).py()?,
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        write_json(&path, &MeshFile::from_complex(&self.inner)).py()
    }

    #[staticmethod]
    #[pyo3(signature = (n, distortion = 0.0))]
    fn square_grid(n: usize, distortion: f64) -> Self {
        Self {
            inner: meshes::square_grid(n, distortion),
        }
    }

    #[staticmethod]
    fn unit_right_triangle() -> Self {
        Self {
            inner: meshes::unit_right_triangle(),
        }
    }

    #[staticmethod]
    fn bowtie() -> Self {
        Self { inner: meshes::bowtie() }
    }

    #[staticmethod]
    fn book(pages: usize) -> Self {
        Self {
            inner: meshes::book(pages),
        }
    }

    #[staticmethod]
    fn flat_torus(nx: usize, ny: usize) -> Self {
        Self {
            inner: meshes::flat_torus(nx, ny, 1.0, 1.0).complex,
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn simplices(&self) -> Vec<Vec<usize>> {
        self.inner.top_simplices().iter().map(|s| s.vertices().to_vec()).collect()
    }

    #[getter]
    fn vertices(&self) -> Vec<Vec<f64>> {
        self.inner.all_coords().to_vec()
    }

    fn boundary_vertices(&self) -> Vec<usize> {
        let flags = self.inner.boundary_vertex_flags();
        (0..flags.len()).filter(|&v| flags[v]).collect()
    }

    fn is_admissible(&self) -> bool {
        self.inner.check_admissible().admissible()
    }

    fn admissibility_report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner.check_admissible())
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(dim={}, vertices={}, simplices={})",
            self.inner.dim(),
            self.inner.vertex_count(),
            self.inner.top_count()
        )
    }
}

/// Simplicial complex with a Riemannian metric on each top simplex.
#[pyclass(frozen, from_py_object, module = "polyharm")]
#[derive(Clone)]
struct Polyhedron {
    inner: CorePolyhedron,
}

#[pymethods]
impl Polyhedron {
    /// Metric induced by the embedding coordinates.
    #[staticmethod]
    fn induced(mesh: &Mesh) -> PyResult<Self> {
        Ok(Self {
            inner: CorePolyhedron::induced(mesh.inner.clone()).py()?,
        })
    }

    /// One constant `n × n` metric per top simplex, in the simplex frame.
    #[staticmethod]
    fn constant(mesh: &Mesh, metrics: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let ms = metrics.iter().map(|m| square_matrix(m)).collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: CorePolyhedron::constant(mesh.inner.clone(), ms).py()?,
        })
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            inner: self.inner.scaled(factor),
        }
    }

    #[getter]
    fn mesh(&self) -> Mesh {
        Mesh {
            inner: self.inner.complex().clone(),
        }
    }

    fn total_volume(&self) -> PyResult<f64> {
        self.inner.total_volume().py()
    }

    fn ellipticity(&self) -> PyResult<f64> {
        self.inner.global_ellipticity().py()
    }

    /// Upper bound for the intrinsic distance between two points.
    #[pyo3(signature = (source, target, level = 3))]
    fn distance(&self, source: PointSpec, target: PointSpec, level: u32) -> PyResult<f64> {
        let c = self.inner.complex();
        let (x, y) = (point(c, source)?, point(c, target)?);
        Ok(self.inner.intrinsic_distance(&x, &y, level).py()?.upper_bound)
    }
}

/// Piecewise linear map given by vertex values in real coordinates
/// `(x_1..x_n, y_1..y_n)`.
#[pyclass(frozen, from_py_object, module = "polyharm")]
#[derive(Clone)]
struct Map {
    inner: PLMap,
}

#[pymethods]
impl Map {
    #[new]
    fn new(mesh: &Mesh, values: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: PLMap::new(&mesh.inner, values).py()?,
        })
    }

    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        self.inner.values().to_vec()
    }

    #[getter]
    fn complex_target_dim(&self) -> usize {
        self.inner.complex_target_dim()
    }
}

fn normalization(name: &str) -> PyResult<Normalization> {
    match name {
        "gradient-squared" => Ok(Normalization::GradientSquared),
        "ks-raw" => Ok(Normalization::KsRaw),
        other => Err(PyValueError::new_err(format!("unknown normalization {other:?}"))),
    }
}

#[pyfunction]
fn ellipticity(metric: Vec<Vec<f64>>) -> PyResult<f64> {
    ellipticity_constant(&square_matrix(&metric)?).py()
}

#[pyfunction]
#[pyo3(signature = (poly, map, target = "flat:1", normalization = "gradient-squared"))]
fn energy<'py>(
    py: Python<'py>,
    poly: &Polyhedron,
    map: &Map,
    target: &str,
    normalization: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let t = target_from_name(target).py()?;
    let norm = self::normalization(normalization)?;
    to_dict(py, &dirichlet_energy(&poly.inner, &map.inner, t.as_ref(), norm).py()?)
}

#[pyfunction]
#[pyo3(signature = (poly, map, at, epsilon, samples = 20000, seed = 42, target = "flat:1"))]
fn energy_density<'py>(
    py: Python<'py>,
    poly: &Polyhedron,
    map: &Map,
    at: PointSpec,
    epsilon: f64,
    samples: usize,
    seed: u64,
    target: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let t = target_from_name(target).py()?;
    let x = point(poly.inner.complex(), at)?;
    let est = approx_energy_density(&poly.inner, &map.inner, t.as_ref(), &x, epsilon, samples, seed).py()?;
    to_dict(py, &est)
}

/// Solves for the harmonic map with the given boundary values; returns the
/// map and a report with iterations, residual history and final residual.
#[pyfunction]
#[pyo3(signature = (poly, boundary, target = "flat:1", max_iter = 200, tol = 1e-8, damping = 0.7))]
fn solve<'py>(
    py: Python<'py>,
    poly: &Polyhedron,
    boundary: BTreeMap<usize, Vec<f64>>,
    target: &str,
    max_iter: usize,
    tol: f64,
    damping: f64,
) -> PyResult<(Map, Bound<'py, PyAny>)> {
    let t = target_from_name(target).py()?;
    let system = assemble_stiffness(&poly.inner).py()?;
    let opts = SolverOptions { max_iter, tol, damping };
    let sol = solve_harmonic_map(&system, t.as_ref(), &boundary, &opts).py()?;
    let residual = weak_harmonic_residual(&system, t.as_ref(), &sol.map).py()?;
    #[derive(Serialize)]
    struct Report<'a> {
        iterations: usize,
        history: &'a [f64],
        inf_norm: f64,
        normalized_inf_norm: f64,
    }
    let report = to_dict(
        py,
        &Report {
            iterations: sol.iterations,
            history: &sol.history,
            inf_norm: residual.inf_norm,
            normalized_inf_norm: residual.normalized_inf_norm,
        },
    )?;
    Ok((Map { inner: sol.map }, report))
}

#[pyfunction]
#[pyo3(signature = (poly, map, target = "flat:1"))]
fn harmonic_residual<'py>(py: Python<'py>, poly: &Polyhedron, map: &Map, target: &str) -> PyResult<Bound<'py, PyAny>> {
    let t = target_from_name(target).py()?;
    let system = assemble_stiffness(&poly.inner).py()?;
    to_dict(py, &weak_harmonic_residual(&system, t.as_ref(), &map.inner).py()?)
}

#[pyfunction]
#[pyo3(signature = (poly, map, tol = 1e-8))]
fn phwc<'py>(py: Python<'py>, poly: &Polyhedron, map: &Map, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let samples = samples_from_plmap(&poly.inner, &map.inner).py()?;
    to_dict(py, &phwc_residual(&samples, tol).py()?)
}

#[pyfunction]
#[pyo3(signature = (poly, map, target = "flat:1", tol = 1e-8))]
fn hwc<'py>(py: Python<'py>, poly: &Polyhedron, map: &Map, target: &str, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let t = target_from_name(target).py()?;
    let samples = samples_from_plmap(&poly.inner, &map.inner).py()?;
    to_dict(py, &hwc_residual(&samples, t.as_ref(), tol).py()?)
}

/// Harmonic and PHWC verdicts, plus the standard function family report.
#[pyfunction]
#[pyo3(signature = (poly, map, target = "flat:1", tol_c = 1e-8, tol_h = 1e-8))]
fn phm<'py>(
    py: Python<'py>,
    poly: &Polyhedron,
    map: &Map,
    target: &str,
    tol_c: f64,
    tol_h: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let t = target_from_name(target).py()?;
    let tol = Tolerances {
        tol_c,
        tol_h,
        ..Tolerances::default()
    };
    let family = standard_family(map.inner.complex_target_dim());
    to_dict(py, &phm_check(&poly.inner, &map.inner, t.as_ref(), &family, &tol).py()?)
}

#[pyfunction]
#[pyo3(signature = (count = 1000, n = 3, seed = 42))]
fn hwc_suite<'py>(py: Python<'py>, count: usize, n: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &hwc_implies_phwc_suite(count, n, seed).py()?)
}

#[pyfunction]
#[pyo3(signature = (count = 1000, n = 2, seed = 42))]
fn equivalence_suite<'py>(py: Python<'py>, count: usize, n: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &phwc_equivalence_suite(count, n, seed).py()?)
}

/// Gradient, conformality and harmonicity checks of the η map at seeded
/// points; with `sum=True` the sum of two copies is checked as well.
#[pyfunction]
#[pyo3(signature = (k = 2, s = 2, r = 1, samples = 100, seed = 42, sum = false))]
fn eta_suite<'py>(
    py: Python<'py>,
    k: usize,
    s: usize,
    r: usize,
    samples: usize,
    seed: u64,
    sum: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let eta = build_eta(EtaSpec::cyclic(k, s, r).py()?).py()?;
    let single = eta_phwc_suite(&eta, &annulus_points(k + s, samples, seed), &eta.holomorphic_vars()).py()?;
    if !sum {
        return to_dict(py, &single);
    }
    let total = sum_map(&eta, &eta).py()?;
    let vars: Vec<usize> = (0..k).chain(k + s..2 * k + s).collect();
    let double = eta_phwc_suite(&total, &annulus_points(2 * (k + s), samples, seed), &vars).py()?;
    to_dict(py, &(single, double))
}

/// Factorization through the 2:1 torus covering for a constant map and the
/// sawtooth map.
#[pyfunction]
#[pyo3(signature = (n = 4))]
fn torus_factorization<'py>(py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyAny>> {
    let cover = build_covering(CoveringSpec::TorusCover, n).py()?;
    let family = standard_family(1);
    let flat = FlatC::new(1);
    let tol = Tolerances::default();
    let phm = factorization_suite(&cover, &constant_map(&cover.base, &[0.25, -0.5]).py()?, &flat, &family, &tol).py()?;
    let saw = torus_sawtooth(&meshes::flat_torus(n, n, 1.0, 1.0)).py()?;
    let non = factorization_suite(&cover, &saw, &flat, &family, &tol).py()?;
    to_dict(py, &(phm, non))
}

#[pymodule]
pub fn polyharm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PolyharmError", m.py().get_type::<PolyharmError>())?;
    m.add_class::<Mesh>()?;
    m.add_class::<Polyhedron>()?;
    m.add_class::<Map>()?;
    m.add_function(wrap_pyfunction!(ellipticity, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(energy_density, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_residual, m)?)?;
    m.add_function(wrap_pyfunction!(phwc, m)?)?;
    m.add_function(wrap_pyfunction!(hwc, m)?)?;
    m.add_function(wrap_pyfunction!(phm, m)?)?;
    m.add_function(wrap_pyfunction!(hwc_suite, m)?)?;
    m.add_function(wrap_pyfunction!(equivalence_suite, m)?)?;
    m.add_function(wrap_pyfunction!(eta_suite, m)?)?;
    m.add_function(wrap_pyfunction!(torus_factorization, m)?)?;
    Ok(())
}
