//! JSON file formats for meshes, metrics, maps, boundary data and
//! polynomials.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::BoundaryData;
use crate::maps::PLMap;
use crate::quadrature::QuadratureOrder;
use crate::riemannian::{MetricMode, Polyhedron};
use crate::simplicial::{build_complex, SimplicialComplex};

/// `{ "dimension": n, "vertices": [[x..]..], "simplices": [[v0..vn]..] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshFile {
    pub dimension: usize,
    pub vertices: Vec<Vec<f64>>,
    pub simplices: Vec<Vec<usize>>,
}

impl MeshFile {
    /// Canonical form of a complex: sorted vertex tuples, simplices in
    /// lexicographic order.
    pub fn from_complex(complex: &SimplicialComplex) -> Self {
        Self {
            dimension: complex.dim(),
            vertices: complex.all_coords().to_vec(),
            simplices: complex.top_simplices().iter().map(|s| s.vertices().to_vec()).collect(),
        }
    }

    pub fn build(self) -> Result<SimplicialComplex> {
        if let Some(s) = self.simplices.iter().find(|s| s.len() != self.dimension + 1) {
            return Err(Error::Invalid(format!(
                "simplex {s:?} has {} vertices but dimension is {}",
                s.len(),
                self.dimension
            )));
        }
        build_complex(self.vertices, self.simplices)
    }
}

/// `{ "mode": "constant"|"smooth", "per_simplex": [[..]..] }`.
///
/// Matrices are `n × n` row-major in the affine frame of each top simplex
/// (canonical order). In smooth mode each entry holds `n + 1` such matrices,
/// one per vertex of the simplex, interpolated barycentrically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricFile {
    pub mode: MetricMode,
    pub per_simplex: Vec<Vec<f64>>,
}

fn square(n: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, data)
}

impl MetricFile {
    pub fn from_matrices(metrics: &[DMatrix<f64>]) -> Self {
        Self {
            mode: MetricMode::Constant,
            per_simplex: metrics
                .iter()
                .map(|m| m.transpose().iter().copied().collect())
                .collect(),
        }
    }

    pub fn attach(self, complex: SimplicialComplex, order: QuadratureOrder) -> Result<Polyhedron> {
        let n = complex.dim();
        if self.per_simplex.len() != complex.top_count() {
            return Err(Error::DimensionMismatch {
                expected: complex.top_count(),
                got: self.per_simplex.len(),
                context: "metric entries per top simplex",
            });
        }
        let per = match self.mode {
            MetricMode::Constant => n * n,
            MetricMode::Smooth => (n + 1) * n * n,
        };
        if let Some(bad) = self.per_simplex.iter().position(|m| m.len() != per) {
            return Err(Error::Invalid(format!(
                "metric entry {bad} has {} numbers, expected {per}",
                self.per_simplex[bad].len()
            )));
        }
        match self.mode {
            MetricMode::Constant => {
                let ms = self.per_simplex.iter().map(|m| square(n, m)).collect();
                Ok(Polyhedron::constant(complex, ms)?.with_quadrature(order))
            }
            MetricMode::Smooth => {
                let corners: Vec<Vec<DMatrix<f64>>> = self
                    .per_simplex
                    .iter()
                    .map(|m| m.chunks(n * n).map(|c| square(n, c)).collect())
                    .collect();
                for (t, cs) in corners.iter().enumerate() {
                    for c in cs {
                        crate::riemannian::spd_inverse(c).map_err(|e| Error::NotSpd(format!("simplex {t}: {e}")))?;
                    }
                }
                let f = Arc::new(move |t: usize, bary: &[f64], _: &[f64]| {
                    corners[t]
                        .iter()
                        .zip(bary)
                        .fold(DMatrix::zeros(n, n), |acc, (c, b)| acc + c * *b)
                });
                Ok(Polyhedron::smooth(complex, f, order))
            }
        }
    }
}

/// `{ "target_complex_dim": n, "values": [[2n reals]..] }` by vertex id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub target_complex_dim: usize,
    pub values: Vec<Vec<f64>>,
}

impl MapFile {
    pub fn from_map(map: &PLMap) -> Self {
        Self {
            target_complex_dim: map.complex_target_dim(),
            values: map.values().to_vec(),
        }
    }

    pub fn build(self, complex: &SimplicialComplex) -> Result<PLMap> {
        if let Some(v) = self.values.iter().position(|x| x.len() != 2 * self.target_complex_dim) {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.target_complex_dim,
                got: self.values[v].len(),
                context: "map value length",
            });
        }
        PLMap::new(complex, self.values)
    }
}

/// `{ "<vertex id>": [2n reals], .. }`.
pub fn parse_boundary(raw: BTreeMap<String, Vec<f64>>) -> Result<BoundaryData> {
    raw.into_iter()
        .map(|(k, v)| {
            let id = k
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Invalid(format!("boundary key {k:?} is not a vertex id")))?;
            Ok((id, v))
        })
        .collect()
}

pub fn boundary_to_file(data: &BoundaryData) -> BTreeMap<String, Vec<f64>> {
    data.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_json<T: DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::Format {
        context: context.to_string(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_json(&read_text(path)?, &path.display().to_string())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|source| Error::Format {
        context: "serialization".into(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = to_json(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_mesh(path: &Path) -> Result<SimplicialComplex> {
    read_json::<MeshFile>(path)?.build()
}

/// Polyhedron from a mesh file and an optional metric file; without a
/// metric file the metric is induced from the embedding.
pub fn read_polyhedron(mesh: &Path, metric: Option<&Path>, order: QuadratureOrder) -> Result<Polyhedron> {
    let complex = read_mesh(mesh)?;
    match metric {
        Some(p) => read_json::<MetricFile>(p)?.attach(complex, order),
        None => Ok(Polyhedron::induced(complex)?.with_quadrature(order)),
    }
}

pub fn read_map(path: &Path, complex: &SimplicialComplex) -> Result<PLMap> {
    read_json::<MapFile>(path)?.build(complex)
}

pub fn read_boundary(path: &Path) -> Result<BoundaryData> {
    parse_boundary(read_json(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshes;

    #[test]
    fn mesh_round_trip() {
        let c = meshes::bowtie();
        let file = MeshFile::from_complex(&c);
        let text = to_json(&file).unwrap();
        let back: MeshFile = parse_json(&text, "mesh").unwrap();
        assert_eq!(back, file);
        assert_eq!(back.build().unwrap().top_simplices(), c.top_simplices());
    }

    #[test]
    fn format_errors_carry_location() {
        let err = parse_json::<MeshFile>("{\"dimension\": 2,\n \"vertices\": 3}", "mesh.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mesh.json") && msg.contains("line 2"), "{msg}");
        let err = parse_json::<MeshFile>("{\"dimension\": 2, \"vertices\": []}", "m").unwrap_err();
        assert!(err.to_string().contains("simplices"));
    }

    #[test]
    fn metric_modes() {
        let c = meshes::unit_right_triangle();
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.25]);
        let poly = MetricFile::from_matrices(std::slice::from_ref(&g))
            .attach(c.clone(), QuadratureOrder::Barycenter)
            .unwrap();
        assert_eq!(poly.metric(0), g);
        let smooth = MetricFile {
            mode: MetricMode::Smooth,
            per_simplex: vec![[1.0, 0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 2.0, 3.0, 0.0, 0.0, 3.0].to_vec()],
        };
        let poly = smooth.attach(c.clone(), QuadratureOrder::Degree2).unwrap();
        let m = poly.metric_at(0, &[1.0 / 3.0; 3]);
        assert!((m[(0, 0)] - 2.0).abs() < 1e-15);
        let bad = MetricFile {
            mode: MetricMode::Constant,
            per_simplex: vec![vec![1.0, 0.0, 0.0]],
        };
        assert!(bad.attach(c, QuadratureOrder::Barycenter).is_err());
    }

    #[test]
    fn boundary_keys() {
        let mut raw = BTreeMap::new();
        raw.insert("3".to_string(), vec![1.0, 2.0]);
        assert_eq!(parse_boundary(raw.clone()).unwrap()[&3], vec![1.0, 2.0]);
        raw.insert("x".to_string(), vec![]);
        assert!(parse_boundary(raw).is_err());
    }
}
