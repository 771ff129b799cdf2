//! Combinatorial admissible complexes: face lattice, stars, links and the
//! local chainability test.

use std::collections::{BTreeSet, HashMap};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A simplex as a strictly increasing list of vertex ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Simplex(Vec<usize>);

impl Simplex {
    pub fn new(mut vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyInput("simplex vertices"));
        }
        vertices.sort_unstable();
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::RepeatedVertex(vertices));
        }
        Ok(Self(vertices))
    }

    pub fn vertex(v: usize) -> Self {
        Self(vec![v])
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    /// True when `self` is a face of `other` (non-strict).
    pub fn is_face_of(&self, other: &Simplex) -> bool {
        let mut it = other.0.iter();
        self.0.iter().all(|v| it.any(|w| w == v))
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    /// The face opposite to `v`.
    pub fn without(&self, v: usize) -> Option<Simplex> {
        if self.0.len() < 2 || !self.contains_vertex(v) {
            return None;
        }
        Some(Simplex(self.0.iter().copied().filter(|&w| w != v).collect()))
    }

    /// All nonempty faces, including the simplex itself.
    pub fn faces(&self) -> Vec<Simplex> {
        let k = self.0.len();
        (1u32..(1 << k))
            .map(|mask| {
                Simplex(
                    (0..k)
                        .filter(|i| mask & (1 << i) != 0)
                        .map(|i| self.0[i])
                        .collect(),
                )
            })
            .collect()
    }

    pub fn intersection(&self, other: &Simplex) -> Vec<usize> {
        self.0
            .iter()
            .copied()
            .filter(|v| other.contains_vertex(*v))
            .collect()
    }
}

impl std::fmt::Display for Simplex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// A finite, dimensionally homogeneous simplicial complex with embedding
/// coordinates. Immutable once built.
#[derive(Debug, Clone)]
pub struct SimplicialComplex {
    dim: usize,
    coords: Vec<Vec<f64>>,
    tops: Vec<Simplex>,
    /// faces[k] = all k-simplices, sorted.
    faces: Vec<Vec<Simplex>>,
    face_index: HashMap<Simplex, usize>,
    /// cofaces[k][i] = indices of top simplices containing faces[k][i].
    cofaces: Vec<Vec<Vec<usize>>>,
    vertex_tops: Vec<Vec<usize>>,
}

/// Build a complex from vertex coordinates and top simplices.
///
/// The top simplex list is stored in canonical (lexicographic) order, which
/// is the order per-simplex data files refer to.
pub fn build_complex(
    vertices: Vec<Vec<f64>>,
    top_simplices: Vec<Vec<usize>>,
) -> Result<SimplicialComplex> {
    let complex = SimplicialComplex::assemble(vertices, top_simplices, true)?;
    if complex.dim == 0 {
        return Err(Error::Invalid("complex must have dimension >= 1".into()));
    }
    Ok(complex)
}

impl SimplicialComplex {
    fn assemble(
        vertices: Vec<Vec<f64>>,
        top_simplices: Vec<Vec<usize>>,
        require_connected: bool,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyInput("vertices"));
        }
        if top_simplices.is_empty() {
            return Err(Error::EmptyInput("simplices"));
        }
        let first = top_simplices[0].len();
        let mut tops = Vec::with_capacity(top_simplices.len());
        for raw in top_simplices {
            if raw.len() != first {
                return Err(Error::MixedDimension {
                    first,
                    other: raw.len(),
                });
            }
            if let Some(&bad) = raw.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::DanglingVertexRef {
                    vertex: bad,
                    count: vertices.len(),
                });
            }
            tops.push(Simplex::new(raw)?);
        }
        tops.sort();
        if let Some(w) = tops.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateSimplex(w[0].0.clone()));
        }
        let dim = first - 1;

        let mut vertex_tops = vec![Vec::new(); vertices.len()];
        for (t, s) in tops.iter().enumerate() {
            for &v in s.vertices() {
                vertex_tops[v].push(t);
            }
        }
        if let Some(v) = vertex_tops.iter().position(|t| t.is_empty()) {
            return Err(Error::IsolatedVertex(v));
        }

        let mut by_dim: Vec<BTreeSet<Simplex>> = vec![BTreeSet::new(); dim + 1];
        for s in &tops {
            for f in s.faces() {
                by_dim[f.dim()].insert(f);
            }
        }
        let faces: Vec<Vec<Simplex>> = by_dim.into_iter().map(|s| s.into_iter().collect()).collect();
        let mut face_index = HashMap::new();
        for level in &faces {
            for (i, f) in level.iter().enumerate() {
                face_index.insert(f.clone(), i);
            }
        }
        let mut cofaces: Vec<Vec<Vec<usize>>> = faces.iter().map(|l| vec![Vec::new(); l.len()]).collect();
        for (t, s) in tops.iter().enumerate() {
            for f in s.faces() {
                let k = f.dim();
                cofaces[k][face_index[&f]].push(t);
            }
        }

        let complex = Self {
            dim,
            coords: vertices,
            tops,
            faces,
            face_index,
            cofaces,
            vertex_tops,
        };
        if require_connected {
            let components = complex.vertex_components();
            if components > 1 {
                return Err(Error::Disconnected { components });
            }
        }
        Ok(complex)
    }

    fn vertex_components(&self) -> usize {
        let mut uf = UnionFind::<usize>::new(self.coords.len());
        for s in &self.tops {
            let vs = s.vertices();
            for w in &vs[1..] {
                uf.union(vs[0], *w);
            }
        }
        let mut labels = uf.into_labeling();
        labels.sort_unstable();
        labels.dedup();
        labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self, v: usize) -> &[f64] {
        &self.coords[v]
    }

    pub fn all_coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn ambient_dim(&self) -> usize {
        self.coords[0].len()
    }

    pub fn top_simplices(&self) -> &[Simplex] {
        &self.tops
    }

    pub fn top(&self, index: usize) -> &Simplex {
        &self.tops[index]
    }

    pub fn top_count(&self) -> usize {
        self.tops.len()
    }

    /// All k-simplices in lexicographic order.
    pub fn faces(&self, k: usize) -> &[Simplex] {
        self.faces.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        s.dim() <= self.dim && self.face_index.contains_key(s)
    }

    /// Indices of the top simplices containing `s`.
    pub fn cofaces(&self, s: &Simplex) -> Result<&[usize]> {
        let idx = self
            .face_index
            .get(s)
            .filter(|_| s.dim() <= self.dim)
            .ok_or_else(|| Error::UnknownSimplex(s.0.clone()))?;
        Ok(&self.cofaces[s.dim()][*idx])
    }

    pub fn vertex_tops(&self, v: usize) -> &[usize] {
        &self.vertex_tops[v]
    }

    /// Codimension-one faces adjacent to exactly one top simplex.
    pub fn boundary_faces(&self) -> Vec<&Simplex> {
        if self.dim == 0 {
            return Vec::new();
        }
        let k = self.dim - 1;
        self.faces[k]
            .iter()
            .zip(&self.cofaces[k])
            .filter(|(_, c)| c.len() == 1)
            .map(|(f, _)| f)
            .collect()
    }

    pub fn is_boundary_face(&self, s: &Simplex) -> Result<bool> {
        if self.dim == 0 || s.dim() + 1 != self.dim {
            return Ok(false);
        }
        Ok(self.cofaces(s)?.len() == 1)
    }

    /// Per-vertex flag: the vertex lies on some boundary face.
    pub fn boundary_vertex_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertex_count()];
        for f in self.boundary_faces() {
            for &v in f.vertices() {
                flags[v] = true;
            }
        }
        flags
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        self.boundary_vertex_flags()
            .iter()
            .enumerate()
            .filter(|(_, b)| !**b)
            .map(|(v, _)| v)
            .collect()
    }

    /// Pairs of top simplices sharing a codimension-one face.
    pub fn top_adjacency(&self) -> Vec<(usize, usize)> {
        if self.dim == 0 {
            return Vec::new();
        }
        let k = self.dim - 1;
        let mut pairs = Vec::new();
        for c in &self.cofaces[k] {
            for i in 0..c.len() {
                for j in (i + 1)..c.len() {
                    pairs.push((c[i], c[j]));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    /// Open star: every simplex whose closure contains `s`, ordered by
    /// dimension then lexicographically.
    pub fn star(&self, s: &Simplex) -> Result<Vec<Simplex>> {
        let tops = self.cofaces(s)?;
        let mut out = BTreeSet::new();
        for &t in tops {
            for f in self.tops[t].faces() {
                if s.is_face_of(&f) {
                    out.insert(f);
                }
            }
        }
        let mut out: Vec<Simplex> = out.into_iter().collect();
        out.sort_by(|a, b| a.dim().cmp(&b.dim()).then_with(|| a.cmp(b)));
        Ok(out)
    }

    /// Combinatorial link of a vertex.
    pub fn link(&self, v: usize) -> Result<Link> {
        if v >= self.vertex_count() {
            return Err(Error::UnknownVertex(v));
        }
        if self.dim == 0 {
            return Err(Error::Invalid("link of a 0-dimensional complex is empty".into()));
        }
        let opposite: Vec<Simplex> = self.vertex_tops[v]
            .iter()
            .filter_map(|&t| self.tops[t].without(v))
            .collect();
        let mut ids: Vec<usize> = opposite.iter().flat_map(|s| s.0.iter().copied()).collect();
        ids.sort_unstable();
        ids.dedup();
        let local: HashMap<usize, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let coords = ids.iter().map(|&id| self.coords[id].clone()).collect();
        let simplices = opposite
            .iter()
            .map(|s| s.0.iter().map(|id| local[id]).collect())
            .collect();
        let complex = Self::assemble(coords, simplices, false)?;
        Ok(Link {
            complex,
            vertex_ids: ids,
        })
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_components() == 1
    }

    /// Homogeneity and local (n-1)-chainability of every star.
    pub fn check_admissible(&self) -> AdmissibilityReport {
        let homogeneous = self
            .cofaces
            .iter()
            .all(|level| level.iter().all(|c| !c.is_empty()));
        let mut witnesses = Vec::new();
        if self.dim >= 2 {
            for k in 0..=(self.dim - 2) {
                for (i, face) in self.faces[k].iter().enumerate() {
                    let tops = &self.cofaces[k][i];
                    let components = self.star_components(face, tops);
                    if components.len() > 1 {
                        witnesses.push(AdmissibilityWitness {
                            simplex: face.clone(),
                            components: components
                                .into_iter()
                                .map(|c| c.into_iter().map(|t| self.tops[t].clone()).collect())
                                .collect(),
                        });
                    }
                }
            }
        }
        AdmissibilityReport {
            dimension: self.dim,
            homogeneous,
            chainable: witnesses.is_empty(),
            witnesses,
        }
    }

    /// Components of the top simplices of st(face) under adjacency through
    /// codimension-one faces that themselves contain `face`.
    fn star_components(&self, face: &Simplex, tops: &[usize]) -> Vec<Vec<usize>> {
        let mut uf = UnionFind::<usize>::new(tops.len());
        for i in 0..tops.len() {
            for j in (i + 1)..tops.len() {
                let shared = self.tops[tops[i]].intersection(&self.tops[tops[j]]);
                if shared.len() == self.dim && face.0.iter().all(|v| shared.contains(v)) {
                    uf.union(i, j);
                }
            }
        }
        let labels = uf.into_labeling();
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, l) in labels.into_iter().enumerate() {
            groups.entry(l).or_default().push(tops[i]);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort();
        out
    }
}

/// The link of a vertex, with its vertices renumbered `0..k`;
/// `vertex_ids[i]` is the id of link vertex `i` in the parent complex.
#[derive(Debug, Clone)]
pub struct Link {
    pub complex: SimplicialComplex,
    pub vertex_ids: Vec<usize>,
}

impl Link {
    /// Top simplices of the link expressed in parent vertex ids.
    pub fn simplices_in_parent(&self) -> Vec<Simplex> {
        let mut out: Vec<Simplex> = self
            .complex
            .top_simplices()
            .iter()
            .map(|s| Simplex(s.0.iter().map(|&i| self.vertex_ids[i]).collect()))
            .collect();
        out.sort();
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AdmissibilityWitness {
    pub simplex: Simplex,
    pub components: Vec<Vec<Simplex>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AdmissibilityReport {
    pub dimension: usize,
    pub homogeneous: bool,
    pub chainable: bool,
    pub witnesses: Vec<AdmissibilityWitness>,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.homogeneous && self.chainable
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshes;

    fn tri() -> SimplicialComplex {
        build_complex(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0, 1, 2]],
        )
        .unwrap()
    }

    fn s(v: &[usize]) -> Simplex {
        Simplex::new(v.to_vec()).unwrap()
    }

    #[test]
    fn single_triangle_counts() {
        let c = tri();
        assert_eq!(c.dim(), 2);
        assert_eq!(c.faces(0).len(), 3);
        assert_eq!(c.faces(1).len(), 3);
        assert_eq!(c.boundary_faces().len(), 3);
    }

    #[test]
    fn glued_triangles_have_one_interior_edge() {
        let c = meshes::two_triangles();
        let boundary = c.boundary_faces().len();
        assert_eq!(c.faces(1).len() - boundary, 1);
        assert_eq!(boundary, 4);
    }

    #[test]
    fn construction_errors() {
        let v = vec![vec![0.0]; 5];
        assert!(matches!(
            build_complex(v.clone(), vec![vec![0, 1, 2], vec![3, 4]]),
            Err(Error::MixedDimension { .. })
        ));
        assert!(matches!(
            build_complex(v.clone(), vec![vec![0, 1, 2], vec![2, 1, 0]]),
            Err(Error::DuplicateSimplex(_))
        ));
        assert!(matches!(
            build_complex(v.clone(), vec![vec![0, 1, 7]]),
            Err(Error::DanglingVertexRef { vertex: 7, .. })
        ));
        assert!(matches!(
            build_complex(v[..4].to_vec(), vec![vec![0, 1], vec![2, 3]]),
            Err(Error::Disconnected { components: 2 })
        ));
        assert!(matches!(
            build_complex(v.clone(), vec![vec![0, 1, 2]]),
            Err(Error::IsolatedVertex(3))
        ));
    }

    #[test]
    fn star_of_top_is_itself() {
        let c = tri();
        assert_eq!(c.star(&s(&[0, 1, 2])).unwrap(), vec![s(&[0, 1, 2])]);
    }

    #[test]
    fn star_of_interior_edge() {
        let c = meshes::two_triangles();
        let star = c.star(&s(&[1, 2])).unwrap();
        assert_eq!(star, vec![s(&[1, 2]), s(&[0, 1, 2]), s(&[1, 2, 3])]);
    }

    #[test]
    fn star_of_fan_apex_by_enumeration() {
        let c = meshes::cone(5);
        let star = c.star(&Simplex::vertex(0)).unwrap();
        // brute force: every face of every top simplex that contains vertex 0
        let mut brute: BTreeSet<Simplex> = BTreeSet::new();
        for t in c.top_simplices() {
            for f in t.faces() {
                if f.contains_vertex(0) {
                    brute.insert(f);
                }
            }
        }
        assert_eq!(star.len(), brute.len());
        assert_eq!(star.len(), 11);
        assert_eq!(star.iter().filter(|f| f.dim() == 2).count(), 5);
        assert_eq!(star.iter().filter(|f| f.dim() == 1).count(), 5);
    }

    #[test]
    fn unknown_simplex() {
        assert!(matches!(tri().star(&s(&[0, 5])), Err(Error::UnknownSimplex(_))));
        assert!(matches!(tri().link(9), Err(Error::UnknownVertex(9))));
    }

    #[test]
    fn links() {
        let closed = meshes::cone(6);
        let link = closed.link(0).unwrap();
        assert_eq!(link.complex.dim(), 1);
        assert_eq!(link.complex.vertex_count(), 6);
        assert_eq!(link.complex.top_count(), 6);
        assert!(link.complex.is_connected());
        // cycle: every link vertex has degree 2
        for v in 0..6 {
            assert_eq!(link.complex.vertex_tops(v).len(), 2);
        }

        let single = tri().link(0).unwrap();
        assert_eq!(single.simplices_in_parent(), vec![s(&[1, 2])]);
    }

    #[test]
    fn admissibility_examples() {
        let bowtie = meshes::bowtie();
        let report = bowtie.check_admissible();
        assert!(report.homogeneous);
        assert!(!report.chainable);
        assert_eq!(report.witnesses.len(), 1);
        assert_eq!(report.witnesses[0].simplex, Simplex::vertex(2));

        assert!(meshes::book(3).check_admissible().admissible());
        let torus = meshes::flat_torus(4, 4, 1.0, 1.0);
        assert!(torus.complex.check_admissible().admissible());
        assert!(torus.complex.boundary_faces().is_empty());
    }
}
