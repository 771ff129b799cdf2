//! Small reference complexes used by the suites, the CLI and the tests.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::riemannian::Polyhedron;
use crate::simplicial::{build_complex, SimplicialComplex};

pub fn unit_right_triangle() -> SimplicialComplex {
    build_complex(
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0, 1, 2]],
    )
    .expect("triangle")
}

/// Unit square split along the edge {1, 2}.
pub fn two_triangles() -> SimplicialComplex {
    build_complex(
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        vec![vec![0, 1, 2], vec![1, 2, 3]],
    )
    .expect("two triangles")
}

/// Two triangles meeting only at vertex 2.
pub fn bowtie() -> SimplicialComplex {
    build_complex(
        vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.5, 1.0],
            vec![0.0, 2.0],
            vec![1.0, 2.0],
        ],
        vec![vec![0, 1, 2], vec![2, 3, 4]],
    )
    .expect("bowtie")
}

/// Cone over a `k`-gon: apex 0 at the origin, rim vertices 1..=k.
pub fn cone(k: usize) -> SimplicialComplex {
    let mut verts = vec![vec![0.0, 0.0]];
    for i in 0..k {
        let a = 2.0 * PI * i as f64 / k as f64;
        verts.push(vec![a.cos(), a.sin()]);
    }
    let tris = (1..=k).map(|i| vec![0, i, i % k + 1]).collect();
    build_complex(verts, tris).expect("cone")
}

/// `pages` triangles sharing the spine edge {0, 1}, embedded in R³.
pub fn book(pages: usize) -> SimplicialComplex {
    let mut verts = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]];
    for p in 0..pages {
        let a = 2.0 * PI * p as f64 / pages as f64;
        verts.push(vec![0.5, a.cos(), a.sin()]);
    }
    let tris = (0..pages).map(|p| vec![0, 1, p + 2]).collect();
    build_complex(verts, tris).expect("book")
}

/// Vertex index of grid node `(i, j)` in an `(nx+1) × (ny+1)` grid.
pub fn grid_index(nx: usize, i: usize, j: usize) -> usize {
    j * (nx + 1) + i
}

/// Rectangle `[x0,x1]×[y0,y1]` with `nx × ny` cells, each cut along the
/// diagonal from (i, j) to (i+1, j+1).
pub fn rect_grid(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> SimplicialComplex {
    let mut verts = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            verts.push(vec![
                x.0 + (x.1 - x.0) * i as f64 / nx as f64,
                y.0 + (y.1 - y.0) * j as f64 / ny as f64,
            ]);
        }
    }
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = grid_index(nx, i, j);
            let b = grid_index(nx, i + 1, j);
            let c = grid_index(nx, i + 1, j + 1);
            let d = grid_index(nx, i, j + 1);
            tris.push(vec![a, b, c]);
            tris.push(vec![a, c, d]);
        }
    }
    build_complex(verts, tris).expect("grid")
}

/// Unit square with `n × n` cells. A nonzero `distortion` moves interior
/// nodes by `s·(1, 1/2)` with `s = distortion·sin(πx)·sin(πy)`, which keeps
/// the boundary fixed and the mesh smoothly graded.
pub fn square_grid(n: usize, distortion: f64) -> SimplicialComplex {
    let base = rect_grid(n, n, (0.0, 1.0), (0.0, 1.0));
    if distortion == 0.0 {
        return base;
    }
    let verts = base
        .all_coords()
        .iter()
        .map(|p| {
            let s = distortion * (PI * p[0]).sin() * (PI * p[1]).sin();
            vec![p[0] + s, p[1] + 0.5 * s]
        })
        .collect();
    let tris = base.top_simplices().iter().map(|s| s.vertices().to_vec()).collect();
    build_complex(verts, tris).expect("distorted grid")
}

/// Unit cube cut into six tetrahedra around the main diagonal.
pub fn unit_cube() -> SimplicialComplex {
    let mut verts = Vec::new();
    for k in 0..8usize {
        verts.push(vec![(k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64]);
    }
    let tets = vec![
        vec![0, 1, 3, 7],
        vec![0, 1, 5, 7],
        vec![0, 2, 3, 7],
        vec![0, 2, 6, 7],
        vec![0, 4, 5, 7],
        vec![0, 4, 6, 7],
    ];
    build_complex(verts, tets).expect("cube")
}

/// A flat torus `R²/(lx Z × ly Z)` on an `nx × ny` periodic grid.
#[derive(Debug, Clone)]
pub struct FlatTorus {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub complex: SimplicialComplex,
    /// Flat metric taken from the periodic parametrization.
    pub polyhedron: Polyhedron,
    /// Parametric position of each vertex in `[0,lx)×[0,ly)`.
    pub params: Vec<[f64; 2]>,
}

impl FlatTorus {
    pub fn index(&self, i: usize, j: usize) -> usize {
        (j % self.ny) * self.nx + (i % self.nx)
    }
}

/// Requires `nx, ny ≥ 3` so that the periodic grid is a simplicial complex.
pub fn flat_torus(nx: usize, ny: usize, lx: f64, ly: f64) -> FlatTorus {
    assert!(nx >= 3 && ny >= 3, "torus grid needs at least 3x3 cells");
    let idx = |i: usize, j: usize| (j % ny) * nx + (i % nx);
    let hx = lx / nx as f64;
    let hy = ly / ny as f64;
    let mut params = Vec::with_capacity(nx * ny);
    let mut verts = Vec::with_capacity(nx * ny);
    let (rx, ry) = (lx / (2.0 * PI), ly / (2.0 * PI));
    for j in 0..ny {
        for i in 0..nx {
            let (u, v) = (i as f64 * hx, j as f64 * hy);
            params.push([u, v]);
            let (a, b) = (u / rx, v / ry);
            verts.push(vec![rx * a.cos(), rx * a.sin(), ry * b.cos(), ry * b.sin()]);
        }
    }
    // each triangle with its unwrapped corner positions
    let mut cells: Vec<Vec<(usize, [f64; 2])>> = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let p = |di: usize, dj: usize| {
                (
                    idx(i + di, j + dj),
                    [(i + di) as f64 * hx, (j + dj) as f64 * hy],
                )
            };
            cells.push(vec![p(0, 0), p(1, 0), p(1, 1)]);
            cells.push(vec![p(0, 0), p(1, 1), p(0, 1)]);
        }
    }
    let tris = cells.iter().map(|c| c.iter().map(|(v, _)| *v).collect()).collect();
    let complex = build_complex(verts, tris).expect("torus");
    let mut metrics = vec![DMatrix::zeros(2, 2); complex.top_count()];
    for cell in &cells {
        let mut corners = cell.clone();
        corners.sort_by_key(|(v, _)| *v);
        let ids: Vec<usize> = corners.iter().map(|(v, _)| *v).collect();
        let t = complex
            .top_simplices()
            .binary_search_by(|s| s.vertices().cmp(&ids[..]))
            .expect("torus triangle");
        let e = DMatrix::from_fn(2, 2, |r, c| corners[c + 1].1[r] - corners[0].1[r]);
        metrics[t] = e.transpose() * e;
    }
    let polyhedron = Polyhedron::constant(complex.clone(), metrics).expect("flat torus metric");
    FlatTorus {
        nx,
        ny,
        lx,
        ly,
        complex,
        polyhedron,
        params,
    }
}
