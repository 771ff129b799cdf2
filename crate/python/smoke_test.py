"""Smoke test for the polyharm Python module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`.
"""

import polyharm as ph


def main() -> None:
    assert not ph.Mesh.bowtie().is_admissible()
    assert ph.Mesh.book(3).is_admissible()
    assert ph.ellipticity([[4.0, 0.0], [0.0, 0.25]]) == 2.0

    tri = ph.Mesh.unit_right_triangle()
    tri_poly = ph.Polyhedron.induced(tri)
    energy = ph.energy(tri_poly, ph.Map(tri, tri.vertices))
    assert energy["total"] == 1.0

    square = ph.Mesh.square_grid(8, 0.1)
    poly = ph.Polyhedron.induced(square)
    verts = square.vertices
    boundary = {v: [verts[v][0], 2.0 * verts[v][1]] for v in square.boundary_vertices()}
    solution, report = ph.solve(poly, boundary)
    assert report["inf_norm"] <= 1e-8
    phwc = ph.phwc(poly, solution)
    assert abs(phwc["max"] - 3.0) < 1e-9 and not phwc["verdict"]

    eta = ph.eta_suite(samples=20)
    assert eta["passes"] and not eta["holomorphic"]
    phm, non_phm = ph.torus_factorization(4)
    assert phm["passes"] and non_phm["passes"]

    try:
        ph.Mesh([[0.0, 0.0]], [[0, 0, 0]])
    except ph.PolyharmError as err:
        print(f"rejected bad mesh: {err}")
    else:
        raise AssertionError("bad mesh accepted")

    print("polyharm smoke test passed")


if __name__ == "__main__":
    main()
