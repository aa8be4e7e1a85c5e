import numpy as np
import pytest

from nanohdg.mesh import (FREE_SPACE, SCATTERER, EdgeClass, MeshError,
                          build_skeleton, curved_boundary_map, load_gmsh,
                          make_mesh, mesh_report, outward_normal, save_gmsh)
from nanohdg.meshgen import nanowire_mesh

TAG_MAP = {1: "free_space", 2: "scatterer"}

SINGLE_TRI_MSH = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
3
1 0 0 0
2 1 0 0
3 0 1 0
$EndNodes
$Elements
1
1 2 2 1 1 1 2 3
$EndElements
"""


def two_triangle_mesh():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2], [0, 2, 3]])
    return make_mesh(nodes, tris, np.array([FREE_SPACE, FREE_SPACE]))


def test_load_single_triangle(tmp_path):
    path = tmp_path / "one.msh"
    path.write_text(SINGLE_TRI_MSH)
    mesh = load_gmsh(path, TAG_MAP)
    assert mesh.n_nodes == 3
    assert mesh.n_elements == 1
    assert mesh.physical_tags[0] == FREE_SPACE
    assert mesh.areas()[0] == pytest.approx(0.5)


def test_load_reorients_clockwise_triangle(tmp_path):
    text = SINGLE_TRI_MSH.replace("1 2 2 1 1 1 2 3", "1 2 2 1 1 1 3 2")
    path = tmp_path / "cw.msh"
    path.write_text(text)
    mesh = load_gmsh(path, TAG_MAP)
    assert mesh.areas()[0] > 0.0


def test_load_rejects_bad_tag_map(tmp_path):
    path = tmp_path / "one.msh"
    path.write_text(SINGLE_TRI_MSH)
    with pytest.raises(MeshError):
        load_gmsh(path, {1: "metal"})


def test_gmsh_round_trip(tmp_path):
    mesh = nanowire_mesh(2e-9, 20e-9, 24, 1.4)
    path = tmp_path / "wire.msh"
    save_gmsh(path, mesh)
    back = load_gmsh(path, TAG_MAP)
    assert back.n_elements == mesh.n_elements
    assert np.allclose(back.nodes, mesh.nodes)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.array_equal(back.physical_tags, mesh.physical_tags)


def test_duplicate_triangles_rejected():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2], [0, 1, 2]])
    with pytest.raises(MeshError):
        make_mesh(nodes, tris, np.array([FREE_SPACE, FREE_SPACE]))


def test_two_triangle_skeleton():
    sk = build_skeleton(two_triangle_mesh())
    assert sk.n_edges == 5
    interior = np.flatnonzero(sk.edge_elems[:, 1] >= 0)
    assert len(interior) == 1
    # the shared edge is the diagonal 0-2
    assert tuple(sk.edges[interior[0]]) == (0, 2)


def test_interior_normals_opposite():
    mesh = two_triangle_mesh()
    sk = build_skeleton(mesh)
    for eid in range(sk.n_edges):
        if sk.edge_elems[eid, 1] < 0:
            continue
        n0 = outward_normal(mesh, sk.edge_elems[eid, 0], sk.edge_local[eid, 0])
        n1 = outward_normal(mesh, sk.edge_elems[eid, 1], sk.edge_local[eid, 1])
        assert np.allclose(n0 + n1, 0.0, atol=1e-15)


def test_non_manifold_rejected():
    # three triangles sharing the edge 0-1
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, -1.0],
                      [0.5, 2.0]])
    tris = np.array([[0, 1, 2], [0, 3, 1], [0, 1, 4]])
    with pytest.raises(MeshError):
        m = make_mesh(nodes, tris, np.zeros(3, dtype=int))
        build_skeleton(m)


def test_edge_classification_partition():
    mesh = nanowire_mesh(2e-9, 20e-9, 24, 1.4)
    sk = build_skeleton(mesh)
    counts = sum(int(np.sum(sk.edge_class == c)) for c in EdgeClass)
    assert counts == sk.n_edges
    # Euler-style edge-side count: every triangle has 3 sides
    n_interior_sides = int(np.sum(sk.edge_elems[:, 1] >= 0))
    n_boundary = int(np.sum(sk.edge_elems[:, 1] < 0))
    assert 2 * n_interior_sides + n_boundary == 3 * mesh.n_elements


def test_scatterer_edge_set():
    mesh = nanowire_mesh(2e-9, 20e-9, 24, 1.4)
    sk = build_skeleton(mesh)
    fhi = set(sk.scatterer_edges().tolist())
    expected = set()
    for el in np.flatnonzero(mesh.physical_tags == SCATTERER):
        expected.update(sk.elem_edges[el].tolist())
    assert fhi == expected


def test_areas_sum_to_domain_area():
    mesh = two_triangle_mesh()
    assert mesh.areas().sum() == pytest.approx(1.0, rel=1e-12)


def test_benchmark_wire_mesh_statistics():
    # production-scale wire mesh: ~9k elements with the wire surface and
    # the interior edge counts consistent with the skeleton partition
    mesh = nanowire_mesh(2e-9, 100e-9, 90, 1.25)
    sk = build_skeleton(mesh)
    assert 8000 <= mesh.n_elements <= 11000
    n_surface = int(np.sum(sk.edge_class == EdgeClass.SCATTERER_SURFACE))
    assert n_surface == 90
    assert len(sk.scatterer_edges()) > n_surface


def test_mesh_report_contents():
    mesh = nanowire_mesh(2e-9, 20e-9, 24, 1.4)
    sk = build_skeleton(mesh)
    report = mesh_report(mesh, sk)
    assert f"elements: {mesh.n_elements}" in report
    assert f"edges: {sk.n_edges}" in report
    assert "edges_scatterer_surface: 24" in report


def test_curved_map_quarter_circle():
    nodes = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [1.2, 1.2]])
    tris = np.array([[0, 1, 2], [0, 3, 1]])
    tags = np.array([SCATTERER, FREE_SPACE])
    mesh = make_mesh(nodes, tris, tags)
    sk = build_skeleton(mesh)
    maps = curved_boundary_map(mesh, sk, [(0.0, 0.0, 1.0)])
    assert len(maps) == 1
    (cmap,) = maps.values()
    mid = cmap.control[2]
    expected = np.array([np.cos(np.pi / 4), np.sin(np.pi / 4)])
    assert np.allclose(mid, expected, atol=1e-12)
    assert np.hypot(*mid) == pytest.approx(1.0, rel=1e-12)


def test_curved_map_midpoints_on_circle():
    r = 2e-9
    mesh = nanowire_mesh(r, 20e-9, 24, 1.4)
    sk = build_skeleton(mesh)
    maps = curved_boundary_map(mesh, sk, [(0.0, 0.0, r)])
    assert len(maps) == 24
    for cmap in maps.values():
        mid = cmap.control[2]
        assert np.hypot(*mid) == pytest.approx(r, rel=1e-12)


def test_curved_map_rejects_wrong_circle():
    mesh = nanowire_mesh(2e-9, 20e-9, 24, 1.4)
    sk = build_skeleton(mesh)
    with pytest.raises(MeshError):
        curved_boundary_map(mesh, sk, [(0.0, 0.0, 3e-9)])
