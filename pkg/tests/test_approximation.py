import math

import numpy as np
import pytest

from nanohdg.approximation import (edge_nodes, element_geometry, make_basis,
                                   make_quadrature, quadratic_edge_points,
                                   triangle_nodes)

RNG = np.random.default_rng(7)


def random_ref_points(n):
    """Uniform points inside the reference triangle."""
    a = RNG.random((n, 2))
    flip = a.sum(axis=1) > 1.0
    a[flip] = 1.0 - a[flip]
    return a


def tri_monomial_integral(a, b):
    """Exact integral of x^a y^b over the reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_basis_dimensions(p):
    basis = make_basis(p)
    assert basis.n_tri == (p + 1) * (p + 2) // 2
    assert basis.n_edge == p + 1


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_partition_of_unity(p):
    basis = make_basis(p)
    pts = random_ref_points(40)
    vals = basis.tri_values(pts)
    assert np.allclose(vals.sum(axis=1), 1.0, atol=1e-12)
    grads = basis.tri_gradients(pts)
    assert np.allclose(grads.sum(axis=1), 0.0, atol=1e-10)
    s = RNG.random(17)
    assert np.allclose(basis.edge_values(s).sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_nodal_property(p):
    basis = make_basis(p)
    vals = basis.tri_values(triangle_nodes(p))
    assert np.allclose(vals, np.eye(basis.n_tri), atol=1e-10)
    evals = basis.edge_values(edge_nodes(p))
    assert np.allclose(evals, np.eye(p + 1), atol=1e-12)


def test_p1_centroid():
    basis = make_basis(1)
    vals = basis.tri_values(np.array([[1.0 / 3.0, 1.0 / 3.0]]))
    assert np.allclose(vals, 1.0 / 3.0, atol=1e-14)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_interpolation_exactness(p):
    # interpolating a polynomial of total degree <= p at the basis nodes
    # must reproduce it at arbitrary points
    basis = make_basis(p)
    coef = RNG.standard_normal((p + 1, p + 1))
    for i in range(p + 1):
        for j in range(p + 1):
            if i + j > p:
                coef[i, j] = 0.0

    def poly(pts):
        return sum(coef[i, j] * pts[:, 0] ** i * pts[:, 1] ** j
                   for i in range(p + 1) for j in range(p + 1))

    nodal = poly(triangle_nodes(p))
    pts = random_ref_points(30)
    assert np.allclose(basis.tri_values(pts) @ nodal, poly(pts), atol=1e-11)


def test_quadrature_weight_sums():
    tri = make_quadrature(6, "triangle")
    assert np.all(tri.weights > 0.0)
    assert tri.weights.sum() == pytest.approx(0.5, rel=1e-14)
    edge = make_quadrature(6, "edge")
    assert np.all(edge.weights > 0.0)
    assert edge.weights.sum() == pytest.approx(1.0, rel=1e-14)


def test_edge_order_one_is_midpoint():
    rule = make_quadrature(1, "edge")
    assert len(rule.points) == 1
    assert rule.points[0] == pytest.approx(0.5)
    assert rule.weights[0] == pytest.approx(1.0)


@pytest.mark.parametrize("order", [2, 4, 6, 8, 10])
def test_triangle_monomial_exactness(order):
    rule = make_quadrature(order, "triangle")
    x, y = rule.points[:, 0], rule.points[:, 1]
    for a in range(order + 1):
        for b in range(order + 1 - a):
            got = float(np.sum(rule.weights * x**a * y**b))
            exact = tri_monomial_integral(a, b)
            assert got == pytest.approx(exact, rel=1e-13), (a, b)


def test_x2y3_closed_form():
    rule = make_quadrature(6, "triangle")
    got = float(np.sum(rule.weights * rule.points[:, 0] ** 2
                       * rule.points[:, 1] ** 3))
    assert got == pytest.approx(tri_monomial_integral(2, 3), rel=1e-13)
    assert got == pytest.approx(2 * 6 / math.factorial(7), rel=1e-13)


@pytest.mark.parametrize("order", [3, 5, 7, 9])
def test_edge_monomial_exactness(order):
    rule = make_quadrature(order, "edge")
    for k in range(order + 1):
        got = float(np.sum(rule.weights * rule.points**k))
        assert got == pytest.approx(1.0 / (k + 1), rel=1e-13)


def test_bad_quadrature_arguments():
    with pytest.raises(ValueError):
        make_quadrature(0, "triangle")
    with pytest.raises(ValueError):
        make_quadrature(2, "tetrahedron")


def nodes6_from_vertices(verts):
    verts = np.asarray(verts, dtype=float)
    mids = 0.5 * (verts + verts[[1, 2, 0]])
    return np.vstack([verts, mids])


def test_identity_affine_map():
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    rule = make_quadrature(4, "triangle")
    geo = element_geometry(0, nodes6_from_vertices(verts), rule.points, False)
    assert geo.kind == "affine"
    assert np.allclose(geo.det, 1.0)
    assert np.allclose(geo.jac, np.eye(2))
    assert np.allclose(geo.phys_points, rule.points)


def test_scaled_affine_map():
    verts = [(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]
    rule = make_quadrature(4, "triangle")
    geo = element_geometry(0, nodes6_from_vertices(verts), rule.points, False)
    assert np.allclose(geo.det, 4.0)


def test_inverted_element_rejected():
    verts = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]  # clockwise
    rule = make_quadrature(2, "triangle")
    with pytest.raises(ValueError):
        element_geometry(0, nodes6_from_vertices(verts), rule.points, False)


def test_change_of_variables_area():
    verts = np.array([(0.3, -0.2), (1.7, 0.4), (0.6, 2.1)])
    rule = make_quadrature(4, "triangle")
    geo = element_geometry(0, nodes6_from_vertices(verts), rule.points, False)
    area = float(np.sum(rule.weights * geo.det))
    d1, d2 = verts[1] - verts[0], verts[2] - verts[0]
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    assert area == pytest.approx(0.5 * cross, rel=1e-14)


def test_quadratic_edge_midpoint_on_circle():
    r = 2e-9
    th = np.array([0.0, np.pi / 2])
    p0, p1 = np.column_stack([r * np.cos(th), r * np.sin(th)])
    mid_angle = np.pi / 4
    pm = r * np.array([np.cos(mid_angle), np.sin(mid_angle)])
    pts, _ = quadratic_edge_points(np.array([p0, p1, pm]), np.array([0.5]))
    assert np.allclose(pts[0], pm, atol=1e-24)
    assert np.hypot(*pts[0]) == pytest.approx(r, rel=1e-12)


def test_curved_edge_arc_length():
    # quadratic approximation of a short circular arc reproduces the
    # analytic arc length r * dtheta far better than the straight chord
    r = 2e-9
    dth = 2.0 * np.pi / 90
    th = np.array([0.0, dth])
    p0, p1 = np.column_stack([r * np.cos(th), r * np.sin(th)])
    pm = r * np.array([np.cos(dth / 2), np.sin(dth / 2)])
    rule = make_quadrature(12, "edge")
    _, tan = quadratic_edge_points(np.array([p0, p1, pm]), rule.points)
    length = float(np.sum(rule.weights * np.linalg.norm(tan, axis=1)))
    assert length == pytest.approx(r * dth, rel=1e-10)
    chord = float(np.linalg.norm(p1 - p0))
    assert length > chord


def test_curved_element_geometry_positive():
    # one triangle with its outer edge bulged onto a circle
    r = 1.0
    dth = 0.3
    v = np.array([[r, 0.0],
                  [r * np.cos(dth), r * np.sin(dth)],
                  [0.0, 0.0]])
    nodes6 = nodes6_from_vertices(v)
    mid = 0.5 * (v[0] + v[1])
    nodes6[3] = mid / np.linalg.norm(mid) * r
    rule = make_quadrature(6, "triangle")
    geo = element_geometry(0, nodes6, rule.points, True)
    assert geo.kind == "curved"
    assert np.all(geo.det > 0.0)
    # area of the curved element approaches the circular-sector area
    area = float(np.sum(rule.weights * geo.det))
    sector = 0.5 * r * r * dth
    assert area == pytest.approx(sector, rel=1e-4)
