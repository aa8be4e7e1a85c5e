"""Reference-element bases, quadrature rules and geometric mappings.

Nodal Lagrange bases on equispaced points of the unit reference triangle
{x, y >= 0, x + y <= 1} and the unit reference edge [0, 1], for degrees
1 <= p <= 4.  Quadrature on the triangle is a collapsed (Duffy)
tensor-product Gauss rule; on the edge it is plain Gauss-Legendre.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DEGREE = 4


# ---------------------------------------------------------------------------
# nodal bases


def triangle_nodes(p: int) -> np.ndarray:
    """Equispaced nodes (i/p, j/p), i + j <= p, ordered row-by-row in j."""
    pts = [(i / p, j / p) for j in range(p + 1) for i in range(p + 1 - j)]
    return np.array(pts, dtype=float)


def edge_nodes(p: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, p + 1)


def _tri_exponents(p: int):
    return [(a, b) for b in range(p + 1) for a in range(p + 1 - b)]


@dataclass(frozen=True)
class ReferenceBasis:
    """Nodal basis of degree p on the reference triangle and edge.

    ``tri_coeffs``/``edge_coeffs`` hold monomial coefficients of the
    Lagrange functions (one column per basis function).
    """

    degree: int
    tri_nodes: np.ndarray
    edge_nodes: np.ndarray
    tri_coeffs: np.ndarray
    edge_coeffs: np.ndarray

    @property
    def n_tri(self) -> int:
        return (self.degree + 1) * (self.degree + 2) // 2

    @property
    def n_edge(self) -> int:
        return self.degree + 1

    def tri_values(self, points: np.ndarray) -> np.ndarray:
        """Basis values at reference points, shape (npts, n_tri)."""
        V = _tri_monomials(self.degree, np.asarray(points, dtype=float))
        return V @ self.tri_coeffs

    def tri_gradients(self, points: np.ndarray) -> np.ndarray:
        """Reference gradients, shape (npts, n_tri, 2)."""
        Gx, Gy = _tri_monomial_gradients(self.degree, np.asarray(points, dtype=float))
        return np.stack([Gx @ self.tri_coeffs, Gy @ self.tri_coeffs], axis=-1)

    def edge_values(self, s: np.ndarray) -> np.ndarray:
        """Edge-basis values at parameters s in [0, 1], shape (npts, p+1)."""
        s = np.asarray(s, dtype=float)
        V = np.vander(s, self.degree + 1, increasing=True)
        return V @ self.edge_coeffs


def _tri_monomials(p: int, pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    return np.column_stack([x**a * y**b for a, b in _tri_exponents(p)])


def _tri_monomial_gradients(p: int, pts: np.ndarray):
    x, y = pts[:, 0], pts[:, 1]
    gx, gy = [], []
    for a, b in _tri_exponents(p):
        gx.append(a * x ** max(a - 1, 0) * y**b if a else np.zeros_like(x))
        gy.append(b * x**a * y ** max(b - 1, 0) if b else np.zeros_like(x))
    return np.column_stack(gx), np.column_stack(gy)


@lru_cache(maxsize=None)
def make_basis(p: int) -> ReferenceBasis:
    """Build the degree-p nodal basis (cached)."""
    if not 1 <= p <= MAX_DEGREE:
        raise ValueError(f"degree must be in [1, {MAX_DEGREE}], got {p}")
    tn = triangle_nodes(p)
    en = edge_nodes(p)
    Vt = _tri_monomials(p, tn)
    Ve = np.vander(en, p + 1, increasing=True)
    return ReferenceBasis(
        degree=p,
        tri_nodes=tn,
        edge_nodes=en,
        tri_coeffs=np.linalg.inv(Vt),
        edge_coeffs=np.linalg.inv(Ve),
    )


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Points and positive weights on the reference triangle or edge."""

    domain: str  # "triangle" | "edge"
    order: int
    points: np.ndarray   # (nq, 2) for triangle, (nq,) for edge
    weights: np.ndarray  # (nq,)


@lru_cache(maxsize=None)
def make_quadrature(order: int, domain: str = "triangle") -> QuadratureRule:
    """Rule exact for polynomials up to the requested total degree.

    The triangle rule is a Duffy-collapsed Gauss-Legendre tensor product,
    which keeps all weights positive at any order.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    if domain == "edge":
        n = (order + 2) // 2
        x, w = np.polynomial.legendre.leggauss(n)
        return QuadratureRule("edge", order, 0.5 * (x + 1.0), 0.5 * w)
    if domain != "triangle":
        raise ValueError(f"unknown quadrature domain {domain!r}")
    # Duffy map (u, v) -> (u, v*(1-u)) raises the u-degree by one.
    n = (order + 3) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    u, wu = 0.5 * (x + 1.0), 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    WU, WV = np.meshgrid(wu, wu, indexing="ij")
    pts = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    wts = (WU * WV * (1.0 - U)).ravel()
    return QuadratureRule("triangle", order, pts, wts)


# ---------------------------------------------------------------------------
# geometric mappings

# P2 triangle node order: 3 vertices, then midpoints of edges (0,1), (1,2), (2,0).
_P2_MIDPAIRS = ((0, 1), (1, 2), (2, 0))


def _p2_shape(pts: np.ndarray):
    """Quadratic shape functions and derivatives at reference points."""
    x, y = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - x - y, x, y
    one = np.ones_like(x)
    N = np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])
    dNdx = np.column_stack([
        1 - 4 * l0, 4 * l1 - 1, 0 * one,
        4 * (l0 - l1), 4 * l2, -4 * l2,
    ])
    dNdy = np.column_stack([
        1 - 4 * l0, 0 * one, 4 * l2 - 1,
        -4 * l1, 4 * l1, 4 * (l0 - l2),
    ])
    return N, dNdx, dNdy


@dataclass
class ElementGeometry:
    """Jacobian data of one element at a set of reference points."""

    element: int
    kind: str                 # "affine" | "curved"
    phys_points: np.ndarray   # (nq, 2)
    jac: np.ndarray           # (nq, 2, 2)
    det: np.ndarray           # (nq,)
    inv_jac: np.ndarray       # (nq, 2, 2)


def affine_map(vertices: np.ndarray):
    """Constant Jacobian of the affine map from the reference triangle."""
    J = np.column_stack([vertices[1] - vertices[0], vertices[2] - vertices[0]])
    return vertices[0], J


def element_geometry(element: int, nodes6: np.ndarray, ref_pts: np.ndarray,
                     curved: bool) -> ElementGeometry:
    """Evaluate the element map at ``ref_pts``.

    ``nodes6`` are the 3 vertices plus 3 edge midpoints (physical
    coordinates); for affine elements the midpoints are the straight-edge
    midpoints and the Jacobian is constant.
    """
    ref_pts = np.asarray(ref_pts, dtype=float)
    nq = len(ref_pts)
    if not curved:
        v0, J = affine_map(nodes6[:3])
        det = float(np.linalg.det(J))
        if det <= 0.0:
            raise ValueError(f"element {element}: nonpositive Jacobian {det}")
        phys = v0 + ref_pts @ J.T
        jac = np.broadcast_to(J, (nq, 2, 2)).copy()
        return ElementGeometry(element, "affine", phys, jac,
                               np.full(nq, det), np.broadcast_to(np.linalg.inv(J), (nq, 2, 2)).copy())
    N, dNdx, dNdy = _p2_shape(ref_pts)
    phys = N @ nodes6
    jac = np.empty((nq, 2, 2))
    jac[:, :, 0] = dNdx @ nodes6
    jac[:, :, 1] = dNdy @ nodes6
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    if np.any(det <= 0.0):
        raise ValueError(f"element {element}: tangled curved map (det <= 0)")
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1] / det
    inv[:, 1, 1] = jac[:, 0, 0] / det
    inv[:, 0, 1] = -jac[:, 0, 1] / det
    inv[:, 1, 0] = -jac[:, 1, 0] / det
    return ElementGeometry(element, "curved", phys, jac, det, inv)


def quadratic_edge_points(control: np.ndarray, s: np.ndarray):
    """Quadratic edge map through control points at s = 0, 1, 1/2.

    Returns physical points and tangent vectors d x / d s.
    """
    s = np.asarray(s, dtype=float)
    p0, p1, pm = control
    # Lagrange on {0, 1, 1/2}
    n0 = (1.0 - s) * (1.0 - 2.0 * s)
    n1 = s * (2.0 * s - 1.0)
    nm = 4.0 * s * (1.0 - s)
    d0 = 4.0 * s - 3.0
    d1 = 4.0 * s - 1.0
    dm = 4.0 - 8.0 * s
    pts = np.outer(n0, p0) + np.outer(n1, p1) + np.outer(nm, pm)
    tan = np.outer(d0, p0) + np.outer(d1, p1) + np.outer(dm, pm)
    return pts, tan
