"""Deterministic generators for the benchmark meshes.

The solver itself only consumes Gmsh MSH 2.2 files or in-memory meshes;
these helpers build the geometries used by the paper-style experiments:

* ``square_mesh``      -- structured right-triangle grid (cavity test),
* ``disc_mesh``        -- homogeneous free-space disc (null test),
* ``nanowire_mesh``    -- small wire centred in a large absorbing circle,
  with geometric radial grading,
* ``dimer_mesh``       -- two equal wires with a nanometre gap, meshed by
  layered offsets of the wire surfaces.

All circular interfaces are sampled exactly on the analytic circles so
that curved-edge maps can be attached afterwards.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay

from .mesh import FREE_SPACE, SCATTERER, Mesh, MeshError, make_mesh


def square_mesh(length: float, n: int, tag: int = SCATTERER) -> Mesh:
    """Structured n-by-n grid on [0, L]^2, each cell split into 2 triangles."""
    xs = np.linspace(0.0, length, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    tris = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b = a + 1
            c = a + n + 1
            d = c + 1
            tris.append((a, b, d))
            tris.append((a, d, c))
    tris = np.array(tris, dtype=np.int64)
    return make_mesh(nodes, tris, np.full(len(tris), tag))


def _ring(center, radius: float, count: int, offset: float) -> np.ndarray:
    ang = offset + 2.0 * np.pi * np.arange(count) / count
    return np.column_stack([center[0] + radius * np.cos(ang),
                            center[1] + radius * np.sin(ang)])


def _disc_fill(center, radius: float, spacing: float, start_offset: float = 0.0):
    """Concentric staggered rings filling a disc, surface ring excluded."""
    pts = [np.array([center], dtype=float)]
    k = 1
    r = spacing
    while r < radius - 0.4 * spacing:
        n = max(6, int(round(2.0 * np.pi * r / spacing)))
        pts.append(_ring(center, r, n, start_offset + (k % 2) * np.pi / n))
        r += spacing
        k += 1
    return np.vstack(pts)


def _delaunay_mesh(points: np.ndarray, classify) -> Mesh:
    """Triangulate a point cloud; ``classify`` maps centroids to tags."""
    tri = Delaunay(points)
    simplices = tri.simplices
    centroids = points[simplices].mean(axis=1)
    tags = classify(centroids)
    # drop exactly degenerate slivers (collinear ring points)
    a, b, c = (points[simplices[:, k]] for k in range(3))
    area2 = np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                   - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    scale = np.maximum(np.linalg.norm(b - a, axis=1), np.linalg.norm(c - a, axis=1))
    keep = area2 > 1e-12 * scale**2
    return make_mesh(points, simplices[keep], tags[keep])


def _validate_interfaces(mesh: Mesh, circles) -> None:
    """No triangle may straddle a material circle."""
    for cx, cy, r in circles:
        d = np.hypot(mesh.nodes[:, 0] - cx, mesh.nodes[:, 1] - cy) - r
        tol = 1e-9 * r
        vin = d[mesh.triangles] < -tol
        vout = d[mesh.triangles] > tol
        bad = np.any(vin, axis=1) & np.any(vout, axis=1)
        if np.any(bad):
            raise MeshError(f"{int(bad.sum())} triangles straddle circle r={r:g}")


def disc_mesh(radius: float, spacing: float) -> Mesh:
    """Roughly uniform free-space disc (polygonal outer boundary)."""
    pts = [_disc_fill((0.0, 0.0), radius, spacing)]
    n = max(6, int(round(2.0 * np.pi * radius / spacing)))
    pts.append(_ring((0.0, 0.0), radius, n, 0.0))
    points = np.vstack(pts)
    return _delaunay_mesh(points, lambda c: np.full(len(c), FREE_SPACE))


def nanowire_mesh(radius: float, outer_radius: float, surface_divisions: int = 80,
                  growth: float = 1.3) -> Mesh:
    """Single wire of given radius centred in an absorbing circle.

    The wire surface is divided uniformly; inside the wire the spacing is
    kept at the surface value, outside it grows geometrically with the
    local circumference so that triangles stay roughly isotropic.
    """
    if outer_radius <= radius:
        raise ValueError("outer_radius must exceed the wire radius")
    ns = int(surface_divisions)
    spacing = 2.0 * np.pi * radius / ns
    pts = [_disc_fill((0.0, 0.0), radius, spacing),
           _ring((0.0, 0.0), radius, ns, 0.0)]
    r = radius
    k = 1
    while True:
        step = growth * 2.0 * np.pi * r / ns
        r_next = r + step
        if r_next >= outer_radius - 0.5 * step:
            break
        r = r_next
        pts.append(_ring((0.0, 0.0), r, ns, (k % 2) * np.pi / ns))
        k += 1
    pts.append(_ring((0.0, 0.0), outer_radius, ns, (k % 2) * np.pi / ns))
    points = np.vstack(pts)

    def classify(c):
        inside = np.hypot(c[:, 0], c[:, 1]) < radius
        return np.where(inside, SCATTERER, FREE_SPACE)

    mesh = _delaunay_mesh(points, classify)
    _validate_interfaces(mesh, [(0.0, 0.0, radius)])
    return mesh


def _wire_interior(center, radius: float, surface_count: int, growth: float):
    """Rings inside one wire, graded coarse toward the centre."""
    pts = [_ring(center, radius, surface_count, 0.0)]
    spacing = 2.0 * np.pi * radius / surface_count
    r = radius
    k = 1
    while True:
        step = spacing * growth**k
        r_next = r - step
        if r_next < 0.6 * step:
            pts.append(np.array([center], dtype=float))
            break
        r = r_next
        n = max(6, int(round(2.0 * np.pi * r / step)))
        pts.append(_ring(center, r, n, (k % 2) * np.pi / n))
        k += 1
    return np.vstack(pts)


def dimer_mesh(radius: float, gap: float, outer_distance: float,
               surface_divisions: int = 256, growth: float = 1.25) -> Mesh:
    """Two equal wires along x with the given surface-to-surface gap.

    Free space is meshed by staggered offset layers of the two wire
    surfaces, growing geometrically out to ``outer_distance`` from the
    surfaces; the domain boundary is the convex hull of the outermost
    layer (a smooth oval enclosing the dimer).
    """
    cxs = (-(radius + gap / 2.0), radius + gap / 2.0)
    centers = [np.array([cx, 0.0]) for cx in cxs]
    ns = int(surface_divisions)
    spacing = 2.0 * np.pi * radius / ns

    pts = [_wire_interior(c, radius, ns, growth) for c in centers]

    d = 0.0
    k = 1
    while d < outer_distance:
        step = min(spacing * growth**k, 0.12 * (radius + d))
        d = min(d + step, outer_distance)
        rr = radius + d
        n = max(16, int(round(2.0 * np.pi * rr / step)))
        off = (k % 2) * np.pi / n
        for i, c in enumerate(centers):
            ring = _ring(c, rr, n, off)
            other = centers[1 - i]
            dist_other = np.hypot(ring[:, 0] - other[0], ring[:, 1] - other[1])
            keep = dist_other >= rr - 0.35 * step if i == 0 else dist_other > rr
            pts.append(ring[keep])
        k += 1
    points = np.vstack(pts)

    def classify(c):
        tags = np.full(len(c), FREE_SPACE)
        for cc in centers:
            tags[np.hypot(c[:, 0] - cc[0], c[:, 1] - cc[1]) < radius] = SCATTERER
        return tags

    mesh = _delaunay_mesh(points, classify)
    _validate_interfaces(mesh, [(c[0], c[1], radius) for c in centers])
    return mesh
