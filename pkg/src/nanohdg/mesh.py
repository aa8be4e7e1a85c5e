"""Triangle meshes, the edge skeleton and curved-boundary maps.

Meshes are ingested from Gmsh MSH 2.2 ASCII files (or built in memory by
:mod:`nanohdg.meshgen`).  Each triangle carries a domain tag: free space
or scatterer.  The skeleton enumerates all edges once, with canonical
orientation (lower node index first), per-side adjacency and an edge
class used to place hybrid unknowns and boundary conditions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

FREE_SPACE = 0
SCATTERER = 1

_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


class EdgeClass(IntEnum):
    INTERIOR = 0             # both sides free space
    ABSORBING_BOUNDARY = 1   # outer boundary, free-space side
    SCATTERER_INTERIOR = 2   # both sides scatterer
    SCATTERER_SURFACE = 3    # scatterer interface (or boundary of a scatterer element)


class MeshError(ValueError):
    pass


@dataclass
class Mesh:
    """Nodes, counterclockwise triangles and per-triangle domain tags."""

    nodes: np.ndarray          # (N, 2) float, meters
    triangles: np.ndarray      # (M, 3) int
    physical_tags: np.ndarray  # (M,) int, FREE_SPACE or SCATTERER

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.physical_tags = np.ascontiguousarray(self.physical_tags, dtype=np.int64)
        n = len(self.nodes)
        if self.triangles.min(initial=0) < 0 or self.triangles.max(initial=-1) >= n:
            raise MeshError("triangle node index out of range")
        if len(self.physical_tags) != len(self.triangles):
            raise MeshError("one physical tag per triangle required")
        areas = signed_areas(self.nodes, self.triangles)
        if np.any(areas <= 0.0):
            bad = int(np.argmax(areas <= 0.0))
            raise MeshError(f"triangle {bad} has nonpositive signed area {areas[bad]:g}")
        key = np.sort(self.triangles, axis=1)
        if len(np.unique(key, axis=0)) != len(key):
            raise MeshError("duplicate triangles")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        return signed_areas(self.nodes, self.triangles)


def signed_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = nodes[triangles[:, 0]]
    b = nodes[triangles[:, 1]]
    c = nodes[triangles[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def make_mesh(nodes, triangles, physical_tags) -> Mesh:
    """Build a Mesh, reorienting clockwise triangles counterclockwise."""
    nodes = np.asarray(nodes, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64).copy()
    tags = np.asarray(physical_tags, dtype=np.int64)
    flip = signed_areas(nodes, triangles) < 0.0
    triangles[flip] = triangles[flip][:, ::-1]
    return Mesh(nodes, triangles, tags)


# ---------------------------------------------------------------------------
# Gmsh MSH 2.2 ASCII


def load_gmsh(path, tag_map: dict[int, str]) -> Mesh:
    """Read a Gmsh MSH 2.2 ASCII file with 2D triangle elements.

    Parameters
    ----------
    path : str or Path
        Mesh file.
    tag_map : dict
        Maps Gmsh physical-group tags to ``"free_space"`` or
        ``"scatterer"``.  Line and point elements are skipped.
    """
    domain_of = {}
    for tag, name in tag_map.items():
        if name == "free_space":
            domain_of[int(tag)] = FREE_SPACE
        elif name == "scatterer":
            domain_of[int(tag)] = SCATTERER
        else:
            raise MeshError(f"tag_map value must be free_space/scatterer, got {name!r}")

    with open(path, "r") as fh:
        lines = fh.read().splitlines()

    def fail(i, msg):
        raise MeshError(f"{path}:{i + 1}: {msg}")

    nodes = {}
    tris, tags = [], []
    i = 0
    saw_nodes = saw_elements = False
    while i < len(lines):
        line = lines[i].strip()
        if line == "$MeshFormat":
            parts = lines[i + 1].split()
            if not parts or not parts[0].startswith("2.2"):
                fail(i + 1, f"unsupported MSH version {parts[:1]}")
            i += 3
        elif line == "$Nodes":
            saw_nodes = True
            try:
                count = int(lines[i + 1])
            except ValueError:
                fail(i + 1, "bad node count")
            for j in range(count):
                parts = lines[i + 2 + j].split()
                if len(parts) < 4:
                    fail(i + 2 + j, "malformed node line")
                nodes[int(parts[0])] = (float(parts[1]), float(parts[2]))
            i += count + 3
        elif line == "$Elements":
            saw_elements = True
            try:
                count = int(lines[i + 1])
            except ValueError:
                fail(i + 1, "bad element count")
            for j in range(count):
                ln = i + 2 + j
                parts = lines[ln].split()
                if len(parts) < 3:
                    fail(ln, "malformed element line")
                etype = int(parts[1])
                ntags = int(parts[2])
                if etype in (1, 15):  # lines / points carry no area information
                    continue
                if etype != 2:
                    fail(ln, f"unsupported element type {etype} (only 3-node triangles)")
                if ntags < 1:
                    fail(ln, "triangle without a physical tag")
                phys = int(parts[3])
                if phys not in domain_of:
                    fail(ln, f"physical tag {phys} missing from tag table")
                conn = [int(v) for v in parts[3 + ntags:3 + ntags + 3]]
                if len(conn) != 3:
                    fail(ln, "triangle with wrong node count")
                tris.append(conn)
                tags.append(domain_of[phys])
            i += count + 3
        else:
            i += 1
    if not saw_nodes or not saw_elements:
        raise MeshError(f"{path}: missing $Nodes or $Elements section")
    if not tris:
        raise MeshError(f"{path}: no triangles found")

    ids = sorted(nodes)
    remap = {nid: k for k, nid in enumerate(ids)}
    coords = np.array([nodes[nid] for nid in ids], dtype=float)
    conn = np.array([[remap[v] for v in t] for t in tris], dtype=np.int64)
    return make_mesh(coords, conn, np.array(tags))


def save_gmsh(path, mesh: Mesh, free_tag: int = 1, scatterer_tag: int = 2) -> None:
    """Write a mesh as Gmsh MSH 2.2 ASCII (17 significant digits)."""
    with open(path, "w") as fh:
        fh.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        fh.write(f"$Nodes\n{mesh.n_nodes}\n")
        for k, (x, y) in enumerate(mesh.nodes, start=1):
            fh.write(f"{k} {x:.17g} {y:.17g} 0\n")
        fh.write("$EndNodes\n")
        fh.write(f"$Elements\n{mesh.n_elements}\n")
        for k, (tri, tag) in enumerate(zip(mesh.triangles, mesh.physical_tags), start=1):
            phys = scatterer_tag if tag == SCATTERER else free_tag
            fh.write(f"{k} 2 2 {phys} {phys} {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}\n")
        fh.write("$EndElements\n")


DEFAULT_TAG_MAP = {1: "free_space", 2: "scatterer"}


# ---------------------------------------------------------------------------
# skeleton


@dataclass
class Skeleton:
    """Oriented edge set of a mesh with adjacency and classification.

    For each edge the two incident element slots store (element id,
    local edge index); slot 1 is -1 on boundary edges.  ``flip`` is True
    where the element's counterclockwise traversal of the edge runs
    against the canonical low-to-high node orientation.
    """

    edges: np.ndarray        # (E, 2) canonical node pairs, lo < hi
    edge_elems: np.ndarray   # (E, 2) element ids, -1 pad
    edge_local: np.ndarray   # (E, 2) local edge index within element
    edge_flip: np.ndarray    # (E, 2) bool
    edge_class: np.ndarray   # (E,) EdgeClass values
    elem_edges: np.ndarray   # (M, 3) edge id per local edge
    lengths: np.ndarray = field(default=None)  # straight-chord lengths

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def scatterer_edges(self) -> np.ndarray:
        """Edge ids of F_h^I (edges of scatterer elements), sorted."""
        mask = np.isin(self.edge_class,
                       (EdgeClass.SCATTERER_INTERIOR, EdgeClass.SCATTERER_SURFACE))
        return np.flatnonzero(mask)

    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_elems[:, 1] < 0)


def build_skeleton(mesh: Mesh) -> Skeleton:
    """Enumerate edges, adjacency, outward-normal sides and classes."""
    tris = mesh.triangles
    m = len(tris)
    raw = np.empty((3 * m, 2), dtype=np.int64)
    for le, (a, b) in enumerate(_LOCAL_EDGES):
        raw[le::3, 0] = tris[:, a]
        raw[le::3, 1] = tris[:, b]
    lo = np.minimum(raw[:, 0], raw[:, 1])
    hi = np.maximum(raw[:, 0], raw[:, 1])
    canon = np.column_stack([lo, hi])
    edges, inverse, counts = np.unique(canon, axis=0, return_inverse=True,
                                       return_counts=True)
    if np.any(counts > 2):
        bad = edges[np.argmax(counts > 2)]
        raise MeshError(f"non-manifold edge {tuple(bad)} with >2 incident triangles")

    ne = len(edges)
    edge_elems = np.full((ne, 2), -1, dtype=np.int64)
    edge_local = np.full((ne, 2), -1, dtype=np.int64)
    edge_flip = np.zeros((ne, 2), dtype=bool)
    for side in range(3 * m):
        eid = inverse[side]
        elem, le = side // 3, side % 3
        slot = 0 if edge_elems[eid, 0] < 0 else 1
        edge_elems[eid, slot] = elem
        edge_local[eid, slot] = le
        edge_flip[eid, slot] = raw[side, 0] != edges[eid, 0]

    elem_edges = inverse.reshape(m, 3)

    tags = mesh.physical_tags
    cls = np.empty(ne, dtype=np.int64)
    for eid in range(ne):
        e0, e1 = edge_elems[eid]
        if e1 < 0:
            cls[eid] = (EdgeClass.SCATTERER_SURFACE if tags[e0] == SCATTERER
                        else EdgeClass.ABSORBING_BOUNDARY)
        else:
            s0, s1 = tags[e0] == SCATTERER, tags[e1] == SCATTERER
            if s0 and s1:
                cls[eid] = EdgeClass.SCATTERER_INTERIOR
            elif s0 or s1:
                cls[eid] = EdgeClass.SCATTERER_SURFACE
            else:
                cls[eid] = EdgeClass.INTERIOR

    vec = mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]]
    return Skeleton(edges, edge_elems, edge_local, edge_flip, cls, elem_edges,
                    lengths=np.hypot(vec[:, 0], vec[:, 1]))


def outward_normal(mesh: Mesh, elem: int, local_edge: int) -> np.ndarray:
    """Unit outward normal of a straight local edge of a CCW triangle."""
    a, b = _LOCAL_EDGES[local_edge]
    p = mesh.nodes[mesh.triangles[elem, a]]
    q = mesh.nodes[mesh.triangles[elem, b]]
    t = q - p
    n = np.array([t[1], -t[0]])
    return n / np.linalg.norm(n)


# ---------------------------------------------------------------------------
# curved scatterer-surface edges


@dataclass
class CurvedEdgeMap:
    """Quadratic edge geometry: endpoints plus on-circle midpoint.

    Control points are ordered along the canonical edge orientation;
    the map parameter s runs from the low-index node (s=0) to the
    high-index node (s=1).
    """

    edge: int
    control: np.ndarray  # (3, 2): endpoint, endpoint, midpoint


def curved_boundary_map(mesh: Mesh, skeleton: Skeleton,
                        circles: list[tuple[float, float, float]],
                        tol: float = 1e-8) -> dict[int, CurvedEdgeMap]:
    """Attach quadratic maps to scatterer-surface edges lying on circles.

    ``circles`` lists the analytic boundaries as (cx, cy, radius).  Each
    two-sided SCATTERER_SURFACE edge must have both endpoints on one of
    the circles (relative tolerance ``tol``); its straight midpoint is
    projected radially onto that circle.
    """
    out = {}
    for eid in np.flatnonzero(skeleton.edge_class == EdgeClass.SCATTERER_SURFACE):
        if skeleton.edge_elems[eid, 1] < 0:
            continue  # boundary hard wall (cavity); geometry stays straight
        a, b = skeleton.edges[eid]
        pa, pb = mesh.nodes[a], mesh.nodes[b]
        if skeleton.lengths[eid] <= 0.0:
            raise MeshError(f"degenerate zero-length edge {eid}")
        hit = None
        for cx, cy, r in circles:
            c = np.array([cx, cy])
            da = abs(np.linalg.norm(pa - c) - r)
            db = abs(np.linalg.norm(pb - c) - r)
            if da <= tol * r and db <= tol * r:
                hit = (c, r)
                break
        if hit is None:
            raise MeshError(f"surface edge {eid} endpoints not on any supplied circle")
        c, r = hit
        mid = 0.5 * (pa + pb)
        d = mid - c
        nd = np.linalg.norm(d)
        if nd == 0.0:
            raise MeshError(f"surface edge {eid} spans a diameter; cannot project midpoint")
        out[eid] = CurvedEdgeMap(eid, np.array([pa, pb, c + d * (r / nd)]))
    return out


def mesh_report(mesh: Mesh, skeleton: Skeleton) -> str:
    """Mesh statistics as structured text (stable key: value lines)."""
    counts = {c.name: int(np.sum(skeleton.edge_class == c)) for c in EdgeClass}
    lines = [
        f"nodes: {mesh.n_nodes}",
        f"elements: {mesh.n_elements}",
        f"scatterer_elements: {int(np.sum(mesh.physical_tags == SCATTERER))}",
        f"edges: {skeleton.n_edges}",
    ]
    lines += [f"edges_{name.lower()}: {n}" for name, n in counts.items()]
    lines.append(f"edges_nanostructure: {len(skeleton.scatterer_edges())}")
    return "\n".join(lines)
