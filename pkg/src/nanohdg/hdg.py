"""Hybridizable DG solver core: assembly, condensation, solves.

Unknowns per element are (Ex, Ey, H) everywhere plus (Jx, Jy, q) on
hydrodynamic scatterer elements; hybrid traces are lambda (trace of H,
one per mesh edge) and eta (trace of q, on every edge touching a
scatterer element).  The element-local problems are condensed onto the
traces, and only the trace system is solved globally.

Scaled fields are used throughout: H, J and q carry a factor Z0 so that
all unknowns share the magnitude of E.  Time convention exp(-i*omega*t).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sparselinalg
from .approximation import element_geometry, make_basis, make_quadrature, quadratic_edge_points
from .constants import C0, Z0
from .materials import FrequencyContext, MaterialSpec, make_frequency_context
from .mesh import SCATTERER, EdgeClass, Mesh, Skeleton

KIND_FREE = 0
KIND_DRUDE = 1
KIND_HYDRO = 2

_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


# ---------------------------------------------------------------------------
# sources


@dataclass(frozen=True)
class PlaneWave:
    """Unit-speed plane wave, H = amp*exp(i k d.r), E = amp*(-dy, dx)*exp(...).

    The pair satisfies the scaled free-space system ikE + curl H = 0,
    ikH - curl E = 0 for any unit direction d.
    """

    direction: tuple
    amplitude: complex = 1.0 + 0.0j

    boundary = "silver_muller"

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")

    def H(self, pts: np.ndarray, k: float) -> np.ndarray:
        d = np.asarray(self.direction)
        return self.amplitude * np.exp(1j * k * (pts[..., 0] * d[0] + pts[..., 1] * d[1]))

    def E(self, pts: np.ndarray, k: float) -> np.ndarray:
        d = np.asarray(self.direction)
        h = self.H(pts, k)
        return np.stack([-d[1] * h, d[0] * h], axis=-1)

    def g(self, pts: np.ndarray, normals: np.ndarray, k: float) -> np.ndarray:
        """Silver-Muller data g = n x E_inc - H_inc on the outer boundary."""
        d = np.asarray(self.direction)
        ndot = normals[..., 0] * d[0] + normals[..., 1] * d[1]
        return self.H(pts, k) * (ndot - 1.0)

    def volume_f(self, ctx: FrequencyContext, pts: np.ndarray):
        return None


@dataclass(frozen=True)
class ManufacturedSource:
    """Volume sources that make a known cavity field the exact solution.

    f1 enters the Ampere row and f3 the current row; the walls are PEC
    for the tangential electric field (no absorbing term).
    """

    exact: object  # CavityExact

    boundary = "pec"

    def g(self, pts, normals, k):
        return np.zeros(pts.shape[:-1], dtype=complex)

    def volume_f(self, ctx: FrequencyContext, pts: np.ndarray):
        J = self.exact.J(pts)
        E = self.exact.E(pts)
        f1 = -J
        drive_s = Z0 * ctx.drive_coeff
        f3 = (ctx.spec.damping / ctx.beta_sq_eff) * J - drive_s * E
        return f1, f3


# ---------------------------------------------------------------------------
# reference data


@dataclass
class RefData:
    """Degree-dependent reference tables shared by all elements."""

    degree: int
    nt: int
    ne: int
    vol_pts: np.ndarray    # (nq, 2)
    vol_w: np.ndarray      # (nq,)
    phi: np.ndarray        # (nq, nt)
    dphi: np.ndarray       # (nq, nt, 2)
    edge_s: np.ndarray     # (nqe,)
    edge_w: np.ndarray     # (nqe,)
    psi: np.ndarray        # (nqe, ne) edge basis in global parameter
    trace: np.ndarray      # (2, 3, nqe, nt) volume-basis traces per (flip, side)
    psi_nodes_tri: np.ndarray  # (2, 3, p+1, 2) ref coords of edge nodes per (flip, side)


def _edge_ref_points(side: int, t: np.ndarray) -> np.ndarray:
    """Reference-triangle coordinates of local edge ``side`` at parameter t."""
    verts = np.array([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)])
    a, b = _LOCAL_EDGES[side]
    return verts[a] + np.outer(t, verts[b] - verts[a])


def make_ref_data(degree: int) -> RefData:
    basis = make_basis(degree)
    qv = make_quadrature(2 * degree + 2, "triangle")
    qe = make_quadrature(2 * degree + 3, "edge")
    s = qe.points
    trace = np.empty((2, 3, len(s), basis.n_tri))
    nodes = np.empty((2, 3, degree + 1, 2))
    en = basis.edge_nodes
    for flip in (0, 1):
        t = 1.0 - s if flip else s
        tn = 1.0 - en if flip else en
        for side in range(3):
            trace[flip, side] = basis.tri_values(_edge_ref_points(side, t))
            nodes[flip, side] = _edge_ref_points(side, tn)
    return RefData(
        degree=degree,
        nt=basis.n_tri,
        ne=basis.n_edge,
        vol_pts=qv.points,
        vol_w=qv.weights,
        phi=basis.tri_values(qv.points),
        dphi=basis.tri_gradients(qv.points),
        edge_s=s,
        edge_w=qe.weights,
        psi=basis.edge_values(s),
        trace=trace,
        psi_nodes_tri=nodes,
    )


# ---------------------------------------------------------------------------
# discretization


@dataclass
class Discretization:
    """Mesh + degree + material bound together with precomputed geometry."""

    mesh: Mesh
    skeleton: Skeleton
    degree: int
    material: MaterialSpec
    curved: dict = field(default_factory=dict)
    tau: float = 1.0            # stabilization of the lambda trace
    tau_eta: float = None       # stabilization of the eta trace; defaults to tau

    def __post_init__(self):
        if self.tau_eta is None:
            self.tau_eta = self.tau
        self.ref = make_ref_data(self.degree)
        mesh, sk, ref = self.mesh, self.skeleton, self.ref
        nel = mesh.n_elements
        nt, ne = ref.nt, ref.ne
        nq, nqe = len(ref.vol_w), len(ref.edge_s)

        tags = mesh.physical_tags
        hydro = self.material.is_nonlocal
        self.kind = np.where(tags == SCATTERER,
                             KIND_HYDRO if hydro else KIND_DRUDE, KIND_FREE)

        tris = mesh.triangles
        # side orientation: canonical edge parameter runs low node -> high node
        self.flip = (tris > tris[:, [1, 2, 0]]).astype(int)

        # elements needing a quadratic geometry map (touching a curved edge)
        curved_elems = set()
        for eid in self.curved:
            for el in sk.edge_elems[eid]:
                if el >= 0:
                    curved_elems.add(int(el))
        self.is_curved = np.zeros(nel, dtype=bool)
        self.is_curved[list(curved_elems)] = True

        # volume geometry (per quad point; constant rows for affine elements)
        self.det = np.empty((nel, nq))
        self.inv_jac = np.empty((nel, nq, 2, 2))
        self.phys = np.empty((nel, nq, 2))
        verts = mesh.nodes[tris]
        J = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]], axis=-1)
        detA = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        invA = np.empty_like(J)
        invA[:, 0, 0] = J[:, 1, 1] / detA
        invA[:, 1, 1] = J[:, 0, 0] / detA
        invA[:, 0, 1] = -J[:, 0, 1] / detA
        invA[:, 1, 0] = -J[:, 1, 0] / detA
        self.det[:] = detA[:, None]
        self.inv_jac[:] = invA[:, None]
        self.phys[:] = verts[:, None, 0] + np.einsum("qk,elk->eql", ref.vol_pts, J)

        for el in sorted(curved_elems):
            nodes6 = self._element_nodes6(el)
            geo = element_geometry(el, nodes6, ref.vol_pts, curved=True)
            self.det[el] = geo.det
            self.inv_jac[el] = geo.inv_jac
            self.phys[el] = geo.phys_points

        # side geometry: physical edge-quadrature weights, outward normals, points
        self.side_w = np.empty((nel, 3, nqe))
        self.side_n = np.empty((nel, 3, nqe, 2))
        self.side_pts = np.empty((nel, 3, nqe, 2))
        lengths = sk.lengths[sk.elem_edges]                      # (nel, 3)
        lo = np.minimum(tris, tris[:, [1, 2, 0]])
        hi = np.maximum(tris, tris[:, [1, 2, 0]])
        p_lo, p_hi = mesh.nodes[lo], mesh.nodes[hi]              # (nel, 3, 2)
        tan = (p_hi - p_lo) / lengths[..., None]                 # unit, low->high
        sgn = 1.0 - 2.0 * self.flip                              # +1 unflipped
        self.side_n[..., 0] = (sgn * tan[..., 1])[:, :, None]
        self.side_n[..., 1] = (-sgn * tan[..., 0])[:, :, None]
        self.side_w[:] = ref.edge_w[None, None, :] * lengths[..., None]
        self.side_pts[:] = p_lo[:, :, None, :] + ref.edge_s[None, None, :, None] \
            * (p_hi - p_lo)[:, :, None, :]
        for eid, cmap in self.curved.items():
            pts, tanv = quadratic_edge_points(cmap.control, ref.edge_s)
            speed = np.linalg.norm(tanv, axis=1)
            unit = tanv / speed[:, None]
            for el, le in zip(sk.edge_elems[eid], sk.edge_local[eid]):
                if el < 0:
                    continue
                s_el = 1.0 - 2.0 * self.flip[el, le]
                self.side_w[el, le] = ref.edge_w * speed
                self.side_n[el, le, :, 0] = s_el * unit[:, 1]
                self.side_n[el, le, :, 1] = -s_el * unit[:, 0]
                self.side_pts[el, le] = pts

        # trace tables selected by per-side flip: (nel, 3, nqe, nt)
        self.side_trace = ref.trace[self.flip, np.arange(3)[None, :]]

        # global trace numbering: lambda on every edge, then eta on F_h^I
        self.n_lambda = sk.n_edges * ne
        fhi = sk.scatterer_edges()
        self.eta_edges = fhi
        self.eta_pos = {int(e): i for i, e in enumerate(fhi)}
        self.n_eta = len(fhi) * ne if hydro else 0
        self.n_trace = self.n_lambda + self.n_eta

        # per-element global trace indices (lambda sides, then eta sides)
        lam = (sk.elem_edges[:, :, None] * ne + np.arange(ne)).reshape(nel, 3 * ne)
        if hydro:
            idx = np.full((nel, 6 * ne), -1, dtype=np.int64)
            idx[:, :3 * ne] = lam
            for el in np.flatnonzero(self.kind == KIND_HYDRO):
                for le in range(3):
                    pos = self.eta_pos[int(sk.elem_edges[el, le])]
                    base = self.n_lambda + pos * ne
                    idx[el, (3 + le) * ne:(4 + le) * ne] = base + np.arange(ne)
            self.trace_idx = idx
        else:
            self.trace_idx = lam

    def _element_nodes6(self, el: int) -> np.ndarray:
        tri = self.mesh.triangles[el]
        nodes6 = np.empty((6, 2))
        nodes6[:3] = self.mesh.nodes[tri]
        for le in range(3):
            eid = int(self.skeleton.elem_edges[el, le])
            cmap = self.curved.get(eid)
            if cmap is not None:
                nodes6[3 + le] = cmap.control[2]
            else:
                a, b = _LOCAL_EDGES[le]
                nodes6[3 + le] = 0.5 * (self.mesh.nodes[tri[a]] + self.mesh.nodes[tri[b]])
        return nodes6

    @property
    def n_fields(self) -> int:
        """Element-local unknown count summed over the mesh."""
        nt = self.ref.nt
        per = np.where(self.kind == KIND_HYDRO, 6 * nt, 3 * nt)
        return int(per.sum())

    def local_size(self, el: int) -> int:
        return (6 if self.kind[el] == KIND_HYDRO else 3) * self.ref.nt

    def trace_size(self, el: int) -> int:
        return (6 if self.kind[el] == KIND_HYDRO else 3) * self.ref.ne


# ---------------------------------------------------------------------------
# element blocks (batched)


def element_blocks(disc: Discretization, ctx: FrequencyContext, elems: np.ndarray,
                   source=None):
    """Local HDG blocks A, B, C, D and volume rhs f for a batch of elements.

    All elements in the batch must share the same material kind.  Shapes:
    A (n, nloc, nloc), B (n, nloc, ntr), C (n, ntr, nloc), D (n, ntr, ntr),
    f (n, nloc), where ntr spans the lambda (and eta) side blocks.
    """
    elems = np.asarray(elems, dtype=np.int64)
    kind = int(disc.kind[elems[0]])
    if np.any(disc.kind[elems] != kind):
        raise ValueError("mixed element kinds in one batch")
    ref = disc.ref
    nt, ne = ref.nt, ref.ne
    n = len(elems)
    tau = disc.tau
    tau_q = disc.tau_eta
    k = ctx.wavenumber
    omega = ctx.omega
    hydro = kind == KIND_HYDRO
    nloc = (6 if hydro else 3) * nt
    ntr = (6 if hydro else 3) * ne

    detw = disc.det[elems] * ref.vol_w[None, :]                  # (n, nq)
    inv = disc.inv_jac[elems]                                    # (n, nq, 2, 2)
    # physical gradients: d phi / dx_l = dphi_r * invJ[r, l]
    gphys = np.einsum("qir,eqrl->eqil", ref.dphi, inv)           # (n, nq, nt, 2)
    M = np.einsum("eq,qi,qj->eij", detw, ref.phi, ref.phi)
    Dx = np.einsum("eq,eqi,qj->eij", detw, gphys[..., 0], ref.phi)
    Dy = np.einsum("eq,eqi,qj->eij", detw, gphys[..., 1], ref.phi)

    A = np.zeros((n, nloc, nloc), dtype=complex)
    B = np.zeros((n, nloc, ntr), dtype=complex)
    C = np.zeros((n, ntr, nloc), dtype=complex)
    D = np.zeros((n, ntr, ntr), dtype=complex)
    f = np.zeros((n, nloc), dtype=complex)

    sl = [slice(b * nt, (b + 1) * nt) for b in range(6)]
    EX, EY, H, JX, JY, Q = range(6)

    eps = ctx.eps_local if kind == KIND_DRUDE else 1.0
    A[:, sl[EX], sl[EX]] += 1j * k * eps * M
    A[:, sl[EY], sl[EY]] += 1j * k * eps * M
    A[:, sl[H], sl[H]] += 1j * k * M
    A[:, sl[EX], sl[H]] += -Dy
    A[:, sl[EY], sl[H]] += Dx
    A[:, sl[H], sl[EX]] += Dy.transpose(0, 2, 1)
    A[:, sl[H], sl[EY]] += -Dx.transpose(0, 2, 1)
    if hydro:
        drive_s = Z0 * ctx.drive_coeff
        A[:, sl[EX], sl[JX]] += -M
        A[:, sl[EY], sl[JY]] += -M
        A[:, sl[JX], sl[JX]] += ctx.hydro_coeff * M
        A[:, sl[JY], sl[JY]] += ctx.hydro_coeff * M
        A[:, sl[JX], sl[EX]] += -drive_s * M
        A[:, sl[JY], sl[EY]] += -drive_s * M
        A[:, sl[JX], sl[Q]] += -Dx
        A[:, sl[JY], sl[Q]] += -Dy
        A[:, sl[Q], sl[JX]] += -Dx.transpose(0, 2, 1)
        A[:, sl[Q], sl[JY]] += -Dy.transpose(0, 2, 1)
        A[:, sl[Q], sl[Q]] += 1j * omega * M

    for le in range(3):
        w = disc.side_w[elems, le]                               # (n, nqe)
        nx = disc.side_n[elems, le, :, 0]
        ny = disc.side_n[elems, le, :, 1]
        T = disc.side_trace[elems, le]                           # (n, nqe, nt)
        Ett = np.einsum("eq,eqi,eqj->eij", w, T, T)
        Etp = np.einsum("eq,eqi,qm->eim", w, T, ref.psi)
        Etp_nx = np.einsum("eq,eqi,qm->eim", w * nx, T, ref.psi)
        Etp_ny = np.einsum("eq,eqi,qm->eim", w * ny, T, ref.psi)
        Epp = np.einsum("eq,qm,qr->emr", w, ref.psi, ref.psi)
        lam = slice(le * ne, (le + 1) * ne)

        A[:, sl[H], sl[H]] += -tau * Ett
        B[:, sl[EX], lam] += Etp_ny
        B[:, sl[EY], lam] += -Etp_nx
        B[:, sl[H], lam] += tau * Etp
        C[:, lam, sl[EX]] += -Etp_ny.transpose(0, 2, 1)
        C[:, lam, sl[EY]] += Etp_nx.transpose(0, 2, 1)
        C[:, lam, sl[H]] += tau * Etp.transpose(0, 2, 1)
        D[:, lam, lam] += -tau * Epp
        if hydro:
            eta = slice((3 + le) * ne, (4 + le) * ne)
            A[:, sl[Q], sl[Q]] += -tau_q * Ett
            B[:, sl[JX], eta] += Etp_nx
            B[:, sl[JY], eta] += Etp_ny
            B[:, sl[Q], eta] += tau_q * Etp
            C[:, eta, sl[JX]] += Etp_nx.transpose(0, 2, 1)
            C[:, eta, sl[JY]] += Etp_ny.transpose(0, 2, 1)
            C[:, eta, sl[Q]] += tau_q * Etp.transpose(0, 2, 1)
            D[:, eta, eta] += -tau_q * Epp

    if source is not None:
        fv = source.volume_f(ctx, disc.phys[elems])
        if fv is not None:
            f1, f3 = fv
            f[:, sl[EX]] += np.einsum("eq,eq,qi->ei", detw, f1[..., 0], ref.phi)
            f[:, sl[EY]] += np.einsum("eq,eq,qi->ei", detw, f1[..., 1], ref.phi)
            if hydro:
                f[:, sl[JX]] += np.einsum("eq,eq,qi->ei", detw, f3[..., 0], ref.phi)
                f[:, sl[JY]] += np.einsum("eq,eq,qi->ei", detw, f3[..., 1], ref.phi)
    return A, B, C, D, f


def _batches(disc: Discretization, chunk: int = 1500):
    """Element batches of uniform kind (curved elements are not separated;
    the geometry arrays already carry their per-point Jacobians)."""
    for kind in (KIND_FREE, KIND_DRUDE, KIND_HYDRO):
        idx = np.flatnonzero(disc.kind == kind)
        for start in range(0, len(idx), chunk):
            yield idx[start:start + chunk]


def _boundary_terms(disc: Discretization, ctx: FrequencyContext, source):
    """Outer-boundary lambda terms: -<lambda, psi> mass and the g data.

    Returns (rows, cols, vals, rhs).  With a PEC source nothing is added
    and the boundary rows reduce to n x E_hat = 0.
    """
    rows, cols, vals = [], [], []
    rhs = np.zeros(disc.n_trace, dtype=complex)
    if source.boundary != "silver_muller":
        return rows, cols, vals, rhs
    sk = disc.skeleton
    ref = disc.ref
    ne = ref.ne
    k = ctx.wavenumber
    for eid in np.flatnonzero(sk.edge_class == EdgeClass.ABSORBING_BOUNDARY):
        el = int(sk.edge_elems[eid, 0])
        le = int(sk.edge_local[eid, 0])
        w = disc.side_w[el, le]
        pts = disc.side_pts[el, le]
        nrm = disc.side_n[el, le]
        Epp = np.einsum("q,qm,qr->mr", w, ref.psi, ref.psi)
        g = source.g(pts, nrm, k)
        base = eid * ne
        for m in range(ne):
            rhs[base + m] += np.sum(w * g * ref.psi[:, m])
            for r in range(ne):
                rows.append(base + m)
                cols.append(base + r)
                vals.append(-Epp[m, r])
    return rows, cols, vals, rhs


# ---------------------------------------------------------------------------
# solves


@dataclass
class FieldSolution:
    """Elementwise nodal coefficients of all fields plus the trace vector."""

    disc: Discretization
    ctx: FrequencyContext
    source: object
    E: np.ndarray       # (nel, nt, 2)
    H: np.ndarray       # (nel, nt)
    J: np.ndarray       # (nel, nt, 2)
    q: np.ndarray       # (nel, nt)
    trace: np.ndarray   # (n_trace,)
    residual: float

    @property
    def omega(self) -> float:
        return self.ctx.omega

    def eta_on_edge(self, eid: int) -> np.ndarray:
        ne = self.disc.ref.ne
        pos = self.disc.eta_pos[int(eid)]
        base = self.disc.n_lambda + pos * ne
        return self.trace[base:base + ne]


def solve_frequency(disc: Discretization, omega: float, source,
                    ordering: str = "min_degree") -> FieldSolution:
    """Assemble, condense, solve the trace system and recover local fields."""
    ctx = make_frequency_context(disc.material, omega)
    N = disc.n_trace
    rows_all, cols_all, vals_all = [], [], []
    rhs = np.zeros(N, dtype=complex)

    for elems in _batches(disc):
        A, B, C, D, f = element_blocks(disc, ctx, elems, source)
        ntr = B.shape[2]
        X = np.linalg.solve(A, np.concatenate([B, f[:, :, None]], axis=2))
        S = D - C @ X[:, :, :ntr]
        r = -np.einsum("eij,ej->ei", C, X[:, :, ntr])
        idx = disc.trace_idx[elems, :ntr]
        rows_all.append(np.repeat(idx, ntr, axis=1).ravel())
        cols_all.append(np.tile(idx, (1, ntr)).ravel())
        vals_all.append(S.ravel())
        np.add.at(rhs, idx.ravel(), r.ravel())

    brows, bcols, bvals, brhs = _boundary_terms(disc, ctx, source)
    rhs += brhs
    rows = np.concatenate(rows_all + [np.asarray(brows, dtype=np.int64)])
    cols = np.concatenate(cols_all + [np.asarray(bcols, dtype=np.int64)])
    vals = np.concatenate(vals_all + [np.asarray(bvals, dtype=complex)])

    Smat = sparselinalg.from_triplets(N, rows, cols, vals)
    F = sparselinalg.factorize_lu(Smat, ordering=ordering)
    lam = sparselinalg.solve(F, rhs)
    res = sparselinalg.residual(Smat, lam, rhs)

    nel, nt = disc.mesh.n_elements, disc.ref.nt
    E = np.zeros((nel, nt, 2), dtype=complex)
    Hf = np.zeros((nel, nt), dtype=complex)
    J = np.zeros((nel, nt, 2), dtype=complex)
    q = np.zeros((nel, nt), dtype=complex)
    for elems in _batches(disc):
        A, B, C, D, f = element_blocks(disc, ctx, elems, source)
        ntr = B.shape[2]
        lam_loc = lam[disc.trace_idx[elems, :ntr]]
        u = np.linalg.solve(
            A, (f - np.einsum("eij,ej->ei", B, lam_loc))[:, :, None])[:, :, 0]
        E[elems, :, 0] = u[:, 0 * nt:1 * nt]
        E[elems, :, 1] = u[:, 1 * nt:2 * nt]
        Hf[elems] = u[:, 2 * nt:3 * nt]
        if disc.kind[elems[0]] == KIND_HYDRO:
            J[elems, :, 0] = u[:, 3 * nt:4 * nt]
            J[elems, :, 1] = u[:, 4 * nt:5 * nt]
            q[elems] = u[:, 5 * nt:6 * nt]
    return FieldSolution(disc, ctx, source, E, Hf, J, q, lam, res)


def solve_monolithic(disc: Discretization, omega: float, source,
                     max_elements: int = 200) -> FieldSolution:
    """Uncondensed reference solve: all local unknowns plus traces at once.

    Deliberately restricted to small meshes; used to cross-check the
    Schur-complement path.
    """
    if disc.mesh.n_elements > max_elements:
        raise ValueError("monolithic solve is restricted to small meshes")
    ctx = make_frequency_context(disc.material, omega)
    nt = disc.ref.nt
    offs = np.zeros(disc.mesh.n_elements + 1, dtype=np.int64)
    for el in range(disc.mesh.n_elements):
        offs[el + 1] = offs[el] + disc.local_size(el)
    n_loc = int(offs[-1])
    N = n_loc + disc.n_trace

    rows, cols, vals = [], [], []
    rhs = np.zeros(N, dtype=complex)
    for elems in _batches(disc):
        A, B, C, D, f = element_blocks(disc, ctx, elems, source)
        ntr = B.shape[2]
        for i, el in enumerate(elems):
            li = offs[el] + np.arange(disc.local_size(el))
            ti = n_loc + disc.trace_idx[el, :ntr]
            for (bl, ri, ci) in ((A[i], li, li), (B[i], li, ti),
                                 (C[i], ti, li), (D[i], ti, ti)):
                rows.append(np.repeat(ri, len(ci)))
                cols.append(np.tile(ci, len(ri)))
                vals.append(bl.ravel())
            rhs[li] += f[i]

    brows, bcols, bvals, brhs = _boundary_terms(disc, ctx, source)
    rhs[n_loc:] += brhs
    rows.append(np.asarray(brows, dtype=np.int64) + n_loc)
    cols.append(np.asarray(bcols, dtype=np.int64) + n_loc)
    vals.append(np.asarray(bvals, dtype=complex))

    Smat = sparselinalg.from_triplets(
        N, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
    F = sparselinalg.factorize_lu(Smat)
    x = sparselinalg.solve(F, rhs)
    res = sparselinalg.residual(Smat, x, rhs)

    nel = disc.mesh.n_elements
    E = np.zeros((nel, nt, 2), dtype=complex)
    Hf = np.zeros((nel, nt), dtype=complex)
    J = np.zeros((nel, nt, 2), dtype=complex)
    q = np.zeros((nel, nt), dtype=complex)
    for el in range(nel):
        u = x[offs[el]:offs[el + 1]]
        E[el, :, 0] = u[0 * nt:1 * nt]
        E[el, :, 1] = u[1 * nt:2 * nt]
        Hf[el] = u[2 * nt:3 * nt]
        if disc.kind[el] == KIND_HYDRO:
            J[el, :, 0] = u[3 * nt:4 * nt]
            J[el, :, 1] = u[4 * nt:5 * nt]
            q[el] = u[5 * nt:6 * nt]
    return FieldSolution(disc, ctx, source, E, Hf, J, q, x[n_loc:], res)


# ---------------------------------------------------------------------------
# hard-wall diagnostic


def hard_wall_residual(sol: FieldSolution) -> float:
    """Relative size of n . J_hat on the scatterer surface.

    The numerical current trace J_hat = J + tau*(q - eta)*n should have
    zero normal component on the metal boundary; the return value is
    the surface integral of |n . J_hat| over the integral of |J|.
    """
    disc = sol.disc
    sk = disc.skeleton
    ref = disc.ref
    num = 0.0
    den = 0.0
    for eid in np.flatnonzero(sk.edge_class == EdgeClass.SCATTERER_SURFACE):
        side = None
        for j in range(2):
            el = int(sk.edge_elems[eid, j])
            if el >= 0 and disc.kind[el] == KIND_HYDRO:
                side = (el, int(sk.edge_local[eid, j]))
                break
        if side is None:
            raise ValueError("surface edge without a hydrodynamic element")
        el, le = side
        T = disc.side_trace[el, le]                 # (nqe, nt)
        w = disc.side_w[el, le]
        nrm = disc.side_n[el, le]
        Jq = np.einsum("qi,ik->qk", T, sol.J[el])   # (nqe, 2)
        qq = T @ sol.q[el]
        eta = ref.psi @ sol.eta_on_edge(eid)
        jn = Jq[:, 0] * nrm[:, 0] + Jq[:, 1] * nrm[:, 1] + disc.tau_eta * (qq - eta)
        num += float(np.sum(w * np.abs(jn)))
        den += float(np.sum(w * np.linalg.norm(Jq, axis=1)))
    if den == 0.0:
        return 0.0
    return num / den


def dof_count(disc: Discretization) -> int:
    """Global trace unknowns: (p+1) per edge for lambda plus eta edges."""
    return disc.n_trace
