"""Field evaluation, cross sections, error norms and exporters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks
from scipy.spatial import cKDTree

from .approximation import make_basis
from .hdg import FieldSolution


# ---------------------------------------------------------------------------
# point location and evaluation


class FieldEvaluator:
    """Evaluates a solution at arbitrary physical points.

    Points are located by testing barycentric coordinates of candidate
    elements found through a centroid k-d tree; ties on shared edges are
    broken toward the lowest element id so results do not depend on
    query order.  Curved elements fall back to a Newton inversion of the
    quadratic geometry map.
    """

    def __init__(self, solution: FieldSolution):
        self.sol = solution
        self.disc = solution.disc
        mesh = self.disc.mesh
        self.basis = make_basis(self.disc.degree)
        verts = mesh.nodes[mesh.triangles]
        self._v0 = verts[:, 0]
        J = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]], axis=-1)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        inv = np.empty_like(J)
        inv[:, 0, 0] = J[:, 1, 1] / det
        inv[:, 1, 1] = J[:, 0, 0] / det
        inv[:, 0, 1] = -J[:, 0, 1] / det
        inv[:, 1, 0] = -J[:, 1, 0] / det
        self._inv = inv
        self._tree = cKDTree(verts.mean(axis=1))
        self._scale = np.sqrt(np.abs(det)).max()

    def locate(self, pts: np.ndarray, tol: float = 1e-10) -> tuple:
        """Element id and reference coordinates for each point."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = len(pts)
        elems = np.full(n, -1, dtype=np.int64)
        refs = np.zeros((n, 2))
        for i, pt in enumerate(pts):
            el, ref = self._locate_one(pt, tol)
            elems[i] = el
            refs[i] = ref
        if np.any(elems < 0):
            j = int(np.argmax(elems < 0))
            raise ValueError(f"point {pts[j]} lies outside the mesh")
        return elems, refs

    def _locate_one(self, pt, tol):
        for k in (8, 64, 512):
            k = min(k, self.disc.mesh.n_elements)
            _, cand = self._tree.query(pt, k=k)
            cand = np.atleast_1d(cand)
            hit = self._test(pt, np.sort(cand), tol)
            if hit is not None:
                return hit
            if k == self.disc.mesh.n_elements:
                break
        hit = self._test(pt, np.arange(self.disc.mesh.n_elements), tol)
        return hit if hit is not None else (-1, np.zeros(2))

    def _test(self, pt, cand, tol):
        d = pt - self._v0[cand]
        ref = np.einsum("ekl,el->ek", self._inv[cand], d)
        ok = (ref[:, 0] >= -tol) & (ref[:, 1] >= -tol) & (ref.sum(axis=1) <= 1 + tol)
        for j in np.flatnonzero(ok):
            el = int(cand[j])
            r = ref[j]
            if self.disc.is_curved[el]:
                r = self._newton(el, pt, r)
                if r is None:
                    continue
            return el, r
        return None

    def _newton(self, el, pt, r0, tol=1e-12, max_iter=30):
        from .approximation import _p2_shape
        nodes6 = self.disc._element_nodes6(el)
        r = np.array(r0, dtype=float)
        for _ in range(max_iter):
            N, dNdx, dNdy = _p2_shape(r[None, :])
            res = (N @ nodes6)[0] - pt
            if np.linalg.norm(res) < tol * self._scale:
                pad = 1e-9
                if r[0] >= -pad and r[1] >= -pad and r.sum() <= 1 + pad:
                    return np.clip(r, 0.0, 1.0)
                return None
            J = np.column_stack([(dNdx @ nodes6)[0], (dNdy @ nodes6)[0]])
            r = r - np.linalg.solve(J, res)
            if np.abs(r).max() > 10.0:
                return None
        return None

    def total_fields(self, pts: np.ndarray):
        """(E, H) of the computed solution at the given points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        elems, refs = self.locate(pts)
        E = np.zeros((len(pts), 2), dtype=complex)
        H = np.zeros(len(pts), dtype=complex)
        for el in np.unique(elems):
            sel = elems == el
            phi = self.basis.tri_values(refs[sel])
            E[sel] = phi @ self.sol.E[el]
            H[sel] = phi @ self.sol.H[el]
        return E, H

    def scattered_fields(self, pts: np.ndarray):
        """Total minus incident; requires a plane-wave source."""
        E, H = self.total_fields(pts)
        src = self.sol.source
        k = self.sol.ctx.wavenumber
        return E - src.E(pts, k), H - src.H(pts, k)


# ---------------------------------------------------------------------------
# contours


@dataclass(frozen=True)
class Contour:
    """Closed integration contour: quadrature points, weights, outward normals."""

    points: np.ndarray    # (n, 2)
    weights: np.ndarray   # (n,)
    normals: np.ndarray   # (n, 2)


def circle_contour(center, radius: float, n_panels: int = 128,
                   n_gauss: int = 4) -> Contour:
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    th0 = 2.0 * np.pi * np.arange(n_panels) / n_panels
    dth = 2.0 * np.pi / n_panels
    th = (th0[:, None] + 0.5 * dth * (x[None, :] + 1.0)).ravel()
    wts = np.tile(0.5 * dth * w, n_panels) * radius
    nrm = np.column_stack([np.cos(th), np.sin(th)])
    pts = np.asarray(center) + radius * nrm
    return Contour(pts, wts, nrm)


def rectangle_contour(xmin, xmax, ymin, ymax, n_per_side: int = 64,
                      n_gauss: int = 4) -> Contour:
    x, w = np.polynomial.legendre.leggauss(n_gauss)
    pts, wts, nrm = [], [], []
    corners = [((xmin, ymin), (xmax, ymin), (0.0, -1.0)),
               ((xmax, ymin), (xmax, ymax), (1.0, 0.0)),
               ((xmax, ymax), (xmin, ymax), (0.0, 1.0)),
               ((xmin, ymax), (xmin, ymin), (-1.0, 0.0))]
    for (a, b, n) in corners:
        a, b = np.asarray(a), np.asarray(b)
        h = np.linalg.norm(b - a) / n_per_side
        for j in range(n_per_side):
            p0 = a + (b - a) * j / n_per_side
            p1 = a + (b - a) * (j + 1) / n_per_side
            mid = 0.5 * (p0 + p1)
            half = 0.5 * (p1 - p0)
            pts.append(mid + np.outer(x, half))
            wts.append(0.5 * h * w)
            nrm.append(np.tile(n, (len(x), 1)))
    return Contour(np.vstack(pts), np.concatenate(wts), np.vstack(nrm))


# ---------------------------------------------------------------------------
# cross sections


@dataclass(frozen=True)
class CrossSections:
    omega: float
    sigma_sca: float
    sigma_abs: float
    sigma_ext: float


def _poynting_flux(E, H, contour: Contour) -> float:
    """Integral of the time-averaged Poynting vector through the contour."""
    s = E[:, 1] * np.conj(H) * contour.normals[:, 0] \
        - E[:, 0] * np.conj(H) * contour.normals[:, 1]
    return float(0.5 * np.sum(contour.weights * s.real))


def cross_sections(solution: FieldSolution, contour: Contour,
                   norm_length: float) -> CrossSections:
    """Scattering/absorption/extinction from a contour in free space.

    ``norm_length`` divides the geometric cross sections (per unit wire
    length) into the dimensionless sigmas; the paper-style convention is
    the scatterer diameter.
    """
    ev = FieldEvaluator(solution)
    src = solution.source
    k = solution.ctx.wavenumber
    Et, Ht = ev.total_fields(contour.points)
    Es = Et - src.E(contour.points, k)
    Hs = Ht - src.H(contour.points, k)
    s_inc = 0.5 * abs(src.amplitude) ** 2
    denom = s_inc * norm_length
    p_sca = _poynting_flux(Es, Hs, contour)
    p_abs = -_poynting_flux(Et, Ht, contour)
    return CrossSections(
        omega=solution.omega,
        sigma_sca=p_sca / denom,
        sigma_abs=p_abs / denom,
        sigma_ext=(p_sca + p_abs) / denom,
    )


def contour_field_norm(solution: FieldSolution, contour: Contour,
                       scattered: bool = True) -> float:
    """L2 norm of the (scattered) field along a contour, incident-normalized."""
    ev = FieldEvaluator(solution)
    src = solution.source
    k = solution.ctx.wavenumber
    E, H = ev.total_fields(contour.points)
    if scattered:
        E = E - src.E(contour.points, k)
        H = H - src.H(contour.points, k)
    num = np.sum(contour.weights * (np.abs(E[:, 0]) ** 2 + np.abs(E[:, 1]) ** 2
                                    + np.abs(H) ** 2))
    length = np.sum(contour.weights)
    ref = 2.0 * abs(src.amplitude) ** 2 * length
    return float(np.sqrt(num / ref))


# ---------------------------------------------------------------------------
# error norms and convergence


def l2_field_errors(solution: FieldSolution, exact) -> dict:
    """Relative L2 errors of E, H, J, q against callable exact fields."""
    disc = solution.disc
    detw = disc.det * disc.ref.vol_w[None, :]
    phi = disc.ref.phi
    out = {}
    pairs = (("E", solution.E, exact.E), ("H", solution.H, exact.H),
             ("J", solution.J, exact.J), ("q", solution.q, exact.q))
    for name, num, fn in pairs:
        exa = fn(disc.phys)
        if num.ndim == 3:
            uh = np.einsum("qi,eik->eqk", phi, num)
            w = detw[..., None]
        else:
            uh = np.einsum("qi,ei->eq", phi, num)
            w = detw
        err = np.sum(w * np.abs(uh - exa) ** 2)
        nrm = np.sum(w * np.abs(exa) ** 2)
        out[name] = float(np.sqrt(err / nrm))
    return out


def convergence_orders(hs, errors) -> list:
    """log2-ratio orders for successive (h, error) pairs (h halving)."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    return [float(np.log(errors[i] / errors[i + 1])
                  / np.log(hs[i] / hs[i + 1])) for i in range(len(hs) - 1)]


# ---------------------------------------------------------------------------
# resonance analysis


@dataclass(frozen=True)
class Resonance:
    omega: float
    height: float
    prominence: float


def find_resonances(omegas: np.ndarray, sigma: np.ndarray,
                    prominence: float = 0.0) -> list:
    """Local maxima of a sweep with parabolic peak-location refinement."""
    omegas = np.asarray(omegas, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    idx, props = find_peaks(sigma, prominence=prominence if prominence else None)
    out = []
    proms = props.get("prominences")
    if proms is None:
        from scipy.signal import peak_prominences
        proms = peak_prominences(sigma, idx)[0]
    for j, i in enumerate(idx):
        if 0 < i < len(sigma) - 1:
            y0, y1, y2 = sigma[i - 1], sigma[i], sigma[i + 1]
            denom = y0 - 2.0 * y1 + y2
            shift = 0.5 * (y0 - y2) / denom if denom != 0.0 else 0.0
            shift = float(np.clip(shift, -0.5, 0.5))
            w = omegas[i] + shift * (omegas[i + 1] - omegas[i])
            h = y1 - 0.25 * (y0 - y2) * shift
        else:
            w, h = omegas[i], sigma[i]
        out.append(Resonance(float(w), float(h), float(proms[j])))
    return out


# ---------------------------------------------------------------------------
# exporters


def export_sweep_csv(path, omegas, results, plasma_frequency: float) -> None:
    """CSV with one row per frequency; 17 significant digits."""
    with open(path, "w") as fh:
        fh.write("omega,omega_over_wp,sigma_sca,sigma_abs,sigma_ext\n")
        for w, cs in zip(omegas, results):
            fh.write(f"{w:.17g},{w / plasma_frequency:.17g},"
                     f"{cs.sigma_sca:.17g},{cs.sigma_abs:.17g},{cs.sigma_ext:.17g}\n")


def export_vtk(path, solution: FieldSolution) -> None:
    """Legacy ASCII VTK unstructured grid, one linear sub-triangle patch
    per element at the nodal points of the solution basis."""
    disc = solution.disc
    p = disc.degree
    basis = make_basis(p)
    mesh = disc.mesh
    nt = basis.n_tri
    verts = mesh.nodes[mesh.triangles]
    J = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0]], axis=-1)
    pts = verts[:, None, 0] + np.einsum("qk,elk->eql", basis.tri_nodes, J)

    # subdivision of the reference p-grid into linear triangles
    index = {}
    c = 0
    for j in range(p + 1):
        for i in range(p + 1 - j):
            index[(i, j)] = c
            c += 1
    subtris = []
    for j in range(p):
        for i in range(p - j):
            subtris.append((index[(i, j)], index[(i + 1, j)], index[(i, j + 1)]))
            if i + j < p - 1:
                subtris.append((index[(i + 1, j)], index[(i + 1, j + 1)], index[(i, j + 1)]))

    nel = mesh.n_elements
    npts = nel * nt
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nnanohdg fields\nASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {npts} double\n")
        for el in range(nel):
            for x, y in pts[el]:
                fh.write(f"{x:.17g} {y:.17g} 0\n")
        ncell = nel * len(subtris)
        fh.write(f"CELLS {ncell} {4 * ncell}\n")
        for el in range(nel):
            base = el * nt
            for (a, b, cc) in subtris:
                fh.write(f"3 {base + a} {base + b} {base + cc}\n")
        fh.write(f"CELL_TYPES {ncell}\n")
        fh.write("5\n" * ncell)
        fh.write(f"POINT_DATA {npts}\n")
        for name, data in (("H_re", solution.H.real), ("H_im", solution.H.imag),
                           ("q_re", solution.q.real), ("q_im", solution.q.imag)):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for el in range(nel):
                for v in data[el]:
                    fh.write(f"{v:.17g}\n")
        for name, data in (("E_re", solution.E.real), ("E_im", solution.E.imag),
                           ("J_re", solution.J.real), ("J_im", solution.J.imag)):
            fh.write(f"VECTORS {name} double\n")
            for el in range(nel):
                for vx, vy in data[el]:
                    fh.write(f"{vx:.17g} {vy:.17g} 0\n")
