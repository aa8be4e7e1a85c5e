"""Closed-form references: cavity manufactured solution and cylinder Mie series.

The Mie oracle treats a single circular wire hit by a unit plane wave
travelling in +x with the out-of-plane magnetic field as the scalar
unknown.  It shares no code with the mesh-based solver, so agreement
between the two is a genuine cross-check.

Scaled fields are used throughout (H and J carry a factor Z0), matching
the solver's unknowns, and the time convention is exp(-i*omega*t).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import hankel1, jv, jvp, yv

from .constants import C0, EPS0, MU0, Z0
from .materials import MaterialSpec, drude_permittivity, effective_beta_sq


# ---------------------------------------------------------------------------
# cavity manufactured solution


def cavity_material(omega: float) -> MaterialSpec:
    """Hydrodynamic material with beta = c, used by the cavity test.

    beta^2 = (3/5) v_F^2 = c^2 makes the manufactured fields below an
    exact solution of the coupled system at any mesh resolution.
    """
    return MaterialSpec(
        model="nhd",
        plasma_frequency=omega,
        damping=0.1 * omega,
        fermi_velocity=C0 * np.sqrt(5.0 / 3.0),
    )


@dataclass(frozen=True)
class CavityExact:
    """Exact fields of the square-cavity problem with manufactured sources.

    The domain is [0, L]^2 with L = sqrt(2)*pi/k, PEC walls for the
    tangential electric field and a hard wall for the normal current.
    The fields satisfy the hydrodynamic system with beta = c when driven
    by volume sources f_E = -J and f_J = (gamma/beta^2) J - drive * E.
    """

    omega: float

    @property
    def wavenumber(self) -> float:
        return self.omega / C0

    @property
    def mode(self) -> float:
        """Wavenumber a of the cos(a x) cos(a y) pattern, a = k/sqrt(2)."""
        return self.wavenumber / np.sqrt(2.0)

    @property
    def length(self) -> float:
        return np.pi / self.mode

    def H(self, pts: np.ndarray) -> np.ndarray:
        a = self.mode
        return np.cos(a * pts[..., 0]) * np.cos(a * pts[..., 1]) + 0.0j

    def E(self, pts: np.ndarray) -> np.ndarray:
        a = self.mode
        x, y = pts[..., 0], pts[..., 1]
        amp = 1j * np.sqrt(2.0) / 2.0
        return np.stack([-amp * np.cos(a * x) * np.sin(a * y),
                         amp * np.sin(a * x) * np.cos(a * y)], axis=-1)

    def J(self, pts: np.ndarray) -> np.ndarray:
        a = self.mode
        x, y = pts[..., 0], pts[..., 1]
        amp = -np.sqrt(2.0) / 2.0 * Z0 + 0.0j
        return np.stack([amp * np.sin(a * x) * np.cos(a * y),
                         amp * np.cos(a * x) * np.sin(a * y)], axis=-1)

    def q(self, pts: np.ndarray) -> np.ndarray:
        a = self.mode
        return 1j * MU0 * np.cos(a * pts[..., 0]) * np.cos(a * pts[..., 1])


# ---------------------------------------------------------------------------
# Bessel helpers


def bessel_wronskian(n: int, z) -> complex:
    """J_n(z) Y_n'(z) - J_n'(z) Y_n(z); equals 2/(pi z) identically."""
    return jv(n, z) * yvp_(n, z) - jvp(n, z) * yv(n, z)


def yvp_(n: int, z):
    return 0.5 * (yv(n - 1, z) - yv(n + 1, z))


def hankel1p(n: int, z):
    return 0.5 * (hankel1(n - 1, z) - hankel1(n + 1, z))


def bessel_ratio(n: int, z: complex, tol: float = 1e-15, max_iter: int = 20000) -> complex:
    """J_{n+1}(z)/J_n(z) by Lentz's continued-fraction algorithm.

    Stable for arguments with large imaginary part, where jv itself
    overflows.  The fraction is
    J_{n+1}/J_n = 1/(2(n+1)/z - 1/(2(n+2)/z - ...)).
    """
    tiny = 1e-300
    f = tiny
    C = f
    D = 0.0
    for k in range(1, max_iter):
        a = 1.0 if k == 1 else -1.0
        b = 2.0 * (n + k) / z
        D = b + a * D
        if D == 0.0:
            D = tiny
        C = b + a / C
        if C == 0.0:
            C = tiny
        D = 1.0 / D
        delta = C * D
        f *= delta
        if abs(delta - 1.0) < tol:
            return f
    raise RuntimeError(f"bessel_ratio failed to converge for n={n}, z={z}")


def log_derivative_jn(n: int, z: complex) -> complex:
    """J_n'(z)/J_n(z) = n/z - J_{n+1}(z)/J_n(z), overflow-free."""
    return n / z - bessel_ratio(n, z)


def _jn_over_jnp(n: int, z: complex) -> complex:
    """R_n = J_n(z)/J_n'(z), stable for any complex argument."""
    if abs(z.imag) < 30.0 and abs(z) < 500.0:
        num = jv(n, z)
        den = jvp(n, z)
        if abs(den) > 0.0:
            return num / den
    if abs(z) > 1e4:
        # one circulating Hankel wave dominates; large-argument expansion
        s = 1.0 if z.imag >= 0.0 else -1.0
        return 1.0 / (-1j * s - 0.5 / z - 1j * s * (4 * n * n - 1) / (8.0 * z * z))
    return 1.0 / log_derivative_jn(n, z)


# ---------------------------------------------------------------------------
# cylinder Mie series


@dataclass(frozen=True)
class MieResult:
    omega: float
    sigma_sca: float
    sigma_abs: float
    sigma_ext: float
    coefficients: np.ndarray  # scattering coefficients a_n, n = 0..N


def mie_cylinder(spec: MaterialSpec, radius: float, omega: float,
                 n_max: int = 40, tail_tol: float = 1e-12) -> MieResult:
    """Extinction/scattering of one circular wire, unit plane wave in +x.

    Nonlocal models add a longitudinal pressure wave inside the wire with
    k_L^2 = (omega^2 + i*gamma*omega - omega_p^2)/beta_eff^2 and a
    hard-wall (no spill-out) surface condition; the local model keeps
    only the transverse channel.

    Cross sections are per unit length, normalized by the diameter 2r,
    so the returned sigmas are dimensionless.
    """
    k0 = omega / C0
    eps_t = drude_permittivity(spec, omega)
    kt = np.sqrt(eps_t) * k0
    if kt.imag < 0.0:
        kt = -kt
    x0 = k0 * radius
    xt = kt * radius

    alpha = 1.0 / (1j * omega * EPS0)
    alpha_t = 1.0 / (1j * omega * EPS0 * eps_t)
    nonlocal_ = spec.is_nonlocal
    if nonlocal_:
        b2 = effective_beta_sq(spec, omega)
        kl = np.sqrt((omega**2 + 1j * spec.damping * omega
                      - spec.plasma_frequency**2) / b2)
        if kl.imag < 0.0:
            kl = -kl
        xl = kl * radius
        # transverse bound-current factor J_T = sigma_T E_T
        sigma_t = 1j * spec.plasma_frequency**2 * EPS0 / (omega + 1j * spec.damping)

    coeffs = np.zeros(n_max + 1, dtype=complex)
    for n in range(n_max + 1):
        jn0, hn0 = jv(n, x0), hankel1(n, x0)
        jn0p, hn0p = jvp(n, x0), hankel1p(n, x0)
        jnt, jntp = jv(n, xt), jvp(n, xt)
        if nonlocal_:
            rn = _jn_over_jnp(n, xl)
            # unknowns (a_n, c_n, d_n'); rows: H match, E_phi match, n.J = 0
            A = np.array([
                [hn0, -jnt, 0.0],
                [alpha * k0 * hn0p, -alpha_t * kt * jntp, -(1j * n / radius) * rn],
                [0.0, sigma_t * (-alpha_t) * (1j * n / radius) * jnt,
                 1j * omega * EPS0 * kl],
            ], dtype=complex)
            rhs = np.array([-jn0, -alpha * k0 * jn0p, 0.0], dtype=complex)
        else:
            A = np.array([
                [hn0, -jnt],
                [alpha * k0 * hn0p, -alpha_t * kt * jntp],
            ], dtype=complex)
            rhs = np.array([-jn0, -alpha * k0 * jn0p], dtype=complex)
        coeffs[n] = np.linalg.solve(A, rhs)[0]

    tail = abs(coeffs[-1]) + abs(coeffs[-2])
    if tail > tail_tol * max(1.0, np.abs(coeffs).max()):
        raise RuntimeError(
            f"Mie series not converged at n_max={n_max} (tail {tail:.2e})")

    # closed sums via the Wronskian of the radial Hankel products;
    # the incident flux of the unit wave is 1/2 in scaled units
    weights = np.ones(n_max + 1)
    weights[1:] = 2.0  # a_{-n} = a_n
    c_sca = (4.0 / k0) * float(np.sum(weights * np.abs(coeffs) ** 2))
    c_ext = (-4.0 / k0) * float(np.sum(weights * coeffs.real))
    norm = 2.0 * radius
    return MieResult(
        omega=omega,
        sigma_sca=c_sca / norm,
        sigma_abs=(c_ext - c_sca) / norm,
        sigma_ext=c_ext / norm,
        coefficients=coeffs,
    )


def mie_sweep(spec: MaterialSpec, radius: float, omegas, n_max: int = 40) -> np.ndarray:
    """sigma_ext over a frequency list (shape (len(omegas),))."""
    return np.array([mie_cylinder(spec, radius, w, n_max=n_max).sigma_ext
                     for w in omegas])
