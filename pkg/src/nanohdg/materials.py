"""Material models and per-frequency coefficients.

Three models are supported for the scatterer region:

* ``local_drude`` -- local Drude permittivity, no polarization-current
  unknowns in the solver,
* ``nhd`` -- hydrodynamic free-electron response with quantum-pressure
  term, real nonlocal parameter beta^2 = (3/5) v_F^2,
* ``gnor`` -- hydrodynamic response plus electron diffusion, which in
  the frequency domain amounts to the complex replacement
  beta^2 -> beta^2 + D*(gamma - i*omega).

All formulas use the exp(-i*omega*t) time convention.
"""

from __future__ import annotations

from dataclasses import dataclass

from .constants import C0, EPS0

MODELS = ("local_drude", "nhd", "gnor")


@dataclass(frozen=True)
class MaterialSpec:
    """Free-electron material parameters.

    Parameters
    ----------
    model : str
        One of ``local_drude``, ``nhd``, ``gnor``.
    plasma_frequency : float
        omega_p in rad/s.
    damping : float
        Collision damping gamma in rad/s.
    fermi_velocity : float
        v_F in m/s (used by the nonlocal models).
    diffusion : float
        Electron diffusion constant D in m^2/s; only meaningful for the
        ``gnor`` model and must be zero otherwise.
    """

    model: str
    plasma_frequency: float
    damping: float
    fermi_velocity: float = 0.0
    diffusion: float = 0.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown material model {self.model!r}")
        if self.plasma_frequency <= 0.0:
            raise ValueError("plasma_frequency must be positive")
        if self.damping < 0.0:
            raise ValueError("damping must be nonnegative")
        if self.model in ("nhd", "gnor") and self.fermi_velocity <= 0.0:
            raise ValueError("fermi_velocity must be positive for nonlocal models")
        if self.diffusion < 0.0:
            raise ValueError("diffusion must be nonnegative")
        if self.diffusion > 0.0 and self.model != "gnor":
            raise ValueError("diffusion is only used by the gnor model")

    @property
    def beta_sq(self) -> float:
        """Nonlocal parameter beta^2 = (3/5) v_F^2 in m^2/s^2."""
        return 0.6 * self.fermi_velocity**2

    @property
    def is_nonlocal(self) -> bool:
        return self.model in ("nhd", "gnor")


@dataclass(frozen=True)
class FrequencyContext:
    """All omega-dependent coefficients needed by the assembly.

    ``hydro_coeff`` is (gamma - i*omega)/beta_eff^2 and ``drive_coeff``
    is omega_p^2 * eps0 / beta_eff^2; both are meaningful only for the
    nonlocal models.  ``eps_local`` is the local Drude permittivity,
    used when the scatterer is modelled as a local medium.
    """

    spec: MaterialSpec
    omega: float
    wavenumber: float          # omega / c
    beta_sq_eff: complex
    hydro_coeff: complex
    drive_coeff: complex
    eps_local: complex


def drude_permittivity(spec: MaterialSpec, omega: float) -> complex:
    """Local Drude permittivity eps(omega) = 1 - wp^2/(omega^2 + i*gamma*omega).

    With exp(-i*omega*t) and gamma >= 0 this has Im(eps) >= 0
    (a passive medium).
    """
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    wp = spec.plasma_frequency
    return 1.0 - wp**2 / (omega**2 + 1j * spec.damping * omega)


def effective_beta_sq(spec: MaterialSpec, omega: float) -> complex:
    """beta_eff^2(omega); complex for the gnor model."""
    b2 = complex(spec.beta_sq)
    if spec.model == "gnor":
        b2 = b2 + spec.diffusion * (spec.damping - 1j * omega)
    return b2


def make_frequency_context(spec: MaterialSpec, omega: float) -> FrequencyContext:
    """Evaluate every omega-dependent coefficient for one frequency."""
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    eps = drude_permittivity(spec, omega)
    if spec.is_nonlocal:
        b2 = effective_beta_sq(spec, omega)
        hydro = (spec.damping - 1j * omega) / b2
        drive = spec.plasma_frequency**2 * EPS0 / b2
    else:
        b2 = complex(0.0)
        hydro = complex(0.0)
        drive = complex(0.0)
    return FrequencyContext(
        spec=spec,
        omega=omega,
        wavenumber=omega / C0,
        beta_sq_eff=b2,
        hydro_coeff=hydro,
        drive_coeff=drive,
        eps_local=eps,
    )
