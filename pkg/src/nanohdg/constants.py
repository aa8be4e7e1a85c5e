"""Physical constants (SI, CODATA) used throughout the solver.

The solver works with the time convention exp(-i*omega*t); all
sign-sensitive formulas in the package are written against it.
"""

import math

EPS0 = 8.8541878128e-12   # vacuum permittivity, F/m
MU0 = 1.25663706212e-6    # vacuum permeability, H/m
C0 = 299792458.0          # speed of light, m/s
Z0 = math.sqrt(MU0 / EPS0)  # free-space impedance, Ohm
