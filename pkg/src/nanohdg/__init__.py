"""2D frequency-domain HDG solver for nonlocal plasmonic scattering.

Subpackages cover mesh handling, polynomial approximation, material
models, the hybridized DG solver core, sparse linear algebra, analytic
reference solutions, post-processing and a batch CLI.
"""

__version__ = "0.1.0"
