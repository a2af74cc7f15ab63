"""meropi: renormalization of divergent products via meromorphic germ projection.

The package splits into an exact symbolic layer (``meropi.germs``), a numeric
distribution-pairing layer (``meropi.dist``), the renormalization operator
built from both (``meropi.renorm``), wavefront/polarization calculus
(``meropi.microlocal``), a small flat-spacetime QFT application
(``meropi.qft``), and a command-line front end (``meropi.cli``).
"""

__version__ = "0.1.0"

from .germs import (
    Decomposition,
    GaussianRational,
    LinearForm,
    MeroGerm,
    PolarTerm,
    Poly,
    independent,
    orth_complement,
    parse_germ,
    project_pi,
    reduce_dependent,
)

__all__ = [
    "Decomposition",
    "GaussianRational",
    "LinearForm",
    "MeroGerm",
    "PolarTerm",
    "Poly",
    "__version__",
    "independent",
    "orth_complement",
    "parse_germ",
    "project_pi",
    "reduce_dependent",
]
