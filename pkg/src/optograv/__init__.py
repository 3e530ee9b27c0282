"""Gravimetry with a nonlinear optomechanical probe.

Subpackages and modules:

``hilbert``      truncated Fock spaces, operators, partial traces
``states``       coherent, Fock, superposition and displaced-thermal states
``evolution``    closed-form unitary dynamics and reduced states
``homodyne``     rotated-quadrature distributions and their Fisher integrals
``metrology``    quantum and classical Fisher information
``openquantum``  cavity loss (Lindblad) and the leaky-photon model
``systems``      physical platforms, couplings and sensitivity reports
``cli``          command-line front end
"""

from .errors import ConfigError, CutoffError, NumericalError
from .evolution import DimensionlessParams

__version__ = "0.1.0"

__all__ = ["ConfigError", "CutoffError", "NumericalError", "DimensionlessParams", "__version__"]
