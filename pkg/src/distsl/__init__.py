"""Dirichlet Sturm-Liouville problems with distributional potentials ``q = u'`` on ``[0, pi]``."""

from .eigenfunctions import approx_v, approx_y, biorthogonal_v, normalized_y, remainders
from .odesolve import integrate_pruefer, integrate_quasi, integrate_variational
from .oscint import OscIntegrals, discrete, mu, upsilon_sup
from .potential import PotentialPrimitive, from_catalogue, from_samples, gauge_shift
from .spectrum import Eigenpair, characteristic, compute_spectrum, eigenvalues

__all__ = [
    "Eigenpair", "OscIntegrals", "PotentialPrimitive", "approx_v", "approx_y", "biorthogonal_v",
    "characteristic", "compute_spectrum", "discrete", "eigenvalues", "from_catalogue", "from_samples",
    "gauge_shift", "integrate_pruefer", "integrate_quasi", "integrate_variational", "mu", "normalized_y",
    "remainders", "upsilon_sup",
]
