"""Stein-type superefficient drift estimation for Brownian motion."""
__version__ = "0.1.0"

from .basis import BasisSpec, SpectralCoeffs, TimeGrid  # noqa: E402
from .functionals import SingularityError, SteinFamilyParams  # noqa: E402
from .process import DriftSpec, NoiseDraw, Path  # noqa: E402

__all__ = [
    "BasisSpec",
    "DriftSpec",
    "NoiseDraw",
    "Path",
    "SingularityError",
    "SpectralCoeffs",
    "SteinFamilyParams",
    "TimeGrid",
    "__version__",
]
