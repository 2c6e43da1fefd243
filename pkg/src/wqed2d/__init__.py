"""2D atomic arrays coupled to a 2D waveguide: spectra, bound states, dynamics."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    ComplexEnergy,
    DomainError,
    LatticeSpec,
    Momentum2,
    RunConfig,
    SizeCapError,
    UsageError,
    enumerate_bz_grid,
    distance,
)
