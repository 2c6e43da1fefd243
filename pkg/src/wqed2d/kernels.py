"""Photon-mediated coupling kernels G(z) and the N x N coupling matrix.

Two kernels are supported, both expressed against the dimensionless argument
z = k0d * (separation in units of d) and measured in their own single-emitter
rate unit:

* ``WAVEGUIDE_2D``   G(z) = (1/2) (Y0(z) - i J0(z))            [units: gamma]
* ``FREE_SPACE_ZZ``  G(z) = (3/(4 z^3)) e^{iz} (1 - iz - z^2)  [units: gamma0]

Both diverge (Re part) at z = 0; the self-interaction is renormalized into
the emitter frequency, which fixes the diagonal of the coupling matrix to
exactly -i/2 in either unit system.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from .core import DomainError, LatticeSpec, SizeCapError, distance_matrix
from .specfun import bessel_j0, bessel_y0

__all__ = ["CouplingKernel", "green", "coupling_matrix", "DIAGONAL"]

# renormalized self-coupling: G_ii = -i/2 (rate units of the kernel)
DIAGONAL = -0.5j


class CouplingKernel(Enum):
    """Selector for the photon-mediated coupling kernel."""

    WAVEGUIDE_2D = "waveguide"
    FREE_SPACE_ZZ = "freespace"

    @property
    def rate_unit(self) -> str:
        return "gamma" if self is CouplingKernel.WAVEGUIDE_2D else "gamma_0"

    @classmethod
    def from_name(cls, name: str) -> "CouplingKernel":
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise DomainError(
                f"unknown kernel {name!r} (choose 'waveguide' or 'freespace')"
            ) from None


def green(kernel: CouplingKernel, z):
    """Kernel value G(z) for z > 0 (z = 0 is handled only by coupling_matrix).

    Vectorized: scalar in -> complex out, array in -> complex array out.
    """
    arr = np.asarray(z, dtype=float)
    if np.isnan(arr).any() or not np.isfinite(arr).all():
        raise DomainError("green: argument must be finite")
    if (arr <= 0).any():
        raise DomainError(
            "green: argument must be > 0; the z = 0 self-term is renormalized "
            "and only coupling_matrix assigns the -i/2 diagonal")
    if kernel is CouplingKernel.WAVEGUIDE_2D:
        out = 0.5 * (bessel_y0(arr) - 1j * bessel_j0(arr))
    elif kernel is CouplingKernel.FREE_SPACE_ZZ:
        out = 0.75 * np.exp(1j * arr) * (1.0 - 1j * arr - arr * arr) / arr**3
    else:  # pragma: no cover
        raise DomainError(f"unknown kernel {kernel!r}")
    return complex(out) if np.ndim(z) == 0 else out


def coupling_matrix(lattice: LatticeSpec, kernel: CouplingKernel,
                    max_sites: int = 400) -> np.ndarray:
    """Complex symmetric N x N matrix G(k0d |x_i - x_j|) with G_ii = -i/2."""
    n = lattice.n_sites
    if n > max_sites:
        raise SizeCapError(
            f"lattice has N = {n} sites, exceeding the configured cap "
            f"max_sites = {max_sites}")
    dist = distance_matrix(lattice)
    out = np.empty((n, n), dtype=complex)
    off = ~np.eye(n, dtype=bool)
    out[off] = green(kernel, lattice.k0d * dist[off])
    out[~off] = DIAGONAL
    return out
