"""Zeroth-order Bessel functions J0 and Y0 on the real half-line.

These are the only special functions the coupling kernels need. The
implementation delegates to scipy's Cephes-based routines (standard
polynomial/rational + asymptotic scheme, relative accuracy comfortably below
1e-12 away from zeros); this module owns the domain contract, and the test
suite pins the values against an independent arbitrary-precision series
oracle.
"""
from __future__ import annotations

import numpy as np
from scipy import special

from .core import DomainError

__all__ = ["bessel_j0", "bessel_y0"]


def _validated(z, *, name: str, minimum_exclusive: float | None):
    arr = np.asarray(z, dtype=float)
    if np.isnan(arr).any():
        raise DomainError(f"{name}: argument contains NaN")
    if not np.isfinite(arr).all():
        raise DomainError(f"{name}: argument must be finite")
    if minimum_exclusive is None:
        if (arr < 0).any():
            raise DomainError(f"{name}: radial argument must be >= 0")
    elif (arr <= minimum_exclusive).any():
        raise DomainError(f"{name}: argument must be > {minimum_exclusive}")
    return arr


def bessel_j0(z):
    """J0(z) for real z >= 0; scalar in -> float out, array in -> array out."""
    arr = _validated(z, name="bessel_j0", minimum_exclusive=None)
    out = special.j0(arr)
    return float(out) if np.isscalar(z) or np.ndim(z) == 0 else out


def bessel_y0(z):
    """Y0(z) for real z > 0 (logarithmically divergent at 0+)."""
    arr = _validated(z, name="bessel_y0", minimum_exclusive=0.0)
    out = special.y0(arr)
    return float(out) if np.isscalar(z) or np.ndim(z) == 0 else out
