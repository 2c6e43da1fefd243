"""Observables and fits: IPR, power-law scaling, relative-coordinate marginals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError

__all__ = ["PowerLawFit", "powerlaw_fit", "ipr", "relative_marginal",
           "axes_mass", "diagonal_mass"]


@dataclass(frozen=True)
class PowerLawFit:
    """Result of an unweighted least-squares fit y ~ A * N^exponent."""

    exponent: float
    stderr: float
    r_squared: float
    amplitude: float


def powerlaw_fit(sizes, values) -> PowerLawFit:
    """Fit log y = const + exponent * log N by ordinary least squares.

    Needs at least 3 strictly positive samples; stderr is the standard
    error of the slope from the fit residuals.
    """
    n = np.asarray(sizes, dtype=float)
    y = np.asarray(values, dtype=float)
    if n.shape != y.shape or n.ndim != 1:
        raise DomainError("powerlaw_fit: sizes and values must be equal-length 1D")
    if n.size < 3:
        raise DomainError(f"powerlaw_fit: need >= 3 points, got {n.size}")
    if (n <= 0).any() or (y <= 0).any() or not np.isfinite(y).all():
        raise DomainError("powerlaw_fit: sizes and values must be positive finite")
    x = np.log(n)
    ly = np.log(y)
    xm = x - x.mean()
    sxx = float(xm @ xm)
    slope = float(xm @ ly) / sxx
    intercept = float(ly.mean() - slope * x.mean())
    resid = ly - (intercept + slope * x)
    dof = n.size - 2
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    stderr = float(np.sqrt(sigma2 / sxx))
    sst = float((ly - ly.mean()) @ (ly - ly.mean()))
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0
    return PowerLawFit(exponent=slope, stderr=stderr, r_squared=r2,
                       amplitude=float(np.exp(intercept)))


def ipr(p) -> float:
    """Inverse participation ratio 1 / sum_r p_r^2 of a probability vector.

    p must be |psi(r)|^2-like: nonnegative and normalized to 1. Ranges from 1
    (delta distribution, maximally localized) to len(p) (uniform).
    """
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("ipr: need a nonempty 1D probability vector")
    if (arr < -1e-12).any():
        raise DomainError("ipr: probabilities must be nonnegative")
    total = float(arr.sum())
    if abs(total - 1.0) > 1e-8:
        raise DomainError(f"ipr: input not normalized (sum = {total!r})")
    return 1.0 / float(arr @ arr)


def relative_marginal(amplitudes, separations) -> tuple[np.ndarray, np.ndarray]:
    """Relative-coordinate probability marginal of a two-excitation state.

    `amplitudes` are the pair-basis coefficients, `separations` the (dim, 2)
    integer array of canonical pair separations (r_y > 0, or r_y = 0 with
    r_x > 0); both come from PairBasis. Probability |c|^2 is summed over the
    centre-of-mass position at fixed separation. Returns (rs, p) with rs the
    (M, 2) unique canonical separations and p normalized to 1.
    """
    c = np.asarray(amplitudes)
    seps = np.asarray(separations)
    if c.ndim != 1 or seps.shape != (c.size, 2):
        raise DomainError("relative_marginal: amplitude/separation shape mismatch")
    w = np.abs(c) ** 2
    total = float(w.sum())
    if total <= 0:
        raise DomainError("relative_marginal: zero state")
    rs, inverse = np.unique(seps, axis=0, return_inverse=True)
    p = np.zeros(len(rs))
    np.add.at(p, inverse, w)
    return rs, p / total


def axes_mass(rs: np.ndarray, p: np.ndarray) -> float:
    """Probability mass on the r_x = 0 or r_y = 0 axes."""
    on = (rs[:, 0] == 0) | (rs[:, 1] == 0)
    return float(p[on].sum())


def diagonal_mass(rs: np.ndarray, p: np.ndarray) -> float:
    """Probability mass on the main diagonal r_x = r_y."""
    on = rs[:, 0] == rs[:, 1]
    return float(p[on].sum())
