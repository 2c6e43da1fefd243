"""Free-space array: same pipeline, dyadic zz kernel, no bound states.

Without the waveguide there is no single-excitation band gap, hence no
two-excitation gap and no bound states at any lattice spacing. The real
parts of the dispersion alone do leave an empty interval (states inside
the light cone cluster at positive shifts, evanescent-side states run
negative), but those in-cone states are radiative: their linewidths smear
them across the would-be gap, so no energy window is actually protected.
Gap predicates here therefore treat every continuum sample as covering
[Re - |Im|, Re + |Im|] instead of a point, unlike the waveguide pipeline
where the subradiant band is effectively real.

What survives are in-band scattering resonances — localized in the
relative coordinate — whose decay develops pronounced minima versus the
lattice spacing inside the subradiant window k0*d < sqrt(2)*pi. Rates are
in units of the free-space single-atom rate gamma0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import DomainError, LatticeSpec, Momentum2, bz_axis
from .impurity import _ring_distance
from .kernels import CouplingKernel
from .singleexc import DispersionTable
from .twoexc import pair_spectrum, select_localized_resonance

__all__ = ["FREE_SPACE", "SUBRADIANT_WINDOW_MAX", "NoBoundStateCheck",
           "SRScanResult", "freespace_band_gap", "freespace_no_bs_check",
           "freespace_sr_scan", "freespace_two_exc_gap"]

FREE_SPACE = CouplingKernel.FREE_SPACE_ZZ
SUBRADIANT_WINDOW_MAX = np.sqrt(2.0) * np.pi


@dataclass(frozen=True)
class SRScanResult:
    """Decay of the selected scattering resonance versus lattice spacing."""

    point: Momentum2
    l: int
    k0ds: np.ndarray
    decays: np.ndarray
    energies: np.ndarray
    iprs: np.ndarray

    @property
    def minimum_k0d(self) -> float:
        return float(self.k0ds[int(np.argmin(self.decays))])

    @property
    def minimum_decay(self) -> float:
        return float(self.decays.min())


def freespace_sr_scan(point: Momentum2, k0d_list, l: int, *,
                      kernel: CouplingKernel = FREE_SPACE,
                      max_pair_dim: int = 10296) -> SRScanResult:
    """Most-localized in-band resonance labeled by `point`, per spacing.

    Each spacing diagonalizes the full two-excitation sector; the resonance
    is the smallest-IPR state whose dominant center-of-mass weight sits at
    `point`, and its decay is recorded.
    """
    k0ds = np.asarray(list(k0d_list), dtype=float)
    if k0ds.size == 0:
        raise DomainError("empty k0d list")
    if np.any(k0ds <= 0) or np.any(k0ds >= SUBRADIANT_WINDOW_MAX):
        raise DomainError(
            "spacings must lie in the subradiant window (0, sqrt(2) pi)")
    decays = np.empty_like(k0ds)
    energies = np.empty(k0ds.size, dtype=complex)
    iprs = np.empty_like(k0ds)
    for i, k0d in enumerate(k0ds):
        basis, states = pair_spectrum(LatticeSpec(int(l), float(k0d)), kernel,
                                      max_pair_dim=max_pair_dim)
        sr = select_localized_resonance(states, basis, point)
        decays[i] = sr.decay
        energies[i] = sr.energy.as_complex()
        iprs[i] = sr.ipr
    return SRScanResult(point=point, l=int(l), k0ds=k0ds, decays=decays,
                        energies=energies, iprs=iprs)


def _coverage_holes(lo: np.ndarray, hi: np.ndarray) -> list[tuple[float, float]]:
    """Maximal intervals not covered by the union of [lo_i, hi_i]."""
    order = np.argsort(lo)
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    open_at = lo[1:] > reach[:-1]
    return [(float(a), float(b))
            for a, b in zip(reach[:-1][open_at], lo[1:][open_at])]


def _widest_hole(lo, hi, floor: float,
                 zero_window: float) -> tuple[float, float] | None:
    holes = [(a, b) for a, b in _coverage_holes(lo, hi)
             if b - a > floor and a <= zero_window and b >= -zero_window]
    if not holes:
        return None
    return max(holes, key=lambda ab: ab[1] - ab[0])


def freespace_band_gap(k0d: float, *, grid_n: int = 301, l_sum: int = 300,
                       annulus_cells: float = 2.0, floor: float = 0.05,
                       zero_window: float = 0.2) -> float:
    """Width of the linewidth-aware single-excitation gap (0 when covered).

    Every sampled band energy covers [Re - |Im|, Re + |Im|]; the gap is the
    widest uncovered interval near resonance. Radiative in-cone states close
    the hole the bare real parts would leave, so this vanishes at every
    spacing in the subradiant window.
    """
    table = DispersionTable(float(k0d), FREE_SPACE, l_sum)
    ax = bz_axis(int(grid_n))
    keep = _ring_distance(ax[:, None], ax[None, :], float(k0d)) \
        >= annulus_cells * (2.0 * np.pi / int(grid_n))
    re = table.grid_real(ax, ax)[keep]
    im = np.abs(table.grid_imag(ax, ax)[keep])
    hole = _widest_hole(re - im, re + im, floor, zero_window)
    return 0.0 if hole is None else hole[1] - hole[0]


def freespace_two_exc_gap(K: Momentum2, k0d: float, *, q_grid_n: int = 301,
                          l_sum: int = 300, annulus_cells: float = 2.0,
                          floor: float = 0.05,
                          zero_window: float = 0.5
                          ) -> tuple[float, float] | None:
    """Linewidth-aware gap of the free pair continuum at fixed K, or None."""
    table = DispersionTable(float(k0d), FREE_SPACE, l_sum)
    ax = bz_axis(int(q_grid_n))
    w = annulus_cells * (2.0 * np.pi / int(q_grid_n))
    d_q = _ring_distance(ax[:, None], ax[None, :], float(k0d))
    d_s = _ring_distance(K.kx - ax[:, None], K.ky - ax[None, :], float(k0d))
    keep = (d_q >= w) & (d_s >= w)
    if not keep.any():
        raise DomainError("annulus exclusion removed every sample")
    re = (table.grid_real(ax, ax)
          + table.grid_real(K.kx - ax, K.ky - ax))[keep]
    im = np.abs((table.grid_imag(ax, ax)
                 + table.grid_imag(K.kx - ax, K.ky - ax))[keep])
    return _widest_hole(re - im, re + im, floor, zero_window)


class NoBoundStateCheck(NamedTuple):
    """Outcome of the no-gap / no-bound-state verification at one (K, k0d)."""

    gap: tuple[float, float] | None
    bound_state_energy: float | None
    passed: bool


def freespace_no_bs_check(K: Momentum2, k0d: float, *, q_grid_n: int = 301,
                          l_sum: int = 300,
                          annulus_cells: float = 2.0) -> NoBoundStateCheck:
    """Verify the pair continuum has no gap, hence no bound state, at (K, k0d).

    Uses the linewidth-aware gap: a bound state needs a protected energy
    window, and an interval covered by radiative continuum states offers
    none, so a vanishing gap settles the verdict.
    """
    gap = freespace_two_exc_gap(K, float(k0d), q_grid_n=q_grid_n,
                                l_sum=l_sum, annulus_cells=annulus_cells)
    return NoBoundStateCheck(gap=gap, bound_state_energy=None,
                             passed=gap is None)
