"""Impurity model for two-excitation bound states.

In the thermodynamic limit the hardcore constraint acts as an infinite
on-site repulsion at relative coordinate r = 0 for each center-of-mass
momentum K. The free pair continuum is

    eps2(K, q) = eps1(q) + eps1(K - q)

(real parts; decay drops out of the continuum limit), and bound states are
the poles of the impurity Green function, i.e. the roots of

    F(E) = (1/Nq) * sum_q 1 / (E - eps2(K, q)) = 0

inside a gap of the continuum. F decreases strictly from +inf to -inf
across any sample-free energy interval, so the in-gap root is unique and
bracketed by construction. The (unnormalized) bound-state amplitude at
relative coordinate r is G0(r, E) = (1/Nq) * sum_q e^{i q.r} / (E - eps2).

Samples within a narrow annulus of either divergence ring (|q| = k0 or
|K - q| = k0) are excluded throughout: exactly on a ring the triangular
regularization of the single-excitation sum rounds the pole through
spurious finite mid-band values (the true limit diverges there), and a
grid point falling near-exactly on a ring would otherwise inject an
artificial continuum sample into the middle of a genuine gap. Away from
that sliver the excluded region contributes ~1/|eps2| -> 0 to the sums,
so dropping it leaves F and G0 essentially unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import DomainError, Momentum2, PoleProximityError, bz_axis
from .kernels import CouplingKernel
from .singleexc import _table

__all__ = ["PairDispersion", "pair_dispersion", "two_exc_gap",
           "two_exc_gap_closing", "bound_state_energy", "BoundStateSolution",
           "bound_state", "mean_separation_scan", "SeparationScan"]


def _ring_distance(x, y, k0d: float) -> np.ndarray:
    """Distance from (x, y) to the periodic divergence ring set.

    The dispersion is 2 pi periodic, so its divergences sit on every
    reciprocal image |k - G| = k0d; shifted arguments like K - q can also
    leave the first zone. The 3 x 3 image block covers both for k0d < 2 pi.
    """
    best = None
    for gx in (-2.0 * np.pi, 0.0, 2.0 * np.pi):
        for gy in (-2.0 * np.pi, 0.0, 2.0 * np.pi):
            d = np.abs(np.hypot(x - gx, y - gy) - k0d)
            best = d if best is None else np.minimum(best, d)
    return best


class PairDispersion:
    """Free two-excitation continuum at fixed center-of-mass momentum.

    Tabulates eps2(K, q) on the offset q_grid_n x q_grid_n relative-momentum
    grid, with ring-annulus samples masked out (see module docstring). The
    sorted attained energies drive gap detection; the masked grid drives
    Green-function sums (phases stay separable because masking only zeroes
    entries of the weight matrix).
    """

    def __init__(self, K: Momentum2, k0d: float, *, q_grid_n: int = 301,
                 l_sum: int = 300,
                 kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D,
                 annulus_cells: float = 2.0):
        if q_grid_n < 16:
            raise DomainError("q_grid_n must be >= 16")
        self.K = K
        self.k0d = float(k0d)
        self.q_grid_n = int(q_grid_n)
        self.kernel = kernel
        self.l_sum = int(l_sum)
        ax = bz_axis(self.q_grid_n)
        table = _table(kernel, self.k0d, self.l_sum)
        self.q_axis = ax
        self.eps2 = table.grid_real(ax, ax) + table.grid_real(K.kx - ax, K.ky - ax)
        w = annulus_cells * (2.0 * np.pi / self.q_grid_n)
        d_q = _ring_distance(ax[:, None], ax[None, :], self.k0d)
        d_s = _ring_distance(K.kx - ax[:, None], K.ky - ax[None, :], self.k0d)
        self.keep = (d_q >= w) & (d_s >= w)
        if not self.keep.any():
            raise DomainError("annulus exclusion removed every sample; "
                              "increase q_grid_n or reduce annulus_cells")
        self.n_kept = int(self.keep.sum())
        self.sorted_energies = np.sort(self.eps2[self.keep])

    def largest_gap(self, *, zero_window: float = 0.5) -> tuple[float, float] | None:
        """Widest sample-free energy interval overlapping [-w, +w], or None.

        The window keeps the search near the resonance region where bound
        states live and rejects spurious wide spacings between sparse
        samples deep in the divergent tails of the continuum.
        """
        v = self.sorted_energies
        lo, hi = v[:-1], v[1:]
        ok = (lo <= zero_window) & (hi >= -zero_window)
        if not ok.any():
            return None
        widths = (hi - lo)[ok]
        j = int(np.argmax(widths))
        return (float(lo[ok][j]), float(hi[ok][j]))

    def resolvent_sum(self, e: float) -> float:
        """F(E): mean of 1/(E - eps2) over kept relative-momentum samples."""
        return float(np.sum(self.keep / (e - self.eps2))) / self.n_kept

    def greens_vector(self, e: float, r_max: int, *, pole_tol: float = 1e-6):
        """G0(r, E) on the full window r in [-r_max, r_max]^2.

        Returns (rs, g0): rs is the (M, 2) integer separation list (row-major
        in r_y), g0 the matching complex amplitudes. Raises
        PoleProximityError if E sits within pole_tol of a kept continuum
        sample (G0 is then dominated by one artificial pole).
        """
        if r_max < 1:
            raise DomainError("r_max must be >= 1")
        den = np.where(self.keep, e - self.eps2, np.inf)
        j = np.argmin(np.abs(den))
        if abs(den.flat[j]) < pole_tol:
            iy, ix = divmod(int(j), self.q_grid_n)
            raise PoleProximityError(
                f"E = {e!r} within {pole_tol} of continuum sample "
                f"eps2(q = ({self.q_axis[iy]:.6f}, {self.q_axis[ix]:.6f})) "
                f"= {self.eps2.flat[j]!r}")
        r = np.arange(-r_max, r_max + 1)
        phase = np.exp(1j * np.outer(r, self.q_axis))     # (2r+1, n)
        a = 1.0 / den                                     # zeroed at inf
        g = phase @ a @ phase.T / self.n_kept             # g[ix, iy]
        rx, ry = np.meshgrid(r, r, indexing="xy")
        rs = np.column_stack([rx.ravel(), ry.ravel()])
        return rs, g.T.ravel()


@lru_cache(maxsize=4)
def _pair(kernel: CouplingKernel, k0d: float, kx: float, ky: float,
          q_grid_n: int, l_sum: int, annulus_cells: float) -> PairDispersion:
    return PairDispersion(Momentum2(kx, ky), k0d, q_grid_n=q_grid_n,
                          l_sum=l_sum, kernel=kernel, annulus_cells=annulus_cells)


def pair_dispersion(K: Momentum2, k0d: float, *, q_grid_n: int = 301,
                    l_sum: int = 300,
                    kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D,
                    annulus_cells: float = 2.0) -> PairDispersion:
    """Cached accessor for the fixed-K pair continuum."""
    return _pair(kernel, float(k0d), float(K.kx), float(K.ky),
                 int(q_grid_n), int(l_sum), float(annulus_cells))


def two_exc_gap(K: Momentum2, k0d: float, *, q_grid_n: int = 301, l_sum: int = 300,
                kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D,
                annulus_cells: float = 2.0, floor: float = 0.05,
                zero_window: float = 0.5) -> tuple[float, float] | None:
    """(lo, hi) of the two-excitation continuum gap, or None if below floor."""
    pd = pair_dispersion(K, k0d, q_grid_n=q_grid_n, l_sum=l_sum, kernel=kernel,
                         annulus_cells=annulus_cells)
    iv = pd.largest_gap(zero_window=zero_window)
    if iv is None or iv[1] - iv[0] < floor:
        return None
    return iv


def two_exc_gap_closing(K: Momentum2, lo: float, hi: float, *, xtol: float = 1e-3,
                        q_grid_n: int = 301, l_sum: int = 300,
                        kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D,
                        annulus_cells: float = 2.0, floor: float = 0.05,
                        zero_window: float = 0.5) -> float:
    """Bisect for the lattice constant where the fixed-K pair gap closes."""
    kw = dict(q_grid_n=q_grid_n, l_sum=l_sum, kernel=kernel,
              annulus_cells=annulus_cells, floor=floor, zero_window=zero_window)
    if not (0 < lo < hi):
        raise DomainError(f"need 0 < lo < hi, got ({lo!r}, {hi!r})")
    if two_exc_gap(K, lo, **kw) is None:
        raise DomainError(f"pair gap already closed at lo = {lo!r}")
    if two_exc_gap(K, hi, **kw) is not None:
        raise DomainError(f"pair gap still open at hi = {hi!r}")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if two_exc_gap(K, mid, **kw) is not None:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bound_state_energy(K: Momentum2, k0d: float, *, q_grid_n: int = 301,
                       l_sum: int = 300,
                       kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D,
                       annulus_cells: float = 2.0, floor: float = 0.05,
                       zero_window: float = 0.5,
                       xtol: float = 1e-10) -> float | None:
    """In-gap root of the impurity resolvent sum F(E) at COM momentum K.

    Returns None when the continuum gap is absent (the hardcore defect then
    has no isolated level to bind) or when F does not change sign across it.
    """
    iv = two_exc_gap(K, k0d, q_grid_n=q_grid_n, l_sum=l_sum, kernel=kernel,
                     annulus_cells=annulus_cells, floor=floor,
                     zero_window=zero_window)
    if iv is None:
        return None
    if iv[1] - iv[0] < 10.0 * xtol:
        raise DomainError(
            f"gap ({iv[0]!r}, {iv[1]!r}) narrower than 10 bisection "
            f"resolutions; use a denser q_grid")
    pd = pair_dispersion(K, k0d, q_grid_n=q_grid_n, l_sum=l_sum, kernel=kernel,
                         annulus_cells=annulus_cells)
    pad = 1e-9 * (iv[1] - iv[0])
    a, b = iv[0] + pad, iv[1] - pad
    if not (pd.resolvent_sum(a) > 0.0 > pd.resolvent_sum(b)):
        return None
    while b - a > xtol:
        mid = 0.5 * (a + b)
        if pd.resolvent_sum(mid) > 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


@dataclass(frozen=True)
class BoundStateSolution:
    """Impurity-model bound state at one (K, k0d) working point."""

    K: Momentum2
    k0d: float
    energy: float
    gap: tuple[float, float]
    rs: np.ndarray              # (M, 2) relative coordinates, |r_i| <= r_max
    p: np.ndarray               # normalized |G0(r, E)|^2
    mean_separation: float      # sum_r p(r) |r|
    amplitudes: np.ndarray      # G0(r, E), unnormalized

    @property
    def ipr(self) -> float:
        return 1.0 / float(self.p @ self.p)


def bound_state(K: Momentum2, k0d: float, *, r_max: int = 40, q_grid_n: int = 301,
                l_sum: int = 300,
                kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D,
                annulus_cells: float = 2.0, floor: float = 0.05,
                zero_window: float = 0.5,
                xtol: float = 1e-10) -> BoundStateSolution | None:
    """Bound-state energy plus relative-coordinate probability profile.

    None when no bound state exists at this (K, k0d).
    """
    kw = dict(q_grid_n=q_grid_n, l_sum=l_sum, kernel=kernel,
              annulus_cells=annulus_cells, floor=floor, zero_window=zero_window)
    iv = two_exc_gap(K, k0d, **kw)
    if iv is None:
        return None
    e = bound_state_energy(K, k0d, xtol=xtol, **kw)
    if e is None:
        return None
    pd = pair_dispersion(K, k0d, q_grid_n=q_grid_n, l_sum=l_sum, kernel=kernel,
                         annulus_cells=annulus_cells)
    rs, g = pd.greens_vector(e, r_max)
    w = np.abs(g) ** 2
    p = w / w.sum()
    sep = float(p @ np.hypot(rs[:, 0], rs[:, 1]))
    return BoundStateSolution(K=K, k0d=k0d, energy=e, gap=iv, rs=rs, p=p,
                              mean_separation=sep, amplitudes=g)


@dataclass(frozen=True)
class SeparationScan:
    """Bound-state size versus lattice constant at fixed COM momentum.

    Entries without a bound state are marked absent (NaN separation/energy).
    """

    K: Momentum2
    k0d: tuple[float, ...]
    present: tuple[bool, ...]
    mean_separation: tuple[float, ...]
    energy: tuple[float, ...]
    gap_width: tuple[float, ...]

    @property
    def minimum_k0d(self) -> float:
        """Lattice constant of minimal bound-state extent (present entries)."""
        sep = np.where(self.present, self.mean_separation, np.inf)
        if not any(self.present):
            raise DomainError("no bound state anywhere in the scan")
        return self.k0d[int(np.argmin(sep))]


def mean_separation_scan(K: Momentum2, k0d_values, *, r_max: int = 40,
                         q_grid_n: int = 301, l_sum: int = 300,
                         kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D,
                         annulus_cells: float = 2.0, floor: float = 0.05,
                         zero_window: float = 0.5) -> SeparationScan:
    """Sweep bound-state mean separation over lattice constants."""
    k0d_values = tuple(float(v) for v in k0d_values)
    if len(k0d_values) < 2:
        raise DomainError("mean_separation_scan: need at least 2 k0d values")
    present, seps, energies, widths = [], [], [], []
    for v in k0d_values:
        sol = bound_state(K, v, r_max=r_max, q_grid_n=q_grid_n, l_sum=l_sum,
                          kernel=kernel, annulus_cells=annulus_cells,
                          floor=floor, zero_window=zero_window)
        present.append(sol is not None)
        seps.append(sol.mean_separation if sol else float("nan"))
        energies.append(sol.energy if sol else float("nan"))
        widths.append(sol.gap[1] - sol.gap[0] if sol else 0.0)
    return SeparationScan(K=K, k0d=k0d_values, present=tuple(present),
                          mean_separation=tuple(seps), energy=tuple(energies),
                          gap_width=tuple(widths))
