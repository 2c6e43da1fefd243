"""Non-Hermitian time evolution in the two-excitation sector.

The effective Hamiltonian is complex symmetric, so the Schroedinger
equation i d|psi>/dt = H |psi> loses norm over time; the lost weight is
population leaving the two-excitation sector. Propagation goes through the
full eigendecomposition with its biorthogonal dual basis,

    |psi(t)> = sum_s exp(-i E_s t) <L_s|psi(0)> |R_s>,

which is exact up to the conditioning of the eigenvector matrix. When that
conditioning is too poor to trust (near-defective spectra), evolution falls
back to adaptive direct integration targeting the same accuracy.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import ConvergenceError, DomainError, LatticeSpec
from .twoexc import PairBasis

__all__ = [
    "EigenDecomposition", "Trajectory", "correlator", "decompose",
    "default_time_grid", "eigen_projections", "evolve",
    "initial_pair_state",
]

_COND_CAP = 1e8
_NORM_TOL = 1e-8


@dataclass(frozen=True)
class EigenDecomposition:
    """Spectral data of a non-Hermitian matrix: H = right @ diag @ left.

    Rows of `left` are the dual (left) eigenvectors normalized against the
    right ones, left @ right = 1. `cond` is the condition number of the
    right-eigenvector matrix; it bounds how much biorthogonal expansion
    coefficients amplify rounding error.
    """

    energies: np.ndarray
    right: np.ndarray
    left: np.ndarray
    cond: float

    @property
    def dim(self) -> int:
        return self.energies.shape[0]

    @classmethod
    def from_spectrum(cls, states) -> "EigenDecomposition":
        """Build from diagonalize_pairs output, reusing its eigenvectors."""
        if not states:
            raise DomainError("empty spectrum")
        right = np.stack([s.amplitudes for s in states], axis=1)
        energies = np.array([s.energy.as_complex() for s in states])
        return cls._assemble(energies, right)

    @classmethod
    def _assemble(cls, energies, right) -> "EigenDecomposition":
        try:
            left = np.linalg.inv(right)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"defective eigenbasis: {exc}") from exc
        cond = float(np.linalg.cond(right))
        return cls(energies=energies, right=right, left=left, cond=cond)


def decompose(h: np.ndarray) -> EigenDecomposition:
    """Full eigendecomposition of a dense non-Hermitian matrix."""
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DomainError("expected a square matrix")
    evals, evecs = np.linalg.eig(h)
    return EigenDecomposition._assemble(evals, evecs)


@dataclass(frozen=True)
class Trajectory:
    """Sampled evolution: times (units 1/gamma), state rows, their norms."""

    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray


def default_time_grid(t_max: float = 300.0, n_times: int = 121) -> np.ndarray:
    """Uniform [0, t_max] grid joined with the snapshot times {0, 20, 300}."""
    if t_max <= 0:
        raise DomainError("t_max must be positive")
    if n_times < 2:
        raise DomainError("n_times must be >= 2")
    grid = np.linspace(0.0, float(t_max), int(n_times))
    snaps = np.array([t for t in (0.0, 20.0, 300.0) if t <= t_max])
    return np.unique(np.concatenate([grid, snaps]))


def initial_pair_state(basis: PairBasis, ell: int = 1, *,
                       site: int | None = None) -> np.ndarray:
    """Unit vector exciting two bulk atoms at diagonal separation (ell, ell).

    `site` indexes the first atom (defaults to the lattice center); the
    partner sits ell steps away along both axes.
    """
    lattice: LatticeSpec = basis.lattice
    ell = int(ell)
    if ell < 1:
        raise DomainError("ell must be >= 1")
    if site is None:
        half = (lattice.L - 1) // 2
        site = lattice.site_index(half, half)
    x, y = lattice.site_xy(int(site))
    partner = lattice.site_index(x + ell, y + ell)
    psi = np.zeros(basis.dim, dtype=complex)
    psi[basis.index(int(site), partner)] = 1.0
    return psi


def evolve(h, psi0: np.ndarray, times, *,
           cond_cap: float = _COND_CAP) -> Trajectory:
    """Propagate psi0 through the sampled times (all >= 0, increasing).

    `h` may be the Hamiltonian matrix or a precomputed EigenDecomposition.
    Falls back to direct integration (with a warning) when the eigenbasis
    condition number exceeds cond_cap.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("times must be a nonempty 1D grid")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise DomainError("times must be nonnegative and strictly increasing")
    psi0 = np.asarray(psi0, dtype=complex)

    if isinstance(h, EigenDecomposition):
        dec = h
    else:
        h = np.asarray(h)
        if h.shape != (psi0.size, psi0.size):
            raise DomainError("state dimension does not match the matrix")
        dec = decompose(h)
    if psi0.shape != (dec.dim,):
        raise DomainError("state dimension does not match the decomposition")

    if dec.cond > cond_cap:
        warnings.warn(
            f"eigenbasis condition number {dec.cond:.3e} exceeds "
            f"{cond_cap:.1e}; falling back to direct integration",
            RuntimeWarning, stacklevel=2)
        states = _integrate(dec, psi0, times)
    else:
        coeff = dec.left @ psi0
        phases = np.exp(-1j * dec.energies[:, None] * times[None, :])
        states = (dec.right @ (coeff[:, None] * phases)).T

    norms = np.linalg.norm(states, axis=1)
    scale = max(norms[0], 1.0)
    if np.any(np.diff(norms) > _NORM_TOL * scale):
        raise ConvergenceError("norm increased along the trajectory")
    return Trajectory(times=times, states=states, norms=norms)


def _integrate(dec: EigenDecomposition, psi0: np.ndarray,
               times: np.ndarray) -> np.ndarray:
    h = dec.right @ (dec.energies[:, None] * dec.left)
    sol = solve_ivp(lambda t, y: -1j * (h @ y), (0.0, float(times[-1])),
                    psi0, t_eval=times, method="DOP853",
                    rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise ConvergenceError(f"direct integration failed: {sol.message}")
    return sol.y.T


def correlator(state: np.ndarray, basis: PairBasis, ell: int) -> float:
    """Equal-time density-density correlator at diagonal offset (ell, ell).

    C_ell = sum_i |c_{i, i+(ell,ell)}|^2 / sum_{pairs} |c|^2, the conditional
    probability of finding the two excitations at that separation given that
    both are still in the array. A pure pair state at separation (ell, ell)
    gives 1; any other separation gives 0.
    """
    ell = int(ell)
    if ell < 1:
        raise DomainError("ell must be >= 1")
    state = np.asarray(state)
    total = float(np.sum(np.abs(state) ** 2))
    if total <= 0.0:
        raise DomainError("correlator of a zero state")
    lattice: LatticeSpec = basis.lattice
    acc = 0.0
    for x in range(lattice.L - ell):
        for y in range(lattice.L - ell):
            i = lattice.site_index(x, y)
            j = lattice.site_index(x + ell, y + ell)
            acc += float(np.abs(state[basis.index(i, j)]) ** 2)
    return acc / total


def eigen_projections(psi: np.ndarray, dec: EigenDecomposition) -> np.ndarray:
    """Weights |<L_s|psi>|^2 of the biorthogonal eigenstate expansion.

    Returned weights are normalized to sum to 1, so they rank how the state
    distributes over eigenstates; the bare coefficients alpha_s = <L_s|psi>
    satisfy psi = sum_s alpha_s |R_s> without any such normalization.
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (dec.dim,):
        raise DomainError("state dimension does not match the decomposition")
    if dec.cond > _COND_CAP:
        warnings.warn(
            f"eigenbasis condition number {dec.cond:.3e}; projection "
            "weights may be unreliable", RuntimeWarning, stacklevel=2)
    w = np.abs(dec.left @ psi) ** 2
    total = w.sum()
    if total <= 0.0:
        raise DomainError("projections of a zero state")
    return w / total
