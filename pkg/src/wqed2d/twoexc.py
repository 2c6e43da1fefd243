"""Two-excitation sector: pair basis, Hamiltonians, continuum, classification.

The finite-lattice problem lives in the hardcore pair basis |i<j> (no double
occupation). Matrix elements follow from the quadratic hopping Hamiltonian:
a pair couples to another pair only when they share a site, the moving
excitation carrying the single-excitation coupling; the diagonal is exactly
-i (two renormalized self-terms).

The thermodynamic counterpart at fixed center-of-mass momentum K is the
relative-coordinate Hamiltonian on the half-plane of canonical separations
(r_y > 0, or r_y = 0 with r_x >= 0). Folding the even relative wavefunction
onto that half-plane gives, for representatives r, r':

    H[r, r'] = 2 sum_{eps = +-1} cos(K.(r + eps r')/2) Re G(k0d |r + eps r'|)

where the |r + eps r'| = 0 self-term is renormalized to 0. The factor 2 makes
the plane-wave spectrum equal to Re eps1(K/2 + q) + Re eps1(K/2 - q), i.e.
exactly the unbound-pair continuum; dropping it would halve every energy.
The hardcore constraint is the removal of the r = (0, 0) amplitude (the
doubly-excited-site state is null), so the origin is excluded from the basis
by default; keeping it (include_origin=True) inserts a zero-diagonal defect
level and is only useful for inspecting the unconstrained problem.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import impurity
from .analysis import axes_mass, diagonal_mass
from .analysis import ipr as ipr_value
from .core import (ComplexEnergy, ConvergenceError, DomainError, LatticeSpec,
                   Momentum2, SizeCapError)
from .kernels import CouplingKernel, coupling_matrix, green

__all__ = ["PairBasis", "TwoExcState", "RelCoordBasis", "STATE_CLASSES",
           "build_pair_hamiltonian", "diagonalize_pairs", "pair_spectrum",
           "relative_hamiltonian", "in_gap_eigenvalues", "relative_bound_state",
           "scattering_continuum",
           "classify_states", "com_point_weight", "select_bound_state",
           "select_repulsive_state", "select_localized_resonance"]

STATE_CLASSES = ("bound", "repulsive_I", "repulsive_II",
                 "scattering_resonance", "continuum")


class PairBasis:
    """Bijection between pair index p and site pairs (i < j), lexicographic.

    Also caches the canonical relative separation of every pair (folded to
    r_y > 0, or r_y = 0 with r_x >= 0) and the pair center positions, which
    drive relative-coordinate marginals and center-of-mass weights.
    """

    def __init__(self, lattice: LatticeSpec):
        self.lattice = lattice
        n = lattice.n_sites
        i, j = np.triu_indices(n, k=1)
        self.pairs = np.column_stack([i, j])
        self.dim = self.pairs.shape[0]
        self._index = np.full((n, n), -1, dtype=np.int64)
        self._index[i, j] = np.arange(self.dim)
        self._index[j, i] = np.arange(self.dim)
        pos = lattice.positions()
        sep = (pos[j] - pos[i]).astype(np.int64)
        flip = (sep[:, 1] < 0) | ((sep[:, 1] == 0) & (sep[:, 0] < 0))
        sep[flip] *= -1
        self.separations = sep
        self.centers = 0.5 * (pos[i] + pos[j])
        self.rel_vectors, self.rel_index = np.unique(sep, axis=0,
                                                     return_inverse=True)

    def index(self, i: int, j: int) -> int:
        if i == j:
            raise DomainError("pair basis has no doubly excited site")
        p = int(self._index[i, j])
        if p < 0:
            raise DomainError(f"site pair ({i}, {j}) outside the lattice")
        return p

    def pair(self, p: int) -> tuple[int, int]:
        i, j = self.pairs[p]
        return int(i), int(j)

    def relative_marginal(self, amplitudes) -> tuple[np.ndarray, np.ndarray]:
        """(rs, p): probability mass on canonical separations, normalized."""
        w = np.abs(np.asarray(amplitudes)) ** 2
        acc = np.zeros(self.rel_vectors.shape[0])
        np.add.at(acc, self.rel_index, w)
        total = acc.sum()
        if total <= 0.0:
            raise DomainError("relative_marginal: zero-norm amplitude vector")
        return self.rel_vectors, acc / total


@dataclass(frozen=True)
class TwoExcState:
    """One eigenstate of the two-excitation sector."""

    energy: ComplexEnergy
    amplitudes: np.ndarray      # unit norm over PairBasis
    ipr: float                  # on the relative-coordinate marginal
    label: str = "continuum"

    @property
    def decay(self) -> float:
        return self.energy.decay


def build_pair_hamiltonian(lattice: LatticeSpec,
                           kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D,
                           *, max_pair_dim: int = 10296,
                           max_sites: int = 400) -> np.ndarray:
    """Complex symmetric pair-basis matrix; rows/columns ordered as PairBasis.

    H[(a,b),(c,d)] = G_ac d_bd + G_ad d_bc + G_bc d_ad + G_bd d_ac, diagonal
    exactly -i. Dense storage (the spectrum is taken in full), sparse fill.
    """
    basis = PairBasis(lattice)
    if basis.dim > max_pair_dim:
        raise SizeCapError(
            f"pair basis dimension {basis.dim} exceeds the configured cap "
            f"max_pair_dim = {max_pair_dim}")
    g = coupling_matrix(lattice, kernel, max_sites=max_sites)
    n = lattice.n_sites
    h = np.zeros((basis.dim, basis.dim), dtype=complex)
    sites = np.arange(n)
    idx = basis._index
    for p in range(basis.dim):
        a, b = basis.pairs[p]
        others = sites[(sites != a) & (sites != b)]
        h[p, idx[a, others]] += g[b, others]
        h[p, idx[b, others]] += g[a, others]
        h[p, p] = g[a, a] + g[b, b]
    return h


def _marginals(basis: PairBasis, vectors: np.ndarray) -> np.ndarray:
    """Column-wise relative marginals of unit-norm states, (n_r, n_states)."""
    w = np.abs(vectors) ** 2
    acc = np.zeros((basis.rel_vectors.shape[0], vectors.shape[1]))
    np.add.at(acc, basis.rel_index, w)
    return acc / acc.sum(axis=0, keepdims=True)


def diagonalize_pairs(h: np.ndarray, basis: PairBasis, *,
                      residual_tol: float = 1e-8) -> list[TwoExcState]:
    """Full non-Hermitian spectrum as TwoExcState list, sorted by Re energy."""
    if h.shape != (basis.dim, basis.dim):
        raise DomainError("hamiltonian does not match the pair basis")
    evals, evecs = np.linalg.eig(h)
    residual = np.max(np.abs(h @ evecs - evecs * evals[None, :]))
    scale = np.linalg.norm(h, "fro")
    if residual > residual_tol * scale:
        raise ConvergenceError(
            f"eigendecomposition residual {residual:.3e} exceeds "
            f"{residual_tol:.1e} * |H|_F = {residual_tol * scale:.3e}")
    order = np.lexsort((evals.imag, evals.real))
    evals, evecs = evals[order], evecs[:, order]
    p = _marginals(basis, evecs)
    iprs = 1.0 / np.sum(p * p, axis=0)
    return [TwoExcState(energy=ComplexEnergy(float(e.real), float(e.imag)),
                        amplitudes=evecs[:, s], ipr=float(iprs[s]))
            for s, e in enumerate(evals)]


@lru_cache(maxsize=2)
def _spectrum(lattice: LatticeSpec, kernel: CouplingKernel,
              max_pair_dim: int) -> tuple[PairBasis, tuple[TwoExcState, ...]]:
    h = build_pair_hamiltonian(lattice, kernel, max_pair_dim=max_pair_dim)
    basis = PairBasis(lattice)
    return basis, tuple(diagonalize_pairs(h, basis))


def pair_spectrum(lattice: LatticeSpec,
                  kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D,
                  *, max_pair_dim: int = 10296
                  ) -> tuple[PairBasis, tuple[TwoExcState, ...]]:
    """Cached build + diagonalization (the expensive step in every sweep)."""
    return _spectrum(lattice, kernel, int(max_pair_dim))


class RelCoordBasis:
    """Canonical half-plane of relative separations, truncated at l_r.

    Vectors r = (r_x, r_y) with r_y in [0, l_r - 1], r_x in
    [-(l_r - 1), l_r - 1], keeping only r_x >= 0 on the r_y = 0 row so that
    r and -r never both appear. The origin (the null doubly-excited-site
    state) is excluded unless include_origin is set.
    """

    def __init__(self, l_r: int, *, include_origin: bool = False):
        if l_r < 10:
            raise DomainError("l_r must be >= 10 for a meaningful truncation")
        self.l_r = int(l_r)
        self.include_origin = bool(include_origin)
        rows = [(rx, 0) for rx in range(0 if include_origin else 1, l_r)]
        rows += [(rx, ry) for ry in range(1, l_r)
                 for rx in range(-(l_r - 1), l_r)]
        self.vectors = np.asarray(rows, dtype=np.int64)
        self.dim = self.vectors.shape[0]


def relative_hamiltonian(K: Momentum2, k0d: float, l_r: int, *,
                         kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D,
                         include_origin: bool = False) -> np.ndarray:
    """Real symmetric relative-coordinate matrix over RelCoordBasis(l_r).

    See the module docstring for the folded matrix element and the factor-2
    normalization pinning the continuum to the unbound-pair dispersion.
    """
    if k0d <= 0:
        raise DomainError(f"k0d must be > 0, got {k0d!r}")
    basis = RelCoordBasis(l_r, include_origin=include_origin)
    rs = basis.vectors
    off = 2 * (l_r - 1)
    span = np.arange(-off, off + 1)
    rad = np.hypot(span[:, None], span[None, :])
    table = np.zeros_like(rad)
    nz = rad > 0
    table[nz] = np.real(green(kernel, k0d * rad[nz]))

    h = np.empty((basis.dim, basis.dim))
    block = max(1, int(2**22 // max(basis.dim, 1)))
    for start in range(0, basis.dim, block):
        stop = min(start + block, basis.dim)
        rx, ry = rs[start:stop, 0][:, None], rs[start:stop, 1][:, None]
        out = np.zeros((stop - start, basis.dim))
        for sign in (1, -1):
            vx = rx + sign * rs[None, :, 0]
            vy = ry + sign * rs[None, :, 1]
            out += np.cos(0.5 * (K.kx * vx + K.ky * vy)) \
                * table[vx + off, vy + off]
        h[start:stop] = 2.0 * out
    return h


def in_gap_eigenvalues(h_rel: np.ndarray, gap: tuple[float, float], *,
                       margin: float = 1e-3) -> np.ndarray:
    """Eigenvalues of the (symmetric) relative Hamiltonian strictly in a gap.

    On the truncated open-boundary r-grid this includes levels localized at
    the truncation edge alongside the genuine bound state; use
    relative_bound_state to select the bulk-localized level.
    """
    if gap[1] <= gap[0]:
        raise DomainError(f"empty gap interval {gap!r}")
    evals = np.linalg.eigvalsh(h_rel)
    return evals[(evals > gap[0] + margin) & (evals < gap[1] - margin)]


def relative_bound_state(K: Momentum2, k0d: float, l_r: int,
                         gap: tuple[float, float], *,
                         kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D,
                         margin: float = 1e-3, core_radius: float | None = None,
                         min_core_mass: float = 0.5
                         ) -> tuple[float, np.ndarray]:
    """In-gap level of relative_hamiltonian localized near the origin.

    Truncating the relative-coordinate plane with open boundaries scatters
    spurious edge-localized levels across the gap; the physical bound state
    is the one whose probability sits near r = 0. Returns (energy, p) with p
    the probability over RelCoordBasis(l_r) of the in-gap eigenvector with
    maximal mass inside |r| <= core_radius (default l_r / 8). Raises when no
    in-gap level carries at least min_core_mass there.
    """
    if gap[1] <= gap[0]:
        raise DomainError(f"empty gap interval {gap!r}")
    basis = RelCoordBasis(l_r)
    h = relative_hamiltonian(K, k0d, l_r, kernel=kernel)
    evals, evecs = np.linalg.eigh(h)
    sel = (evals > gap[0] + margin) & (evals < gap[1] - margin)
    if not sel.any():
        raise DomainError(
            f"no eigenvalue strictly inside the gap {gap!r} at l_r = {l_r}")
    radius = (l_r / 8.0) if core_radius is None else float(core_radius)
    core = np.hypot(basis.vectors[:, 0], basis.vectors[:, 1]) <= radius
    p = np.abs(evecs[:, sel]) ** 2
    core_mass = p[core].sum(axis=0)
    best = int(np.argmax(core_mass))
    if core_mass[best] < min_core_mass:
        raise DomainError(
            f"largest in-gap core mass {core_mass[best]:.3f} below "
            f"{min_core_mass!r}: only truncation-edge levels in the gap")
    return float(evals[sel][best]), p[:, best]


def scattering_continuum(K: Momentum2, k0d: float, *, q_grid_n: int = 301,
                         l_sum: int = 300,
                         kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D,
                         annulus_cells: float = 2.0) -> np.ndarray:
    """Sorted unbound-pair energies eps1(q) + eps1(K - q) on the offset grid."""
    pd = impurity.pair_dispersion(K, k0d, q_grid_n=q_grid_n, l_sum=l_sum,
                                  kernel=kernel, annulus_cells=annulus_cells)
    return pd.sorted_energies.copy()


def _radial_log_r2(rs: np.ndarray, p: np.ndarray) -> float:
    """R^2 of a log-linear (exponential) fit to the radial profile of p.

    Profile = mean mass per integer-rounded radius bin, over bins with
    radius >= 1 and mass above floor. Localized gap states fit well
    (R^2 near 1); oscillating in-band tails do not.
    """
    radii = np.rint(np.hypot(rs[:, 0], rs[:, 1])).astype(int)
    prof = np.bincount(radii, weights=p)
    counts = np.bincount(radii)
    good = (counts > 0) & (np.arange(prof.size) >= 1) & (prof > 1e-14)
    if good.sum() < 3:
        return 0.0
    x = np.arange(prof.size)[good].astype(float)
    y = np.log(prof[good] / counts[good])
    coef, res = np.polyfit(x, y, 1, full=True)[:2]
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0.0:
        return 1.0
    ss_res = float(res[0]) if res.size else 0.0
    return 1.0 - ss_res / ss_tot


def classify_states(states, gap: tuple[float, float] | None, *,
                    basis: PairBasis, ipr_percentile: float = 99.0,
                    nodal_mass_max: float = 0.05, gap_margin: float = 1e-3,
                    tail_r2_floor: float = 0.85) -> list[TwoExcState]:
    """Label states as bound / repulsive_I / repulsive_II / resonance / continuum.

    Deterministic reading of the qualitative selection criteria:
    * bound: energy inside the gap (margin) and localized (ipr below the
      (100 - ipr_percentile) percentile of the spectrum's ipr values);
    * repulsive_I / repulsive_II: in-band, decay in the most subradiant
      (100 - ipr_percentile) percentile, and relative-coordinate mass on the
      axes (I) or the main diagonal (II) below nodal_mass_max — the smaller
      suppressed mass wins when both qualify;
    * scattering_resonance: in-band, localized as above, and a radial profile
      that is a poor exponential (log-linear fit R^2 below tail_r2_floor);
    * continuum otherwise.
    """
    states = list(states)
    if not states:
        raise DomainError("classify_states: empty spectrum")
    iprs = np.array([s.ipr for s in states])
    decays = np.array([s.decay for s in states])
    loc_cut = np.percentile(iprs, 100.0 - ipr_percentile)
    sub_cut = np.percentile(decays, 100.0 - ipr_percentile)
    out = []
    for s in states:
        in_gap = (gap is not None
                  and gap[0] + gap_margin < s.energy.re < gap[1] - gap_margin)
        localized = s.ipr <= loc_cut
        label = "continuum"
        if in_gap and localized:
            label = "bound"
        elif not in_gap:
            rs, p = basis.relative_marginal(s.amplitudes)
            if s.decay <= sub_cut:
                ax, dg = axes_mass(rs, p), diagonal_mass(rs, p)
                if ax < nodal_mass_max and ax <= dg:
                    label = "repulsive_I"
                elif dg < nodal_mass_max:
                    label = "repulsive_II"
            if label == "continuum" and localized \
                    and _radial_log_r2(rs, p) < tail_r2_floor:
                label = "scattering_resonance"
        out.append(replace(s, label=label))
    return out


def com_point_weight(basis: PairBasis, amplitudes: np.ndarray,
                     K: Momentum2) -> float:
    """Center-of-mass Fourier weight of a pair state at momentum K.

    Partial Fourier transform over the pair centers at fixed canonical
    separation; comparative score (higher = more COM-K character), used to
    label finite-lattice states by their dominant COM point.
    """
    amps = np.asarray(amplitudes)
    phase = np.exp(-1j * (K.kx * basis.centers[:, 0]
                          + K.ky * basis.centers[:, 1]))
    acc = np.zeros(basis.rel_vectors.shape[0], dtype=complex)
    np.add.at(acc, basis.rel_index, phase * amps)
    norm = float(np.sum(np.abs(amps) ** 2))
    if norm <= 0.0:
        raise DomainError("com_point_weight: zero-norm amplitude vector")
    return float(np.sum(np.abs(acc) ** 2)) / norm


_COM_POINTS = (Momentum2.gamma(), Momentum2.x_point(), Momentum2.m())


def _com_weights(basis: PairBasis, vectors: np.ndarray,
                 points) -> np.ndarray:
    """(n_points, n_states) COM Fourier weights of unit-norm state columns."""
    out = np.empty((len(points), vectors.shape[1]))
    for k, q in enumerate(points):
        phase = np.exp(-1j * (q.kx * basis.centers[:, 0]
                              + q.ky * basis.centers[:, 1]))
        acc = np.zeros((basis.rel_vectors.shape[0], vectors.shape[1]),
                       dtype=complex)
        np.add.at(acc, basis.rel_index, phase[:, None] * vectors)
        out[k] = np.sum(np.abs(acc) ** 2, axis=0)
    return out


def select_bound_state(states, basis: PairBasis, K: Momentum2, *,
                       q_grid_n: int = 301, l_sum: int = 300,
                       kernel: CouplingKernel = CouplingKernel.WAVEGUIDE_2D
                       ) -> tuple[TwoExcState, float]:
    """Finite-size bound state at COM point K, matched to the impurity model.

    Open boundaries quantize the center of mass into box modes rather than
    plane waves, so plane-wave overlap alone is unreliable. Selection is
    two-stage: keep states whose COM Fourier weight is largest at K among
    the high-symmetry points, then maximize the Bhattacharyya fidelity
    sum_r sqrt(p_state(r) p_BS(r)) between the state's relative-coordinate
    marginal and the impurity profile |G0(r, E_BS)|^2 at the same (K, k0d).
    Returns (state, fidelity). Raises when no impurity bound state exists.
    """
    states = list(states)
    if not states:
        raise DomainError("select_bound_state: empty spectrum")
    sol = impurity.bound_state(K, basis.lattice.k0d,
                               r_max=max(40, basis.lattice.L),
                               q_grid_n=q_grid_n, l_sum=l_sum, kernel=kernel)
    if sol is None:
        raise DomainError(
            f"no impurity bound state at K = ({K.kx:.6f}, {K.ky:.6f}), "
            f"k0d = {basis.lattice.k0d!r}; nothing to select against")
    r_max = int(np.max(np.abs(sol.rs)))
    lookup = np.zeros((2 * r_max + 1, 2 * r_max + 1))
    lookup[sol.rs[:, 0] + r_max, sol.rs[:, 1] + r_max] = sol.p
    ref = lookup[basis.rel_vectors[:, 0] + r_max,
                 basis.rel_vectors[:, 1] + r_max]
    total = ref.sum()
    if total <= 0.0:
        raise DomainError("impurity profile vanishes on the lattice window")
    ref = ref / total

    points = list(_COM_POINTS)
    if not any(abs(q.kx - K.kx) < 1e-12 and abs(q.ky - K.ky) < 1e-12
               for q in points):
        points.append(K)
    target = next(k for k, q in enumerate(points)
                  if abs(q.kx - K.kx) < 1e-12 and abs(q.ky - K.ky) < 1e-12)
    vectors = np.column_stack([s.amplitudes for s in states])
    weights = _com_weights(basis, vectors, points)
    labels = np.argmax(weights, axis=0)
    candidates = np.flatnonzero(labels == target)
    if candidates.size == 0:
        raise DomainError(
            f"no state with dominant COM weight at "
            f"({K.kx:.6f}, {K.ky:.6f})")
    best, best_fid = None, -1.0
    for idx in candidates:
        _, p = basis.relative_marginal(states[idx].amplitudes)
        fid = float(np.sqrt(p * ref).sum())
        if fid > best_fid:
            best, best_fid = states[idx], fid
    return best, best_fid


def select_repulsive_state(states, basis: PairBasis, *, nodal: str,
                           nodal_mass_max: float = 0.05,
                           max_decay: float = 0.5) -> TwoExcState:
    """Lowest-decay subradiant state with suppressed nodal mass.

    nodal: "axes" (repulsive type I) or "diagonal" (type II). Candidates are
    scanned in order of increasing decay rate and must stay below max_decay;
    the first whose relative-coordinate marginal puts less than
    nodal_mass_max on the nodal set wins. Energy windows are deliberately
    not used: a repulsive state of one center-of-mass sector may sit inside
    the spectral gap of another sector, so gap exclusion rejects the very
    states being sought. Bound states never qualify because their mass
    concentrates near r = 0, covering the nodal sets. Raises when no
    subradiant suppressed state exists (the branch has not formed).
    """
    if nodal not in ("axes", "diagonal"):
        raise DomainError(f"nodal must be 'axes' or 'diagonal', got {nodal!r}")
    mass = axes_mass if nodal == "axes" else diagonal_mass
    for s in sorted(states, key=lambda s: s.decay):
        if s.decay >= max_decay:
            break
        rs, p = basis.relative_marginal(s.amplitudes)
        if mass(rs, p) < nodal_mass_max:
            return s
    raise DomainError(
        f"no subradiant state with {nodal} mass below {nodal_mass_max!r}")


def select_localized_resonance(states, basis: PairBasis, point: Momentum2, *,
                               exclude=()) -> TwoExcState:
    """Most-localized in-band state whose dominant COM point is `point`.

    Candidate COM labels are the high-symmetry points; the state whose
    weight is largest at `point` (among those labeled `point`) with the
    smallest ipr is returned. Used for scattering-resonance decay scans.
    """
    target = next((q for q in _COM_POINTS
                   if abs(q.kx - point.kx) < 1e-12
                   and abs(q.ky - point.ky) < 1e-12), None)
    if target is None:
        raise DomainError("point must be one of the high-symmetry COM points")
    best = None
    for s in sorted(states, key=lambda s: s.ipr):
        if any(lo < s.energy.re < hi for lo, hi in exclude):
            continue
        weights = [com_point_weight(basis, s.amplitudes, q)
                   for q in _COM_POINTS]
        if int(np.argmax(weights)) == _COM_POINTS.index(target):
            best = s
            break
    if best is None:
        raise DomainError(
            f"no in-band state labeled by COM point "
            f"({point.kx:.6f}, {point.ky:.6f})")
    return best
