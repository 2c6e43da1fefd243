"""Core domain types: lattice geometry, momenta, energies, run configuration.

All lengths are measured in units of the lattice constant d, momenta in units
of 1/d, and energies/decay rates in units of the single-emitter rate of the
active coupling kernel.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np


# --------------------------------------------------------------------------
# errors
# --------------------------------------------------------------------------

class DomainError(ValueError):
    """A physically/mathematically invalid request (CLI exit code 1)."""


class SizeCapError(DomainError):
    """Requested problem size exceeds the configured memory cap."""


class PoleProximityError(DomainError):
    """An energy argument fell too close to a sampled continuum energy."""


class ConvergenceError(DomainError):
    """An iterative solver failed to converge."""


class UsageError(ValueError):
    """Malformed user input (CLI exit code 2)."""


# --------------------------------------------------------------------------
# pi-suffixed numbers ("0.52pi" -> 0.52*pi)
# --------------------------------------------------------------------------

def parse_pi(value) -> float:
    """Parse a float that may carry a 'pi' suffix: "0.52pi" -> 0.52*math.pi.

    Plain numbers pass through unchanged.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        s = value.strip().lower()
        factor = 1.0
        if s.endswith("pi"):
            s = s[:-2].strip()
            factor = math.pi
            if s in ("", "+"):
                return factor
            if s == "-":
                return -factor
        try:
            return float(s) * factor
        except ValueError:
            raise UsageError(f"cannot parse number {value!r}") from None
    raise UsageError(f"cannot parse number {value!r}")


# --------------------------------------------------------------------------
# lattice
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeSpec:
    """Square L x L atomic array with dimensionless spacing parameter k0d.

    Site n sits at position (ix, iy) = (n % L, n // L) in units of d, so the
    flat site order is row-major in iy. With this ordering the separation
    x_j - x_i of any index-ordered pair i < j lies in the canonical half-plane
    (r_y > 0, or r_y = 0 and r_x > 0).
    """

    L: int
    k0d: float

    def __post_init__(self):
        if not isinstance(self.L, int) or isinstance(self.L, bool) or self.L < 2:
            raise DomainError(f"L must be an integer >= 2, got {self.L!r}")
        k0d = float(self.k0d)
        if not math.isfinite(k0d) or k0d <= 0.0:
            raise DomainError(f"k0d must be finite and > 0, got {self.k0d!r}")
        object.__setattr__(self, "k0d", k0d)

    @property
    def n_sites(self) -> int:
        return self.L * self.L

    def positions(self) -> np.ndarray:
        """(N, 2) array of site coordinates in units of d."""
        ix, iy = np.meshgrid(np.arange(self.L), np.arange(self.L), indexing="xy")
        return np.column_stack([ix.ravel(), iy.ravel()]).astype(float)

    def site_index(self, ix: int, iy: int) -> int:
        if not (0 <= ix < self.L and 0 <= iy < self.L):
            raise DomainError(f"site ({ix},{iy}) outside {self.L}x{self.L} lattice")
        return iy * self.L + ix

    def site_xy(self, n: int) -> tuple[int, int]:
        if not (0 <= n < self.n_sites):
            raise DomainError(f"site index {n} outside lattice")
        return (n % self.L, n // self.L)


def distance(i: int, j: int, lattice: LatticeSpec) -> float:
    """Euclidean distance between sites i and j in units of d."""
    xi, yi = lattice.site_xy(i)
    xj, yj = lattice.site_xy(j)
    return math.hypot(xj - xi, yj - yi)


def distance_matrix(lattice: LatticeSpec) -> np.ndarray:
    """(N, N) matrix of pairwise site distances in units of d."""
    pos = lattice.positions()
    diff = pos[:, None, :] - pos[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


# --------------------------------------------------------------------------
# momenta and energies
# --------------------------------------------------------------------------

_BZ_TOL = 1e-9


@dataclass(frozen=True)
class Momentum2:
    """In-plane quasi-momentum (kx, ky), units 1/d, inside the first BZ."""

    kx: float
    ky: float

    def __post_init__(self):
        kx, ky = float(self.kx), float(self.ky)
        if not (math.isfinite(kx) and math.isfinite(ky)):
            raise DomainError(f"momentum must be finite, got ({self.kx}, {self.ky})")
        if abs(kx) > math.pi + _BZ_TOL or abs(ky) > math.pi + _BZ_TOL:
            raise DomainError(
                f"momentum ({kx}, {ky}) outside first BZ [-pi, pi]^2")
        object.__setattr__(self, "kx", kx)
        object.__setattr__(self, "ky", ky)

    @classmethod
    def gamma(cls) -> "Momentum2":
        return cls(0.0, 0.0)

    @classmethod
    def x_point(cls) -> "Momentum2":
        return cls(math.pi, 0.0)

    @classmethod
    def m(cls) -> "Momentum2":
        return cls(math.pi, math.pi)

    @property
    def norm(self) -> float:
        return math.hypot(self.kx, self.ky)


@dataclass(frozen=True)
class ComplexEnergy:
    """Complex eigenenergy E = re + i*im of the effective Hamiltonian."""

    re: float
    im: float

    @property
    def decay(self) -> float:
        """Decay rate gamma = -2 Im E (units of the kernel rate)."""
        return -2.0 * self.im

    def as_complex(self) -> complex:
        return complex(self.re, self.im)


def bz_axis(n: int) -> np.ndarray:
    """1D axis of the offset n x n BZ grid: k_i = -pi + (i + 1/2) * 2pi/n.

    The half-cell offset keeps the grid clear of the high-symmetry points and
    (generically) of the |k| = k0 divergence circle, while the sample set is
    exactly closed under k -> -k.
    """
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise DomainError(f"grid size must be a positive integer, got {n!r}")
    return -math.pi + (np.arange(n) + 0.5) * (2.0 * math.pi / n)


def enumerate_bz_grid(n: int) -> list[Momentum2]:
    """Offset BZ grid as a row-major list (kx outer loop, ky inner)."""
    if not isinstance(n, int) or isinstance(n, bool) or n < 2:
        raise DomainError(f"BZ grid needs n >= 2, got {n!r}")
    ax = bz_axis(n)
    return [Momentum2(kx, ky) for kx in ax for ky in ax]


# --------------------------------------------------------------------------
# run configuration
# --------------------------------------------------------------------------

# fields that accept "Xpi" strings in config files / CLI
_PI_FIELDS = {"k0d", "k0d_min", "k0d_max"}
_PI_LIST_FIELDS = {"k0d_list"}


@dataclass(frozen=True)
class RunConfig:
    """Flat, losslessly JSON-round-trippable bundle of run parameters.

    Every CLI subcommand reads the subset of fields it needs; unknown config
    keys are rejected (typo protection). All fields are scalars, strings or
    flat tuples, so the JSON form is a flat object with snake_case keys.
    """

    # problem selection
    kernel: str = "waveguide"          # "waveguide" | "freespace"
    l: int | None = None               # lattice side for finite systems
    k0d: float | None = None
    point: str | None = None           # "gamma" | "x" | "m" | "kx,ky"

    # grids and truncations
    l_sum: int = 300                   # thermodynamic dispersion sum size
    bz_grid_n: int = 301               # single-excitation BZ sampling
    q_grid_n: int = 301                # two-excitation relative-momentum grid
    l_r: int = 40                      # relative-coordinate basis truncation
    r_max: int = 40                    # bound-state wavefunction radius
    n_path: int = 60                   # samples per band-path segment

    # sweeps
    k0d_min: float | None = None
    k0d_max: float | None = None
    steps: int = 41
    k0d_list: tuple[float, ...] | None = None
    sizes: tuple[int, ...] | None = None

    # dynamics
    ell: int = 1
    site: int | None = None            # flat index of first excited atom
    t_max: float = 300.0
    n_times: int = 121

    # thresholds / caps
    gap_floor: float = 0.05
    zero_window: float = 0.2
    two_exc_gap_floor: float = 0.05
    two_exc_zero_window: float = 0.5
    annulus_cells: float = 2.0
    ipr_percentile: float = 99.0
    nodal_mass_max: float = 0.05
    gap_margin: float = 1e-3
    max_sites: int = 400
    max_pair_dim: int = 10296

    # execution / output
    output: str | None = None
    threads: int | None = None
    figures: bool = False
    svg: bool = False

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in dataclasses.fields(cls))

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.field_names())
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(
                f"unknown config key(s): {', '.join(unknown)} "
                f"(known keys: {', '.join(sorted(known))})")
        clean = {}
        for key, value in data.items():
            if value is None:
                clean[key] = None
                continue
            if key in _PI_FIELDS:
                value = parse_pi(value)
            elif key in _PI_LIST_FIELDS:
                value = tuple(parse_pi(v) for v in value)
            elif isinstance(value, list):
                value = tuple(value)
            clean[key] = value
        return cls(**clean)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config must be a flat JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def replace(self, **kwargs) -> "RunConfig":
        return dataclasses.replace(self, **kwargs)
