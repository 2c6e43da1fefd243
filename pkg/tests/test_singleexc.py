"""Tests for the single-excitation dispersion, band gap, and finite modes."""
import numpy as np
import pytest

from oracles import literal_dispersion_sum
from wqed2d.core import DomainError, LatticeSpec, Momentum2
from wqed2d.kernels import CouplingKernel, green
from wqed2d.singleexc import (DispersionTable, band_gap, band_path,
                              bloch_momenta, bloch_vector, dispersion_td,
                              finite_modes, gap_closing_k0d,
                              near_superradiant_circle, single_exc_scaling)

WG = CouplingKernel.WAVEGUIDE_2D

# frozen at grid_n=301, l_sum=300 (defaults); regeneration: band_gap(0.5*pi)
GAP_05PI = 1.0764463723104983


def test_matches_literal_sum():
    k0d = 0.52 * np.pi
    table = DispersionTable(k0d, l_sum=50)
    gfn = lambda z: complex(green(WG, z))
    for kx, ky in [(0.0, 0.0), (0.7, 0.0), (np.pi, np.pi), (1.3, -2.1)]:
        ref = literal_dispersion_sum(kx, ky, k0d, 50, gfn)
        fast = table.points([kx], [ky])[0]
        assert abs(ref - fast) < 1e-12


def test_even_in_k():
    k0d = 0.5 * np.pi
    a = dispersion_td(Momentum2(0.3 * np.pi, 0.7 * np.pi), k0d)
    b = dispersion_td(Momentum2(-0.3 * np.pi, -0.7 * np.pi), k0d)
    assert abs(a.as_complex() - b.as_complex()) < 1e-12


def test_c4v_invariance():
    table = DispersionTable(0.52 * np.pi)
    rng = np.random.default_rng(23)
    for _ in range(25):
        kx, ky = rng.uniform(-np.pi, np.pi, 2)
        base = table.points([kx], [ky])[0]
        for ax, ay in [(ky, kx), (-kx, ky), (kx, -ky), (-ky, -kx)]:
            assert abs(table.points([ax], [ay])[0] - base) < 1e-10


def test_grid_matches_points():
    table = DispersionTable(0.7 * np.pi, l_sum=60)
    ax = np.array([-1.0, 0.3, 2.0])
    grid = table.grid_real(ax, ax) + 1j * table.grid_imag(ax, ax)
    for i, kx in enumerate(ax):
        for j, ky in enumerate(ax):
            assert abs(grid[i, j] - table.points([kx], [ky])[0]) < 1e-12


def test_divergence_grows_with_sum_size():
    k0d = 0.52 * np.pi
    on_ring = Momentum2(k0d, 0.0)
    vals = [abs(dispersion_td(on_ring, k0d, l_sum=ls).re) for ls in (50, 100, 200)]
    assert vals[0] < vals[1] < vals[2]
    assert near_superradiant_circle(on_ring, k0d)
    assert not near_superradiant_circle(Momentum2(0.0, 0.0), k0d)


def test_decay_nonnegative_on_grid():
    ax = np.linspace(-np.pi, np.pi, 41)
    for f in (0.3, 0.52, 1.2):
        table = DispersionTable(f * np.pi, l_sum=120)
        decay = -2.0 * table.grid_imag(ax, ax)
        assert decay.min() > -1e-8


def test_band_path_corners():
    samples = band_path(0.5 * np.pi, n_per_segment=40, l_sum=60)
    assert len(samples) == 121
    assert (samples[0].k.kx, samples[0].k.ky) == (0.0, 0.0)
    assert (samples[40].k.kx, samples[40].k.ky) == (np.pi, 0.0)
    assert (samples[80].k.kx, samples[80].k.ky) == (np.pi, np.pi)
    assert (samples[-1].k.kx, samples[-1].k.ky) == (0.0, 0.0)
    s = np.array([b.s for b in samples])
    assert (np.diff(s) > 0).all()
    assert any(b.near_divergence for b in samples)
    assert all(b.decay >= -1e-8 for b in samples)


def test_band_gap_open_below_closing():
    gap = band_gap(0.5 * np.pi)
    assert gap > 0.0
    assert abs(gap - GAP_05PI) < 1e-6 * GAP_05PI


def test_band_gap_closed_above():
    assert band_gap(1.1 * np.pi) == 0.0


def test_band_gap_pairwise_shrinks():
    assert band_gap(0.6 * np.pi) > band_gap(0.9 * np.pi) > 0.0


def test_gap_closing_location():
    kc = gap_closing_k0d(0.9 * np.pi, 1.1 * np.pi)
    assert abs(kc - np.pi) <= 0.05 * np.pi


def test_gap_closing_bracket_validation():
    with pytest.raises(DomainError):
        gap_closing_k0d(1.05 * np.pi, 1.2 * np.pi)   # already closed at lo
    with pytest.raises(DomainError):
        gap_closing_k0d(0.5 * np.pi, 0.7 * np.pi)    # still open at hi


def test_finite_modes_basics():
    lattice = LatticeSpec(L=3, k0d=0.52 * np.pi)
    modes = finite_modes(lattice)
    assert len(modes) == 9
    # sorted by real part, unit norms, labels inside the BZ
    res = [m.energy.re for m in modes]
    assert res == sorted(res)
    for m in modes:
        assert abs(np.linalg.norm(m.amplitudes) - 1.0) < 1e-12
        assert m.energy.decay > -1e-8
        assert abs(m.quasimomentum.kx) <= np.pi + 1e-12
    # trace identity: sum of decays equals atom number
    assert abs(sum(m.energy.decay for m in modes) - 9.0) < 1e-10


def test_finite_modes_relabeling_invariance():
    # eigenvalue set must not depend on atom ordering
    lattice = LatticeSpec(L=4, k0d=0.7 * np.pi)
    from wqed2d.kernels import coupling_matrix
    g = coupling_matrix(lattice, WG)
    rng = np.random.default_rng(5)
    perm = rng.permutation(16)
    ev1 = np.sort_complex(np.linalg.eigvals(g))
    ev2 = np.sort_complex(np.linalg.eigvals(g[np.ix_(perm, perm)]))
    assert np.abs(ev1 - ev2).max() < 1e-8


def test_bloch_basics():
    lattice = LatticeSpec(L=4, k0d=0.5 * np.pi)
    ks = bloch_momenta(lattice)
    assert len(ks) == 16
    assert len({(k.kx, k.ky) for k in ks}) == 16
    # plane waves at distinct discrete momenta are orthonormal
    basis = np.stack([bloch_vector(lattice, k) for k in ks])
    gram = basis.conj() @ basis.T
    assert np.abs(gram - np.eye(16)).max() < 1e-12


def test_m_mode_darker_than_gamma_at_l10():
    k0d = 0.52 * np.pi
    gamma = single_exc_scaling(Momentum2(0.0, 0.0), k0d, (6, 8, 10))
    m = single_exc_scaling(Momentum2(np.pi, np.pi), k0d, (6, 8, 10))
    assert m.decays[-1] < gamma.decays[-1]
    assert m.fit.exponent < gamma.fit.exponent < 0.0
    assert all(o > 0.5 for o in m.overlaps + gamma.overlaps)


def test_scaling_validation():
    with pytest.raises(DomainError):
        single_exc_scaling(Momentum2(np.pi, np.pi), 0.5 * np.pi, (4, 6))
    with pytest.raises(DomainError):
        single_exc_scaling(Momentum2(np.pi, np.pi), 0.5 * np.pi, (4, 5, 6))
