"""Tests for the two-excitation pair sector and relative-coordinate solver."""
import numpy as np
import pytest

from oracles import boson_pair_spectrum, spin_space_pair_hamiltonian
from wqed2d import impurity
from wqed2d.analysis import diagonal_mass
from wqed2d.core import (ComplexEnergy, DomainError, LatticeSpec, Momentum2,
                         SizeCapError)
from wqed2d.kernels import CouplingKernel, coupling_matrix, green
from wqed2d.twoexc import (PairBasis, RelCoordBasis, TwoExcState,
                           build_pair_hamiltonian, classify_states,
                           com_point_weight, diagonalize_pairs,
                           in_gap_eigenvalues, pair_spectrum,
                           relative_bound_state, relative_hamiltonian,
                           scattering_continuum, select_bound_state,
                           select_localized_resonance, select_repulsive_state)

WG = CouplingKernel.WAVEGUIDE_2D
GAMMA = Momentum2.gamma()
X = Momentum2.x_point()
M = Momentum2.m()

# frozen: impurity.bound_state_energy(M, 0.5*pi) at default 301^2 q grid
EBS_M_05PI = 0.6334447433832984
# frozen: relative_bound_state(M, 0.5*pi, 40, gap)[0]
EREL_M_05PI = 0.6340145976562231


@pytest.fixture(scope="module")
def l4():
    return pair_spectrum(LatticeSpec(4, 0.52 * np.pi), WG)


@pytest.fixture(scope="module")
def l6():
    return pair_spectrum(LatticeSpec(6, 0.52 * np.pi), WG)


@pytest.fixture(scope="module")
def gaps():
    k0d = 0.52 * np.pi
    return impurity.two_exc_gap(M, k0d), impurity.two_exc_gap(GAMMA, k0d)


def test_pair_basis_roundtrip():
    lat = LatticeSpec(3, 0.5 * np.pi)
    basis = PairBasis(lat)
    assert basis.dim == 36
    for p in range(basis.dim):
        i, j = basis.pair(p)
        assert i < j
        assert basis.index(i, j) == p
        assert basis.index(j, i) == p
    with pytest.raises(DomainError):
        basis.index(2, 2)
    # canonical separations live in the upper half-plane
    sep = basis.separations
    assert np.all((sep[:, 1] > 0) | ((sep[:, 1] == 0) & (sep[:, 0] >= 0)))
    pos = lat.positions()
    i, j = basis.pair(7)
    assert np.allclose(basis.centers[7], 0.5 * (pos[i] + pos[j]))


def test_pair_relative_marginal_normalized():
    basis = PairBasis(LatticeSpec(3, 0.5 * np.pi))
    amps = np.arange(1, basis.dim + 1, dtype=float)
    rs, p = basis.relative_marginal(amps)
    assert rs.shape == (len(p), 2)
    assert abs(p.sum() - 1.0) < 1e-12
    assert np.all(p >= 0)
    with pytest.raises(DomainError):
        basis.relative_marginal(np.zeros(basis.dim))


def test_matches_spin_space_oracle():
    lat = LatticeSpec(2, 0.52 * np.pi)
    h = build_pair_hamiltonian(lat, WG)
    ref = spin_space_pair_hamiltonian(coupling_matrix(lat, WG))
    assert np.max(np.abs(h - ref)) < 1e-12
    assert np.array_equal(h, h.T)
    assert np.all(np.diag(h) == -1j)


def test_matches_hardcore_boson_oracle():
    # on-site repulsion U leaves an O(1/U) doublon admixture; at U = 1e6 the
    # residual sits below 1e-6 for this lattice spacing
    lat = LatticeSpec(3, 1.3 * np.pi)
    h = build_pair_hamiltonian(lat, WG)
    mine = np.sort_complex(np.linalg.eigvals(h))
    # the oracle spectrum keeps the doublon branch near +U; the lowest
    # n(n-1)/2 levels are the hardcore sector
    ref = np.sort_complex(boson_pair_spectrum(coupling_matrix(lat, WG),
                                              u=1e6))[:len(mine)]
    assert np.max(np.abs(mine - ref)) < 1e-6


def test_boson_oracle_converges_as_inverse_u():
    lat = LatticeSpec(3, 0.52 * np.pi)
    g = coupling_matrix(lat, WG)
    mine = np.sort_complex(np.linalg.eigvals(build_pair_hamiltonian(lat, WG)))
    dev = [np.max(np.abs(
               mine - np.sort_complex(boson_pair_spectrum(g, u=u))[:len(mine)]))
           for u in (1e6, 1e7)]
    assert dev[1] < dev[0] / 5.0


def test_pair_size_cap():
    with pytest.raises(SizeCapError):
        build_pair_hamiltonian(LatticeSpec(13, 0.5 * np.pi), WG)


def test_trace_identity_and_passivity(l4):
    # sum of decay rates equals 2 * dim (trace of -2 Im H)
    basis, states = l4
    decays = np.array([s.decay for s in states])
    assert np.all(decays > -1e-8)
    assert abs(decays.sum() - 2 * basis.dim) < 1e-8 * basis.dim
    res = np.array([s.energy.re for s in states])
    assert np.all(np.diff(res) >= 0)


def test_spectrum_cached_and_deterministic():
    lat = LatticeSpec(3, 0.52 * np.pi)
    b1, s1 = pair_spectrum(lat, WG)
    b2, s2 = pair_spectrum(LatticeSpec(3, 0.52 * np.pi), WG)
    assert b1 is b2 and s1 is s2


def test_relabeling_leaves_spectrum_invariant():
    lat = LatticeSpec(3, 0.52 * np.pi)
    basis = PairBasis(lat)
    h = build_pair_hamiltonian(lat, WG)
    rng = np.random.default_rng(7)
    sigma = rng.permutation(lat.n_sites)
    perm = np.array([basis.index(sigma[a], sigma[b])
                     for a, b in (basis.pair(p) for p in range(basis.dim))])
    hp = h[np.ix_(perm, perm)]
    ev = np.sort_complex(np.linalg.eigvals(h))
    evp = np.sort_complex(np.linalg.eigvals(hp))
    assert np.max(np.abs(ev - evp)) < 1e-8


def test_deeply_subradiant_pair_exists(l6):
    _, states = l6
    assert min(s.decay for s in states) < 0.01


def test_diagonalize_rejects_mismatched_basis():
    h = build_pair_hamiltonian(LatticeSpec(3, 0.5 * np.pi), WG)
    with pytest.raises(DomainError):
        diagonalize_pairs(h, PairBasis(LatticeSpec(2, 0.5 * np.pi)))


def test_relcoord_basis_geometry():
    basis = RelCoordBasis(10)
    assert basis.dim == 9 * 19 + 9
    seen = {tuple(v) for v in basis.vectors}
    assert len(seen) == basis.dim
    assert (0, 0) not in seen
    assert not any((-vx, -vy) in seen for vx, vy in seen)
    with_origin = RelCoordBasis(10, include_origin=True)
    assert with_origin.dim == basis.dim + 1
    assert (0, 0) in {tuple(v) for v in with_origin.vectors}
    with pytest.raises(DomainError):
        RelCoordBasis(9)


def test_relative_hamiltonian_real_symmetric():
    K = Momentum2(0.4 * np.pi, 0.1 * np.pi)
    h = relative_hamiltonian(K, 0.5 * np.pi, 12)
    assert h.dtype == np.float64
    assert np.max(np.abs(h - h.T)) == 0.0
    with pytest.raises(DomainError):
        relative_hamiltonian(K, -0.5 * np.pi, 12)


def test_relative_hamiltonian_gamma_form():
    # at K = Gamma the element reduces to 2 [Re G(|r+r'|) + Re G(|r-r'|)]
    k0d = 0.5 * np.pi
    basis = RelCoordBasis(12)
    h = relative_hamiltonian(GAMMA, k0d, 12)

    def re_g(v):
        r = float(np.hypot(v[0], v[1]))
        return 0.0 if r == 0 else float(np.real(green(WG, k0d * r)))

    vecs = basis.vectors
    i = int(np.flatnonzero((vecs[:, 0] == 1) & (vecs[:, 1] == 0))[0])
    j = int(np.flatnonzero((vecs[:, 0] == 2) & (vecs[:, 1] == 1))[0])
    assert h[i, j] == pytest.approx(
        2 * (re_g(vecs[i] + vecs[j]) + re_g(vecs[i] - vecs[j])), abs=1e-14)
    assert h[j, j] == pytest.approx(2 * re_g(2 * vecs[j]), abs=1e-14)


def test_relative_hamiltonian_k_parity():
    K = Momentum2(0.4 * np.pi, 0.1 * np.pi)
    Kn = Momentum2(-0.4 * np.pi, -0.1 * np.pi)
    a = relative_hamiltonian(K, 0.5 * np.pi, 11)
    b = relative_hamiltonian(Kn, 0.5 * np.pi, 11)
    assert np.array_equal(a, b)


def test_relative_bound_state_matches_impurity_model():
    k0d = 0.5 * np.pi
    gap = impurity.two_exc_gap(M, k0d)
    e40, p40 = relative_bound_state(M, k0d, 40, gap)
    assert abs(e40 - EREL_M_05PI) < 1e-9
    assert abs(e40 - EBS_M_05PI) < 2e-2
    assert gap[0] < e40 < gap[1]
    assert abs(p40.sum() - 1.0) < 1e-10
    # doubling the truncation radius moves the level by far less than 1e-3
    e20, p20 = relative_bound_state(M, k0d, 20, gap)
    assert abs(e20 - e40) < 1e-6
    rr = np.hypot(*RelCoordBasis(20).vectors.T)
    assert p20[rr <= 5].sum() > 0.99


def test_relative_bound_state_errors():
    k0d = 0.5 * np.pi
    gap = impurity.two_exc_gap(M, k0d)
    with pytest.raises(DomainError, match="inside"):
        relative_bound_state(M, k0d, 20, (1e4, 1e4 + 1.0))
    with pytest.raises(DomainError, match="core mass"):
        relative_bound_state(M, k0d, 20, gap, min_core_mass=1.01)
    with pytest.raises(DomainError, match="empty"):
        relative_bound_state(M, k0d, 20, (1.0, -1.0))


def test_in_gap_eigenvalues_interior():
    k0d = 0.5 * np.pi
    gap = impurity.two_exc_gap(M, k0d)
    h = relative_hamiltonian(M, k0d, 20)
    evs = in_gap_eigenvalues(h, gap)
    assert np.all(evs > gap[0]) and np.all(evs < gap[1])
    assert np.min(np.abs(evs - EREL_M_05PI)) < 1e-6


def test_continuum_q_reflection_symmetry():
    # eps2(M, q) = eps2(M, K - q); the offset grid maps the reflection to an
    # index flip exactly
    pd = impurity.pair_dispersion(M, 0.5 * np.pi, q_grid_n=64, l_sum=120)
    flipped = pd.eps2[::-1, ::-1]
    assert np.max(np.abs(pd.eps2 - flipped)) < 1e-9
    assert np.array_equal(pd.keep, pd.keep[::-1, ::-1])


def test_scattering_continuum_bounds_gap():
    k0d = 0.6 * np.pi
    cont = scattering_continuum(M, k0d, q_grid_n=64, l_sum=120)
    gap = impurity.two_exc_gap(M, k0d, q_grid_n=64, l_sum=120)
    assert gap is not None
    assert not np.any((cont > gap[0]) & (cont < gap[1]))
    assert cont.ndim == 1 and np.all(np.diff(cont) >= 0)


def test_classify_bound_states_sit_in_gap(l4, gaps):
    basis, states = l4
    gap_m, _ = gaps
    labeled = classify_states(states, gap_m, basis=basis)
    counts = {}
    for s in labeled:
        counts[s.label] = counts.get(s.label, 0) + 1
        if s.label == "bound":
            assert gap_m[0] < s.energy.re < gap_m[1]
    assert counts.get("bound", 0) >= 1
    assert counts.get("continuum", 0) > 100


def test_classify_uniform_state_is_continuum(l4, gaps):
    basis, states = l4
    amps = np.ones(basis.dim) / np.sqrt(basis.dim)
    _, p = basis.relative_marginal(amps)
    uniform = TwoExcState(energy=ComplexEnergy(-0.5, -0.5), amplitudes=amps,
                          ipr=float(1.0 / np.sum(p ** 2)))
    labeled = classify_states(list(states) + [uniform], gaps[0], basis=basis)
    assert labeled[-1].label == "continuum"
    with pytest.raises(DomainError):
        classify_states([], gaps[0], basis=basis)


def test_com_point_weight_peaks_at_plane_wave_momentum(l4):
    basis, _ = l4
    phase = np.exp(1j * (M.kx * basis.centers[:, 0]
                         + M.ky * basis.centers[:, 1]))
    envelope = np.exp(-np.hypot(basis.separations[:, 0],
                                basis.separations[:, 1]))
    amps = phase * envelope
    w = {q: com_point_weight(basis, amps, q) for q in (GAMMA, X, M)}
    assert w[M] > 10 * max(w[GAMMA], w[X])
    with pytest.raises(DomainError):
        com_point_weight(basis, np.zeros(basis.dim), M)


def test_select_bound_state_small_lattices(l4, l6):
    basis4, states4 = l4
    bs_m4, fid_m4 = select_bound_state(states4, basis4, M)
    assert bs_m4.energy.re == pytest.approx(0.4885821503733552, abs=1e-9)
    assert fid_m4 > 0.7
    bs_g4, fid_g4 = select_bound_state(states4, basis4, GAMMA)
    assert bs_g4.energy.re == pytest.approx(2.321043019160461, abs=1e-9)
    assert fid_g4 > 0.99

    basis6, states6 = l6
    bs_m6, fid_m6 = select_bound_state(states6, basis6, M)
    assert bs_m6.energy.re == pytest.approx(0.46763313270764867, abs=1e-9)
    assert fid_m6 > fid_m4
    # decay shrinks with lattice size, and the M branch outlives the G branch
    assert bs_m6.decay < bs_m4.decay
    bs_g6, _ = select_bound_state(states6, basis6, GAMMA)
    assert bs_m6.decay < bs_g6.decay


def test_select_repulsive_state(l4, gaps):
    basis, states = l4
    rep2 = select_repulsive_state(states, basis, nodal="diagonal")
    assert rep2.energy.re == pytest.approx(-0.244066145503, abs=1e-9)
    assert rep2.decay == pytest.approx(6.518434468e-2, rel=1e-6)
    rs, p = basis.relative_marginal(rep2.amplitudes)
    assert diagonal_mass(rs, p) < 0.05
    # the selected state sits inside the M-sector two-excitation gap even
    # though its own center of mass is at G; energy-window exclusion would
    # reject it, which is why the selector filters on decay and nodal mass
    (m_lo, m_hi), _ = gaps
    assert m_lo < rep2.energy.re < m_hi
    with pytest.raises(DomainError):
        select_repulsive_state(states, basis, nodal="corner")
    # no axes-suppressed subradiant state exists on a 4x4 lattice
    with pytest.raises(DomainError):
        select_repulsive_state(states, basis, nodal="axes")
    with pytest.raises(DomainError):
        select_repulsive_state(states, basis, nodal="diagonal",
                               max_decay=1e-9)
    with pytest.raises(DomainError):
        select_repulsive_state(states, basis, nodal="diagonal",
                               nodal_mass_max=0.0)


def test_repulsive_branches_beyond_l4(l6):
    basis, states = l6
    rep2 = select_repulsive_state(states, basis, nodal="diagonal")
    rep1 = select_repulsive_state(states, basis, nodal="axes")
    assert rep2.energy.re == pytest.approx(-0.088460231367, abs=1e-9)
    # the axes branch has formed by 6x6 and decays faster than the
    # diagonal one at this size
    assert rep1.energy.re == pytest.approx(-0.091619526588, abs=1e-9)
    assert rep1.decay > rep2.decay


def test_select_localized_resonance(l4):
    basis, states = l4
    res = select_localized_resonance(states, basis, M)
    w = [com_point_weight(basis, res.amplitudes, q) for q in (GAMMA, X, M)]
    assert int(np.argmax(w)) == 2
    with pytest.raises(DomainError):
        select_localized_resonance(states, basis, Momentum2(0.1, 0.2))
    with pytest.raises(DomainError):
        select_localized_resonance(states, basis, M,
                                   exclude=[(-100.0, 100.0)])
