"""Bessel J0/Y0: frozen oracle values, accuracy grid, analytic identities."""
import numpy as np
import pytest
from scipy import special

from wqed2d.core import DomainError
from wqed2d.specfun import bessel_j0, bessel_y0

from oracles import besselj0_oracle, bessely0_oracle, j0_first_zero

# values frozen from the arbitrary-precision series oracle (tests/oracles.py)
J0_AT_1 = 0.7651976865579666
J0_FIRST_ZERO = 2.404825557695773
Y0_AT_1 = 0.08825696421567696
Y0_AT_10 = 0.055671167283599395


def test_j0_at_zero_is_one():
    assert bessel_j0(0.0) == 1.0


def test_j0_frozen_values():
    assert bessel_j0(1.0) == pytest.approx(J0_AT_1, rel=1e-14)
    # oracle agreement re-derived live, not just frozen
    assert bessel_j0(1.0) == pytest.approx(besselj0_oracle(1.0), rel=1e-13)


def test_j0_first_zero():
    assert abs(bessel_j0(J0_FIRST_ZERO)) < 1e-12
    assert j0_first_zero() == pytest.approx(J0_FIRST_ZERO, abs=1e-13)


def test_y0_frozen_values():
    assert bessel_y0(1.0) == pytest.approx(Y0_AT_1, rel=1e-13)
    assert bessel_y0(10.0) == pytest.approx(Y0_AT_10, rel=1e-13)
    assert bessel_y0(1.0) == pytest.approx(bessely0_oracle(1.0), rel=1e-13)


def test_y0_log_divergence_small_argument():
    assert bessel_y0(1e-4) < -5.0


def test_accuracy_against_series_oracle_small_and_mid():
    # relative accuracy 1e-12 away from zeros; absolute 1e-13 near them
    zs = np.concatenate([
        np.linspace(1e-6, 1.0, 17),
        np.linspace(1.0, 20.0, 39),
        np.linspace(20.0, 60.0, 21),
    ])
    for z in zs:
        for impl, oracle in ((bessel_j0, besselj0_oracle),
                             (bessel_y0, bessely0_oracle)):
            ref = oracle(float(z))
            got = impl(float(z))
            assert abs(got - ref) <= 1e-12 * max(abs(ref), 1e-1), \
                f"z={z}: {impl.__name__} {got} vs oracle {ref}"


def test_accuracy_large_arguments():
    # beyond the series range the oracle switches to an independent
    # arbitrary-precision backend; sample log-spaced up to 1e4
    for z in np.geomspace(60.0, 1e4, 25):
        for impl, oracle in ((bessel_j0, besselj0_oracle),
                             (bessel_y0, bessely0_oracle)):
            ref = oracle(float(z))
            got = impl(float(z))
            # away from zeros rel 1e-12; near zeros "relative" is measured
            # against the local oscillation envelope ~ sqrt(2/(pi z))
            scale = max(abs(ref), np.sqrt(2.0 / (np.pi * z)))
            assert abs(got - ref) <= 1e-12 * scale


def test_wronskian_identity():
    # J0(z) Y0'(z) - J0'(z) Y0(z) = 2/(pi z), with J0' = -J1, Y0' = -Y1
    z = np.geomspace(0.1, 1e3, 400)
    w = bessel_j0(z) * (-special.y1(z)) - (-special.j1(z)) * bessel_y0(z)
    assert np.max(np.abs(w - 2.0 / (np.pi * z))) <= 1e-10


def test_envelope_decay():
    z = np.linspace(100.0, 200.0, 20001)
    assert np.max(np.abs(bessel_j0(z))) < 0.09


def test_vectorized_shapes_and_scalars():
    z = np.array([0.5, 1.0, 2.0])
    out = bessel_j0(z)
    assert isinstance(out, np.ndarray) and out.shape == (3,)
    assert isinstance(bessel_j0(1.0), float)
    assert isinstance(bessel_y0(1.0), float)


def test_domain_errors():
    with pytest.raises(DomainError):
        bessel_j0(float("nan"))
    with pytest.raises(DomainError):
        bessel_j0(-1.0)
    with pytest.raises(DomainError):
        bessel_y0(0.0)
    with pytest.raises(DomainError):
        bessel_y0(-2.0)
    with pytest.raises(DomainError):
        bessel_y0(np.array([1.0, float("nan")]))
