import math

import numpy as np
import pytest

from nrbundle.correlations import (CorrelationResult, SpectrumTable, antibunched_pair_window, bundle_g2_delayed,
                                   bundle_g2_zero, cross_g2_zero, default_tau_grid, mode_occupations,
                                   occupation_spectrum, operator_g2_zero, steady_correlations)
from nrbundle.errors import InvalidArgumentError, UndefinedCorrelationError
from nrbundle.hilbert import DensityMatrix, basis_state, build_space, mode_annihilator
from nrbundle.liouvillian import model_liouvillian, steady_state
from nrbundle.model import standard_params

from .conftest import random_density


def _fock(space, n_a, n_b, n_m=0):
    return basis_state(space, 0, n_a, n_b, n_m).density()


def _coherent(size, alpha):
    n = np.arange(size)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    return np.exp(-abs(alpha) ** 2 / 2 - 0.5 * log_fact) * alpha**n


def test_fock_state_values():
    space = build_space(3, 3, 1)
    # |1,1>: at most one pair, perfectly antibunched bundles
    assert bundle_g2_zero(_fock(space, 1, 1), "ab") == pytest.approx(0.0)
    # |2,2>: <a+2 a2><b+2 b2> / (<n_a><n_b>)^2 = 2*2 / 16
    assert bundle_g2_zero(_fock(space, 2, 2), "ab") == pytest.approx(0.25)
    assert cross_g2_zero(_fock(space, 2, 2), "ab") == pytest.approx(1.0)


def test_product_states_are_uncorrelated(rng):
    space = build_space(2, 2, 1)
    ra, rb = random_density(rng, 3), random_density(rng, 3)
    vac = np.zeros((2, 2))
    vac[0, 0] = 1
    rho = np.kron(np.kron(np.kron(vac, ra), rb), vac)
    assert cross_g2_zero(DensityMatrix(space, rho), "ab") == pytest.approx(1.0, abs=1e-12)


def test_coherent_product_bundle_is_poissonian():
    space = build_space(25, 25, 1)
    psi_a, psi_b = _coherent(26, 0.6), _coherent(26, 0.4 + 0.3j)
    psi = np.kron(np.kron(np.kron([1, 0], psi_a), psi_b), [1, 0])
    rho = DensityMatrix(space, np.outer(psi, psi.conj()))
    assert bundle_g2_zero(rho, "ab") == pytest.approx(1.0, abs=1e-9)


def test_vacuum_is_undefined(small_space):
    rho = _fock(small_space, 0, 0)
    with pytest.raises(UndefinedCorrelationError):
        cross_g2_zero(rho, "ab")
    with pytest.raises(UndefinedCorrelationError):
        bundle_g2_zero(rho, "am")
    with pytest.raises(InvalidArgumentError):
        bundle_g2_zero(rho, "bm")


def test_operator_g2_reduces_to_single_mode():
    space = build_space(3, 1, 1)
    a = mode_annihilator(space, "photon")
    assert operator_g2_zero(_fock(space, 2, 0), a) == pytest.approx(0.5)


@pytest.fixture(scope="module")
def fast_model():
    # strong damping everywhere so that the delayed correlations settle quickly
    space = build_space(2, 1, 1)
    params = standard_params(delta_ad=1.34, kappa=0.2).replace(gamma=0.2)
    L = model_liouvillian(params, space)
    return params, L, steady_state(L)


def test_delayed_bundle_correlation(fast_model):
    params, L, rho = fast_model
    tau = np.array([0.0, 1.0, 50 / 0.2])
    res = bundle_g2_delayed(L, rho, "am", tau)
    assert res.values[0] == pytest.approx(bundle_g2_zero(rho, "am"), rel=1e-8)
    assert res.settled(1e-3)
    assert res.value == res.values[0]
    # grids that do not start at zero are handled too
    shifted = bundle_g2_delayed(L, rho, "am", tau[1:])
    assert np.allclose(shifted.values, res.values[1:], rtol=1e-6)


def test_default_tau_grid(params):
    grid = default_tau_grid(params, num=11)
    assert grid[0] == 0 and grid[-1] == pytest.approx(5 / 0.005)


def test_steady_correlations_keys(fast_model):
    params, L, _ = fast_model
    out = steady_correlations(params, L.space)
    assert {"photon", "phonon", "magnon", "g1_ab", "g2_ab", "g1_am", "g2_am", "rho"} <= set(out)
    assert mode_occupations(out["rho"])["photon"] == pytest.approx(out["photon"])


def test_antibunched_window_logic():
    assert antibunched_pair_window(2.0, 0.5)
    assert not antibunched_pair_window(0.9, 0.5)
    assert not antibunched_pair_window(2.0, 1.0)
    assert not antibunched_pair_window(float("nan"), 0.5)


def test_occupation_spectrum_peaks_at_refined_resonance(small_space, params):
    # the photon-magnon bundle resonance for a left drive sits near delta_ad = 1.3408
    grid = np.linspace(1.330, 1.350, 11)
    table = occupation_spectrum(params, grid, "left", small_space)
    assert not any(table.errors)
    assert table.peak("magnon") == pytest.approx(1.340, abs=2.5e-3)
    with pytest.raises(InvalidArgumentError):
        table.peak("magnon", window=(5.0, 6.0))


def test_occupation_spectrum_records_failures(tiny_space):
    closed = standard_params(kappa=0.0).replace(gamma=0.0)
    table = occupation_spectrum(closed, [1.0, 1.1], "left", tiny_space)
    assert all(table.errors) and np.all(np.isnan(table.photon))
    with pytest.raises(InvalidArgumentError):
        occupation_spectrum(closed, [], "left", tiny_space)


def test_correlation_result_container():
    res = CorrelationResult("bundle_delayed", "ab", np.array([0.3, 0.9995]), np.array([0.0, 1.0]))
    assert res.value == 0.3 and res.settled(1e-3) and not res.settled(1e-4)
    assert isinstance(SpectrumTable("left", np.array([1.0]), *[np.array([1.0])] * 3, errors=[""]).peak("photon"), float)
