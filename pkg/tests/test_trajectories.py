import numpy as np
import pytest
from scipy import stats

from nrbundle.errors import InvalidArgumentError
from nrbundle.hilbert import Operator, StateVector, basis_state, build_space, mode_annihilator, number_operator
from nrbundle.liouvillian import build_liouvillian, evolve_closed, model_liouvillian
from nrbundle.model import build_hamiltonian, dressed_ket, dressed_states, standard_params, refine_resonance
from nrbundle.trajectories import (dressed_populations, ensemble_average, ensemble_from_liouvillian, pair_delays,
                                   run_liouvillian_trajectory, run_trajectory)

KAPPA = 0.5


@pytest.fixture(scope="module")
def decaying_cavity():
    space = build_space(1, 1, 1)
    a = mode_annihilator(space, "photon")
    zero = Operator(space, np.zeros((16, 16)))
    return build_liouvillian(zero, [("photon", a, KAPPA)]), basis_state(space, 0, 1)


def test_determinism(small_space, params):
    psi0 = basis_state(small_space)
    times = np.linspace(0, 3000, 7)
    p = params.replace(delta_ad=1.3408)
    r1 = run_trajectory(p, small_space, psi0, times, seed=11)
    r2 = run_trajectory(p, small_space, psi0, times, seed=11)
    r3 = run_trajectory(p, small_space, psi0, times, seed=12)
    assert r1.jumps == r2.jumps
    assert all(np.array_equal(a.amplitudes, b.amplitudes) for a, b in zip(r1.states, r2.states))
    assert r1.jumps != r3.jumps


def test_no_dissipation_matches_closed_evolution(small_space):
    p = standard_params(delta_ad=1.3408, kappa=0.0).replace(gamma=0.0)
    pair = dressed_states(p.delta_sigma_d, p.xi)
    psi0 = dressed_ket(small_space, pair, 0, 0, 0, "+")
    times = np.linspace(0, 500, 11)
    rec = run_trajectory(p, small_space, psi0, times, seed=0)
    ref = evolve_closed(psi0, build_hamiltonian(p, small_space), times)
    assert rec.jumps == []
    for a, b in zip(rec.states, ref.states):
        assert np.abs(a.amplitudes - b.amplitudes).max() < 1e-8


def test_single_photon_decay(decaying_cavity):
    L, psi0 = decaying_cavity
    times = np.array([0.0, 50.0])
    first = []
    for seed in range(2000):
        rec = run_liouvillian_trajectory(L, psi0, times, seed)
        assert len(rec.jumps) == 1 and rec.jumps[0][1] == "photon"
        first.append(rec.jumps[0][0])
    # 50 = 25 lifetimes, so truncation of the exponential is negligible
    assert stats.kstest(first, "expon", args=(0, 1 / KAPPA)).pvalue > 0.01


def test_ensemble_matches_exponential_decay(decaying_cavity):
    L, psi0 = decaying_cavity
    times = np.linspace(0, 6, 7)
    n = number_operator(L.space, "photon")
    ens = ensemble_from_liouvillian(L, psi0, times, 2000, seed0=5, observables={"n": n})
    z = np.abs(ens.means["n"] - np.exp(-KAPPA * times)) / np.maximum(ens.stderr["n"], 1e-12)
    assert np.all(z[1:] < 3)
    assert ens.means["n"][0] == 1.0


def test_standard_error_scaling(decaying_cavity):
    L, psi0 = decaying_cavity
    times = np.array([0.0, 1.0, 2.0])
    n = {"n": number_operator(L.space, "photon")}
    small = ensemble_from_liouvillian(L, psi0, times, 400, seed0=0, observables=n)
    large = ensemble_from_liouvillian(L, psi0, times, 1600, seed0=1000, observables=n)
    ratio = small.stderr["n"][1:] / large.stderr["n"][1:]
    assert np.all(np.abs(ratio / 2 - 1) < 0.3)


def test_single_member_ensemble(small_space, params):
    psi0 = basis_state(small_space)
    times = np.linspace(0, 1000, 5)
    p = params.replace(delta_ad=1.3408)
    ens = ensemble_average(p, small_space, psi0, times, n=1, seed0=3)
    rec = run_trajectory(p, small_space, psi0, times, seed=3)
    assert np.allclose(ens.means["photon"], rec.observable(number_operator(small_space, "photon")))
    assert np.all(np.isnan(ens.stderr["photon"]))
    assert ens.seeds == (3,)
    with pytest.raises(InvalidArgumentError):
        ensemble_average(p, small_space, psi0, times, n=0, seed0=0)


def test_parallel_workers_merge_in_seed_order(decaying_cavity):
    L, psi0 = decaying_cavity
    times = np.array([0.0, 1.0, 4.0])
    serial = ensemble_from_liouvillian(L, psi0, times, 8, seed0=2)
    parallel = ensemble_from_liouvillian(L, psi0, times, 8, seed0=2, workers=2)
    assert serial.seeds == parallel.seeds
    assert serial.jumps == parallel.jumps
    assert np.array_equal(serial.means["photon"], parallel.means["photon"])


def test_input_validation(decaying_cavity, small_space):
    L, psi0 = decaying_cavity
    with pytest.raises(InvalidArgumentError):
        run_liouvillian_trajectory(L, psi0, [1.0, 0.5], 0)
    with pytest.raises(InvalidArgumentError):
        run_liouvillian_trajectory(L, StateVector(L.space, 2 * psi0.amplitudes), [0.0, 1.0], 0)
    with pytest.raises(InvalidArgumentError):
        run_liouvillian_trajectory(L, basis_state(small_space), [0.0, 1.0], 0)
    with pytest.raises(InvalidArgumentError):
        run_liouvillian_trajectory(L, psi0, [0.0, 1.0], -1)


def test_dressed_populations(small_space):
    pair = dressed_states(-1.76, 0.8)
    pops = dressed_populations(basis_state(small_space), pair)
    assert pops["000+"] == pytest.approx(pair.c_plus**2)
    assert pops["000-"] == pytest.approx(pair.c_minus**2)
    pops = dressed_populations(dressed_ket(small_space, pair, 0, 0, 0, "+"), pair)
    assert pops["000+"] == pytest.approx(1.0) and pops["101-"] == pytest.approx(0.0, abs=1e-30)
    assert len(pops) == small_space.dimension


def test_pair_delay_bookkeeping():
    jumps = [(1.0, "photon"), (1.5, "magnon"), (2.0, "atom"), (9.0, "magnon"), (9.2, "phonon"),
             (9.4, "photon"), (20.0, "photon"), (30.0, "photon")]
    stats_am = pair_delays(jumps, "am")
    assert np.allclose(stats_am.intra, [0.5, 0.4])
    assert np.allclose(stats_am.inter, [8.0])
    with pytest.raises(InvalidArgumentError):
        pair_delays(jumps, "bm")


@pytest.fixture(scope="module")
def bundle_run():
    space = build_space(3, 2, 2)
    params = standard_params()
    ref = refine_resonance("photon_magnon", "left", params, space)
    p = params.replace(delta_ad=ref.delta_ad)
    psi0 = dressed_ket(space, dressed_states(p.delta_sigma_d, p.xi), 0, 0, 0, "+")
    times = np.linspace(0, 40000, 41)
    return p, space, ensemble_average(p, space, psi0, times, n=40, seed0=100)


def test_record_invariants(bundle_run):
    p, space, _ = bundle_run
    psi0 = dressed_ket(space, dressed_states(p.delta_sigma_d, p.xi), 0, 0, 0, "+")
    rec = run_trajectory(p, space, psi0, np.linspace(0, 20000, 201), seed=100)
    times = rec.jump_times()
    assert np.all(np.diff(times) > 0)
    total = sum(rec.populations.values())
    assert np.all(total <= 1 + 1e-9)
    assert {c for _, c in rec.jumps} <= {"photon", "phonon", "magnon", "atom"}


def test_bundle_signature(bundle_run):
    p, _, ens = bundle_run
    stats_am = ens.delays["am"]
    assert stats_am.intra.size >= 30
    # after |101-> forms, the second quantum follows at the single-quantum decay rate;
    # medians because stray single photons occasionally pair with an unrelated magnon
    assert 0.3 / p.kappa_a < np.median(stats_am.intra) < 2.0 / p.kappa_a
    # ...which is fast compared with the slow bundle emission rate
    assert np.median(stats_am.inter) > 10 * np.median(stats_am.intra)
    assert ens.jump_times["magnon"].size > 10 * ens.jump_times["phonon"].size
