"""
Quantum-jump (Monte Carlo wave-function) unraveling of the master equation.

Between jumps the unnormalized state evolves under H_eff = H - (i/2) sum c^+ c.
Because H_eff is time independent this evolution is done exactly in its
eigenbasis, so the only numerical approximation is the root search for the
time at which the squared norm crosses the random threshold.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as la
from scipy.optimize import brentq

from .errors import IntegratorError, InvalidArgumentError
from .hilbert import EXCITED, GROUND, SpaceDescriptor, StateVector, number_operator
from .liouvillian import Liouvillian, model_liouvillian
from .model import DressedPair, ModelParams, dressed_states

log = logging.getLogger(__name__)

CHANNELS = ("photon", "phonon", "magnon", "atom")
BUNDLE_PAIRS = {"ab": ("photon", "phonon"), "am": ("photon", "magnon")}


def trajectory_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream; identical seeds give identical streams on any worker."""
    if seed < 0:
        raise InvalidArgumentError("seed must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


# -------------------------------------------------------------- propagation

class _Propagator:
    """exp(-i H_eff t) via eigendecomposition, with a matrix-exponential fallback."""

    def __init__(self, k: np.ndarray, cond_limit: float = 1e8):
        # k = -i H_eff
        vals, vecs = la.eig(k)
        cond = np.linalg.cond(vecs)
        if np.isfinite(cond) and cond < cond_limit:
            self._vals, self._vecs = vals, vecs
            self._inv = la.inv(vecs)
            self._k = None
        else:
            log.debug("H_eff eigenbasis ill-conditioned (cond %.2e); using expm", cond)
            self._k = k

    def coefficients(self, psi: np.ndarray) -> np.ndarray:
        return psi if self._k is not None else self._inv @ psi

    def state(self, coeffs: np.ndarray, dt: float) -> np.ndarray:
        if self._k is not None:
            return la.expm(self._k * dt) @ coeffs
        return self._vecs @ (np.exp(self._vals * dt) * coeffs)

    def norm2(self, coeffs: np.ndarray, dt: float) -> float:
        v = self.state(coeffs, dt)
        return float(np.real(np.vdot(v, v)))


@dataclass(frozen=True)
class _Channel:
    name: str
    op: object  # sparse matrix, sqrt(rate) included


def _channels(L: Liouvillian) -> list[_Channel]:
    return [_Channel(name, np.sqrt(rate) * op.matrix) for name, op, rate in L.collapse if rate > 0]


# ------------------------------------------------------------------ records

@dataclass
class TrajectoryRecord:
    seed: int
    times: np.ndarray
    states: list[StateVector] = field(repr=False)
    jumps: list[tuple[float, str]]
    populations: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def jump_times(self, channel: str | None = None) -> np.ndarray:
        return np.array([t for t, c in self.jumps if channel is None or c == channel])

    def observable(self, op) -> np.ndarray:
        m = op.matrix
        return np.array([np.real(np.vdot(s.amplitudes, m @ s.amplitudes)) for s in self.states])


def dressed_populations(psi: StateVector, dressed: DressedPair) -> dict[str, float]:
    """|<n_a n_b n_m +-|psi>|^2 for every retained Fock label, keyed like ``"101-"``."""
    space = psi.space
    dims = space.dims
    amps = psi.amplitudes.reshape(dims)
    out = {}
    for sign in ("+", "-"):
        atom = dressed.atom_vector(sign)
        proj = atom[GROUND].conjugate() * amps[GROUND] + atom[EXCITED].conjugate() * amps[EXCITED]
        prob = np.abs(proj) ** 2
        for idx in np.ndindex(*dims[1:]):
            out["".join(map(str, idx)) + sign] = float(prob[idx])
    return out


def _population_table(states: Sequence[StateVector], dressed: DressedPair | None) -> dict[str, np.ndarray]:
    if dressed is None:
        return {}
    rows = [dressed_populations(s, dressed) for s in states]
    return {key: np.array([r[key] for r in rows]) for key in rows[0]}


def run_liouvillian_trajectory(L: Liouvillian, psi0: StateVector, times: Sequence[float], seed: int,
                               dressed: DressedPair | None = None, xtol: float = 1e-10,
                               max_jumps: int = 1_000_000) -> TrajectoryRecord:
    """Single trajectory of the unraveling of ``L``; see :func:`run_trajectory`."""
    if psi0.space != L.space:
        raise InvalidArgumentError("initial state and Liouvillian live on different spaces")
    if abs(psi0.norm() - 1.0) > 1e-10:
        raise InvalidArgumentError("initial state must be normalized")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise InvalidArgumentError("times must be a non-empty strictly increasing grid")

    rng = trajectory_rng(seed)
    prop = _Propagator(L.effective)
    channels = _channels(L)

    psi = psi0.amplitudes.copy()
    t0 = times[0]
    coeffs = prop.coefficients(psi)
    threshold = rng.random()
    jumps: list[tuple[float, str]] = []
    samples = []

    for t_out in times:
        while True:
            dt = t_out - t0
            if not channels or prop.norm2(coeffs, dt) > threshold:
                break
            # the squared norm decreases monotonically, so the crossing is bracketed
            try:
                tau = brentq(lambda s: prop.norm2(coeffs, s) - threshold, 0.0, dt,
                             xtol=xtol * max(1.0, abs(t0) + dt), rtol=4 * np.finfo(float).eps)
            except (ValueError, RuntimeError) as exc:
                raise IntegratorError(f"jump-time search failed near t = {t0:.6g}: {exc}") from exc
            pre = prop.state(coeffs, tau)
            pre /= np.linalg.norm(pre)
            candidates = [c.op @ pre for c in channels]
            weights = np.array([np.real(np.vdot(v, v)) for v in candidates])
            total = weights.sum()
            if total <= 0:
                raise IntegratorError(f"no jump channel has weight at t = {t0 + tau:.6g}")
            k = int(np.searchsorted(np.cumsum(weights) / total, rng.random(), side="right"))
            k = min(k, len(channels) - 1)
            t0 = t0 + tau
            if jumps and t0 <= jumps[-1][0]:
                t0 = np.nextafter(jumps[-1][0], np.inf)
            jumps.append((float(t0), channels[k].name))
            if len(jumps) > max_jumps:
                raise IntegratorError(f"more than {max_jumps} jumps; check rates and time grid")
            psi = candidates[k] / np.sqrt(weights[k])
            coeffs = prop.coefficients(psi)
            threshold = rng.random()
        out = prop.state(coeffs, t_out - t0)
        samples.append(StateVector(L.space, out / np.linalg.norm(out)))

    return TrajectoryRecord(int(seed), times, samples, jumps, _population_table(samples, dressed))


def run_trajectory(params: ModelParams, space: SpaceDescriptor, psi0: StateVector, times: Sequence[float],
                   seed: int, with_populations: bool = True) -> TrajectoryRecord:
    """
    One quantum-jump trajectory of the model.

    Parameters
    ----------
    params, space
        Model and truncation; jump channels are sqrt(kappa) a, b, m and sqrt(gamma) sigma.
    psi0
        Normalized initial state.
    times
        Output grid. Samples are normalized states at these times.
    seed
        Non-negative integer; identical seeds give bit-identical records.
    """
    dressed = dressed_states(params.delta_sigma_d, params.xi) if with_populations else None
    return run_liouvillian_trajectory(model_liouvillian(params, space), psi0, times, seed, dressed)


# ----------------------------------------------------------------- ensemble

@dataclass
class DelayStatistics:
    pair: str
    intra: np.ndarray   # delay between the two quanta of a bundle
    inter: np.ndarray   # delay between consecutive bundles


@dataclass
class EnsembleSummary:
    n_trajectories: int
    times: np.ndarray
    means: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    jump_times: dict[str, np.ndarray]
    delays: dict[str, DelayStatistics]
    seeds: tuple[int, ...] = ()
    jumps: tuple[list[tuple[float, str]], ...] = field(default=(), repr=False)   # per seed

    def histogram(self, channel: str, bins: int | Sequence[float] = 50) -> tuple[np.ndarray, np.ndarray]:
        return np.histogram(self.jump_times[channel], bins=bins)


def pair_delays(jumps: Sequence[tuple[float, str]], pair: str) -> DelayStatistics:
    """
    Split jump records into bundles.

    Jumps of the two channels of ``pair`` are scanned in time order; two
    consecutive jumps on different channels form one bundle. Atom jumps and
    jumps of the third mode are ignored.
    """
    try:
        channels = BUNDLE_PAIRS[pair]
    except KeyError:
        raise InvalidArgumentError(f"unknown pair {pair!r}") from None
    seq = [(t, c) for t, c in jumps if c in channels]
    intra, starts = [], []
    i = 0
    while i + 1 < len(seq):
        (t1, c1), (t2, c2) = seq[i], seq[i + 1]
        if c1 != c2:
            intra.append(t2 - t1)
            starts.append(t1)
            i += 2
        else:
            i += 1
    return DelayStatistics(pair, np.array(intra), np.diff(np.array(starts)))


def _worker(args):
    L, psi0, times, seed, ops = args
    rec = run_liouvillian_trajectory(L, psi0, times, seed)
    obs = {name: rec.observable(op) for name, op in ops.items()}
    return seed, obs, rec.jumps


def default_observables(space: SpaceDescriptor) -> dict:
    return {name: number_operator(space, name) for name in CHANNELS}


def ensemble_from_liouvillian(L: Liouvillian, psi0: StateVector, times: Sequence[float], n: int, seed0: int,
                              observables: Mapping | None = None, workers: int = 1) -> EnsembleSummary:
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    times = np.asarray(times, dtype=float)
    ops = dict(observables) if observables is not None else default_observables(L.space)
    tasks = [(L, psi0, times, seed0 + i, ops) for i in range(n)]
    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, tasks, chunksize=max(1, n // (4 * workers))))
    else:
        results = [_worker(t) for t in tasks]
    # pool.map preserves order, so merging is by seed order either way
    means, stderr = {}, {}
    for name in ops:
        data = np.array([obs[name] for _, obs, _ in results])
        means[name] = data.mean(axis=0)
        stderr[name] = data.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.full(times.size, np.nan)
    jump_times = {c: np.array(sorted(t for _, _, jumps in results for t, ch in jumps if ch == c))
                  for c in CHANNELS}
    delays = {}
    for pair in BUNDLE_PAIRS:
        stats = [pair_delays(jumps, pair) for _, _, jumps in results]
        delays[pair] = DelayStatistics(pair, np.concatenate([s.intra for s in stats]),
                                       np.concatenate([s.inter for s in stats]))
    return EnsembleSummary(n, times, means, stderr, jump_times, delays,
                           tuple(s for s, _, _ in results), tuple(j for _, _, j in results))


def ensemble_average(params: ModelParams, space: SpaceDescriptor, psi0: StateVector, times: Sequence[float],
                     n: int, seed0: int, workers: int = 1) -> EnsembleSummary:
    """Trajectories with seeds ``seed0 .. seed0 + n - 1`` averaged into occupation series."""
    return ensemble_from_liouvillian(model_liouvillian(params, space), psi0, times, n, seed0, workers=workers)
