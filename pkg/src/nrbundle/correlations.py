"""
Steady-state intensity correlations of photon-phonon and photon-magnon pairs.

g1 (cross correlation)   <o^+ o o'^+ o'> / (<o^+ o><o'^+ o'>)
g2 (bundle correlation)  <O^+(0) O^+(tau) O(tau) O(0)> / <O^+ O>^2,  O = o o'

The delayed bundle correlation uses the quantum regression theorem,
numerator = Tr[O^+ O exp(L tau)(O rho O^+)].
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, NrBundleError, UndefinedCorrelationError
from .hilbert import DensityMatrix, Operator, SpaceDescriptor, expectation, mode_annihilator
from .liouvillian import Liouvillian, model_liouvillian, propagate, steady_state
from .model import ModelParams

log = logging.getLogger(__name__)

PAIRS = {"ab": ("photon", "phonon"), "am": ("photon", "magnon")}


def pair_operators(space: SpaceDescriptor, pair: str) -> tuple[Operator, Operator]:
    try:
        first, second = PAIRS[pair]
    except KeyError:
        raise InvalidArgumentError(f"unknown pair {pair!r}; expected one of {sorted(PAIRS)}") from None
    return mode_annihilator(space, first), mode_annihilator(space, second)


def _moment(rho: DensityMatrix, op: Operator) -> float:
    return expectation(rho, op).real


def cross_g2_zero(rho: DensityMatrix, pair: str, min_occupation: float = 1e-12) -> float:
    o1, o2 = pair_operators(rho.space, pair)
    n1 = o1.dag() @ o1
    n2 = o2.dag() @ o2
    occ1, occ2 = _moment(rho, n1), _moment(rho, n2)
    if occ1 <= min_occupation or occ2 <= min_occupation:
        raise UndefinedCorrelationError(f"vanishing occupation for pair {pair}: {occ1:.3e}, {occ2:.3e}")
    return _moment(rho, n1 @ n2) / (occ1 * occ2)


def operator_g2_zero(rho: DensityMatrix, op: Operator, min_occupation: float = 1e-14) -> float:
    """<O^+ O^+ O O> / <O^+ O>^2 for any operator O."""
    od = op.dag()
    norm = _moment(rho, od @ op)
    if norm <= min_occupation:
        raise UndefinedCorrelationError(f"vanishing <O^+ O> = {norm:.3e}")
    return _moment(rho, od @ od @ op @ op) / norm**2


def bundle_g2_zero(rho: DensityMatrix, pair: str, min_occupation: float = 1e-14) -> float:
    o1, o2 = pair_operators(rho.space, pair)
    return operator_g2_zero(rho, o1 @ o2, min_occupation)


@dataclass
class CorrelationResult:
    kind: str                       # cross_zero_delay | bundle_zero_delay | bundle_delayed
    pair: str
    values: np.ndarray
    tau: np.ndarray | None = None
    parameters: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return float(self.values[0])

    def settled(self, tol: float = 1e-3) -> bool:
        """Whether the last delayed value has relaxed to 1 within ``tol``."""
        return abs(float(self.values[-1]) - 1.0) <= tol


def operator_g2_delayed(L: Liouvillian, rho: DensityMatrix, op: Operator, tau: Sequence[float],
                        rtol: float = 1e-10, min_occupation: float = 1e-14) -> np.ndarray:
    od = op.dag()
    number = (od @ op).dense()
    norm = float(np.real(np.trace(rho.matrix @ number)))
    if norm <= min_occupation:
        raise UndefinedCorrelationError(f"vanishing <O^+ O> = {norm:.3e}")
    o = op.dense()
    conditioned = o @ rho.matrix @ o.conj().T
    tau = np.asarray(tau, dtype=float)
    if tau[0] != 0:
        tau_full = np.concatenate([[0.0], tau])
        mats = propagate(L, conditioned, tau_full, rtol=rtol, atol=1e-14 * max(norm, 1e-300))[1:]
    else:
        mats = propagate(L, conditioned, tau, rtol=rtol, atol=1e-14 * max(norm, 1e-300))
    return np.array([np.real(np.sum(number.T * m)) for m in mats]) / norm**2


def default_tau_grid(params: ModelParams, num: int = 101) -> np.ndarray:
    kappa = min(k for k in (params.kappa_a, params.kappa_b, params.kappa_m) if k > 0)
    return np.linspace(0.0, 5.0 / kappa, num)


def bundle_g2_delayed(L: Liouvillian, rho: DensityMatrix, pair: str, tau: Sequence[float],
                      rtol: float = 1e-10) -> CorrelationResult:
    o1, o2 = pair_operators(rho.space, pair)
    values = operator_g2_delayed(L, rho, o1 @ o2, tau, rtol=rtol)
    return CorrelationResult("bundle_delayed", pair, values, np.asarray(tau, dtype=float))


# ----------------------------------------------------------------- sweeps

@dataclass
class SpectrumTable:
    drive_side: str
    detuning: np.ndarray
    photon: np.ndarray
    phonon: np.ndarray
    magnon: np.ndarray
    errors: list[str]

    def peak(self, mode: str, window: tuple[float, float] | None = None) -> float:
        occ = np.array(getattr(self, mode), dtype=float)
        det = self.detuning
        mask = np.isfinite(occ)
        if window is not None:
            mask &= (det >= window[0]) & (det <= window[1])
        if not mask.any():
            raise InvalidArgumentError("no valid points in the requested window")
        idx = np.flatnonzero(mask)
        return float(det[idx[np.argmax(occ[idx])]])


def mode_occupations(rho: DensityMatrix) -> dict[str, float]:
    out = {}
    for mode in ("photon", "phonon", "magnon"):
        o = mode_annihilator(rho.space, mode)
        out[mode] = _moment(rho, o.dag() @ o)
    return out


def occupation_spectrum(template: ModelParams, detuning: Sequence[float], drive_side: str,
                        space: SpaceDescriptor) -> SpectrumTable:
    """Steady-state occupations versus the optical detuning; failed points are NaN."""
    params = template.with_side(drive_side)
    detuning = np.asarray(detuning, dtype=float)
    if detuning.size == 0:
        raise InvalidArgumentError("detuning grid is empty")
    rows = {m: np.full(detuning.size, np.nan) for m in ("photon", "phonon", "magnon")}
    errors = [""] * detuning.size
    for i, d in enumerate(detuning):
        try:
            rho = steady_state(model_liouvillian(params.replace(delta_ad=float(d)), space))
        except NrBundleError as exc:
            log.warning("spectrum point %s failed: %s", d, exc)
            errors[i] = str(exc)
            continue
        for mode, value in mode_occupations(rho).items():
            rows[mode][i] = value
    return SpectrumTable(drive_side, detuning, rows["photon"], rows["phonon"], rows["magnon"], errors)


def steady_correlations(params: ModelParams, space: SpaceDescriptor) -> dict:
    """g1 and g2 of both pairs plus occupations at one parameter point; undefined values are NaN."""
    rho = steady_state(model_liouvillian(params, space))
    out = dict(mode_occupations(rho))
    for pair in PAIRS:
        for name, fn in (("g1", cross_g2_zero), ("g2", bundle_g2_zero)):
            try:
                out[f"{name}_{pair}"] = fn(rho, pair)
            except UndefinedCorrelationError:
                out[f"{name}_{pair}"] = float("nan")
    out["rho"] = rho
    return out


def antibunched_pair_window(g1: float, g2: float) -> bool:
    """Correlated pairs emitted one bundle at a time: g1 > 1 and g2 < 1."""
    return bool(g1 > 1.0 and g2 < 1.0)
