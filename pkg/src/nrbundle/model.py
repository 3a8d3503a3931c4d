"""
Physical parameters, the linearized Hamiltonian and its resonance structure.

All simulator quantities are dimensionless, measured in units of the
mechanical frequency omega_b (=1 by convention). Physical units appear only
in :class:`ResonatorGeometry` and :class:`LabParams`.

Drive direction is encoded solely in the sign of the Fizeau shift:
``delta_f > 0`` is a drive from the left, ``delta_f < 0`` from the right.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Literal

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (InfeasibleParametersError, InvalidArgumentError,
                     SingularConfigurationError)
from .hilbert import (EXCITED, GROUND, Operator, SpaceDescriptor, StateVector,
                      atom_lowering, mode_annihilator)

DriveSide = Literal["left", "right"]
ResonanceKind = Literal["photon_magnon", "photon_phonon"]

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# (n_b, n_m) of the two-quanta state |1 n_b n_m -> reached at each resonance
PAIR_LABELS = {"photon_phonon": (1, 0), "photon_magnon": (0, 1)}


def side_sign(drive_side: str) -> int:
    if drive_side == "left":
        return 1
    if drive_side == "right":
        return -1
    raise InvalidArgumentError(f"drive_side must be 'left' or 'right', got {drive_side!r}")


@dataclass(frozen=True)
class ModelParams:
    """Effective parameters of the linearized model, in units of omega_b."""

    delta_ad: float
    delta_sigma_a: float
    omega_m: float
    delta_f: float
    lambda_ab: float
    lambda_am: float
    lambda_a_sigma: float
    xi: float
    gamma: float
    kappa_a: float
    kappa_b: float
    kappa_m: float
    omega_b: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise InvalidArgumentError(f"{f.name} must be finite, got {value!r}")
        if self.omega_b <= 0:
            raise InvalidArgumentError("omega_b must be positive")
        for name in ("gamma", "kappa_a", "kappa_b", "kappa_m"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be non-negative")

    @property
    def delta_sigma_d(self) -> float:
        return self.delta_sigma_a + self.delta_ad

    @property
    def drive_side(self) -> str:
        return "left" if self.delta_f >= 0 else "right"

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def with_side(self, drive_side: str) -> "ModelParams":
        return replace(self, delta_f=side_sign(drive_side) * abs(self.delta_f))

    def with_kappa(self, kappa: float) -> "ModelParams":
        return replace(self, kappa_a=kappa, kappa_b=kappa, kappa_m=kappa)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def standard_params(delta_ad: float = 0.0, drive_side: str = "left", kappa: float = 0.005) -> ModelParams:
    """The standard operating point in units of omega_b, with a common mode decay ``kappa``."""
    return ModelParams(
        delta_ad=delta_ad,
        delta_sigma_a=-3.1,
        omega_m=1.05,
        delta_f=side_sign(drive_side) * 0.025,
        lambda_ab=0.022,
        lambda_am=0.022,
        lambda_a_sigma=0.3,
        xi=0.8,
        gamma=0.001,
        kappa_a=kappa,
        kappa_b=kappa,
        kappa_m=kappa,
    )


# ---------------------------------------------------------------- Fizeau shift

@dataclass(frozen=True)
class ResonatorGeometry:
    radius: float            # m
    refractive_index: float
    dispersion_term: float   # (lambda / n_r) dn_r / dlambda
    omega_a: float           # rad/s
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidArgumentError("radius must be positive")
        if self.refractive_index <= 1:
            raise InvalidArgumentError("refractive_index must exceed 1")

    @property
    def sagnac_factor(self) -> float:
        n = self.refractive_index
        return self.radius * n * self.omega_a / self.c * (1.0 - 1.0 / n**2 - self.dispersion_term)


def fizeau_shift(geometry: ResonatorGeometry, angular_velocity: float, drive_side: str) -> float:
    """Signed rotation-induced shift of the driven optical mode (rad/s)."""
    if angular_velocity < 0:
        raise InvalidArgumentError("angular_velocity must be non-negative; the drive side carries the sign")
    return side_sign(drive_side) * geometry.sagnac_factor * angular_velocity


def angular_velocity_for_shift(geometry: ResonatorGeometry, shift: float) -> float:
    """Spinning rate giving a Fizeau shift of magnitude ``|shift|`` (rad/s)."""
    factor = geometry.sagnac_factor
    if factor <= 0:
        raise SingularConfigurationError("geometry has no Sagnac response (non-positive factor)")
    return abs(shift) / factor


# --------------------------------------------------------------- dressed atom

@dataclass(frozen=True)
class DressedPair:
    """Dressed states |+> = c_plus|g> + c_minus|e>, |-> = c_minus|g> - c_plus|e>."""

    e_plus: float
    e_minus: float
    c_plus: float
    c_minus: float
    degenerate: bool = False

    @property
    def splitting(self) -> float:
        return self.e_plus - self.e_minus

    def atom_vector(self, sign: str) -> np.ndarray:
        """Amplitudes on (|g>, |e>)."""
        if sign == "+":
            return np.array([self.c_plus, self.c_minus], dtype=complex)
        if sign == "-":
            return np.array([self.c_minus, -self.c_plus], dtype=complex)
        raise InvalidArgumentError(f"dressed label must be '+' or '-', got {sign!r}")


def dressed_states(delta_sigma_d: float, xi: float) -> DressedPair:
    if xi < 0:
        raise InvalidArgumentError("xi must be non-negative")
    root = math.hypot(delta_sigma_d, 2.0 * xi)
    e_plus = 0.5 * (delta_sigma_d + root)
    e_minus = 0.5 * (delta_sigma_d - root)
    if root == 0.0:
        return DressedPair(0.0, 0.0, 1.0, 0.0, degenerate=True)
    # c_+^2 = 2 xi^2 / (root^2 + D root) simplifies to (1 - D/root)/2, which stays finite at xi = 0
    c_plus = math.sqrt(max(0.0, 0.5 * (1.0 - delta_sigma_d / root)))
    c_minus = math.sqrt(max(0.0, 0.5 * (1.0 + delta_sigma_d / root)))
    return DressedPair(e_plus, e_minus, c_plus, c_minus)


def dressed_ket(space: SpaceDescriptor, pair: DressedPair, n_a: int, n_b: int, n_m: int, sign: str) -> StateVector:
    """Product state |n_a n_b n_m> (x) |sign> on the full space."""
    vec = np.zeros(space.dimension, dtype=complex)
    amp = pair.atom_vector(sign)
    vec[space.index(GROUND, n_a, n_b, n_m)] = amp[0]
    vec[space.index(EXCITED, n_a, n_b, n_m)] = amp[1]
    return StateVector(space, vec)


def ladder_energy(params: ModelParams, n_a: int, n_b: int, n_m: int, sign: str) -> float:
    """Bare Mollow-ladder energy, ignoring the JC and linear couplings."""
    pair = dressed_states(params.delta_sigma_d, params.xi)
    atom = pair.e_plus if sign == "+" else pair.e_minus
    return n_a * (params.delta_ad + params.delta_f) + n_b * params.omega_b + n_m * params.omega_m + atom


# ---------------------------------------------------------------- resonances

def _mode_frequency(kind: str, params: ModelParams) -> float:
    if kind == "photon_magnon":
        return params.omega_m
    if kind == "photon_phonon":
        return params.omega_b
    raise InvalidArgumentError(f"unknown resonance kind {kind!r}")


def resonance_residual(kind: str, drive_side: str, params: ModelParams, delta_ad: float) -> float:
    """Left side of (delta_ad +/- |dF|) + omega_x - sqrt((dsa + delta_ad)^2 + 4 xi^2) = 0."""
    w = _mode_frequency(kind, params) + side_sign(drive_side) * abs(params.delta_f)
    return delta_ad + w - math.hypot(params.delta_sigma_a + delta_ad, 2.0 * params.xi)


def resonance_detuning(kind: str, drive_side: str, params: ModelParams) -> float:
    """Closed-form optical detuning that makes |000+> degenerate with |1 n_b n_m ->."""
    w = _mode_frequency(kind, params) + side_sign(drive_side) * abs(params.delta_f)
    denom = 2.0 * (w - params.delta_sigma_a)
    if abs(denom) < 1e-12:
        raise SingularConfigurationError(f"vanishing denominator for {kind}/{drive_side}")
    delta_ad = (params.delta_sigma_a**2 + 4.0 * params.xi**2 - w**2) / denom
    residual = resonance_residual(kind, drive_side, params, delta_ad)
    if abs(residual) > 1e-9 * max(1.0, abs(w), abs(delta_ad)):
        # squaring admitted a root with delta_ad + w < 0
        raise SingularConfigurationError(f"{kind}/{drive_side}: closed form is not a root (residual {residual:.3e})")
    return delta_ad


@dataclass(frozen=True)
class RefinedResonance:
    kind: str
    drive_side: str
    closed_form: float
    delta_ad: float
    gap: float          # minimum splitting of the hybridized pair of levels (super-Rabi frequency)


def _pair_gap(params: ModelParams, space: SpaceDescriptor, kind: str) -> float:
    h = build_hamiltonian(params, space).dense()
    energies, vectors = np.linalg.eigh(h)
    pair = dressed_states(params.delta_sigma_d, params.xi)
    n_b, n_m = PAIR_LABELS[kind]
    target = dressed_ket(space, pair, 1, n_b, n_m, "-").amplitudes
    vacuum = dressed_ket(space, pair, 0, 0, 0, "+").amplitudes
    w_target = np.abs(vectors.conj().T @ target) ** 2
    w_vacuum = np.abs(vectors.conj().T @ vacuum) ** 2
    i = int(np.argmax(w_target))
    w_vacuum[i] = -1.0
    j = int(np.argmax(w_vacuum))
    return abs(energies[i] - energies[j])


def refine_resonance(kind: str, drive_side: str, params: ModelParams, space: SpaceDescriptor,
                     window: tuple[float, float] = (-0.02, 0.06), step: float = 1e-3) -> RefinedResonance:
    """
    Locate the true multiquanta resonance including the coupling-induced level shifts.

    The closed form ignores the Jaynes-Cummings and linear couplings, which
    shift the levels by a few 1e-2 omega_b at the standard operating point.
    This scans the splitting between the eigenstates dominated by |000+> and
    |1 n_b n_m -> around the closed form and returns the avoided-crossing
    minimum.
    """
    base = params.with_side(drive_side)
    d0 = resonance_detuning(kind, drive_side, base)
    grid = d0 + np.arange(window[0], window[1] + 0.5 * step, step)
    gaps = [_pair_gap(base.replace(delta_ad=float(d)), space, kind) for d in grid]
    k = int(np.argmin(gaps))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = minimize_scalar(lambda d: _pair_gap(base.replace(delta_ad=float(d)), space, kind),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
    return RefinedResonance(kind, drive_side, d0, float(res.x), float(res.fun))


# --------------------------------------------------------------- Hamiltonian

def build_hamiltonian(params: ModelParams, space: SpaceDescriptor) -> Operator:
    a = mode_annihilator(space, "photon")
    b = mode_annihilator(space, "phonon")
    m = mode_annihilator(space, "magnon")
    s = atom_lowering(space)
    ad, bd, md, sd = a.dag(), b.dag(), m.dag(), s.dag()
    h = ((params.delta_ad + params.delta_f) * (ad @ a)
         + params.omega_b * (bd @ b)
         + params.omega_m * (md @ m)
         + params.delta_sigma_d * (sd @ s)
         + params.lambda_ab * ((ad + a) @ (bd + b))
         + params.lambda_am * ((ad + a) @ (md + m))
         + params.lambda_a_sigma * (a @ sd + ad @ s)
         + params.xi * (sd + s))
    return h


def collapse_operators(params: ModelParams, space: SpaceDescriptor) -> list[tuple[str, Operator, float]]:
    """Decay channels (name, operator, rate) of the master equation."""
    return [
        ("photon", mode_annihilator(space, "photon"), params.kappa_a),
        ("phonon", mode_annihilator(space, "phonon"), params.kappa_b),
        ("magnon", mode_annihilator(space, "magnon"), params.kappa_m),
        ("atom", atom_lowering(space), params.gamma),
    ]


# ---------------------------------------------------------------- mean field

@dataclass(frozen=True)
class LabParams:
    """Lab-frame parameters before linearization (any consistent frequency unit)."""

    omega_a: float
    omega_sigma: float
    omega_d: float
    omega_b: float
    omega_m: float
    lambda_ab: float          # bare single-photon couplings lambda'
    lambda_am: float
    lambda_a_sigma: float
    xi_d: float
    xi_p: float
    kappa_a: float
    kappa_b: float
    kappa_m: float
    gamma: float
    delta_f: float = 0.0

    def __post_init__(self):
        if self.xi_d < 0 or self.xi_p < 0:
            raise InvalidArgumentError("drive amplitudes must be non-negative")
        for name in ("kappa_a", "kappa_b", "kappa_m", "gamma"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be non-negative")
        if self.omega_b <= 0:
            raise InvalidArgumentError("omega_b must be positive")


@dataclass(frozen=True)
class MeanFieldSolution:
    alpha: complex
    beta: complex
    mu: complex
    effective: ModelParams
    roots: tuple[float, ...] = ()       # every real non-negative |alpha|^2 of the cubic
    selected: int = 0
    residuals: tuple[float, float, float] = field(default=(0.0, 0.0, 0.0))


def mean_field_residuals(lab: LabParams, alpha: complex, beta: complex, mu: complex) -> tuple[float, float, float]:
    """Absolute residuals of the three classical steady-state equations."""
    shift = lab.lambda_ab * 2 * beta.real + lab.lambda_am * 2 * mu.real
    n = abs(alpha) ** 2
    r1 = (lab.omega_a - lab.omega_d + lab.delta_f) * alpha + shift * alpha + lab.xi_d - 0.5j * lab.kappa_a * alpha
    r2 = lab.omega_b * beta + lab.lambda_ab * n - 0.5j * lab.kappa_b * beta
    r3 = lab.omega_m * mu + lab.lambda_am * n - 0.5j * lab.kappa_m * mu
    return abs(r1), abs(r2), abs(r3)


def mean_field_steady(lab: LabParams, branch: str | int = "lower") -> MeanFieldSolution:
    """
    Classical steady-state amplitudes and the effective linearized parameters.

    Eliminating beta and mu leaves a cubic in n = |alpha|^2,
    ``n [(D0 - 2 g n)^2 + kappa_a^2/4] = xi_d^2``; all real non-negative
    roots are reported and ``branch`` picks one ("lower", "upper" or index).
    """
    d0 = lab.omega_a - lab.omega_d + lab.delta_f
    g = (lab.lambda_ab**2 * lab.omega_b / (lab.omega_b**2 + lab.kappa_b**2 / 4)
         + lab.lambda_am**2 * lab.omega_m / (lab.omega_m**2 + lab.kappa_m**2 / 4))

    def cubic(n):
        return n * ((d0 - 2 * g * n) ** 2 + lab.kappa_a**2 / 4) - lab.xi_d**2

    if lab.xi_d == 0:
        roots = [0.0]
    else:
        coeffs = [4 * g**2, -4 * g * d0, d0**2 + lab.kappa_a**2 / 4, -lab.xi_d**2]
        raw = np.roots(np.trim_zeros(coeffs, "f")) if any(coeffs[:3]) else np.array([])
        scale = max(1.0, abs(d0), lab.kappa_a)
        roots = sorted({float(r.real) for r in raw if abs(r.imag) <= 1e-9 * max(1.0, abs(r)) and r.real >= 0})
        polished = []
        for n in roots:
            # Newton polish on the cubic
            for _ in range(50):
                f = cubic(n)
                df = (d0 - 2 * g * n) ** 2 + lab.kappa_a**2 / 4 - 4 * g * n * (d0 - 2 * g * n)
                if df == 0:
                    break
                step = f / df
                n -= step
                if abs(step) <= 1e-16 * max(1.0, abs(n)):
                    break
            if n >= 0 and abs(cubic(n)) <= 1e-8 * scale**2 * max(1.0, n):
                polished.append(n)
        roots = sorted(polished)
    if not roots:
        raise InfeasibleParametersError("no real non-negative |alpha|^2 solves the mean-field cubic")

    if branch == "lower":
        k = 0
    elif branch == "upper":
        k = len(roots) - 1
    else:
        k = int(branch)
        if not 0 <= k < len(roots):
            raise InvalidArgumentError(f"branch index {k} out of range for {len(roots)} roots")
    n = roots[k]

    beta = -lab.lambda_ab * n / (lab.omega_b - 0.5j * lab.kappa_b)
    mu = -lab.lambda_am * n / (lab.omega_m - 0.5j * lab.kappa_m)
    shift = lab.lambda_ab * 2 * beta.real + lab.lambda_am * 2 * mu.real
    denom = d0 + shift - 0.5j * lab.kappa_a
    if lab.xi_d == 0:
        alpha = 0j
    elif denom == 0:
        raise InfeasibleParametersError("undamped resonant optical mode has no steady state")
    else:
        alpha = -lab.xi_d / denom

    amp = abs(alpha)
    effective = ModelParams(
        delta_ad=lab.omega_a - lab.omega_d + shift,
        delta_sigma_a=lab.omega_sigma - lab.omega_a - shift,
        omega_b=lab.omega_b,
        omega_m=lab.omega_m,
        delta_f=lab.delta_f,
        lambda_ab=lab.lambda_ab * amp,
        lambda_am=lab.lambda_am * amp,
        lambda_a_sigma=lab.lambda_a_sigma,
        xi=lab.lambda_a_sigma * amp + lab.xi_p,
        gamma=lab.gamma,
        kappa_a=lab.kappa_a,
        kappa_b=lab.kappa_b,
        kappa_m=lab.kappa_m,
    )
    return MeanFieldSolution(alpha, beta, mu, effective, tuple(roots), k,
                             mean_field_residuals(lab, alpha, beta, mu))
