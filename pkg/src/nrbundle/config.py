"""
Scenario configuration files.

Configs are JSON documents validated with pydantic. Unknown keys are
rejected everywhere, and every error names the offending path.
"""
from __future__ import annotations

import hashlib
import json
from enum import Enum
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .hilbert import SpaceDescriptor
from .model import LabParams, ModelParams, mean_field_steady, side_sign

SCENARIOS = ("spectrum", "closed_dynamics", "open_dynamics", "trajectory",
             "correlation_sweep", "witness_sweep", "resonance_table")

# grids each scenario needs
REQUIRED_GRIDS = {
    "spectrum": ("detuning",),
    "closed_dynamics": ("time",),
    "open_dynamics": ("time",),
    "trajectory": ("time",),
    "correlation_sweep": ("kappa",),
    "witness_sweep": ("kappa",),
    "resonance_table": (),
}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DriveSide(str, Enum):
    left = "left"
    right = "right"


class LinearGrid(_Strict):
    start: float
    stop: float
    num: int = Field(ge=1)

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)


GridSpec = Union[LinearGrid, list[float]]


def grid_values(spec: GridSpec) -> np.ndarray:
    return spec.values() if isinstance(spec, LinearGrid) else np.asarray(spec, dtype=float)


class Grids(_Strict):
    detuning: Optional[GridSpec] = None
    kappa: Optional[GridSpec] = None
    time: Optional[GridSpec] = None
    tau: Optional[GridSpec] = None

    @field_validator("detuning", "kappa", "time", "tau")
    @classmethod
    def _nonempty(cls, v):
        if v is not None and not isinstance(v, LinearGrid) and len(v) == 0:
            raise ValueError("grid must not be empty")
        return v

    @field_validator("kappa")
    @classmethod
    def _kappa_nonnegative(cls, v):
        if v is not None and np.any(grid_values(v) < 0):
            raise ValueError("kappa values must be non-negative")
        return v

    @field_validator("time", "tau")
    @classmethod
    def _increasing(cls, v):
        if v is not None and np.any(np.diff(grid_values(v)) <= 0):
            raise ValueError("grid must be strictly increasing")
        return v


class ModelConfig(_Strict):
    """Effective-model parameters in units of omega_b. ``kappa`` is the common mode decay."""

    delta_ad: float = 0.0
    delta_sigma_a: float
    omega_m: float
    fizeau_shift: float = Field(ge=0)
    lambda_ab: float
    lambda_am: float
    lambda_a_sigma: float
    xi: float = Field(ge=0)
    gamma: float = Field(ge=0)
    kappa: float = Field(ge=0)
    kappa_a: Optional[float] = Field(default=None, ge=0)
    kappa_b: Optional[float] = Field(default=None, ge=0)
    kappa_m: Optional[float] = Field(default=None, ge=0)
    omega_b: float = Field(default=1.0, gt=0)

    def params(self, drive_side: str) -> ModelParams:
        return ModelParams(
            delta_ad=self.delta_ad, delta_sigma_a=self.delta_sigma_a, omega_m=self.omega_m,
            delta_f=side_sign(drive_side) * self.fizeau_shift,
            lambda_ab=self.lambda_ab, lambda_am=self.lambda_am, lambda_a_sigma=self.lambda_a_sigma,
            xi=self.xi, gamma=self.gamma,
            kappa_a=self.kappa if self.kappa_a is None else self.kappa_a,
            kappa_b=self.kappa if self.kappa_b is None else self.kappa_b,
            kappa_m=self.kappa if self.kappa_m is None else self.kappa_m,
            omega_b=self.omega_b,
        )


class LabConfig(_Strict):
    """Lab-frame parameters; the effective model follows from the mean-field solution."""

    omega_a: float
    omega_sigma: float
    omega_d: float
    omega_b: float = Field(gt=0)
    omega_m: float
    lambda_ab: float
    lambda_am: float
    lambda_a_sigma: float
    xi_d: float = Field(ge=0)
    xi_p: float = Field(ge=0)
    kappa_a: float = Field(ge=0)
    kappa_b: float = Field(ge=0)
    kappa_m: float = Field(ge=0)
    gamma: float = Field(ge=0)
    fizeau_shift: float = Field(default=0.0, ge=0)
    branch: Union[Literal["lower", "upper"], int] = "lower"

    def params(self, drive_side: str) -> ModelParams:
        lab = LabParams(**self.model_dump(exclude={"fizeau_shift", "branch"}),
                        delta_f=side_sign(drive_side) * self.fizeau_shift)
        return mean_field_steady(lab, self.branch).effective


class OperatingPoint(_Strict):
    """Pin delta_ad to a bundle resonance instead of the configured value."""

    resonance: Literal["photon_phonon", "photon_magnon"]
    drive_side: DriveSide
    refine: bool = True


class Cutoffs(_Strict):
    photon: int = Field(default=3, ge=1)
    phonon: int = Field(default=2, ge=1)
    magnon: int = Field(default=2, ge=1)

    def space(self) -> SpaceDescriptor:
        return SpaceDescriptor(self.photon, self.phonon, self.magnon)


class SolverConfig(_Strict):
    method: Literal["auto", "direct", "jump_map", "inverse_iteration", "dense"] = "auto"
    tol: float = Field(default=1e-10, gt=0)
    rtol: float = Field(default=1e-8, gt=0)


class ScenarioConfig(_Strict):
    scenario: Literal[SCENARIOS]
    model: Optional[ModelConfig] = None
    lab: Optional[LabConfig] = None
    operating_point: Optional[OperatingPoint] = None
    cutoffs: Cutoffs = Cutoffs()
    drive_sides: list[DriveSide] = Field(default=[DriveSide.left, DriveSide.right], min_length=1)
    grids: Grids = Grids()
    initial_state: str = "000+"
    trajectories: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    solver: SolverConfig = SolverConfig()

    @field_validator("initial_state")
    @classmethod
    def _state_label(cls, v):
        parse_state_label(v)
        return v

    @model_validator(mode="after")
    def _checks(self):
        if (self.model is None) == (self.lab is None):
            raise ValueError("exactly one parameter source is required: 'model' or 'lab'")
        for name in REQUIRED_GRIDS[self.scenario]:
            if getattr(self.grids, name) is None:
                raise ValueError(f"scenario {self.scenario!r} requires grids.{name}")
        return self

    def params(self, drive_side: str) -> ModelParams:
        source = self.model if self.model is not None else self.lab
        return source.params(drive_side)

    def canonical(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def parse_state_label(label: str) -> tuple[str, int, int, int]:
    """
    ``"000+"``-style dressed labels or ``"g000"``-style bare labels.

    Returns (atom, n_a, n_b, n_m) with atom one of "+", "-", "g", "e".
    """
    if len(label) == 4 and label[3] in "+-" and label[:3].isdigit():
        return label[3], int(label[0]), int(label[1]), int(label[2])
    if len(label) == 4 and label[0] in "ge" and label[1:].isdigit():
        return label[0], int(label[1]), int(label[2]), int(label[3])
    raise ValueError(f"state label {label!r} must look like '000+' or 'g000'")


def _format_errors(exc: ValidationError) -> ConfigError:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append((loc, err["msg"]))
    first_path, first_msg = parts[0]
    message = "; ".join([first_msg] + [f"{loc}: {msg}" for loc, msg in parts[1:]])
    return ConfigError(message, first_path)


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a JSON scenario config, raising ConfigError naming the bad path."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", "<root>") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", "<root>")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise _format_errors(exc) from None
