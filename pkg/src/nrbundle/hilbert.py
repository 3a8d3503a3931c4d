"""
Truncated tensor-product Hilbert space of the atom-resonator system.

Subsystem order is fixed as (atom, photon, phonon, magnon). The atom is
outermost and the magnon innermost, so the flat basis index of the label
``(level, n_a, n_b, n_m)`` is::

    index = ((level * Na + n_a) * Nb + n_b) * Nm + n_m

with ``Na = photon_cutoff + 1`` etc. and ``level`` 0 for |g>, 1 for |e>.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgumentError, InvalidStateError

GROUND, EXCITED = 0, 1
MODES = ("photon", "phonon", "magnon")
SUBSYSTEMS = ("atom",) + MODES


@dataclass(frozen=True)
class SpaceDescriptor:
    photon_cutoff: int
    phonon_cutoff: int
    magnon_cutoff: int

    def __post_init__(self):
        for name in ("photon_cutoff", "phonon_cutoff", "magnon_cutoff"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidArgumentError(f"{name} must be an integer >= 1, got {value!r}")

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (2, self.photon_cutoff + 1, self.phonon_cutoff + 1, self.magnon_cutoff + 1)

    @property
    def dimension(self) -> int:
        return int(np.prod(self.dims))

    def cutoff(self, mode: str) -> int:
        return self.dims[_subsystem_position(mode)] - 1

    def index(self, level: int, n_a: int, n_b: int, n_m: int) -> int:
        labels = (level, n_a, n_b, n_m)
        for value, size in zip(labels, self.dims):
            if not 0 <= value < size:
                raise InvalidArgumentError(f"label {labels} outside the truncated space {self.dims}")
        return int(np.ravel_multi_index(labels, self.dims))

    def labels(self, index: int) -> tuple[int, int, int, int]:
        if not 0 <= index < self.dimension:
            raise InvalidArgumentError(f"basis index {index} outside [0, {self.dimension})")
        return tuple(int(i) for i in np.unravel_index(index, self.dims))

    def enlarged(self, step: int = 1) -> "SpaceDescriptor":
        return SpaceDescriptor(self.photon_cutoff + step, self.phonon_cutoff + step, self.magnon_cutoff + step)


def build_space(photon_cutoff: int, phonon_cutoff: int, magnon_cutoff: int) -> SpaceDescriptor:
    return SpaceDescriptor(photon_cutoff, phonon_cutoff, magnon_cutoff)


def _subsystem_position(which: str) -> int:
    try:
        return SUBSYSTEMS.index(which)
    except ValueError:
        raise InvalidArgumentError(f"unknown subsystem {which!r}; expected one of {SUBSYSTEMS}") from None


@dataclass(frozen=True, eq=False)
class Operator:
    """A complex matrix acting on ``space``. Storage is CSR; semantics do not depend on it."""

    space: SpaceDescriptor
    matrix: sp.csr_matrix = field(repr=False)

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=complex)
        d = self.space.dimension
        if m.shape != (d, d):
            raise InvalidArgumentError(f"operator shape {m.shape} does not match space dimension {d}")
        object.__setattr__(self, "matrix", m)

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T.tocsr())

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def _check(self, other: "Operator"):
        if other.space != self.space:
            raise InvalidArgumentError("operators act on different spaces")

    def __add__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix + other.matrix)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix - other.matrix)
        return NotImplemented

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return Operator(self.space, self.matrix * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, (self.matrix @ other.matrix).tocsr())
        return NotImplemented

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.sqrt(np.sum(np.abs(self.matrix.data) ** 2)))


def identity(space: SpaceDescriptor) -> Operator:
    return Operator(space, sp.identity(space.dimension, dtype=complex, format="csr"))


def _embed(space: SpaceDescriptor, position: int, factor: sp.spmatrix) -> Operator:
    out = None
    for k, size in enumerate(space.dims):
        piece = factor if k == position else sp.identity(size, dtype=complex, format="csr")
        out = piece if out is None else sp.kron(out, piece, format="csr")
    return Operator(space, out)


def lowering_matrix(size: int) -> sp.csr_matrix:
    """Truncated bosonic annihilator on ``size`` Fock levels: <n-1|o|n> = sqrt(n)."""
    return sp.diags(np.sqrt(np.arange(1, size, dtype=float)), 1, shape=(size, size), format="csr", dtype=complex)


def mode_annihilator(space: SpaceDescriptor, which: str) -> Operator:
    if which not in MODES:
        raise InvalidArgumentError(f"unknown mode {which!r}; expected one of {MODES}")
    position = _subsystem_position(which)
    return _embed(space, position, lowering_matrix(space.dims[position]))


def atom_lowering(space: SpaceDescriptor) -> Operator:
    """sigma = |g><e| with |g> = level 0."""
    sigma = sp.csr_matrix(([1.0 + 0j], ([GROUND], [EXCITED])), shape=(2, 2))
    return _embed(space, 0, sigma)


def number_operator(space: SpaceDescriptor, which: str) -> Operator:
    if which == "atom":
        s = atom_lowering(space)
    else:
        s = mode_annihilator(space, which)
    return s.dag() @ s


@dataclass(frozen=True, eq=False)
class StateVector:
    space: SpaceDescriptor
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        psi = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if psi.size != self.space.dimension:
            raise InvalidArgumentError(f"state length {psi.size} does not match space dimension {self.space.dimension}")
        psi.setflags(write=False)
        object.__setattr__(self, "amplitudes", psi)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0:
            raise InvalidStateError("cannot normalize the zero vector")
        return StateVector(self.space, self.amplitudes / n)

    def density(self) -> "DensityMatrix":
        psi = self.amplitudes
        return DensityMatrix(self.space, np.outer(psi, psi.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    space: SpaceDescriptor
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = np.array(self.matrix, dtype=complex)
        d = self.space.dimension
        if rho.shape != (d, d):
            raise InvalidArgumentError(f"density matrix shape {rho.shape} does not match space dimension {d}")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def check(self, tol: float = 1e-10, positivity_tol: float = 1e-8) -> None:
        """Raise InvalidStateError unless Hermitian, unit trace and positive within tolerance."""
        rho = self.matrix
        herm = np.abs(rho - rho.conj().T).max()
        if herm > tol:
            raise InvalidStateError(f"density matrix not Hermitian (deviation {herm:.3e})")
        tr = np.trace(rho)
        if abs(tr - 1) > tol:
            raise InvalidStateError(f"density matrix trace {tr} differs from 1")
        if self.eigenvalues.min() < -positivity_tol:
            raise InvalidStateError(f"density matrix has negative eigenvalue {self.eigenvalues.min():.3e}")


State = Union[StateVector, DensityMatrix]


def basis_state(space: SpaceDescriptor, level: int = GROUND, n_a: int = 0, n_b: int = 0, n_m: int = 0) -> StateVector:
    psi = np.zeros(space.dimension, dtype=complex)
    psi[space.index(level, n_a, n_b, n_m)] = 1.0
    return StateVector(space, psi)


def expectation(state: State, op: Operator) -> complex:
    """Tr(rho op) for a DensityMatrix or <psi|op|psi> for a StateVector."""
    if state.space != op.space:
        raise InvalidArgumentError("state and operator live on different spaces")
    if isinstance(state, StateVector):
        psi = state.amplitudes
        return complex(np.vdot(psi, op.matrix @ psi))
    # Tr(rho A) = sum_ij rho_ji A_ij, evaluated on A's sparsity pattern only
    a = op.matrix.tocoo()
    return complex(np.sum(a.data * state.matrix[a.col, a.row]))


def partial_trace(rho: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix on the factors ``keep`` (kept in ascending order)."""
    dims = list(dims)
    keep = sorted(keep)
    n = len(dims)
    t = np.asarray(rho).reshape(dims + dims)
    traced = [k for k in range(n) if k not in keep]
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for k in traced:
        col[k] = row[k]
    out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d = int(np.prod([dims[k] for k in keep]))
    return reduced.reshape(d, d)
