"""
Lindblad generator, steady states and time evolution.

Density matrices are vectorized by column stacking, ``vec(rho) =
rho.ravel(order="F")``, so that ``vec(A rho B) = (B^T kron A) vec(rho)``.
The dissipator of a channel (c, rate) is ``rate * (c rho c^+ - {c^+ c, rho}/2)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import (IntegratorError, InvalidArgumentError,
                     NonUniqueSteadyStateError)
from .hilbert import (DensityMatrix, Operator, SpaceDescriptor, StateVector,
                      expectation)
from .model import ModelParams, build_hamiltonian, collapse_operators

log = logging.getLogger(__name__)

_trsyl = sla.get_lapack_funcs("trsyl", dtype=np.complex128)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).ravel(order="F")


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape((n, n), order="F")


@dataclass(frozen=True, eq=False)
class Liouvillian:
    space: SpaceDescriptor
    hamiltonian: Operator
    collapse: tuple[tuple[str, Operator, float], ...]

    @property
    def dimension(self) -> int:
        return self.space.dimension

    @cached_property
    def jump_operators(self) -> list[sp.csr_matrix]:
        """sqrt(rate) * c for every channel with non-zero rate."""
        return [np.sqrt(rate) * op.matrix for _, op, rate in self.collapse if rate > 0]

    @cached_property
    def effective(self) -> np.ndarray:
        """K = -iH - (1/2) sum rate c^+ c, so that L(rho) = K rho + rho K^+ + sum J rho J^+."""
        k = -1j * self.hamiltonian.dense()
        for j in self.jump_operators:
            k -= 0.5 * (j.conj().T @ j).toarray()
        return k

    @cached_property
    def generator(self) -> sp.csc_matrix:
        n = self.dimension
        eye = sp.identity(n, dtype=complex, format="csr")
        h = self.hamiltonian.matrix
        out = -1j * (sp.kron(eye, h) - sp.kron(h.T, eye))
        for j in self.jump_operators:
            jdj = (j.conj().T @ j).tocsr()
            out = out + sp.kron(j.conj(), j) - 0.5 * sp.kron(eye, jdj) - 0.5 * sp.kron(jdj.T, eye)
        return out.tocsc()

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """L(rho) in matrix form."""
        k = self.effective
        out = k @ rho + rho @ k.conj().T
        for j in self.jump_operators:
            out += j @ (j @ rho.conj().T).conj().T
        return out


def build_liouvillian(hamiltonian: Operator, collapse: Sequence) -> Liouvillian:
    """
    Assemble the generator of d rho/dt = -i[H, rho] + sum rate * D[c] rho.

    ``collapse`` holds ``(operator, rate)`` or ``(name, operator, rate)`` entries.
    """
    h = hamiltonian.matrix
    deviation = h - h.conj().T
    if deviation.nnz and abs(deviation).max() > 1e-12:
        raise InvalidArgumentError("Hamiltonian is not Hermitian")
    channels = []
    for k, entry in enumerate(collapse):
        if len(entry) == 2:
            name, (op, rate) = f"channel{k}", entry
        else:
            name, op, rate = entry
        if rate < 0:
            raise InvalidArgumentError(f"negative rate {rate} for channel {name!r}")
        if op.space != hamiltonian.space:
            raise InvalidArgumentError(f"collapse operator {name!r} lives on a different space")
        channels.append((name, op, float(rate)))
    return Liouvillian(hamiltonian.space, hamiltonian, tuple(channels))


def model_liouvillian(params: ModelParams, space: SpaceDescriptor) -> Liouvillian:
    return build_liouvillian(build_hamiltonian(params, space), collapse_operators(params, space))


# -------------------------------------------------------------- steady state

def residual_norm(L: Liouvillian, rho: np.ndarray | DensityMatrix) -> float:
    """Frobenius norm of L(rho)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else rho
    return float(np.linalg.norm(L.apply(m)))


def _finalize(rho: np.ndarray) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def _steady_direct(L: Liouvillian) -> np.ndarray:
    n = L.dimension
    g = L.generator.tocsr()
    trace_row = sp.csr_matrix((np.ones(n, dtype=complex), (np.zeros(n, int), np.arange(n) * (n + 1))), shape=(1, n * n))
    system = sp.vstack([trace_row, g[1:]]).tocsc()
    rhs = np.zeros(n * n, dtype=complex)
    rhs[0] = 1.0
    try:
        lu = spla.splu(system, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise NonUniqueSteadyStateError(f"trace-constrained generator is singular: {exc}") from None
    return unvec(lu.solve(rhs), n)


def _sylvester_solver(k: np.ndarray):
    """Return Y -> X solving K X + X K^+ = Y via one Schur factorization of K."""
    t, u = sla.schur(k, output="complex")
    ud = u.conj().T

    def solve(y):
        c = ud @ y @ u
        x, scale, info = _trsyl(t, t, c, trana="N", tranb="C")
        if info < 0:
            raise IntegratorError(f"trsyl failed with info={info}")
        return u @ (x / scale) @ ud

    return solve, np.diag(t)


def _steady_jump_map(L: Liouvillian, tol: float = 1e-14) -> np.ndarray:
    """
    Fixed point of the jump map rho -> -S^{-1}(sum J rho J^+), S(X) = K X + X K^+.

    A null vector of L satisfies S(rho) = -J(rho), i.e. it is the eigenvalue-1
    eigenvector of the completely positive map above. ARPACK finds it with
    matrix-free products, each costing one Sylvester solve in the Schur basis
    of K; this avoids factorizing the d^2 x d^2 generator altogether.
    """
    n = L.dimension
    jumps = L.jump_operators
    if not jumps:
        raise NonUniqueSteadyStateError("no dissipation: jump map undefined")
    solve, diag = _sylvester_solver(L.effective)
    spectrum = diag[:, None] + diag[None, :].conj()
    if np.abs(spectrum).min() < 1e-13:
        raise NonUniqueSteadyStateError("K has an undamped eigenmode; Sylvester operator is singular")
    dense_jumps = [j.toarray() for j in jumps]

    def jump_map(v):
        r = unvec(v, n)
        acc = np.zeros((n, n), dtype=complex)
        for j in dense_jumps:
            acc += j @ r @ j.conj().T
        return -vec(solve(acc))

    op = spla.LinearOperator((n * n, n * n), matvec=jump_map, dtype=complex)
    # Asking ARPACK for a second eigenvalue can cost ~100x more products when the rest of
    # the spectrum is clustered, so uniqueness is tested instead by converging from two
    # unrelated start vectors: a degenerate fixed space makes them disagree.
    g = np.random.default_rng(0).normal(size=(n, n, 2)) @ np.array([1.0, 1j])
    starts = (np.eye(n, dtype=complex) / n, g @ g.conj().T)
    fixed = []
    for start, t in zip(starts, (tol, max(tol, 1e-10))):
        vals, vecs = spla.eigs(op, k=1, which="LM", tol=t, v0=vec(start), ncv=min(n * n - 1, 40))
        if abs(vals[0] - 1) > 1e-8:
            raise IntegratorError(f"jump map leading eigenvalue {vals[0]} is not 1")
        fixed.append(_finalize(unvec(vecs[:, 0], n)))
    if np.abs(fixed[0] - fixed[1]).max() > 1e-6:
        raise NonUniqueSteadyStateError("jump map fixed point depends on the start vector")
    return fixed[0]


def _null_vector_dense(L: Liouvillian, tol: float = 1e-10) -> np.ndarray:
    n = L.dimension
    g = L.generator.toarray()
    _, s, vh = np.linalg.svd(g)
    scale = max(1.0, s[0])
    small = int(np.sum(s < tol * scale))
    if small >= 2:
        raise NonUniqueSteadyStateError(f"generator has {small} vanishing singular values")
    return unvec(vh[-1].conj(), n)


def _inverse_iteration(L: Liouvillian, iterations: int = 8) -> np.ndarray:
    n = L.dimension
    g = L.generator
    shift = 1e-9 * max(1.0, abs(g).max())
    lu = spla.splu((g - shift * sp.identity(n * n, format="csc")).tocsc(), permc_spec="MMD_AT_PLUS_A")
    v = vec(np.eye(n, dtype=complex) / n)
    for _ in range(iterations):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
    return unvec(v, n)


_METHODS = {
    "direct": _steady_direct,
    "jump_map": _steady_jump_map,
    "inverse_iteration": _inverse_iteration,
    "dense": _null_vector_dense,
}


def steady_state(L: Liouvillian, method: str = "auto", tol: float = 1e-10) -> DensityMatrix:
    """
    Unique stationary state of ``L``.

    ``method="auto"`` uses the sparse LU of the trace-constrained generator
    for small spaces (d <= 48) and the jump-map Krylov solver above that,
    falling back to inverse iteration and finally a dense SVD (d <= 64).
    LU-based fallbacks are skipped above d = 100 where fill-in makes them
    impractical. A degenerate null space raises NonUniqueSteadyStateError.
    """
    n = L.dimension
    if not L.jump_operators and n > 1:
        # every projector onto an eigenstate of H is stationary
        raise NonUniqueSteadyStateError("no dissipation: every eigenprojector of H is stationary")
    if method == "auto":
        if n <= 48:
            chain = ["direct", "jump_map", "inverse_iteration", "dense"]
        else:
            chain = ["jump_map"] + (["direct", "inverse_iteration"] if n <= 100 else []) + (["dense"] if n <= 64 else [])
    elif method in _METHODS:
        chain = [method]
    else:
        raise InvalidArgumentError(f"unknown steady-state method {method!r}")

    errors = []
    for name in chain:
        try:
            rho = _finalize(_METHODS[name](L))
        except NonUniqueSteadyStateError:
            raise
        except (IntegratorError, RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
            errors.append(f"{name}: {exc}")
            continue
        res = residual_norm(L, rho)
        lowest = np.linalg.eigvalsh(rho).min()
        if lowest < -1e-8:
            errors.append(f"{name}: not positive (eigenvalue {lowest:.2e})")
            continue
        if res < tol:
            return DensityMatrix(L.space, rho)
        errors.append(f"{name}: residual {res:.2e}")
        log.debug("steady state via %s rejected (residual %.2e)", name, res)
    raise IntegratorError("steady state not found: " + "; ".join(errors))


# ------------------------------------------------------------------ dynamics

@dataclass
class EvolutionRecord:
    times: np.ndarray
    states: list
    observables: dict[str, np.ndarray] = field(default_factory=dict)


def _observables(states, observables: Mapping[str, Operator] | None) -> dict[str, np.ndarray]:
    if not observables:
        return {}
    return {name: np.array([expectation(s, op).real for s in states]) for name, op in observables.items()}


def evolve_closed(psi0: StateVector, hamiltonian: Operator, times: Sequence[float],
                  observables: Mapping[str, Operator] | None = None) -> EvolutionRecord:
    """|psi(t)> = exp(-iHt)|psi0>, evaluated exactly in the eigenbasis of H."""
    if abs(psi0.norm() - 1) > 1e-10:
        raise InvalidArgumentError("initial state must be normalized")
    times = np.asarray(times, dtype=float)
    energies, vectors = np.linalg.eigh(hamiltonian.dense())
    coeffs = vectors.conj().T @ psi0.amplitudes
    phases = np.exp(-1j * np.outer(times, energies))
    amps = (phases * coeffs) @ vectors.T
    states = [StateVector(psi0.space, a) for a in amps]
    return EvolutionRecord(times, states, _observables(states, observables))


def propagate(L: Liouvillian, x0: np.ndarray, times: Sequence[float], rtol: float = 1e-8,
              atol: float = 1e-12) -> list[np.ndarray]:
    """exp(L (t - t0)) x0 on ``times`` for any operator x0 (not necessarily a state)."""
    n = L.dimension
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise InvalidArgumentError("times must be non-decreasing")
    k = L.effective
    kh = k.conj().T.copy()
    jumps = L.jump_operators
    jumps_h = [j.conj().T.tocsr() for j in jumps]

    def rhs(_t, y):
        r = y.reshape(n, n)
        out = k @ r + r @ kh
        for j, jh in zip(jumps, jumps_h):
            out += j @ (jh.T @ r.T).T
        return out.ravel()

    if times[-1] == times[0]:
        return [np.array(x0, dtype=complex) for _ in times]
    sol = solve_ivp(rhs, (times[0], times[-1]), np.asarray(x0, dtype=complex).ravel(), method="DOP853",
                    t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegratorError(sol.message)
    return [sol.y[:, i].reshape(n, n) for i in range(len(times))]


def evolve_open(rho0: DensityMatrix, L: Liouvillian, times: Sequence[float],
                observables: Mapping[str, Operator] | None = None, rtol: float = 1e-8) -> EvolutionRecord:
    """Integrate the master equation; samples are re-symmetrized."""
    rho0.check()
    mats = propagate(L, rho0.matrix, times, rtol=rtol)
    states = [DensityMatrix(L.space, 0.5 * (m + m.conj().T)) for m in mats]
    return EvolutionRecord(np.asarray(times, dtype=float), states, _observables(states, observables))


def trace_distance(rho: np.ndarray | DensityMatrix, sigma: np.ndarray | DensityMatrix) -> float:
    a = rho.matrix if isinstance(rho, DensityMatrix) else rho
    b = sigma.matrix if isinstance(sigma, DensityMatrix) else sigma
    diff = a - b
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())
