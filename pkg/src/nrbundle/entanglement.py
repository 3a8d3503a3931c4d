"""
Multipartite entanglement witness from the quantum Fisher information.

For separable states F_Q[rho, sum_j A_j] <= 4 sum_j Var(A_j). With local
operators A_j = c_j . A_j built from fixed operator families, both sides are
quadratic forms in the coefficient vector c:

    F_Q = c Q c^T,    sum_j Var(c_j . A_j) = c Gamma c^T,

so the best witness is the top eigenpair of M = Q - 4 Gamma.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError
from .hilbert import DensityMatrix, lowering_matrix, partial_trace

PARTITIONS = {
    "ab": ("photon", "phonon"),
    "am": ("photon", "magnon"),
    "abs": ("atom", "photon", "phonon"),
    "ams": ("atom", "photon", "magnon"),
}
# accept the sigma spelling as well
PARTITIONS["abσ"] = PARTITIONS["abs"]
PARTITIONS["amσ"] = PARTITIONS["ams"]

_ORDER = ("atom", "photon", "phonon", "magnon")


@dataclass(frozen=True, eq=False)
class LocalOperatorSet:
    """Operator family of one particle, each embedded in the full (reduced) space."""

    particle: str
    names: tuple[str, ...]
    operators: tuple[np.ndarray, ...] = field(repr=False)

    def __len__(self):
        return len(self.operators)


def atom_family(size: int = 2) -> tuple[tuple[str, ...], list[np.ndarray]]:
    if size != 2:
        raise InvalidArgumentError("atom factor must be two-dimensional")
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[-1, 0], [0, 1]], dtype=complex)   # |g> = level 0
    return ("sx", "sy", "sz"), [sx, sy, sz]


def mode_family(size: int) -> tuple[tuple[str, ...], list[np.ndarray]]:
    """(x, p, x^2, p^2, (xp+px)/2) with x = o + o^+, p = -i(o - o^+)."""
    o = lowering_matrix(size).toarray()
    x = o + o.conj().T
    p = -1j * (o - o.conj().T)
    return ("x", "p", "x2", "p2", "xp"), [x, p, x @ x, p @ p, 0.5 * (x @ p + p @ x)]


def local_operator_sets(dims: Sequence[int], particles: Sequence[str]) -> list[LocalOperatorSet]:
    """Embed the standard family of each factor into the product space of ``dims``."""
    if len(dims) != len(particles):
        raise InvalidArgumentError("dims and particles differ in length")
    sets = []
    for k, (particle, size) in enumerate(zip(particles, dims)):
        names, family = atom_family(size) if particle == "atom" else mode_family(size)
        embedded = []
        for f in family:
            out = np.ones((1, 1), dtype=complex)
            for j, d in enumerate(dims):
                out = np.kron(out, f if j == k else np.eye(d))
            embedded.append(out)
        sets.append(LocalOperatorSet(particle, names, tuple(embedded)))
    return sets


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray     # descending, clamped; zero beyond ``rank``
    eigenvectors: np.ndarray    # columns, full orthonormal basis
    rank: int


def spectral_decompose(rho: np.ndarray | DensityMatrix, rank_tol: float = 1e-10) -> SpectralDecomposition:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    if vals.min() < -1e-8:
        raise InvalidStateError(f"density matrix has eigenvalue {vals.min():.3e} < -1e-8")
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    rank = int(np.sum(vals >= rank_tol))
    vals = np.where(np.arange(vals.size) < rank, np.clip(vals, 0.0, None), 0.0)
    return SpectralDecomposition(vals, vecs, rank)


def _flatten(sets: Sequence[LocalOperatorSet]) -> list[np.ndarray]:
    return [op for s in sets for op in s.operators]


def qfi_matrix(decomp: SpectralDecomposition, sets: Sequence[LocalOperatorSet]) -> np.ndarray:
    """
    Q_ij = 2 sum_{k,k'} (p_k - p_k')^2 / (p_k + p_k') <k|A_i|k'><k'|A_j|k>.

    Pairs with p_k + p_k' < 1e-12 are skipped; the discarded kernel enters
    through the retained-kernel cross terms.
    """
    ops = _flatten(sets)
    v = decomp.eigenvectors
    if any(op.shape != (v.shape[0], v.shape[0]) for op in ops):
        raise InvalidArgumentError("operator dimension does not match the state")
    p = decomp.eigenvalues
    psum = p[:, None] + p[None, :]
    weights = np.zeros_like(psum)
    ok = psum >= 1e-12
    weights[ok] = 2.0 * (p[:, None] - p[None, :])[ok] ** 2 / psum[ok]
    rotated = [v.conj().T @ op @ v for op in ops]
    n = len(ops)
    q = np.empty((n, n))
    for i in range(n):
        wa = weights * rotated[i]
        for j in range(i, n):
            q[i, j] = q[j, i] = np.real(np.sum(wa * rotated[j].T))
    return q


def covariance_matrix(rho: np.ndarray | DensityMatrix, sets: Sequence[LocalOperatorSet]) -> np.ndarray:
    """Block-diagonal symmetrized covariances within each particle's family."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    sizes = [len(s) for s in sets]
    gamma = np.zeros((sum(sizes), sum(sizes)))
    start = 0
    for s in sets:
        means = [np.real(np.trace(m @ op)) for op in s.operators]
        for i, a in enumerate(s.operators):
            for j in range(i, len(s)):
                b = s.operators[j]
                sym = 0.5 * np.real(np.trace(m @ (a @ b + b @ a)))
                gamma[start + i, start + j] = gamma[start + j, start + i] = sym - means[i] * means[j]
        start += len(s)
    return gamma


def optimal_witness(q: np.ndarray, gamma: np.ndarray) -> tuple[np.ndarray, float]:
    """Unit coefficient vector maximizing c (Q - 4 Gamma) c^T, and that maximum."""
    if q.shape != gamma.shape:
        raise InvalidArgumentError("Q and Gamma differ in shape")
    vals, vecs = np.linalg.eigh(0.5 * ((q - 4 * gamma) + (q - 4 * gamma).T))
    c = vecs[:, -1]
    # fix the sign convention so that results are reproducible
    k = int(np.argmax(np.abs(c)))
    if c[k] < 0:
        c = -c
    return c, float(vals[-1])


def _local_operator(s: LocalOperatorSet, coeffs: np.ndarray) -> np.ndarray:
    return sum(ci * op for ci, op in zip(coeffs, s.operators))


def _variance(rho: np.ndarray, a: np.ndarray) -> float:
    mean = np.real(np.trace(rho @ a))
    return float(np.real(np.trace(rho @ a @ a)) - mean**2)


@dataclass
class WitnessReport:
    partition: tuple[str, ...]
    qfi_matrix: np.ndarray
    covariance_matrix: np.ndarray
    coefficients: np.ndarray
    fisher: float
    bounds: dict[str, float]
    witnesses: dict[str, float]

    @property
    def quantities(self) -> dict[str, float]:
        """D_n = max(0, W_n)."""
        return {k.replace("W", "D"): max(0.0, v) for k, v in self.witnesses.items()}

    def to_json(self) -> dict:
        return {
            "partition": list(self.partition),
            "qfi_matrix": self.qfi_matrix.tolist(),
            "covariance_matrix": self.covariance_matrix.tolist(),
            "coefficients": self.coefficients.tolist(),
            "fisher": self.fisher,
            "bounds": self.bounds,
            "witnesses": self.witnesses,
            "quantities": self.quantities,
        }


def witness_from_reduced(rho: np.ndarray, dims: Sequence[int], particles: Sequence[str],
                         rank_tol: float = 1e-10) -> WitnessReport:
    """Witness report for a state already restricted to the particles of interest."""
    sets = local_operator_sets(dims, particles)
    q = qfi_matrix(spectral_decompose(rho, rank_tol), sets)
    gamma = covariance_matrix(rho, sets)
    c, _ = optimal_witness(q, gamma)
    fisher = float(c @ q @ c)

    blocks = []
    start = 0
    for s in sets:
        blocks.append(c[start:start + len(s)])
        start += len(s)
    local = [_local_operator(s, cb) for s, cb in zip(sets, blocks)]
    var = [_variance(rho, a) for a in local]

    bounds = {"B1": 4 * sum(var)}
    witnesses = {"W1": fisher - bounds["B1"]}
    if len(sets) == 2:
        bounds["B2"] = 4 * _variance(rho, local[0] + local[1])
    elif len(sets) == 3:
        candidates = []
        for i, j, k in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
            candidates.append(_variance(rho, local[i] + local[j]) + var[k])
        bounds["B2"] = 4 * max(candidates)
        bounds["B3"] = 4 * _variance(rho, local[0] + local[1] + local[2])
        witnesses["W2"] = fisher - bounds["B2"]
    return WitnessReport(tuple(particles), q, gamma, c, fisher, bounds, witnesses)


def witness_report(rho: DensityMatrix, partition: str, rank_tol: float = 1e-10) -> WitnessReport:
    """Trace out everything outside ``partition`` and evaluate the witness there."""
    try:
        particles = PARTITIONS[partition]
    except KeyError:
        raise InvalidArgumentError(f"unknown partition {partition!r}; expected one of {sorted(PARTITIONS)}") from None
    dims = rho.space.dims
    keep = [_ORDER.index(p) for p in particles]
    reduced = partial_trace(rho.matrix, dims, keep)
    return witness_from_reduced(reduced, [dims[k] for k in keep], particles, rank_tol)
