"""Dense symmetric eigendecomposition, shifted resolvent solves, min-max checks."""

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .model import SpectralOperator

__all__ = [
    "ConvergenceError",
    "ShiftError",
    "Eigendecomposition",
    "CompressionResult",
    "MinmaxReport",
    "eig_sym",
    "resolvent_apply",
    "resolvent_matrix",
    "compress_and_maximize",
    "minmax_upper_bound_check",
]

SYMMETRY_RTOL = 1e-10
CLUSTER_TOL = 1e-8
SHIFT_RTOL = 1e-8


class ConvergenceError(RuntimeError):
    """The iterative eigensolver failed on numerically pathological input."""


class ShiftError(ValueError):
    """Resolvent shift too close to the spectrum."""


def _symmetrize_checked(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = np.linalg.norm(m)
    if np.linalg.norm(m - m.T) > SYMMETRY_RTOL * max(scale, 1.0):
        raise ValueError(f"matrix is not symmetric to {SYMMETRY_RTOL:g} relative")
    return 0.5 * (m + m.T)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # deterministic phase: first significant component of each column positive
    absmax = np.abs(vectors).max(axis=0)
    significant = np.abs(vectors) > 1e-6 * absmax[None, :]
    first = significant.argmax(axis=0)
    signs = np.sign(vectors[first, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs[None, :]


@dataclass(frozen=True)
class Eigendecomposition:
    """Ordered eigenpairs with a residual bound and cluster markers.

    ``degenerate[k]`` is True when eigenvalue k sits in a cluster tighter
    than 1e-8*(1+|value|); per-index downstream checks skip such indices.
    """

    values: np.ndarray
    vectors: np.ndarray
    residual_norm: float
    degenerate: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.size


def eig_sym(matrix: np.ndarray) -> Eigendecomposition:
    """Full symmetric eigendecomposition with a deterministic sign convention."""
    m = _symmetrize_checked(matrix)
    try:
        values, vectors = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"symmetric eigensolver did not converge: {exc}") from exc
    vectors = _fix_signs(vectors)
    residual = float(np.linalg.norm(m @ vectors - vectors * values[None, :], axis=0).max())
    gaps = np.diff(values)
    close = gaps < CLUSTER_TOL * (1.0 + np.abs(values[:-1]))
    degenerate = np.zeros(values.size, dtype=bool)
    degenerate[:-1] |= close
    degenerate[1:] |= close
    for arr in (values, vectors, degenerate):
        arr.setflags(write=False)
    return Eigendecomposition(values, vectors, residual, degenerate)


def _spectrum_for_shift_check(matrix: np.ndarray, eigenvalues) -> np.ndarray:
    if eigenvalues is not None:
        return np.asarray(eigenvalues, dtype=float)
    return np.linalg.eigvalsh(0.5 * (matrix + matrix.T))


def resolvent_apply(
    matrix: np.ndarray,
    shift: complex,
    rhs: np.ndarray,
    eigenvalues: np.ndarray | None = None,
) -> np.ndarray:
    """Solve (shift*I - S) x = rhs for a symmetric S and a complex shift.

    Pass precomputed ``eigenvalues`` to skip the spectrum distance check's
    internal eigensolve (contour quadrature calls this per node).
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    spectrum = _spectrum_for_shift_check(m, eigenvalues)
    scale = float(np.abs(spectrum).max()) if spectrum.size else 0.0
    distance = float(np.abs(shift - spectrum).min())
    if distance < SHIFT_RTOL * scale:
        raise ShiftError(
            f"shift {shift} is {distance:.3e} from the spectrum (need >= {SHIFT_RTOL * scale:.3e})"
        )
    n = m.shape[0]
    return np.linalg.solve(shift * np.eye(n) - m, np.asarray(rhs, dtype=complex))


def resolvent_matrix(
    matrix: np.ndarray,
    shift: complex,
    eigenvalues: np.ndarray | None = None,
) -> np.ndarray:
    """Full resolvent (shift*I - S)^(-1), same shift guard as resolvent_apply."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    return resolvent_apply(m, shift, np.eye(m.shape[0]), eigenvalues=eigenvalues)


@dataclass(frozen=True)
class CompressionResult:
    """Top Rayleigh-quotient maximizer of an operator compressed to a subspace."""

    subspace_dim: int
    top_value: float
    top_vector: np.ndarray


def compress_and_maximize(op: np.ndarray, subspace: np.ndarray) -> CompressionResult:
    """Top eigenpair of Q^T op Q, lifted back through the orthonormal columns Q."""
    q = np.asarray(subspace, dtype=float)
    if q.ndim == 1:
        q = q[:, None]
    n = q.shape[1]
    if np.abs(q.T @ q - np.eye(n)).max() > 1e-10:
        raise ValueError("subspace columns are not orthonormal (rank deficient?)")
    compression = q.T @ np.asarray(op, dtype=float) @ q
    dec = eig_sym(compression)
    top = q @ dec.vectors[:, -1]
    top = top / np.linalg.norm(top)
    return CompressionResult(n, float(dec.values[-1]), _fix_signs(top[:, None])[:, 0])


@dataclass(frozen=True)
class MinmaxReport:
    trials: int
    seed: int
    worst_margin: float
    worst_rel_margin: float
    worst_index: int
    passed: bool


def minmax_upper_bound_check(operator: "SpectralOperator", trials: int, seed: int) -> MinmaxReport:
    """Sample random subspaces and check max Rayleigh quotient >= n-th eigenvalue.

    For every trusted n and every sampled n-dimensional subspace V, the
    variational characterization guarantees max_{v in V} <Av,v>/<v,v> >= mu_n;
    the report records the worst observed margin.
    """
    rng = np.random.default_rng(seed)
    a_mat = operator.a_matrix()
    mu = operator.eigenvalues
    worst = np.inf
    worst_rel = np.inf
    worst_index = 0
    passed = True
    for n in range(1, operator.trusted + 1):
        for _ in range(trials):
            q, _ = np.linalg.qr(rng.standard_normal((operator.dim, n)))
            top = float(np.linalg.eigvalsh(q.T @ a_mat @ q)[-1])
            margin = top - mu[n - 1]
            rel = margin / max(abs(mu[n - 1]), 1.0)
            if rel < worst_rel:
                worst, worst_rel, worst_index = margin, rel, n
            if top < mu[n - 1] - 1e-9 * abs(mu[n - 1]):
                passed = False
    return MinmaxReport(trials, seed, float(worst), float(worst_rel), worst_index, passed)
