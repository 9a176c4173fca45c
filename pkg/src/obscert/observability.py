"""Frequency-domain observability tests and the time-domain Gramian constants."""

import math
from dataclasses import dataclass

import numpy as np

from .eig import Eigendecomposition
from .model import ObservationMap, SpectralOperator, default_guard

__all__ = [
    "GapReport",
    "SpectralObsReport",
    "HautusReport",
    "GramianReport",
    "UnperturbedVerdict",
    "check_gap",
    "spectral_obs_test",
    "rho_at",
    "hautus_scan",
    "observability_gramian",
    "verdict_unperturbed",
]


def _values_of(op) -> np.ndarray:
    if isinstance(op, SpectralOperator):
        return op.eigenvalues
    if isinstance(op, Eigendecomposition):
        return op.values
    return np.asarray(op, dtype=float)


def _guard_of(op, guard: int | None) -> int:
    if guard is not None:
        return guard
    if isinstance(op, SpectralOperator):
        return op.guard_band
    return default_guard(_values_of(op).size)


@dataclass(frozen=True)
class GapReport:
    """Minimum consecutive eigenvalue gap over the trusted range."""

    gamma_hat: float
    gaps: np.ndarray
    argmin_index: int
    gap_floor: float
    passed: bool
    guard: int
    trusted: int


def check_gap(op, gap_floor: float = 1e-8, guard: int | None = None) -> GapReport:
    """Gap condition check: min over trusted k of mu_{k+1} - mu_k > gap_floor."""
    values = _values_of(op)
    guard = _guard_of(op, guard)
    trusted = values.size - guard
    if trusted < 2:
        raise ValueError(f"need at least 2 trusted indices, have {trusted}")
    gaps = values[1 : trusted + 1] - values[:trusted]
    k = int(np.argmin(gaps))
    gamma_hat = float(gaps[k])
    return GapReport(gamma_hat, gaps, k + 1, gap_floor, gamma_hat > gap_floor, guard, trusted)


@dataclass(frozen=True)
class SpectralObsReport:
    """Per-mode observation energies ||C phi_k||^2 and their trusted minimum."""

    norms_sq: np.ndarray
    delta_hat: float
    argmin_index: int


def spectral_obs_test(observation: ObservationMap, op, guard: int | None = None) -> SpectralObsReport:
    if isinstance(op, SpectralOperator):
        # the observation map is stored in the operator's eigenbasis, where
        # the eigenvectors are the coordinate vectors
        vectors = np.eye(op.dim)
    elif isinstance(op, Eigendecomposition):
        vectors = op.vectors
    else:
        vectors = np.asarray(op, dtype=float)
    if observation.in_dim != vectors.shape[0]:
        raise ValueError(
            f"observation acts on dimension {observation.in_dim}, operator has {vectors.shape[0]}"
        )
    guard = _guard_of(op, guard)
    trusted = vectors.shape[0] - guard
    if trusted < 1:
        raise ValueError("trusted range is empty")
    norms_sq = observation.mode_norms_sq(vectors[:, :trusted])
    k = int(np.argmin(norms_sq))
    return SpectralObsReport(norms_sq, float(norms_sq[k]), k + 1)


def rho_at(a_matrix: np.ndarray, gram: np.ndarray, omega: float) -> float:
    """Exact lambda_min((A - omega I)^2 + C^T C); PSD, floored at zero."""
    a = np.asarray(a_matrix, dtype=float)
    shifted = a - omega * np.eye(a.shape[0])
    h = shifted @ shifted + gram
    return max(float(np.linalg.eigvalsh(0.5 * (h + h.T))[0]), 0.0)


@dataclass(frozen=True)
class HautusReport:
    """Grid scan of the frequency-domain test constant rho(omega)."""

    omega_grid: np.ndarray
    rho_of_omega: np.ndarray
    rho_hat: float
    argmin_omega: float


def hautus_scan(
    a_matrix: np.ndarray,
    observation: ObservationMap,
    resolution: int = 200,
    guard: int | None = None,
) -> HautusReport:
    """Minimize rho(omega) over a grid of frequencies.

    The scan grid is the union of a uniform grid spanning the trusted
    spectral range widened by one gap on each side, all eigenvalues of the
    operator (where the minima of rho sit), and the midpoints between
    consecutive eigenvalues.
    """
    a = np.asarray(a_matrix, dtype=float)
    n = a.shape[0]
    if observation.in_dim != n:
        raise ValueError(f"observation dimension {observation.in_dim} does not match operator {n}")
    values = np.linalg.eigvalsh(0.5 * (a + a.T))
    guard = default_guard(n) if guard is None else guard
    trusted = n - guard
    if trusted < 2:
        raise ValueError("trusted range too small for a Hautus scan")
    gamma = float(np.min(values[1 : trusted + 1] - values[:trusted]))
    span = max(gamma, 1e-3 * max(abs(values[-1]), 1.0))
    lo, hi = values[0] - span, values[trusted - 1] + span
    grid = np.concatenate(
        [np.linspace(lo, hi, resolution), values, 0.5 * (values[:-1] + values[1:])]
    )
    grid = np.unique(grid)
    if grid.size == 0:
        raise ValueError("empty Hautus grid")
    gram = observation.gram()
    rho = np.array([rho_at(a, gram, w) for w in grid])
    k = int(np.argmin(rho))
    return HautusReport(grid, rho, float(rho[k]), float(grid[k]))


@dataclass(frozen=True)
class GramianReport:
    """Observability Gramian over [0, T] and its extreme eigenvalues."""

    horizon: float
    gramian: np.ndarray
    k_t: float
    big_k_t: float


def observability_gramian(
    operator: SpectralOperator, observation: ObservationMap, horizon: float
) -> GramianReport:
    """Closed-form Gramian of z' = iAz, y = Cz in the eigenbasis of A.

    Entry (j, k) is <C phi_j, C phi_k> * int_0^T exp(i (mu_k - mu_j) t) dt;
    the output energy of an initial state z0 is z0* G z0. The oscillatory
    integral is evaluated exactly, no time stepping.
    """
    if horizon <= 0:
        raise ValueError(f"time horizon must be positive, got {horizon}")
    mu = operator.eigenvalues
    diff = mu[None, :] - mu[:, None]
    tiny = np.abs(diff) * horizon < 1e-8
    safe = np.where(tiny, 1.0, diff)
    osc = np.where(tiny, horizon, (np.exp(1j * safe * horizon) - 1.0) / (1j * safe))
    gram = observation.gram() * osc
    gram = 0.5 * (gram + gram.conj().T)
    w = np.linalg.eigvalsh(gram)
    return GramianReport(horizon, gram, float(w[0]), float(w[-1]))


@dataclass(frozen=True)
class UnperturbedVerdict:
    """Spectral-criterion verdict for the unperturbed pair (A, C)."""

    passed: bool
    status: str  # observable | not-observable | inconclusive
    reasons: tuple
    gamma_hat: float
    delta_hat: float


def verdict_unperturbed(
    gap: GapReport, spectral: SpectralObsReport, delta_floor: float = 1e-8
) -> UnperturbedVerdict:
    """Conjunction of the gap condition and the per-mode observation bound.

    When the gap condition fails the spectral criterion is inapplicable, so
    a healthy per-mode bound yields "inconclusive" rather than a negative.
    """
    reasons = []
    if not gap.passed:
        reasons.append("gap")
    delta_ok = spectral.delta_hat > delta_floor
    if not delta_ok:
        reasons.append("delta")
    passed = gap.passed and delta_ok
    if passed:
        status = "observable"
    elif not delta_ok:
        status = "not-observable" if gap.passed else "inconclusive"
    else:
        status = "inconclusive"
    return UnperturbedVerdict(passed, status, tuple(reasons), gap.gamma_hat, spectral.delta_hat)
